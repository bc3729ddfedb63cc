import numpy as np
import pytest

from malsieve.axml import ManifestFeatures
from malsieve.dex import DexFeatures
from malsieve.errors import DimensionMismatch, EmptyCorpus, FormatError
from malsieve.records import FeatureRecord
from malsieve.vectorize import (
    Dataset,
    FeatureVector,
    build_vocabulary,
    load_dataset,
    load_vocabulary,
    save_dataset,
    save_vocabulary,
    vectorize,
    vectorize_all,
)


def record(perms=(), actions=(), apis=(), label=1, app_id="app"):
    return FeatureRecord(
        app_id=app_id,
        label=label,
        manifest=ManifestFeatures(tuple(perms), tuple(actions)),
        dex=DexFeatures(tuple(apis)),
    )


def test_doc_freq_threshold_boundary():
    records = [record(perms=["P"]), record(perms=["P"]), record(perms=["Q"])]
    vocab = build_vocabulary(records, min_doc_freq=2, max_api_features=10)
    assert vocab.names == ("perm:P",)
    assert vocab.doc_freq == (2,)


def test_block_concatenation_order():
    records = [record(perms=["P"], actions=["A"], apis=["Api"])]
    vocab = build_vocabulary(records, min_doc_freq=1, max_api_features=10)
    assert vocab.dimension == 3
    assert vocab.names == ("perm:P", "action:A", "api:Api")
    assert (vocab.perm_count, vocab.action_count, vocab.api_count) == (1, 1, 1)
    assert vocab.block_offsets() == (0, 1, 2)


def test_api_truncation_by_frequency_then_name():
    # doc freqs: e=5, d=4, b=3, c=3, a=1 -> keep e, d and the
    # lexicographically smaller of the two freq-3 names (b)
    apis = {"a": 1, "b": 3, "c": 3, "d": 4, "e": 5}
    records = []
    for name, freq in apis.items():
        for i in range(freq):
            records.append(record(apis=[name], app_id=f"{name}{i}"))
    vocab = build_vocabulary(records, min_doc_freq=1, max_api_features=3)
    assert vocab.names == ("api:b", "api:d", "api:e")


def test_min_doc_freq_applies_to_api_block_too():
    records = [record(apis=["x"]), record(apis=["y"]), record(apis=["y"])]
    vocab = build_vocabulary(records, min_doc_freq=2, max_api_features=10)
    assert vocab.names == ("api:y",)


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build_vocabulary([], min_doc_freq=1, max_api_features=10)


def test_nothing_survives_pruning():
    with pytest.raises(EmptyCorpus):
        build_vocabulary([record(perms=["solo"])], min_doc_freq=2, max_api_features=10)


def fixture_vocab():
    records = [
        record(perms=["P1", "P2"], actions=["A1"], apis=["M1", "M2"], app_id="r1"),
        record(perms=["P1", "P2"], actions=["A1"], apis=["M1", "M2"], app_id="r2"),
    ]
    return build_vocabulary(records, min_doc_freq=1, max_api_features=10)


def test_vectorize_all_known_features():
    vocab = fixture_vocab()
    v = vectorize(record(perms=["P1", "P2"], actions=["A1"], apis=["M1", "M2"]), vocab)
    assert v.indices == tuple(range(vocab.dimension))


def test_vectorize_no_known_features():
    vocab = fixture_vocab()
    v = vectorize(record(perms=["other"], label=-1), vocab)
    assert v.indices == ()
    assert v.dimension == vocab.dimension
    assert v.label == -1


def test_vectorize_unknown_api_ignored():
    vocab = fixture_vocab()
    v = vectorize(record(perms=["P2"], apis=["unseen"]), vocab)
    perm_offset, _, _ = vocab.block_offsets()
    assert v.indices == (perm_offset + vocab.names.index("perm:P2"),)
    assert len(v.indices) == 1


def test_block_offsets_by_brute_force_recount():
    rng = np.random.default_rng(7)
    records = []
    for i in range(30):
        perms = [f"P{j}" for j in rng.integers(0, 8, size=3)]
        actions = [f"A{j}" for j in rng.integers(0, 5, size=2)]
        apis = [f"M{j}" for j in rng.integers(0, 12, size=4)]
        records.append(record(perms, actions, apis, app_id=f"r{i}"))
    vocab = build_vocabulary(records, min_doc_freq=1, max_api_features=8)
    # every column index must equal block offset + within-block rank
    perm_off, action_off, api_off = vocab.block_offsets()
    perm_names = sorted(n for n in vocab.names if n.startswith("perm:"))
    action_names = sorted(n for n in vocab.names if n.startswith("action:"))
    api_names = sorted(n for n in vocab.names if n.startswith("api:"))
    for name, idx in vocab.index.items():
        if name.startswith("perm:"):
            assert idx == perm_off + perm_names.index(name)
        elif name.startswith("action:"):
            assert idx == action_off + action_names.index(name)
        else:
            assert idx == api_off + api_names.index(name)
    # and no surviving feature sits below the frequency threshold
    assert all(df >= 1 for df in vocab.doc_freq)


def test_sub_threshold_features_never_included():
    rng = np.random.default_rng(13)
    records = []
    for i in range(40):
        perms = [f"P{j}" for j in rng.integers(0, 20, size=2)]
        records.append(record(perms=perms, app_id=f"r{i}"))
    freq_by_name = {}
    for r in records:
        for name in set(r.manifest.permissions):
            freq_by_name[name] = freq_by_name.get(name, 0) + 1
    vocab = build_vocabulary(records, min_doc_freq=3, max_api_features=10)
    for name in vocab.names:
        assert freq_by_name[name.removeprefix("perm:")] >= 3


def test_vocabulary_file_round_trip(tmp_path):
    vocab = fixture_vocab()
    path = tmp_path / "vocab.tsv"
    save_vocabulary(vocab, path)
    loaded = load_vocabulary(path)
    assert loaded.names == vocab.names
    assert loaded.doc_freq == vocab.doc_freq
    assert loaded.block_offsets() == vocab.block_offsets()


def test_vocabulary_file_rejects_gap(tmp_path):
    path = tmp_path / "vocab.tsv"
    path.write_text("0\tperm:a\t3\n2\tperm:b\t2\n")
    with pytest.raises(FormatError):
        load_vocabulary(path)


def test_vocabulary_file_rejects_block_disorder(tmp_path):
    path = tmp_path / "vocab.tsv"
    path.write_text("0\tapi:m\t3\n1\tperm:p\t2\n")
    with pytest.raises(FormatError):
        load_vocabulary(path)


def random_dataset(rng, n=20, dim=15):
    vectors = []
    for _ in range(n):
        k = int(rng.integers(0, dim))
        idx = tuple(sorted(rng.choice(dim, size=k, replace=False).tolist()))
        vectors.append(FeatureVector(dim, idx, int(rng.choice([1, -1]))))
    return Dataset(vectors, dimension=dim)


def test_dataset_round_trip_identity(tmp_path):
    rng = np.random.default_rng(3)
    for trial in range(10):
        data = random_dataset(rng)
        path = tmp_path / f"d{trial}.svm"
        save_dataset(data, path)
        loaded = load_dataset(path)
        assert loaded.dimension == data.dimension
        assert loaded.vectors == data.vectors


def test_dataset_header_and_layout(tmp_path):
    data = Dataset([FeatureVector(4, (0, 3), 1), FeatureVector(4, (), -1)])
    path = tmp_path / "d.svm"
    save_dataset(data, path)
    assert path.read_text() == "dim=4 n=2\n+1 0 3\n-1\n"


def test_hand_written_dataset_file(tmp_path):
    path = tmp_path / "d.svm"
    path.write_text("dim=5 n=2\n+1 0 2 4\n-1 1\n")
    data = load_dataset(path)
    assert len(data) == 2
    assert data.vectors[0] == FeatureVector(5, (0, 2, 4), 1)
    assert data.vectors[1] == FeatureVector(5, (1,), -1)


def test_dataset_index_at_dimension_rejected(tmp_path):
    path = tmp_path / "d.svm"
    path.write_text("dim=5 n=1\n+1 5\n")
    with pytest.raises(FormatError) as exc_info:
        load_dataset(path)
    assert exc_info.value.line == 2


def test_dataset_header_count_mismatch(tmp_path):
    path = tmp_path / "d.svm"
    path.write_text("dim=5 n=3\n+1 1\n")
    with pytest.raises(DimensionMismatch):
        load_dataset(path)


def test_dataset_non_increasing_indices_rejected(tmp_path):
    path = tmp_path / "d.svm"
    path.write_text("dim=5 n=1\n+1 3 3\n")
    with pytest.raises(FormatError):
        load_dataset(path)


def test_vectorize_all_stream():
    vocab = fixture_vocab()
    data = vectorize_all(
        [record(perms=["P1"], label=1), record(perms=["P2"], label=-1)], vocab
    )
    assert len(data) == 2
    assert data.labels() == (1, -1)


def test_dense_conversion():
    data = Dataset([FeatureVector(3, (1,), 1), FeatureVector(3, (0, 2), -1)])
    expected = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    assert np.array_equal(data.to_dense(), expected)
    assert np.array_equal(data.label_array(), np.array([1, -1]))
