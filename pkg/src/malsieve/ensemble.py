"""Bootstrap pool construction and majority voting.

A pool holds N learners, each trained on its own bootstrap replicate
(M draws with replacement from the M training samples). A binary weight
vector picks the sub-ensemble that actually votes: the prediction is the
sign of the sum of the selected learners' +1/-1 outputs, with a tied sum
counting as malicious. Deselected learners cannot influence the outcome.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    AllZeroWeights,
    DimensionMismatch,
    EmptyDataset,
    FormatError,
)
from .learners import LearnerSpec, TrainedLearner, load_model, save_model, train
from .rng import derive_seed, make_rng
from .vectorize import Dataset, FeatureVector


@dataclass(frozen=True)
class WeightVector:
    """0/1 selection mask over a pool; doubles as the GA chromosome."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if not self.bits:
            raise ValueError("weight vector must have at least one position")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def selected_count(self) -> int:
        return sum(self.bits)

    def selected_indices(self) -> list[int]:
        return [i for i, b in enumerate(self.bits) if b]

    def to_string(self) -> str:
        return "".join(map(str, self.bits))

    @classmethod
    def from_string(cls, text: str) -> "WeightVector":
        if not text or any(c not in "01" for c in text):
            raise ValueError("weight string must be nonempty over {0,1}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def ones(cls, n: int) -> "WeightVector":
        return cls((1,) * n)


@dataclass(frozen=True)
class EnsemblePool:
    learners: tuple[TrainedLearner, ...]
    bootstrap_seeds: tuple[int, ...]
    master_seed: int = 0

    def __post_init__(self):
        if not self.learners:
            raise ValueError("pool must hold at least one learner")
        if len(self.bootstrap_seeds) != len(self.learners):
            raise ValueError("one bootstrap seed per learner required")
        dims = {l.dim for l in self.learners}
        if len(dims) != 1:
            raise DimensionMismatch(f"learners disagree on dimension: {sorted(dims)}")

    @property
    def size(self) -> int:
        return len(self.learners)

    @property
    def dim(self) -> int:
        return self.learners[0].dim


@dataclass(frozen=True)
class SelectiveEnsemble:
    """A pool plus the weight vector the optimizer settled on."""

    pool: EnsemblePool
    omega: WeightVector

    def __post_init__(self):
        if len(self.omega) != self.pool.size:
            raise DimensionMismatch("weight vector length != pool size")
        if self.omega.selected_count < 1:
            raise AllZeroWeights("ensemble must select at least one learner")

    @property
    def selected_count(self) -> int:
        return self.omega.selected_count

    def predict(self, x: FeatureVector) -> int:
        return vote(self.pool, self.omega, x)


def bootstrap_sample(data: Dataset, seed: int) -> Dataset:
    """M uniform draws with replacement; deterministic per seed."""
    if len(data) == 0:
        raise EmptyDataset("cannot bootstrap an empty dataset")
    rng = make_rng(seed)
    idx = rng.integers(0, len(data), size=len(data))
    return data.subset(idx.tolist())


def train_pool(
    data: Dataset, n: int, spec: LearnerSpec, master_seed: int
) -> EnsemblePool:
    """Train n learners on independent bootstrap replicates.

    Seeds for replicate i and for its learner's own randomness are both
    derived from (master_seed, i), so the pool is a pure function of its
    arguments and pool order is stable.
    """
    if n < 1:
        raise ValueError("pool size must be >= 1")
    learners: list[TrainedLearner] = []
    seeds: list[int] = []
    for i in range(n):
        boot_seed = derive_seed(master_seed, "bootstrap", i)
        learner_spec = replace(
            spec, rng_seed=derive_seed(master_seed, "learner", i, spec.rng_seed)
        )
        replicate = bootstrap_sample(data, boot_seed)
        try:
            learners.append(train(learner_spec, replicate))
        except Exception as exc:
            raise type(exc)(f"learner {i}: {exc}") from exc
        seeds.append(boot_seed)
    return EnsemblePool(
        learners=tuple(learners), bootstrap_seeds=tuple(seeds), master_seed=master_seed
    )


def _check_omega(pool_size: int, omega: WeightVector) -> None:
    if len(omega) != pool_size:
        raise DimensionMismatch(
            f"weight vector length {len(omega)} != pool size {pool_size}"
        )
    if omega.selected_count < 1:
        raise AllZeroWeights("no learners selected")


def vote(pool: EnsemblePool, omega: WeightVector, x: FeatureVector) -> int:
    """Sign of the selected learners' summed +1/-1 predictions; a tie
    counts as +1."""
    _check_omega(pool.size, omega)
    total = 0
    for i in omega.selected_indices():
        learner = pool.learners[i]
        total += 1 if learner.margin(x) >= 0.0 else -1
    return 1 if total >= 0 else -1


def majority_vote_matrix(matrix: np.ndarray, omega: WeightVector) -> np.ndarray:
    """Row-wise vote over a precomputed (N learners x M samples) +-1
    prediction matrix. Shared by the optimizer's fitness evaluation."""
    _check_omega(matrix.shape[0], omega)
    w = np.array(omega.bits, dtype=np.int64)
    sums = w @ matrix.astype(np.int64)
    return np.where(sums >= 0, 1, -1).astype(np.int8)


def ensemble_accuracy(pool: EnsemblePool, omega: WeightVector, data: Dataset) -> float:
    """Fraction of samples whose vote matches the label."""
    if len(data) == 0:
        raise EmptyDataset("accuracy needs at least one sample")
    _check_omega(pool.size, omega)
    X = data.to_dense()
    y = data.label_array()
    w = np.array(omega.bits, dtype=np.int64)
    sums = np.zeros(len(data), dtype=np.int64)
    for i in omega.selected_indices():
        m = pool.learners[i].margins(X)
        sums += np.where(m >= 0.0, 1, -1)
    votes = np.where(sums >= 0, 1, -1)
    return float(np.mean(votes == y))


# --- serialization ---

_POOL_TAG = "malsieve-pool v1"
_SELECTION_TAG = "malsieve-selection v1"


def save_pool(pool: EnsemblePool, directory: str | os.PathLike) -> None:
    """Write the pool manifest plus one model file per learner."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "pool.txt", "w", encoding="utf-8") as fh:
        fh.write(_POOL_TAG + "\n")
        fh.write(f"n={pool.size}\n")
        fh.write(f"dim={pool.dim}\n")
        fh.write(f"master_seed={pool.master_seed}\n")
        for i, (learner, seed) in enumerate(zip(pool.learners, pool.bootstrap_seeds)):
            name = f"learner_{i:03d}.model"
            save_model(learner, root / name)
            fh.write(f"learner {i} seed={seed} file={name}\n")


def load_pool(directory: str | os.PathLike) -> EnsemblePool:
    root = Path(directory)
    manifest = root / "pool.txt"
    if not manifest.exists():
        raise FormatError(f"no pool manifest at {manifest}", None)
    with open(manifest, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _POOL_TAG:
        raise FormatError("not a pool manifest", 1)
    header: dict[str, str] = {}
    entries: list[tuple[int, int, str]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("learner "):
            try:
                _, idx_text, seed_field, file_field = line.split(" ")
                entries.append(
                    (int(idx_text),
                     int(seed_field.removeprefix("seed=")),
                     file_field.removeprefix("file="))
                )
            except ValueError:
                raise FormatError("bad learner line", lineno)
        elif "=" in line:
            key, _, value = line.partition("=")
            header[key] = value
        else:
            raise FormatError("unrecognized line", lineno)
    try:
        n = int(header["n"])
        dim = int(header["dim"])
        master_seed = int(header["master_seed"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad or missing header field ({exc})", None)
    if sorted(e[0] for e in entries) != list(range(n)):
        raise FormatError(f"manifest must list learners 0..{n - 1}", None)
    entries.sort()
    learners = tuple(load_model(root / fname) for _, _, fname in entries)
    pool = EnsemblePool(
        learners=learners,
        bootstrap_seeds=tuple(seed for _, seed, _ in entries),
        master_seed=master_seed,
    )
    if pool.dim != dim:
        raise DimensionMismatch("manifest dim disagrees with model files")
    return pool


def save_selection(omega: WeightVector, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_SELECTION_TAG + "\n")
        fh.write(f"n={len(omega)}\n")
        fh.write(f"omega={omega.to_string()}\n")


def load_selection(path: str | os.PathLike) -> WeightVector:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _SELECTION_TAG:
        raise FormatError("not a selection file", 1)
    fields = dict(line.partition("=")[::2] for line in lines[1:] if "=" in line)
    try:
        n = int(fields["n"])
        omega = WeightVector.from_string(fields["omega"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad selection file ({exc})", None)
    if len(omega) != n:
        raise FormatError("omega length disagrees with n", None)
    return omega
