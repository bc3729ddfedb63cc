"""Component classifiers: a logistic-loss linear model and a one-hidden-
layer network, both trained by seeded minibatch gradient descent.

Labels are +1 (malicious) / -1 (benign) throughout. A learner's decision
margin is a real score; the predicted label is its sign with the tie at 0
resolved to +1, the fail-safe direction for a detector.

`loss_and_gradient` is the single source of truth for the objective; the
training loop and the finite-difference checks in the test suite both go
through it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    FormatError,
    NonFiniteLoss,
    SingleClassData,
)
from .rng import make_rng
from .vectorize import Dataset, FeatureVector

KINDS = ("linear", "mlp")


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "linear"
    learning_rate: float = 0.1
    epochs: int = 50
    hidden_units: int = 8
    l2: float = 0.0
    rng_seed: int = 0
    batch_size: int | None = 32  # None = full batch

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1 or None")


@dataclass(frozen=True, eq=False)
class TrainedLearner:
    kind: str
    dim: int
    spec: LearnerSpec
    params: dict[str, np.ndarray]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrainedLearner):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.dim == other.dim
            and self.spec == other.spec
            and set(self.params) == set(other.params)
            and all(np.array_equal(self.params[k], other.params[k]) for k in self.params)
        )

    def margin(self, x: FeatureVector) -> float:
        if x.dimension != self.dim:
            raise DimensionMismatch(
                f"vector dimension {x.dimension} != learner dimension {self.dim}"
            )
        return float(decision_values(self.kind, self.params, x.to_dense()[None, :])[0])

    def margins(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.dim:
            raise DimensionMismatch(
                f"matrix width {X.shape[1]} != learner dimension {self.dim}"
            )
        return decision_values(self.kind, self.params, X)


def init_params(spec: LearnerSpec, dim: int) -> dict[str, np.ndarray]:
    """Linear weights start at zero; hidden-layer weights are seeded
    symmetric uniform scaled by 1/sqrt(fan_in)."""
    if spec.kind == "linear":
        return {"w": np.zeros(dim), "b": np.zeros(1)}
    rng = make_rng(spec.rng_seed, "init")
    h = spec.hidden_units
    a1 = 1.0 / np.sqrt(dim)
    a2 = 1.0 / np.sqrt(h)
    return {
        "W1": rng.uniform(-a1, a1, size=(dim, h)),
        "b1": np.zeros(h),
        "w2": rng.uniform(-a2, a2, size=h),
        "b2": np.zeros(1),
    }


def decision_values(kind: str, params: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return X @ params["w"] + params["b"][0]
    H = np.tanh(X @ params["W1"] + params["b1"])
    return H @ params["w2"] + params["b2"][0]


def loss_and_gradient(
    kind: str,
    params: dict[str, np.ndarray],
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean logistic loss over the batch plus L2 on the weight matrices
    (biases excluded), with its exact analytic gradient."""
    n = X.shape[0]
    if kind == "linear":
        z = X @ params["w"] + params["b"][0]
        loss = float(np.mean(np.logaddexp(0.0, -y * z)))
        loss += 0.5 * l2 * float(params["w"] @ params["w"])
        gz = -y * _sigmoid(-y * z) / n
        return loss, {
            "w": X.T @ gz + l2 * params["w"],
            "b": np.array([np.sum(gz)]),
        }

    H = np.tanh(X @ params["W1"] + params["b1"])
    z = H @ params["w2"] + params["b2"][0]
    loss = float(np.mean(np.logaddexp(0.0, -y * z)))
    loss += 0.5 * l2 * (
        float(np.sum(params["W1"] ** 2)) + float(params["w2"] @ params["w2"])
    )
    gz = -y * _sigmoid(-y * z) / n
    g_pre = (gz[:, None] * params["w2"][None, :]) * (1.0 - H * H)
    return loss, {
        "W1": X.T @ g_pre + l2 * params["W1"],
        "b1": np.sum(g_pre, axis=0),
        "w2": H.T @ gz + l2 * params["w2"],
        "b2": np.array([np.sum(gz)]),
    }


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def train(
    spec: LearnerSpec,
    data: Dataset,
    loss_history: list[float] | None = None,
) -> TrainedLearner:
    """Seeded minibatch gradient descent on the logistic loss.

    Deterministic given (spec, data). When loss_history is passed, the
    full-dataset loss is appended before training and after every epoch.
    """
    if len(data) == 0:
        raise SingleClassData("empty dataset")
    X = data.to_dense()
    y = data.label_array().astype(np.float64)
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassData("training data must contain both classes")

    params = init_params(spec, data.dimension)
    rng = make_rng(spec.rng_seed, "order")
    n = X.shape[0]
    batch = n if spec.batch_size is None else min(spec.batch_size, n)

    if loss_history is not None:
        loss_history.append(loss_and_gradient(spec.kind, params, X, y, spec.l2)[0])

    for _epoch in range(spec.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            _, grads = loss_and_gradient(spec.kind, params, X[idx], y[idx], spec.l2)
            for key, g in grads.items():
                params[key] -= spec.learning_rate * g
        epoch_loss = loss_and_gradient(spec.kind, params, X, y, spec.l2)[0]
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss(
                f"loss became {epoch_loss!r}; lower the learning rate"
            )
        if loss_history is not None:
            loss_history.append(epoch_loss)

    return TrainedLearner(kind=spec.kind, dim=data.dimension, spec=spec, params=params)


def decision_margin(learner: TrainedLearner, x: FeatureVector) -> float:
    return learner.margin(x)


def predict_label(learner: TrainedLearner, x: FeatureVector) -> int:
    """Sign of the margin; an exact 0 counts as malicious."""
    return 1 if learner.margin(x) >= 0.0 else -1


def predict_labels(learner: TrainedLearner, X: np.ndarray) -> np.ndarray:
    m = learner.margins(X)
    return np.where(m >= 0.0, 1, -1).astype(np.int8)


# --- serialization ---

_FORMAT_TAG = "malsieve-model v1"


def save_model(learner: TrainedLearner, path: str | os.PathLike) -> None:
    spec = learner.spec
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_FORMAT_TAG + "\n")
        fh.write(f"kind={learner.kind}\n")
        fh.write(f"dim={learner.dim}\n")
        fh.write(f"learning_rate={spec.learning_rate!r}\n")
        fh.write(f"epochs={spec.epochs}\n")
        fh.write(f"hidden_units={spec.hidden_units}\n")
        fh.write(f"l2={spec.l2!r}\n")
        fh.write(f"rng_seed={spec.rng_seed}\n")
        fh.write(f"batch_size={'none' if spec.batch_size is None else spec.batch_size}\n")
        for name in sorted(learner.params):
            arr = learner.params[name]
            shape = "x".join(map(str, arr.shape))
            tokens = " ".join(v.hex() for v in arr.reshape(-1).tolist())
            fh.write(f"param {name} {shape} {tokens}\n")


def load_model(path: str | os.PathLike) -> TrainedLearner:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _FORMAT_TAG:
        raise FormatError("not a model file", 1)
    fields: dict[str, str] = {}
    params: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("param "):
            try:
                _, name, shape_text, tokens = line.split(" ", 3)
                shape = tuple(int(s) for s in shape_text.split("x"))
                values = [float.fromhex(t) for t in tokens.split()]
                params[name] = np.array(values).reshape(shape)
            except ValueError:
                raise FormatError("bad param line", lineno)
        elif "=" in line:
            key, _, value = line.partition("=")
            fields[key] = value
        else:
            raise FormatError("unrecognized line", lineno)
    try:
        batch_text = fields["batch_size"]
        spec = LearnerSpec(
            kind=fields["kind"],
            learning_rate=float(fields["learning_rate"]),
            epochs=int(fields["epochs"]),
            hidden_units=int(fields["hidden_units"]),
            l2=float(fields["l2"]),
            rng_seed=int(fields["rng_seed"]),
            batch_size=None if batch_text == "none" else int(batch_text),
        )
        dim = int(fields["dim"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad or missing header field ({exc})", None)
    expected = {"linear": {"w", "b"}, "mlp": {"W1", "b1", "w2", "b2"}}[spec.kind]
    if set(params) != expected:
        raise FormatError(f"model needs params {sorted(expected)}", None)
    return TrainedLearner(kind=spec.kind, dim=dim, spec=spec, params=params)
