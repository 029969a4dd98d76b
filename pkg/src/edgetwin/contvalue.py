"""Continuation-value approximator and its online training pipeline.

A small fully-connected network maps (boundary index, inflicted queuing
delay, edge queuing delay) to the expected best utility of continuing
on-device inference past that boundary. Targets are built by one-step
bootstrapping against the next boundary's realized utility, with twin
emulation filling in boundaries the device never reached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .costs import candidate_lt_utility
from .profile import DnnProfile
from .twin import TwinSnapshot

OBSERVED = "observed"
TWIN_AUGMENTED = "twin_augmented"


@dataclass(frozen=True)
class TrainingSample:
    """One (boundary, queue observations) -> reference-value pair."""

    layer_index: int
    d_lq_s: float
    t_eq_s: float
    target: float
    source: str

    def __post_init__(self) -> None:
        if not np.isfinite(self.target):
            raise ValueError("non-finite training target")

    @property
    def features(self) -> tuple[float, float, float]:
        return (float(self.layer_index), self.d_lq_s, self.t_eq_s)


class Normalizer:
    """Running per-feature standardization; updated only while training."""

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, batch: np.ndarray) -> None:
        for row in batch:
            self.count += 1
            delta = row - self.mean
            self.mean += delta / self.count
            self.m2 += delta * (row - self.mean)

    def transform(self, x: np.ndarray) -> np.ndarray:
        if self.count < 2:
            return x - self.mean
        std = np.sqrt(self.m2 / self.count + 1e-8)
        return (x - self.mean) / std

    def state(self) -> dict:
        return {"count": self.count, "mean": self.mean, "m2": self.m2}


class ContValueModel:
    """Fully-connected value regressor with adaptive-moment updates.

    Hidden layers use rectifier activations; the output layer is linear and
    zero-initialized, so an untrained model predicts 0 everywhere and the
    initial policy degrades to "stop whenever the utility is nonnegative".
    """

    HIDDEN = (200, 100, 20)

    def __init__(self, rng: np.random.Generator, input_dim: int = 3, learning_rate: float = 1e-3):
        dims = (input_dim,) + self.HIDDEN + (1,)
        self.dims = dims
        self.learning_rate = learning_rate
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i in range(len(dims) - 1):
            fan_in = dims[i]
            if i == len(dims) - 2:
                w = np.zeros((dims[i], dims[i + 1]))
            else:
                bound = 1.0 / np.sqrt(fan_in)
                w = rng.uniform(-bound, bound, size=(dims[i], dims[i + 1]))
            self.weights.append(w)
            self.biases.append(np.zeros(dims[i + 1]))
        self.normalizer = Normalizer(input_dim)
        self._adam_m = [np.zeros_like(p) for p in self._params()]
        self._adam_v = [np.zeros_like(p) for p in self._params()]
        self._adam_t = 0

    def _params(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        """Predicted continuation values, one per input row."""
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        a = self.normalizer.transform(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i < last:
                a = np.maximum(a, 0.0)
        out = a[:, 0]
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite network output")
        return out

    def predict_one(self, layer_index: int, d_lq_s: float, t_eq_s: float) -> float:
        return float(self.forward(np.array([[layer_index, d_lq_s, t_eq_s]]))[0])

    def loss_and_grads(self, inputs: np.ndarray, targets: np.ndarray):
        """Mean-squared-error loss and its gradient for every parameter."""
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        y = np.asarray(targets, dtype=np.float64)
        n = x.shape[0]
        a = self.normalizer.transform(x)
        acts = [a]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            acts.append(np.maximum(z, 0.0) if i < last else z)
        out = acts[-1][:, 0]
        err = out - y
        loss = float(np.mean(err ** 2))
        grad_w = [np.empty(0)] * len(self.weights)
        grad_b = [np.empty(0)] * len(self.biases)
        delta = (2.0 / n) * err[:, None]
        for i in range(last, -1, -1):
            grad_w[i] = acts[i].T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0.0)
        return loss, grad_w + grad_b

    def loss(self, inputs: np.ndarray, targets: np.ndarray) -> float:
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        y = np.asarray(targets, dtype=np.float64)
        return float(np.mean((self.forward(x) - y) ** 2))

    def train_step(self, inputs: np.ndarray, targets: np.ndarray) -> float:
        """One adaptive-moment step on the batch; returns the pre-step loss."""
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if x.shape[0] == 0:
            raise ValueError("empty training batch")
        self.normalizer.update(x)
        loss, grads = self.loss_and_grads(x, targets)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite training loss {loss}")
        self._adam_t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        lr = self.learning_rate
        corr1 = 1.0 - b1 ** self._adam_t
        corr2 = 1.0 - b2 ** self._adam_t
        for p, g, m, v in zip(self._params(), grads, self._adam_m, self._adam_v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
        return loss

    def save(self, path: str) -> None:
        state: dict = {"dims": np.array(self.dims), "lr": np.array(self.learning_rate)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            state[f"w{i}"] = w
            state[f"b{i}"] = b
        norm = self.normalizer.state()
        state["norm_count"] = np.array(norm["count"])
        state["norm_mean"] = norm["mean"]
        state["norm_m2"] = norm["m2"]
        np.savez(path, **state)

    @classmethod
    def load(cls, path: str) -> "ContValueModel":
        data = np.load(path)
        dims = tuple(int(d) for d in data["dims"])
        model = cls(np.random.default_rng(0), input_dim=dims[0], learning_rate=float(data["lr"]))
        if model.dims != dims:
            raise ValueError(f"checkpoint layer dims {dims} do not match {model.dims}")
        for i in range(len(model.weights)):
            model.weights[i] = data[f"w{i}"]
            model.biases[i] = data[f"b{i}"]
        model.normalizer.count = int(data["norm_count"])
        model.normalizer.mean = data["norm_mean"]
        model.normalizer.m2 = data["norm_m2"]
        model._adam_m = [np.zeros_like(p) for p in model._params()]
        model._adam_v = [np.zeros_like(p) for p in model._params()]
        model._adam_t = 0
        return model


class ReplayBuffer:
    """Stores every training sample; serves random minibatches."""

    def __init__(self):
        self._features: list[tuple[float, float, float]] = []
        self._targets: list[float] = []
        self.observed_count = 0
        self.augmented_count = 0

    def __len__(self) -> int:
        return len(self._targets)

    def add(self, samples: list[TrainingSample]) -> None:
        for s in samples:
            self._features.append(s.features)
            self._targets.append(s.target)
            if s.source == TWIN_AUGMENTED:
                self.augmented_count += 1
            else:
                self.observed_count += 1

    def minibatch(self, rng: np.random.Generator, size: int):
        n = len(self._targets)
        idx = rng.integers(0, n, size=min(size, n))
        feats = np.asarray(self._features, dtype=np.float64)[idx]
        targets = np.asarray(self._targets, dtype=np.float64)[idx]
        return feats, targets

    def full(self):
        return (
            np.asarray(self._features, dtype=np.float64),
            np.asarray(self._targets, dtype=np.float64),
        )


def build_reference_target(next_lt_utility: float, next_approx_cont: float | None) -> float:
    """Bootstrap target for the continuation value at one boundary.

    The value of continuing is at least the utility of stopping at the next
    boundary, and at least the estimated value of continuing past it; at the
    last boundary only the terminal stop remains.
    """
    if next_approx_cont is None:
        return next_lt_utility
    return max(next_lt_utility, next_approx_cont)


def build_training_samples(
    model: ContValueModel,
    decision_x: int,
    snapshot: TwinSnapshot,
    profile: DnnProfile,
    cfg: SimConfig,
    augment: bool,
) -> list[TrainingSample]:
    """Training samples for one completed task.

    With twin augmentation every boundary 0..exit_index yields a sample, so
    the sample count per task is exit_index + 1 regardless of the decision.
    Without it, only boundaries whose next-boundary observations were
    actually reached on the device are kept. Targets are frozen against the
    current model parameters.
    """
    le = profile.exit_index
    device_only = profile.device_only_decision

    lt = [candidate_lt_utility(l, snapshot.d_lq_s(l), snapshot.t_eq_s(l), profile, cfg)
          for l in range(device_only + 1)]

    samples = []
    for l in range(le + 1):
        if l == le:
            target = build_reference_target(lt[le + 1], None)
        else:
            approx = model.predict_one(l + 2, snapshot.d_lq_s(l + 1), snapshot.t_eq_s(l + 1))
            target = build_reference_target(lt[l + 1], approx)
        source = OBSERVED if (decision_x == device_only or l <= decision_x) else TWIN_AUGMENTED
        samples.append(TrainingSample(l + 1, snapshot.d_lq_s(l), snapshot.t_eq_s(l), target, source))

    if not augment:
        if decision_x == device_only:
            return samples
        return samples[:decision_x]
    return samples
