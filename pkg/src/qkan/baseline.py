"""Gradient-descent training of the same Bézier KAN with continuous control points."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import EncodingSpec
from .network import DecodedModel, KanSpec, bernstein_derivative, bernstein_matrix, forward_batch
from .objective import Dataset

LR_GRID = (0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 1.5)


class DivergenceError(FloatingPointError):
    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"loss became {loss} at step {step}")


@dataclass
class GdConfig:
    optimizer: str = "adam"
    learning_rate: float = 0.01
    steps: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd", "adagrad"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate != 0.0 and not 1e-4 <= self.learning_rate <= 2.0:
            raise ValueError("learning_rate must lie in [1e-4, 2.0] (or be 0 for a frozen run)")
        if self.steps < 1:
            raise ValueError("steps must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GdResult:
    model: DecodedModel
    train_mse: list[float]
    val_mse: list[float] = field(default_factory=list)
    learning_rate: float = 0.0

    def trace_rows(self):
        for s, tr in enumerate(self.train_mse):
            yield s, tr, (self.val_mse[s] if self.val_mse else float("nan"))


def mse(model: DecodedModel, data: Dataset) -> float:
    pred = forward_batch(model.spec, model.control_points, data.inputs)
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported by the caller
        return float(np.mean(np.sum((data.targets - pred) ** 2, axis=1)))


def gradient(model: DecodedModel, batch: Dataset) -> np.ndarray:
    """Analytic d(MSE)/d(control points), flattened in layout order."""
    spec = model.spec
    cps = model.control_points
    out, layers = forward_batch(spec, cps, batch.inputs, keep=True)
    n = batch.n
    delta = -2.0 * (batch.targets - out) / n  # dL/d(node values), last layer
    grads = {}
    for l in reversed(range(spec.depth)):
        H = layers[l]
        prev = np.zeros_like(H)
        for e in spec.layer_edges(l):
            _, j, k = e
            deg = spec.degrees[e]
            t = H[:, j]
            grads[e] = bernstein_matrix(deg, t).T @ delta[:, k]
            if l > 0:
                prev[:, j] += delta[:, k] * bernstein_derivative(deg, np.asarray(cps[e], float), t)
        delta = prev
    return np.concatenate([grads[e] for e in spec.edges()])


def init_model(spec: KanSpec, encoding: EncodingSpec, seed: int, bounds_low=None, bounds_high=None) -> DecodedModel:
    rng = np.random.default_rng(seed)
    n = sum(spec.degrees[e] + 1 for e in spec.edges())
    vec = rng.uniform(encoding.min_value, encoding.max_value, size=n)
    return DecodedModel.from_vector(spec, encoding, vec, bounds_low, bounds_high)


def train_gd(spec: KanSpec, encoding: EncodingSpec, train: Dataset, val: Dataset | None = None,
             cfg: GdConfig = GdConfig(), init: DecodedModel | None = None,
             bounds_low=None, bounds_high=None) -> GdResult:
    """Full-batch descent for ``cfg.steps`` updates, recording MSE before each update."""
    model = init or init_model(spec, encoding, cfg.seed, bounds_low, bounds_high)
    theta = model.vector().copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    g2 = np.zeros_like(theta)
    lr = cfg.learning_rate
    tr_trace, va_trace = [], []
    for step in range(cfg.steps):
        cur = DecodedModel.from_vector(spec, encoding, theta, model.bounds_low, model.bounds_high)
        loss = mse(cur, train)
        if not np.isfinite(loss):
            raise DivergenceError(step, loss)
        tr_trace.append(loss)
        if val is not None:
            va_trace.append(mse(cur, val))
        g = gradient(cur, train)
        if cfg.optimizer == "sgd":
            theta = theta - lr * g
        elif cfg.optimizer == "adagrad":
            g2 += g * g
            theta = theta - lr * g / (np.sqrt(g2) + cfg.epsilon)
        else:
            m = cfg.beta1 * m + (1 - cfg.beta1) * g
            v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
            mhat = m / (1 - cfg.beta1 ** (step + 1))
            vhat = v / (1 - cfg.beta2 ** (step + 1))
            theta = theta - lr * mhat / (np.sqrt(vhat) + cfg.epsilon)
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(step, float("nan"))
    final = DecodedModel.from_vector(spec, encoding, theta, model.bounds_low, model.bounds_high)
    return GdResult(final, tr_trace, va_trace, lr)


def _converged_at(trace: list[float], rtol: float = 1e-3) -> int:
    final = trace[-1]
    for s, x in enumerate(trace):
        if x <= final * (1 + rtol) + 1e-12:
            return s
    return len(trace) - 1


def lr_sweep(spec, encoding, train, val=None, cfg: GdConfig = GdConfig(), grid=LR_GRID,
             bounds_low=None, bounds_high=None) -> GdResult:
    """Try each rate; among those reaching (within 1%) the best final loss, keep the earliest to converge."""
    runs = []
    for lr in grid:
        c = GdConfig(cfg.optimizer, lr, cfg.steps, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.seed)
        try:
            runs.append(train_gd(spec, encoding, train, val, c, None, bounds_low, bounds_high))
        except DivergenceError:
            continue
    if not runs:
        raise DivergenceError(0, float("nan"))
    best = min(r.train_mse[-1] for r in runs)
    good = [r for r in runs if r.train_mse[-1] <= best * 1.01 + 1e-12]
    return min(good, key=lambda r: (_converged_at(r.train_mse), r.learning_rate))
