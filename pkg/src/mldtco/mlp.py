"""Feed-forward tanh regression network trained with Adam, written on numpy.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``x`` of shape
``(N, fan_in)`` maps through ``x @ W + b``.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MODEL_VERSION = 1


class TrainingError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class MLPSpec:
    layer_sizes: tuple[int, ...] = (3, 32, 32, 3)
    activation: str = "tanh"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ValueError("an MLP needs at least one hidden layer")
        if min(sizes) < 1:
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.layer_sizes[1:-1]

    @classmethod
    def uniform(cls, layers: int, neurons: int, n_in: int = 3, n_out: int = 3) -> "MLPSpec":
        return cls((n_in, *([neurons] * layers), n_out))


@dataclass
class MLPParams:
    spec: MLPSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("layer count does not match spec")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ValueError(f"layer {k} has shape {w.shape}/{b.shape}, spec says {sizes[k]}->{sizes[k + 1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k} has non-finite entries")

    def copy(self) -> "MLPParams":
        return MLPParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 15000
    target_loss: float = 1e-7
    seed: int = 42
    # geometric decay from learning_rate to lr_final over max_epochs; None keeps it constant
    lr_final: float | None = 1e-5

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("batch_size must be >= 1 and max_epochs >= 0")
        if self.lr_final is not None and self.lr_final <= 0:
            raise ValueError("lr_final must be positive")

    def rate(self, epoch: int) -> float:
        if self.lr_final is None or self.learning_rate == 0 or self.max_epochs < 2:
            return self.learning_rate
        frac = epoch / (self.max_epochs - 1)
        return self.learning_rate * (self.lr_final / self.learning_rate) ** frac


def init(spec: MLPSpec, seed: int) -> MLPParams:
    """Xavier-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(spec, weights, biases)


def _forward_all(p: MLPParams, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    last = len(p.weights) - 1
    for k, (w, b) in enumerate(zip(p.weights, p.biases)):
        z = acts[-1] @ w + b
        acts.append(z if k == last else np.tanh(z))
    return acts


def forward(p: MLPParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = _forward_all(p, np.atleast_2d(x))[-1]
    return out[0] if single else out


def input_jacobian(p: MLPParams, x) -> np.ndarray:
    """d(output)/d(input), shape ``(N, n_out, n_in)`` (or ``(n_out, n_in)`` for one point)."""
    out, jac = forward_with_jacobian(p, x)
    return jac


def forward_with_jacobian(p: MLPParams, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    h = x
    # jt is the transposed Jacobian d(h)/d(x), laid out (N, n_in, width)
    jt = None
    last = len(p.weights) - 1
    for k, (w, b) in enumerate(zip(p.weights, p.biases)):
        z = h @ w + b
        jt = np.broadcast_to(w, (x.shape[0],) + w.shape) if jt is None else jt @ w
        if k != last:
            h = np.tanh(z)
            jt = jt * (1.0 - h * h)[:, None, :]
        else:
            h = z
    jac = np.swapaxes(jt, 1, 2)
    if single:
        return h[0], jac[0]
    return h, np.ascontiguousarray(jac)


def mse(p: MLPParams, x: np.ndarray, y: np.ndarray) -> float:
    r = forward(p, x) - y
    return float(np.mean(r * r))


def _gradients(p: MLPParams, x: np.ndarray, y: np.ndarray):
    """Backprop of the mean-squared error averaged over samples and outputs."""
    acts = _forward_all(p, x)
    delta = 2.0 * (acts[-1] - y) / y.size
    gw = [None] * len(p.weights)
    gb = [None] * len(p.weights)
    for k in range(len(p.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ p.weights[k].T) * (1.0 - acts[k] * acts[k])
    return gw, gb


def train(p0: MLPParams, x: np.ndarray, y: np.ndarray, cfg: TrainConfig = TrainConfig()):
    """Mini-batch Adam on MSE.

    Returns ``(params, loss_history)`` where the history holds the full-data MSE
    after every epoch. Deterministic in ``(p0, x, y, cfg)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if x.shape[0] != y.shape[0]:
        raise ValueError("inputs and targets differ in length")
    p = p0.copy()
    rng = np.random.default_rng(cfg.seed)
    params = p.weights + p.biases
    m = [np.zeros_like(a) for a in params]
    v = [np.zeros_like(a) for a in params]
    b1, b2, eps = cfg.beta1, cfg.beta2, cfg.epsilon
    n = x.shape[0]
    step = 0
    history = []
    for epoch in range(cfg.max_epochs):
        lr = cfg.rate(epoch)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            gw, gb = _gradients(p, x[idx], y[idx])
            step += 1
            c1 = 1.0 - b1 ** step
            c2 = 1.0 - b2 ** step
            for a, g, mk, vk in zip(params, gw + gb, m, v):
                mk *= b1
                mk += (1.0 - b1) * g
                vk *= b2
                vk += (1.0 - b2) * g * g
                a -= lr * (mk / c1) / (np.sqrt(vk / c2) + eps)
        loss = mse(p, x, y)
        if not np.isfinite(loss):
            raise TrainingError(f"loss diverged to {loss} at epoch {epoch}")
        history.append(loss)
        if loss <= cfg.target_loss:
            break
    log.debug("trained %s: %d epochs, final mse %.3e", p.spec.layer_sizes, len(history), history[-1] if history else float("nan"))
    return p, np.array(history)


def fit(p0: MLPParams, x, y, cfg: TrainConfig = TrainConfig()):
    """Train on per-output standardized targets, then fold the scaling into the output layer.

    The returned network predicts ``y`` directly; the loss history is in
    standardized units.
    """
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("cannot train on an empty dataset")
    mu = y.mean(axis=0)
    sd = y.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    p, hist = train(p0, x, (y - mu) / sd, cfg)
    p.weights[-1] = p.weights[-1] * sd
    p.biases[-1] = p.biases[-1] * sd + mu
    return p, hist


def _sweep_one(args):
    spec, x, y, x_val, y_val, cfg = args
    p, _ = fit(init(spec, cfg.seed), x, y, cfg)
    train_mse = mse(p, x, y)
    return {
        "layers": len(spec.hidden),
        "neurons": spec.hidden[0],
        "train_mse": train_mse,
        "heldout_mse": mse(p, x_val, y_val),
    }


def hyperparam_sweep(x, y, specs, cfg: TrainConfig = TrainConfig(), x_val=None, y_val=None, jobs: int = 1):
    """Train every spec from its own seeded init; one row per spec.

    Without explicit validation data a deterministic 10% hold-out is split off.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("no architectures to sweep")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x_val is None:
        order = np.random.default_rng(cfg.seed).permutation(len(x))
        n_val = max(1, len(x) // 10)
        val, tr = order[:n_val], order[n_val:]
        x, y, x_val, y_val = x[tr], y[tr], x[val], y[val]
    tasks = [(s, x, y, x_val, y_val, cfg) for s in specs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_one, tasks))
    return [_sweep_one(t) for t in tasks]


@dataclass
class ModelMeta:
    """Everything besides the weights needed to turn a net into a device model."""

    i_ref: float = 1e-9
    q_ref: float = 1e-15
    v_drain: float = 0.0
    input_offset: tuple[float, ...] = (0.0, 0.0, 0.0)
    input_half_range: tuple[float, ...] = (1.0, 1.0, 1.0)
    region_tag: str = "unrestricted"
    polarity: str = "n"
    extra: dict = field(default_factory=dict)


def save_model(p: MLPParams, meta: ModelMeta, path) -> None:
    doc = {
        "version": MODEL_VERSION,
        "spec": {"layer_sizes": list(p.spec.layer_sizes), "activation": p.spec.activation},
        "weights": [w.tolist() for w in p.weights],
        "biases": [b.tolist() for b in p.biases],
        "transform": {"i_ref": meta.i_ref, "q_ref": meta.q_ref, "v_drain": meta.v_drain},
        "input_norm": {"offset": list(meta.input_offset), "half_range": list(meta.input_half_range)},
        "region_tag": meta.region_tag,
        "polarity": meta.polarity,
    }
    if meta.extra:
        doc["extra"] = meta.extra
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> tuple[MLPParams, ModelMeta]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {doc.get('version') if isinstance(doc, dict) else None!r}")
    try:
        spec = MLPSpec(tuple(doc["spec"]["layer_sizes"]), doc["spec"]["activation"])
        params = MLPParams(
            spec,
            [np.array(w, dtype=float).reshape(len(w), -1) for w in doc["weights"]],
            [np.array(b, dtype=float) for b in doc["biases"]],
        )
        meta = ModelMeta(
            i_ref=float(doc["transform"]["i_ref"]),
            q_ref=float(doc["transform"]["q_ref"]),
            v_drain=float(doc["transform"].get("v_drain", 0.0)),
            input_offset=tuple(float(v) for v in doc["input_norm"]["offset"]),
            input_half_range=tuple(float(v) for v in doc["input_norm"]["half_range"]),
            region_tag=str(doc["region_tag"]),
            polarity=str(doc["polarity"]),
            extra=dict(doc.get("extra", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from exc
    return params, meta
