"""Training data: bias grids, random test sets, symmetry reduction and target transforms.

Targets are the transformed triple ``(t_i, q_g/q_ref, q_d/q_ref)`` with

    t_i = asinh(i_d / (i_ref * f(u))),   f(u) = tanh(u / v_drain),  u = vd - vs

The odd drain factor ``f`` removes the zero of ``i_d`` at ``vd = vs`` so the
current target stays smooth across the seam; ``v_drain = 0`` switches it off
(plain ``asinh(i_d / i_ref)``). At ``u = 0`` the ratio is replaced by its limit
``v_drain * d(i_d)/d(vd)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .refdev import Device, DeviceResponse, VT_THERMAL

REGION_TAGS = ("symmetric_canonical", "tfet_fwd", "tfet_rev", "unrestricted")
CSV_FORMAT = "mldtco-dataset"
CSV_VERSION = 1


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TransformDescriptor:
    i_ref: float = 1e-9
    q_ref: float = 1e-15
    v_drain: float = 2.0 * VT_THERMAL

    def __post_init__(self):
        if not (self.i_ref > 0 and self.q_ref > 0 and self.v_drain >= 0):
            raise ValueError(f"invalid transform {self}")


def drain_factor(u, v_drain: float):
    """``tanh(u / v_drain)`` and its derivative; identically 1 when ``v_drain == 0``."""
    u = np.asarray(u, dtype=float)
    if v_drain == 0:
        return np.ones_like(u), np.zeros_like(u)
    # evaluated on |u| so that f(-u) == -f(u) bit for bit
    f = np.sign(u) * np.tanh(np.abs(u) / v_drain)
    return f, (1.0 - f * f) / v_drain


def transform_targets(raw: DeviceResponse, t: TransformDescriptor, u=None, did_dvd=None) -> np.ndarray:
    """Map a device response to training targets, shape ``(..., 3)``.

    ``u`` (vd - vs) is required when the drain factor is active; ``did_dvd`` supplies
    the limit at ``u == 0`` (treated as 0 when omitted).
    """
    i_d = np.asarray(raw.i_d, dtype=float)
    if t.v_drain > 0:
        if u is None:
            raise ValueError("drain-factor transform needs u = vd - vs")
        u = np.broadcast_to(np.asarray(u, dtype=float), i_d.shape)
        f, _ = drain_factor(u, t.v_drain)
        zero = u == 0
        limit = t.v_drain * (np.zeros_like(i_d) if did_dvd is None else np.asarray(did_dvd, dtype=float))
        ratio = np.where(zero, limit, i_d / np.where(zero, 1.0, f))
    else:
        ratio = i_d
    return np.stack(
        [np.arcsinh(ratio / t.i_ref), np.asarray(raw.q_g) / t.q_ref, np.asarray(raw.q_d) / t.q_ref], axis=-1
    )


def inverse_transform(y, t: TransformDescriptor, u=None):
    """Inverse of :func:`transform_targets`; returns ``(i_d, q_g, q_d)``."""
    y = np.asarray(y, dtype=float)
    i_d = t.i_ref * np.sinh(y[..., 0])
    if t.v_drain > 0:
        if u is None:
            raise ValueError("drain-factor transform needs u = vd - vs")
        i_d = i_d * drain_factor(u, t.v_drain)[0]
    return i_d, y[..., 1] * t.q_ref, y[..., 2] * t.q_ref


@dataclass(frozen=True)
class Dataset:
    """Biases ``(N, 3)`` as (vg, vd, vs) with transformed targets ``(N, 3)``."""

    bias: np.ndarray
    targets: np.ndarray
    input_offset: np.ndarray
    input_half_range: np.ndarray
    transform: TransformDescriptor = TransformDescriptor()
    region_tag: str = "unrestricted"

    def __post_init__(self):
        bias = np.asarray(self.bias, dtype=float).reshape(-1, 3)
        targets = np.asarray(self.targets, dtype=float).reshape(-1, 3)
        if len(bias) != len(targets):
            raise ValueError("bias and target counts differ")
        if not np.all(np.isfinite(targets)):
            raise ValueError("non-finite targets")
        if self.region_tag not in REGION_TAGS:
            raise ValueError(f"unknown region tag {self.region_tag!r}")
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "input_offset", np.asarray(self.input_offset, dtype=float))
        object.__setattr__(self, "input_half_range", np.asarray(self.input_half_range, dtype=float))

    def __len__(self):
        return len(self.bias)

    @property
    def inputs(self) -> np.ndarray:
        """Inputs mapped affinely onto [-1, 1] over the training box."""
        return (self.bias - self.input_offset) / self.input_half_range

    @property
    def u(self) -> np.ndarray:
        return self.bias[:, 1] - self.bias[:, 2]

    def physical(self):
        """``(i_d, q_g, q_d)`` recovered from the targets."""
        return inverse_transform(self.targets, self.transform, self.u)

    def subset(self, mask_or_index, region_tag: str | None = None) -> "Dataset":
        return replace(
            self,
            bias=self.bias[mask_or_index],
            targets=self.targets[mask_or_index],
            region_tag=region_tag or self.region_tag,
        )


def _box_norm(v_min: float, v_max: float):
    half = (v_max - v_min) / 2.0
    return np.full(3, (v_max + v_min) / 2.0), np.full(3, half if half > 0 else 1.0)


def from_evaluator(evaluator: Device, bias, norm, t: TransformDescriptor, region_tag="unrestricted") -> Dataset:
    bias = np.asarray(bias, dtype=float).reshape(-1, 3)
    resp, jac = evaluator.linearize(bias[:, 0], bias[:, 1], bias[:, 2])
    targets = transform_targets(resp, t, u=bias[:, 1] - bias[:, 2], did_dvd=jac.d_i[..., 0, 1])
    return Dataset(bias, targets, norm[0], norm[1], t, region_tag)


def grid_axis(v_min: float, v_max: float, step: float) -> np.ndarray:
    if not (v_max > v_min and step > 0):
        raise ValueError(f"bad grid: need v_max > v_min and step > 0, got ({v_min}, {v_max}, {step})")
    n = (v_max - v_min) / step
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"grid step {step} does not divide [{v_min}, {v_max}]")
    # rounded to 12 decimals so 0.05*k lands on the decimal grid values
    return np.round(v_min + step * np.arange(int(round(n)) + 1), 12)


def generate_grid(evaluator: Device, v_min=0.0, v_max=0.8, step=0.05, t: TransformDescriptor = TransformDescriptor()) -> Dataset:
    """Cartesian (vg, vd, vs) grid, vg slowest."""
    axis = grid_axis(v_min, v_max, step)
    vg, vd, vs = np.meshgrid(axis, axis, axis, indexing="ij")
    bias = np.stack([vg.ravel(), vd.ravel(), vs.ravel()], axis=1)
    return from_evaluator(evaluator, bias, _box_norm(v_min, v_max), t)


def sample_random(evaluator: Device, v_min, v_max, count: int, seed: int, t: TransformDescriptor = TransformDescriptor()) -> Dataset:
    if count <= 0:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    bias = rng.uniform(v_min, v_max, size=(count, 3))
    return from_evaluator(evaluator, bias, _box_norm(v_min, v_max), t)


def canonicalize_symmetric(ds: Dataset) -> Dataset:
    """Keep vd >= vs; the other half follows from the swap symmetry."""
    return ds.subset(ds.u >= 0, "symmetric_canonical")


def split_regions_tfet(ds: Dataset) -> tuple[Dataset, Dataset]:
    """Forward (vd >= vs) and reverse (vd <= vs) halves; vd == vs goes to both."""
    u = ds.u
    return ds.subset(u >= 0, "tfet_fwd"), ds.subset(u <= 0, "tfet_rev")


def subsample(ds: Dataset, size: int, seed: int) -> Dataset:
    if not 0 < size <= len(ds):
        raise ValueError(f"cannot draw {size} of {len(ds)} samples")
    idx = np.sort(np.random.default_rng(seed).permutation(len(ds))[:size])
    return ds.subset(idx)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_csv(ds: Dataset, path) -> None:
    t = ds.transform
    lines = [
        f"# format={CSV_FORMAT}",
        f"# version={CSV_VERSION}",
        f"# i_ref={_fmt(t.i_ref)}",
        f"# q_ref={_fmt(t.q_ref)}",
        f"# v_drain={_fmt(t.v_drain)}",
        "# input_norm=" + ";".join(f"{_fmt(o)}:{_fmt(h)}" for o, h in zip(ds.input_offset, ds.input_half_range)),
        f"# region_tag={ds.region_tag}",
        "vg,vd,vs,t0,t1,t2",
    ]
    lines += [",".join(_fmt(v) for v in row) for row in np.hstack([ds.bias, ds.targets])]
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path) -> Dataset:
    text = Path(path).read_text().splitlines()
    meta = {}
    body_start = None
    for k, line in enumerate(text):
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise DatasetFormatError(f"{path}:{k + 1}: malformed header line {line!r}")
            meta[key.strip()] = value.strip()
        else:
            body_start = k
            break
    try:
        if meta.get("format") != CSV_FORMAT or int(meta["version"]) != CSV_VERSION:
            raise DatasetFormatError(f"{path}: not a version-{CSV_VERSION} {CSV_FORMAT} file")
        t = TransformDescriptor(float(meta["i_ref"]), float(meta["q_ref"]), float(meta["v_drain"]))
        pairs = [p.split(":") for p in meta["input_norm"].split(";")]
        offset = [float(p[0]) for p in pairs]
        half = [float(p[1]) for p in pairs]
        region = meta["region_tag"]
        if len(offset) != 3:
            raise ValueError("input_norm needs three entries")
    except (KeyError, ValueError, IndexError) as exc:
        if isinstance(exc, DatasetFormatError):
            raise
        raise DatasetFormatError(f"{path}: bad header ({exc})") from exc
    if body_start is None or text[body_start].strip() != "vg,vd,vs,t0,t1,t2":
        raise DatasetFormatError(f"{path}: missing column header")
    rows = [r for r in text[body_start + 1:] if r.strip()]
    try:
        data = np.array([[float(v) for v in r.split(",")] for r in rows], dtype=float).reshape(-1, 6)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: bad data row ({exc})") from exc
    try:
        return Dataset(data[:, :3], data[:, 3:], offset, half, t, region)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc


def grid_size(v_min: float, v_max: float, step: float) -> int:
    return len(grid_axis(v_min, v_max, step)) ** 3


def canonical_count(points_per_axis: int) -> int:
    """Closed-form count of vd >= vs grid points."""
    return points_per_axis * math.comb(points_per_axis + 1, 2)
