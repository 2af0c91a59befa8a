"""Device-level accuracy studies: random-bias error reports, learning curves,
transfer-curve comparisons and the per-region TFET scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import dataset as D
from .. import mlp
from ..refdev import Device
from ..surrogate import NetModel, net_physical, from_nets, train_net
from .metrics import mean_rel_error, r_squared, relative_errors

I_FLOOR = 1e-12  # A
Q_FLOOR = 1e-17  # C
ABOVE_THRESHOLD = 1e-9  # A


@dataclass(frozen=True)
class MetricReport:
    """Scalar scores plus the per-point error table they were computed from."""

    r_squared: float
    mean_rel_error: float
    table: dict

    def __post_init__(self):
        if self.r_squared > 1.0:
            raise ValueError("r_squared cannot exceed 1")


def asinh_current(i_d, i_ref: float = D.TransformDescriptor().i_ref) -> np.ndarray:
    """Plain ``asinh(i_d / i_ref)``; the scale on which R^2 is reported."""
    return np.arcsinh(np.asarray(i_d) / i_ref)


def random_biases(v_min: float, v_max: float, count: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(v_min, v_max, size=(count, 3))


def device_errors(model: Device, reference: Device, bias: np.ndarray) -> dict:
    """Per-point predictions, reference values and relative errors at ``bias``.

    Current errors use a 1 pA floor, charge errors a 0.01 fC floor.
    """
    vg, vd, vs = np.asarray(bias, dtype=float).T
    p = model.evaluate(vg, vd, vs)
    r = reference.evaluate(vg, vd, vs)
    out = {"vg": vg, "vd": vd, "vs": vs}
    for name, floor in (("i_d", I_FLOOR), ("q_g", Q_FLOOR), ("q_d", Q_FLOOR)):
        a, b = getattr(p, name), getattr(r, name)
        out[f"{name}_pred"] = a
        out[f"{name}_ref"] = b
        out[f"{name}_relerr"] = relative_errors(a, b, floor)
    return out


def error_summary(table: dict) -> dict:
    """Mean relative errors: current over |i_d| > 1 nA, charges everywhere."""
    above = np.abs(table["i_d_ref"]) > ABOVE_THRESHOLD
    return {
        "id_mre_above_threshold": float(np.mean(table["i_d_relerr"][above])),
        "id_mre_all": float(np.mean(table["i_d_relerr"])),
        "qg_mre": float(np.mean(table["q_g_relerr"])),
        "qd_mre": float(np.mean(table["q_d_relerr"])),
        "id_r2_asinh": r_squared(asinh_current(table["i_d_pred"]), asinh_current(table["i_d_ref"])),
        "n_points": int(len(table["vg"])),
        "n_above_threshold": int(np.sum(above)),
    }


def device_report(model: Device, reference: Device, bias: np.ndarray) -> MetricReport:
    """R^2 on ``asinh(i_d/i_ref)`` and current error above 1 nA, with the full table."""
    table = device_errors(model, reference, bias)
    s = error_summary(table)
    return MetricReport(s["id_r2_asinh"], s["id_mre_above_threshold"], table)


def learning_curve(evaluator: Device, sizes, test_bias: np.ndarray, cfg: mlp.TrainConfig = mlp.TrainConfig(),
                   spec: mlp.MLPSpec = mlp.MLPSpec(), v_min: float = 0.0, v_max: float = 0.8, step: float = 0.05):
    """Train on deterministic subsamples of the canonical grid and score each on
    a fixed test set. Rows are ``(size, r2)`` with R^2 on ``asinh(i_d/i_ref)``.

    ``evaluator`` must be source/drain symmetric (the nets are used in swap mode).
    """
    sizes = [int(s) for s in sizes]
    if len(set(sizes)) != len(sizes):
        raise ValueError("duplicate training sizes")
    if sizes != sorted(sizes):
        raise ValueError("training sizes must be ascending")
    full = D.canonicalize_symmetric(D.generate_grid(evaluator, v_min, v_max, step))
    vg, vd, vs = np.asarray(test_bias, dtype=float).T
    truth = asinh_current(evaluator.evaluate(vg, vd, vs).i_d)
    rows = []
    for size in sizes:
        ds = full if size == len(full) else D.subsample(full, size, cfg.seed)
        net, _ = train_net(ds, spec, cfg)
        pred = from_nets([net]).evaluate(vg, vd, vs).i_d
        rows.append((size, r_squared(asinh_current(pred, net.transform.i_ref), truth)))
    return rows


def region_scores(net: NetModel, evaluator: Device, v_min: float, v_max: float, count: int, seed: int) -> dict:
    """Score one TFET region net on random biases from its own region only.

    The net is evaluated on its own (no blending). Returns R^2 on
    ``asinh(i_d/i_ref)`` and the per-point table.
    """
    if net.region_tag not in ("tfet_fwd", "tfet_rev"):
        raise ValueError(f"not a TFET region net: {net.region_tag!r}")
    bias = random_biases(v_min, v_max, count, seed)
    u = bias[:, 1] - bias[:, 2]
    bias = bias[u >= 0] if net.region_tag == "tfet_fwd" else bias[u <= 0]
    out, _, _, _ = net_physical(net, bias)
    truth = evaluator.evaluate(*bias.T).i_d
    return {
        "r2": r_squared(asinh_current(out[:, 0], net.transform.i_ref), asinh_current(truth, net.transform.i_ref)),
        "bias": bias,
        "i_d_pred": out[:, 0],
        "i_d_ref": truth,
    }


def transfer_curve_compare(model: Device, reference: Device, vd_values=(0.05, 0.9), vs: float = 0.0,
                           vg_range=(0.0, 0.9), vg_step: float = 0.005):
    """id(vg) of model and reference at each drain bias.

    Returns ``(table, reports)``: the table has one row per (vd, vg); each
    report carries the error over |i_d| > 1 nA and over the full sweep, plus the
    largest sample-to-sample jump of both curves.
    """
    n = int(round((vg_range[1] - vg_range[0]) / vg_step))
    vg = vg_range[0] + vg_step * np.arange(n + 1)
    cols = {"vd": [], "vg": [], "i_d_pred": [], "i_d_ref": []}
    reports = {}
    for vd in vd_values:
        a = model.evaluate(vg, np.full_like(vg, vd), np.full_like(vg, vs)).i_d
        b = reference.evaluate(vg, np.full_like(vg, vd), np.full_like(vg, vs)).i_d
        above = np.abs(b) > ABOVE_THRESHOLD
        reports[float(vd)] = {
            "mre_above_threshold": mean_rel_error(a[above], b[above], I_FLOOR) if above.any() else float("nan"),
            "mre_full": mean_rel_error(a, b, I_FLOOR),
            "max_jump_pred": float(np.max(np.abs(np.diff(a)))),
            "max_jump_ref": float(np.max(np.abs(np.diff(b)))),
        }
        cols["vd"].append(np.full_like(vg, vd))
        cols["vg"].append(vg)
        cols["i_d_pred"].append(a)
        cols["i_d_ref"].append(b)
    table = {k: np.concatenate(v) for k, v in cols.items()}
    table["relerr"] = relative_errors(table["i_d_pred"], table["i_d_ref"], I_FLOOR)
    return table, reports
