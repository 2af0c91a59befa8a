"""Figure-analog drivers. Each writes its CSV file(s) into an output directory
and returns a JSON-ready metrics dict; :func:`run_figures` merges those into
``metrics.json``. No wall-clock values are written so reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import mlp
from ..refdev import make_reference
from ..surrogate import NetModel
from . import circuits as C
from . import studies as S
from .metrics import zero_crossings

FIGURES = ("fig5", "fig6", "fig10", "fig11", "fig13", "fig14", "fig15")
MODEL_FILES = {"nfinfet": ("nfinfet.json",), "ntfet": ("ntfet_fwd.json", "ntfet_rev.json")}


@dataclass(frozen=True)
class BenchConfig:
    seed: int = 42
    n_test: int = 50000
    vdd_finfet: float = 0.8
    vdd_tfet: float = 0.9
    dc_step: float = 0.005
    learning_sizes: tuple = (500, 1000, 2601)
    learning_test: int = 10000
    region_test: int = 20000
    train: mlp.TrainConfig = field(default_factory=mlp.TrainConfig)
    spec: mlp.MLPSpec = field(default_factory=mlp.MLPSpec)
    timing: C.NandTiming = field(default_factory=C.NandTiming)


@dataclass(frozen=True)
class ModelSet:
    """Trained nets found in a model directory; missing devices are ``None``."""

    finfet: tuple | None = None
    tfet: tuple | None = None

    @classmethod
    def load(cls, directory) -> "ModelSet":
        d = Path(directory)

        def nets(kind):
            paths = [d / f for f in MODEL_FILES[kind]]
            return tuple(NetModel.load(p) for p in paths) if all(p.exists() for p in paths) else None

        return cls(nets("nfinfet"), nets("ntfet"))

    def require(self, family: str) -> tuple:
        nets = self.finfet if family == "finfet" else self.tfet
        if nets is None:
            kind = "nfinfet" if family == "finfet" else "ntfet"
            raise FileNotFoundError(f"model file(s) {', '.join(MODEL_FILES[kind])} not found")
        return nets


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def write_csv(path, columns: dict) -> None:
    """Columns of equal length to a CSV with full double precision."""
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    rows = [",".join(names)]
    for k in range(len(data[0])):
        rows.append(",".join(_fmt(c[k]) for c in data))
    Path(path).write_text("\n".join(rows) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def merge_metrics(out, new: dict) -> None:
    """Update ``out/metrics.json`` with the top-level keys of ``new``."""
    path = Path(out) / "metrics.json"
    merged = json.loads(path.read_text()) if path.exists() else {}
    merged.update(_jsonable(new))
    write_json(path, merged)


# --- device-level figures ---------------------------------------------------

def fig5(models: ModelSet, out: Path, cfg: BenchConfig) -> dict:
    """FinFET surrogate against the reference on random biases."""
    dev = C.surrogate_pair("finfet", models.require("finfet"), cfg.vdd_finfet).n
    bias = S.random_biases(0.0, cfg.vdd_finfet, cfg.n_test, cfg.seed)
    table = S.device_errors(dev, make_reference("nfin_ref"), bias)
    write_csv(out / "fig5_errors.csv", table)
    return S.error_summary(table)


def fig10(models: ModelSet, out: Path, cfg: BenchConfig) -> dict:
    test = S.random_biases(0.0, cfg.vdd_finfet, cfg.learning_test, cfg.seed + 1)
    rows = S.learning_curve(make_reference("nfin_ref"), cfg.learning_sizes, test, cfg.train, cfg.spec, v_max=cfg.vdd_finfet)
    write_csv(out / "fig10_learning.csv", {"size": [r[0] for r in rows], "r2": [r[1] for r in rows]})
    return {"sizes": [r[0] for r in rows], "r2": [r[1] for r in rows]}


def reverse_gate_dependence(dev, vds: float = -0.9, vgs=(0.0, 0.9), vs: float = 0.9) -> float:
    """Relative spread of the reverse current across gate biases."""
    i = np.array([dev.evaluate(vg, vs + vds, vs).i_d for vg in vgs], dtype=float)
    return float((i.max() - i.min()) / np.max(np.abs(i)))


def fig11(models: ModelSet, out: Path, cfg: BenchConfig) -> dict:
    """Per-region TFET scatter (predicted vs reference current)."""
    nets = models.require("tfet")
    ref = make_reference("ntfet_ref")
    cols = {"region": [], "vg": [], "vd": [], "vs": [], "i_d_ref": [], "i_d_pred": []}
    metrics = {}
    for net in sorted(nets, key=lambda n: n.region_tag):
        r = S.region_scores(net, ref, 0.0, cfg.vdd_tfet, cfg.region_test, cfg.seed)
        metrics[f"r2_{net.region_tag}"] = r["r2"]
        cols["region"] += [net.region_tag] * len(r["bias"])
        for k, name in enumerate(("vg", "vd", "vs")):
            cols[name].append(r["bias"][:, k])
        cols["i_d_ref"].append(r["i_d_ref"])
        cols["i_d_pred"].append(r["i_d_pred"])
    for k in ("vg", "vd", "vs", "i_d_ref", "i_d_pred"):
        cols[k] = np.concatenate(cols[k])
    write_csv(out / "fig11_scatter.csv", cols)
    dev = C.surrogate_pair("tfet", nets, cfg.vdd_tfet).n
    metrics["reverse_gate_spread_nn"] = reverse_gate_dependence(dev)
    metrics["reverse_gate_spread_ref"] = reverse_gate_dependence(ref)
    return metrics


def fig13(models: ModelSet, out: Path, cfg: BenchConfig) -> dict:
    dev = C.surrogate_pair("tfet", models.require("tfet"), cfg.vdd_tfet).n
    table, reports = S.transfer_curve_compare(
        dev, make_reference("ntfet_ref"), (0.05, cfg.vdd_tfet), 0.0, (0.0, cfg.vdd_tfet), cfg.dc_step
    )
    write_csv(out / "fig13_transfer.csv", table)
    return {f"vd={vd!r}": rep for vd, rep in reports.items()}


# --- circuit figures --------------------------------------------------------

def fig6(models: ModelSet, out: Path, cfg: BenchConfig) -> dict:
    ref = C.reference_pair("finfet", cfg.vdd_finfet)
    nn = C.surrogate_pair("finfet", models.require("finfet"), cfg.vdd_finfet)
    metrics = {}
    ncols = {}
    for config in C.CELL_CONFIGS:
        br = C.run_butterfly(ref, config, cfg.dc_step)
        bn = C.run_butterfly(nn, config, cfg.dc_step)
        write_csv(out / f"fig6_butterfly_{config}.csv", {
            "v_sweep": br.curve1[0],
            "vqb_ref": br.curve1[1],
            "vqb_nn": bn.curve1[1],
            "vq_ref": br.curve2[1],
            "vq_nn": bn.curve2[1],
        })
        xr, ir = C.run_ncurve(ref, config, cfg.dc_step)
        xn, i_n = C.run_ncurve(nn, config, cfg.dc_step)
        ncols["v_probe"] = xr
        ncols[f"i_{config}_ref"] = ir
        ncols[f"i_{config}_nn"] = i_n
        metrics[config] = {
            "snm_ref": br.snm,
            "snm_nn": bn.snm,
            "butterfly_rms_gap": C.butterfly_gap(br, bn),
            "ncurve_crossings_ref": list(zero_crossings(xr, ir)),
            "ncurve_crossings_nn": list(zero_crossings(xn, i_n)),
            "ncurve_crossing_gap": C.crossings_gap(xr, ir, xn, i_n),
        }
    write_csv(out / "fig6_ncurve.csv", ncols)
    return metrics


def fig14(models: ModelSet, out: Path, cfg: BenchConfig) -> dict:
    ref = C.reference_pair("tfet", cfg.vdd_tfet)
    nn = C.surrogate_pair("tfet", models.require("tfet"), cfg.vdd_tfet)
    vin, vr = C.run_inverter_vtc(ref, cfg.dc_step)
    _, vn = C.run_inverter_vtc(nn, cfg.dc_step)
    write_csv(out / "fig14_inverter.csv", {"vin": vin, "vout_ref": vr, "vout_nn": vn})
    k = int(np.argmax(np.abs(vr - vn)))
    return {"vtc_max_abs_diff": float(abs(vr[k] - vn[k])), "vtc_worst_vin": float(vin[k])}


def fig15(models: ModelSet, out: Path, cfg: BenchConfig) -> dict:
    t = cfg.timing
    res_r, g_r = C.run_nand_transient(C.reference_pair("tfet", cfg.vdd_tfet), t)
    res_n, g_n = C.run_nand_transient(C.surrogate_pair("tfet", models.require("tfet"), cfg.vdd_tfet), t)
    _, g_ablate = C.run_nand_transient(C.reference_pair("tfet", cfg.vdd_tfet, c_gd=0.0), t)
    _, g_fin = C.run_nand_transient(C.reference_pair("finfet", cfg.vdd_finfet), t)
    write_csv(out / "fig15_nand.csv", {
        "time": res_r.sweep,
        "vin2": res_r.v("in2"),
        "out1_ref": res_r.v("out1"),
        "out2_ref": res_r.v("out2"),
        "out1_nn": res_n.v("out1"),
        "out2_nn": res_n.v("out2"),
    })
    return {
        "glitch_ref": g_r,
        "glitch_nn": g_n,
        "glitch_ref_cgd0": g_ablate,
        "glitch_finfet_ref": g_fin,
        "vdd": cfg.vdd_tfet,
    }


DRIVERS = {"fig5": fig5, "fig6": fig6, "fig10": fig10, "fig11": fig11, "fig13": fig13, "fig14": fig14, "fig15": fig15}


def _run_one(args):
    name, model_dir, out, cfg = args
    return name, DRIVERS[name](ModelSet.load(model_dir), Path(out), cfg)


def run_figures(names, model_dir, out, cfg: BenchConfig = BenchConfig(), jobs: int = 1) -> dict:
    """Run the named figure drivers and merge their metrics into ``out/metrics.json``."""
    names = list(names)
    for n in names:
        if n not in DRIVERS:
            raise ValueError(f"unknown figure id {n!r}; choose from {', '.join(FIGURES)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(n, str(model_dir), str(out), cfg) for n in names]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_run_one, tasks))
    else:
        results = dict(_run_one(t) for t in tasks)
    merge_metrics(out, results)
    return results
