"""Benchmark circuits: inverter VTC, 6T SRAM butterfly and N-curves, NAND chain.

Netlists are generated as text with reference model cards ``n`` and ``p``;
passing a :class:`DevicePair` built from surrogates swaps the devices in
without touching the text. p devices are mirrored about ``vbulk = vdd`` so
both polarities see biases inside the n-device training box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..refdev import Device, make_reference
from ..simcore import Circuit, SimOptions, dc_sweep, parse_netlist, transient
from ..surrogate import SurrogateDevice, from_nets
from .metrics import snm_extract, zero_crossings

FAMILIES = {"finfet": ("nfin_ref", "pfin_ref"), "tfet": ("ntfet_ref", "ptfet_ref")}
DEFAULT_VDD = {"finfet": 0.8, "tfet": 0.9}


@dataclass(frozen=True)
class DevicePair:
    """The n and p devices used by every benchmark circuit."""

    family: str
    vdd: float
    n: Device
    p: Device

    def as_models(self) -> dict:
        return {"n": self.n, "p": self.p}


def reference_pair(family: str, vdd: float | None = None, **overrides) -> DevicePair:
    if family not in FAMILIES:
        raise ValueError(f"unknown device family {family!r}")
    vdd = DEFAULT_VDD[family] if vdd is None else vdd
    nk, pk = FAMILIES[family]
    return DevicePair(family, vdd, make_reference(nk, **overrides), make_reference(pk, v_bulk=vdd, **overrides))


def surrogate_pair(family: str, nets, vdd: float | None = None, blend_halfwidth: float = 2e-3) -> DevicePair:
    """Both polarities from the same n-type nets."""
    if family not in FAMILIES:
        raise ValueError(f"unknown device family {family!r}")
    vdd = DEFAULT_VDD[family] if vdd is None else vdd
    n = from_nets(nets, "n", 0.0, blend_halfwidth)
    p = SurrogateDevice(n.nets, n.mode, "p", vdd, blend_halfwidth)
    return DevicePair(family, vdd, n, p)


def _models(pair: DevicePair) -> str:
    nk, pk = FAMILIES[pair.family]
    return f".model n {nk}\n.model p {pk} vbulk={pair.vdd!r}\n"


def _circuit(text: str, pair: DevicePair) -> Circuit:
    return Circuit(parse_netlist(text), devices=pair.as_models())


def _sweep(pair, text, source, step, opts):
    return dc_sweep(_circuit(text, pair), source, 0.0, pair.vdd, step, opts)


# --- inverter -------------------------------------------------------------

def inverter_netlist(pair: DevicePair, step: float = 0.005) -> str:
    return (
        "* CMOS inverter\n"
        f"vdd vdd 0 dc {pair.vdd!r}\n"
        "vin in 0 dc 0\n"
        "mp out in vdd p\n"
        "mn out in 0 n\n"
        + _models(pair)
        + f".dc vin 0 {pair.vdd!r} {step!r}\n.print v(out)\n.end\n"
    )


def run_inverter_vtc(pair: DevicePair, step: float = 0.005, opts: SimOptions = SimOptions()):
    """``(vin, vout)`` of a single inverter swept over [0, VDD]."""
    res = _sweep(pair, inverter_netlist(pair, step), "vin", step, opts)
    return res.sweep, res.v("out")


# --- 6T SRAM --------------------------------------------------------------

CELL_CONFIGS = ("read", "hold")


def _cell_drive(config: str, vdd: float) -> tuple[float, float]:
    """(wordline, bitline) voltages; both bitlines share one level."""
    if config == "read":
        return vdd, vdd
    if config == "hold":
        return 0.0, vdd
    raise ValueError(f"cell config must be one of {CELL_CONFIGS}, got {config!r}")


def sram_netlist(pair: DevicePair, config: str, drive: str | None = None, probe: str | None = None) -> str:
    """6T cell. ``drive`` replaces the inverter driving that storage node by an
    ideal source ``vx`` (loop broken); ``probe`` attaches source ``vx`` to that
    node with the loop intact. At most one of the two may be set."""
    if drive and probe:
        raise ValueError("set either drive or probe, not both")
    wl, bl = _cell_drive(config, pair.vdd)
    lines = [
        f"* 6T SRAM cell, {config}",
        f"vdd vdd 0 dc {pair.vdd!r}",
        f"vwl wl 0 dc {wl!r}",
        f"vbl bl 0 dc {bl!r}",
        f"vblb blb 0 dc {bl!r}",
    ]
    if drive != "q":
        lines += ["mp1 q qb vdd p", "mn1 q qb 0 n"]
    if drive != "qb":
        lines += ["mp2 qb q vdd p", "mn2 qb q 0 n"]
    lines += ["ma1 bl wl q n", "ma2 blb wl qb n"]
    node = drive or probe
    if node:
        lines.append(f"vx {node} 0 dc 0")
    return "\n".join(lines) + "\n" + _models(pair) + ".end\n"


@dataclass(frozen=True)
class ButterflyResult:
    """Two lobes of a butterfly plot.

    ``curve1`` is ``(v_q, v_qb)`` with q swept; ``curve2`` is ``(v_qb, v_q)``
    with qb swept. ``snm`` uses ``curve2`` with its axes swapped.
    """

    config: str
    curve1: tuple[np.ndarray, np.ndarray]
    curve2: tuple[np.ndarray, np.ndarray]
    snm: float


def run_butterfly(pair: DevicePair, config: str, step: float = 0.005, opts: SimOptions = SimOptions()) -> ButterflyResult:
    r1 = _sweep(pair, sram_netlist(pair, config, drive="q"), "vx", step, opts)
    r2 = _sweep(pair, sram_netlist(pair, config, drive="qb"), "vx", step, opts)
    c1 = (r1.sweep, r1.v("qb"))
    c2 = (r2.sweep, r2.v("q"))
    snm = snm_extract(c1, (c2[1], c2[0]))
    return ButterflyResult(config, c1, c2, snm)


def run_ncurve(pair: DevicePair, config: str, step: float = 0.005, opts: SimOptions = SimOptions()):
    """``(v_probe, i_probe)``; the current is the one the probe injects into q."""
    res = _sweep(pair, sram_netlist(pair, config, probe="q"), "vx", step, opts)
    # source current is positive flowing n+ -> n- inside the source, i.e. out of q
    return res.sweep, -res.i("vx")


def butterfly_gap(a: ButterflyResult, b: ButterflyResult) -> float:
    """RMS difference of the recorded outputs over both sweeps."""
    if not (np.array_equal(a.curve1[0], b.curve1[0]) and np.array_equal(a.curve2[0], b.curve2[0])):
        raise ValueError("butterfly results were swept on different grids")
    d = np.concatenate([a.curve1[1] - b.curve1[1], a.curve2[1] - b.curve2[1]])
    return float(np.sqrt(np.mean(d**2)))


def crossings_gap(ref_x, ref_i, x, i) -> float:
    """Largest distance between matched N-curve zero crossings; inf if the counts differ."""
    a, b = zero_crossings(ref_x, ref_i), zero_crossings(x, i)
    if len(a) != len(b):
        return float("inf")
    return float(np.max(np.abs(a - b))) if len(a) else 0.0


# --- NAND chain -----------------------------------------------------------

@dataclass(frozen=True)
class NandTiming:
    t_ramp: float = 1e-9
    ramp: float = 100e-12
    tstep: float = 1e-12
    tstop: float = 5e-9
    c_load: float = 1e-15


def nand_netlist(pair: DevicePair, timing: NandTiming = NandTiming(), ramp: bool = True) -> str:
    """Two cascaded NAND2 gates. Stage 1 has in1 high and in2 ramping 0 -> VDD
    (in2 drives the top nFET, whose drain is out1); stage 2 takes out1 and in1."""
    vdd = pair.vdd
    t1 = timing.t_ramp + timing.ramp
    v2 = f"pwl 0 0 {timing.t_ramp!r} 0 {t1!r} {vdd!r}" if ramp else "dc 0"
    return (
        "* two-stage NAND2 chain\n"
        f"vdd vdd 0 dc {vdd!r}\n"
        f"vin1 in1 0 dc {vdd!r}\n"
        f"vin2 in2 0 {v2}\n"
        "mp11 out1 in1 vdd p\n"
        "mp12 out1 in2 vdd p\n"
        "mn11 out1 in2 x1 n\n"
        "mn12 x1 in1 0 n\n"
        "mp21 out2 out1 vdd p\n"
        "mp22 out2 in1 vdd p\n"
        "mn21 out2 out1 x2 n\n"
        "mn22 x2 in1 0 n\n"
        f"cl out2 0 {timing.c_load!r}\n"
        + _models(pair)
        + f".tran {timing.tstep!r} {timing.tstop!r}\n.print v(in2) v(out1) v(out2)\n.end\n"
    )


def glitch_amplitude(t, v_out1, timing: NandTiming = NandTiming()) -> float:
    """Overshoot of out1 above its level at the start of the in2 ramp, within the ramp window.

    out1 starts high and its logic transition is downward, so any rise above the
    pre-ramp level is coupling noise; the downward logic swing is not counted.
    """
    t = np.asarray(t)
    v = np.asarray(v_out1)
    start = int(np.searchsorted(t, timing.t_ramp, side="right")) - 1
    window = (t >= timing.t_ramp) & (t <= timing.t_ramp + timing.ramp)
    return max(0.0, float(np.max(v[window] - v[start])))


def run_nand_transient(pair: DevicePair, timing: NandTiming = NandTiming(), ramp: bool = True, opts: SimOptions = SimOptions()):
    """Transient result of the NAND chain and the first-stage glitch amplitude."""
    res = transient(_circuit(nand_netlist(pair, timing, ramp), pair), timing.tstep, timing.tstop, opts)
    return res, glitch_amplitude(res.sweep, res.v("out1"), timing)
