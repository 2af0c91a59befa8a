"""Analytic reference devices used as the data source for surrogate training.

Two closed-form models are provided:

* :class:`RefFinFET` -- a symmetric EKV-style FinFET with a softplus charge model.
* :class:`RefTFET` -- a tunnel FET with a gate-controlled band-to-band tunneling
  current in forward bias and a gate-independent p-i-n diode current in reverse.

Every evaluator works on scalars or numpy arrays (broadcast over the three
terminal voltages) and exposes ``evaluate``, ``jacobian`` and ``linearize``.
Currents flow *into* the terminals; the gate current is identically zero so
``i_s = -i_d`` and the terminal charges sum to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Protocol

import numpy as np
from scipy.special import expit

VT_THERMAL = 0.0259
_LIMEXP_MAX = 80.0


@dataclass(frozen=True)
class BiasPoint:
    vg: float
    vd: float
    vs: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.vg, self.vd, self.vs])):
            raise ValueError(f"non-finite bias {self}")

    def swapped(self) -> "BiasPoint":
        return BiasPoint(self.vg, self.vs, self.vd)

    def negated(self) -> "BiasPoint":
        return BiasPoint(-self.vg, -self.vd, -self.vs)


@dataclass(frozen=True)
class DeviceResponse:
    """Terminal currents (A, into the device) and terminal charges (C)."""

    i_d: np.ndarray
    i_g: np.ndarray
    i_s: np.ndarray
    q_g: np.ndarray
    q_d: np.ndarray
    q_s: np.ndarray

    @classmethod
    def from_id_charges(cls, i_d, q_g, q_d) -> "DeviceResponse":
        i_d = np.asarray(i_d, dtype=float)
        q_g = np.asarray(q_g, dtype=float)
        q_d = np.asarray(q_d, dtype=float)
        return cls(i_d, np.zeros_like(i_d), -i_d, q_g, q_d, -(q_g + q_d))

    @property
    def currents(self) -> np.ndarray:
        """Stacked currents, shape ``(..., 3)`` ordered (d, g, s)."""
        return np.stack([self.i_d, self.i_g, self.i_s], axis=-1)

    @property
    def charges(self) -> np.ndarray:
        """Stacked charges, shape ``(..., 3)`` ordered (g, d, s)."""
        return np.stack([self.q_g, self.q_d, self.q_s], axis=-1)

    def negated(self) -> "DeviceResponse":
        return DeviceResponse(*(-np.asarray(getattr(self, f.name)) for f in fields(self)))


@dataclass(frozen=True)
class DeviceJacobian:
    """Partial derivatives w.r.t. (vg, vd, vs).

    ``d_i`` rows are (i_d, i_g, i_s); ``d_q`` rows are (q_g, q_d, q_s).
    Both have shape ``(..., 3, 3)``.
    """

    d_i: np.ndarray
    d_q: np.ndarray

    @classmethod
    def from_rows(cls, d_id, d_qg, d_qd) -> "DeviceJacobian":
        d_id = np.asarray(d_id, dtype=float)
        d_qg = np.asarray(d_qg, dtype=float)
        d_qd = np.asarray(d_qd, dtype=float)
        d_i = np.stack([d_id, np.zeros_like(d_id), -d_id], axis=-2)
        d_q = np.stack([d_qg, d_qd, -(d_qg + d_qd)], axis=-2)
        return cls(d_i, d_q)


class Device(Protocol):
    def evaluate(self, vg, vd, vs) -> DeviceResponse: ...

    def jacobian(self, vg, vd, vs) -> DeviceJacobian: ...

    def linearize(self, vg, vd, vs) -> tuple[DeviceResponse, DeviceJacobian]: ...


def _softplus(x):
    return np.logaddexp(0.0, x)


def _smooth_relu(x, vt):
    """2*vt*ln(1 + exp(x / (2*vt))) and its derivative."""
    return 2.0 * vt * _softplus(x / (2.0 * vt)), expit(x / (2.0 * vt))


def _limexp(x):
    """exp(x) continued linearly above ``_LIMEXP_MAX`` to keep Newton finite."""
    x = np.asarray(x, dtype=float)
    xc = np.minimum(x, _LIMEXP_MAX)
    ex = np.exp(xc)
    val = np.where(x > _LIMEXP_MAX, ex * (1.0 + x - _LIMEXP_MAX), ex)
    return val, ex


def _as_arrays(vg, vd, vs):
    return np.broadcast_arrays(
        np.asarray(vg, dtype=float), np.asarray(vd, dtype=float), np.asarray(vs, dtype=float)
    )


@dataclass(frozen=True)
class RefFinFETParams:
    vth: float = 0.3
    n_slope: float = 1.2
    vt_thermal: float = VT_THERMAL
    i_spec: float = 1e-6
    c_gate: float = 1e-15

    def __post_init__(self):
        if not (self.i_spec > 0 and self.c_gate > 0 and self.n_slope >= 1 and self.vt_thermal > 0):
            raise ValueError(f"invalid FinFET parameters {self}")


@dataclass(frozen=True)
class RefTFETParams:
    a_kane: float = 1e-4
    b_kane: float = 1.5
    vth_tun: float = 0.1
    i_diode: float = 1e-12
    n_diode: float = 2.0
    c_gd: float = 2e-15
    c_gs: float = 0.5e-15

    def __post_init__(self):
        # c_gd = 0 is allowed: it is the coupling-glitch ablation.
        if not (self.a_kane > 0 and self.b_kane > 0 and self.i_diode > 0 and self.n_diode > 0):
            raise ValueError(f"invalid TFET parameters {self}")
        if self.c_gd < 0 or self.c_gs < 0:
            raise ValueError(f"negative TFET capacitance {self}")


@dataclass(frozen=True)
class RefFinFET:
    """Symmetric EKV-style n-FinFET with the bulk at 0 V."""

    params: RefFinFETParams = field(default_factory=RefFinFETParams)

    def linearize(self, vg, vd, vs):
        p = self.params
        vg, vd, vs = _as_arrays(vg, vd, vs)
        vt = p.vt_thermal
        vp = (vg - p.vth) / p.n_slope
        xs = (vp - vs) / vt
        xd = (vp - vd) / vt
        ls, ld = _softplus(xs / 2.0), _softplus(xd / 2.0)
        i_d = p.i_spec * (ls * ls - ld * ld)
        # F'(x) = ln(1+e^(x/2)) * sigmoid(x/2)
        fs = ls * expit(xs / 2.0)
        fd = ld * expit(xd / 2.0)
        d_id = np.stack(
            [p.i_spec / (p.n_slope * vt) * (fs - fd), p.i_spec / vt * fd, -p.i_spec / vt * fs],
            axis=-1,
        )

        hs, ss = _smooth_relu(vg - p.vth - vs, vt)
        hd, sd = _smooth_relu(vg - p.vth - vd, vt)
        c = p.c_gate
        q_g = c * (hs + hd) / 2.0
        q_d = -c * (0.4 * hd + 0.1 * hs)
        d_qg = np.stack([c * (ss + sd) / 2.0, -c * sd / 2.0, -c * ss / 2.0], axis=-1)
        d_qd = np.stack([-c * (0.4 * sd + 0.1 * ss), 0.4 * c * sd, 0.1 * c * ss], axis=-1)
        return DeviceResponse.from_id_charges(i_d, q_g, q_d), DeviceJacobian.from_rows(d_id, d_qg, d_qd)

    def evaluate(self, vg, vd, vs) -> DeviceResponse:
        return self.linearize(vg, vd, vs)[0]

    def jacobian(self, vg, vd, vs) -> DeviceJacobian:
        return self.linearize(vg, vd, vs)[1]


def _tfet_saturation(u, vt):
    """Drain-bias factor of the tunneling current and its derivative.

    Forward (u >= 0): 1 - exp(-u/vt). Reverse: (u/vt) exp(u/vt), which vanishes
    for strong reverse bias so the diode dominates. Value and slope match at 0.
    """
    up = np.maximum(u, 0.0) / vt
    un = np.minimum(u, 0.0) / vt
    ep, en = np.exp(-up), np.exp(un)
    s = np.where(u >= 0, -np.expm1(-up), un * en)
    ds = np.where(u >= 0, ep, (1.0 + un) * en) / vt
    return s, ds


@dataclass(frozen=True)
class RefTFET:
    """n-type TFET: gate-controlled tunneling plus reverse p-i-n diode."""

    params: RefTFETParams = field(default_factory=RefTFETParams)

    def linearize(self, vg, vd, vs):
        p = self.params
        vg, vd, vs = _as_arrays(vg, vd, vs)
        vt = VT_THERMAL
        vov, dvov = _smooth_relu(vg - vs - p.vth_tun, vt)
        denom = vov + 1e-6
        barrier = np.exp(-p.b_kane / denom)
        g = p.a_kane * vov * vov * barrier
        dg = p.a_kane * barrier * (2.0 * vov + vov * vov * p.b_kane / (denom * denom))
        u = vd - vs
        s, ds = _tfet_saturation(u, vt)
        nvt = p.n_diode * vt
        ex, dex = _limexp(-u / nvt)
        i_pin = -p.i_diode * (ex - 1.0)
        di_pin = p.i_diode * dex / nvt  # d i_pin / du
        i_d = g * s + i_pin

        dvg = dg * dvov * s
        dvd = g * ds + di_pin
        d_id = np.stack([dvg, dvd, -dvg - dvd], axis=-1)

        cgd, cgs = p.c_gd, p.c_gs
        q_g = cgd * (vg - vd) + cgs * (vg - vs)
        q_d = -cgd * (vg - vd)
        ones = np.ones_like(vg)
        d_qg = np.stack([(cgd + cgs) * ones, -cgd * ones, -cgs * ones], axis=-1)
        d_qd = np.stack([-cgd * ones, cgd * ones, 0.0 * ones], axis=-1)
        return DeviceResponse.from_id_charges(i_d, q_g, q_d), DeviceJacobian.from_rows(d_id, d_qg, d_qd)

    def evaluate(self, vg, vd, vs) -> DeviceResponse:
        return self.linearize(vg, vd, vs)[0]

    def jacobian(self, vg, vd, vs) -> DeviceJacobian:
        return self.linearize(vg, vd, vs)[1]


@dataclass(frozen=True)
class MirroredDevice:
    """p-type counterpart of an n-type evaluator.

    I_p(v) = -I_n(v_bulk - v) and Q_p(v) = -Q_n(v_bulk - v). With ``v_bulk=0``
    this is the plain negation mirror; circuits put the p bulk at the supply.
    The Jacobian is unchanged since both voltages and outputs flip sign.
    """

    base: Device
    v_bulk: float = 0.0

    def linearize(self, vg, vd, vs):
        vb = self.v_bulk
        vg, vd, vs = _as_arrays(vg, vd, vs)
        resp, jac = self.base.linearize(vb - vg, vb - vd, vb - vs)
        return resp.negated(), jac

    def evaluate(self, vg, vd, vs) -> DeviceResponse:
        return self.linearize(vg, vd, vs)[0]

    def jacobian(self, vg, vd, vs) -> DeviceJacobian:
        return self.linearize(vg, vd, vs)[1]


def mirror_p(eval_n: Device, v_bulk: float = 0.0) -> MirroredDevice:
    return MirroredDevice(eval_n, v_bulk)


def eval_nfinfet(p: RefFinFETParams, b: BiasPoint) -> DeviceResponse:
    return RefFinFET(p).evaluate(b.vg, b.vd, b.vs)


def eval_ntfet(p: RefTFETParams, b: BiasPoint) -> DeviceResponse:
    return RefTFET(p).evaluate(b.vg, b.vd, b.vs)


def ref_jacobian(evaluator: Device, b: BiasPoint) -> DeviceJacobian:
    return evaluator.jacobian(b.vg, b.vd, b.vs)


REFERENCE_KINDS = ("nfin_ref", "pfin_ref", "ntfet_ref", "ptfet_ref")


def make_reference(kind: str, v_bulk: float = 0.0, **overrides) -> Device:
    """Build a reference device by netlist kind, e.g. ``make_reference("ptfet_ref", c_gd=0)``."""
    kind = kind.lower()
    if kind in ("nfin_ref", "pfin_ref"):
        base = RefFinFET(replace(RefFinFETParams(), **overrides))
    elif kind in ("ntfet_ref", "ptfet_ref"):
        base = RefTFET(replace(RefTFETParams(), **overrides))
    else:
        raise ValueError(f"unknown reference device kind {kind!r}")
    return mirror_p(base, v_bulk) if kind.startswith("p") else base
