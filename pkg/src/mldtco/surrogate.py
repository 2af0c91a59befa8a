"""Trained networks wrapped as three-terminal device models.

A :class:`SurrogateDevice` has the same ``evaluate``/``jacobian``/``linearize``
interface as the reference devices, so the simulator can stamp either.

Modes
-----
``symmetric_swap``
    One net trained on vd >= vs. Points with vd < vs are evaluated at the
    swapped bias and mapped back (i_d -> -i_d, q_d <-> q_s). Because the current
    target carries the odd drain factor, i_d vanishes at vd = vs and the swap
    antisymmetry is exact. The drain charge gets a seam correction so that
    q_d = q_s = -q_g/2 at vd = vs, which keeps the charges continuous.
``two_region``
    Separate forward (vd >= vs) and reverse nets, linearly blended in physical
    units over ``|vd - vs| < blend_halfwidth``.
``direct``
    One net used as-is over the whole bias box.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mlp
from .dataset import Dataset, TransformDescriptor, drain_factor
from .refdev import DeviceJacobian, DeviceResponse, _as_arrays

log = logging.getLogger(__name__)

MODES = ("symmetric_swap", "two_region", "direct")


@dataclass(frozen=True)
class NetModel:
    """One trained net plus the metadata needed to evaluate it in volts."""

    params: mlp.MLPParams
    transform: TransformDescriptor
    input_offset: np.ndarray
    input_half_range: np.ndarray
    region_tag: str = "unrestricted"
    polarity: str = "n"

    @classmethod
    def load(cls, path) -> "NetModel":
        params, meta = mlp.load_model(path)
        return cls(
            params,
            TransformDescriptor(meta.i_ref, meta.q_ref, meta.v_drain),
            np.asarray(meta.input_offset, dtype=float),
            np.asarray(meta.input_half_range, dtype=float),
            meta.region_tag,
            meta.polarity,
        )

    @classmethod
    def from_dataset(cls, params: mlp.MLPParams, ds: Dataset, polarity: str = "n") -> "NetModel":
        return cls(params, ds.transform, ds.input_offset, ds.input_half_range, ds.region_tag, polarity)

    def meta(self) -> mlp.ModelMeta:
        t = self.transform
        return mlp.ModelMeta(
            i_ref=t.i_ref,
            q_ref=t.q_ref,
            v_drain=t.v_drain,
            input_offset=tuple(float(v) for v in self.input_offset),
            input_half_range=tuple(float(v) for v in self.input_half_range),
            region_tag=self.region_tag,
            polarity=self.polarity,
        )

    def save(self, path) -> None:
        mlp.save_model(self.params, self.meta(), path)

    def outputs(self, bias: np.ndarray):
        """Transformed outputs ``(N, 3)`` and their Jacobian w.r.t. volts ``(N, 3, 3)``."""
        x = (bias - self.input_offset) / self.input_half_range
        y, jac = mlp.forward_with_jacobian(self.params, x)
        return y, jac / self.input_half_range

    def outside_box(self, bias: np.ndarray, tol: float = 1e-6) -> bool:
        return bool(np.any(np.abs(bias - self.input_offset) > self.input_half_range + tol))


def net_physical(net: NetModel, bias: np.ndarray):
    """Physical (i_d, q_g, q_d) and Jacobian rows, no symmetry handling."""
    t = net.transform
    y, jy = net.outputs(bias)
    u = bias[:, 1] - bias[:, 2]
    f, df = drain_factor(u, t.v_drain)
    sh, ch = np.sinh(y[:, 0]), np.cosh(y[:, 0])
    du = np.zeros_like(bias)
    du[:, 1], du[:, 2] = 1.0, -1.0
    i_d = t.i_ref * sh * f
    d_id = t.i_ref * (ch * f)[:, None] * jy[:, 0, :] + t.i_ref * (sh * df)[:, None] * du
    out = np.stack([i_d, t.q_ref * y[:, 1], t.q_ref * y[:, 2]], axis=1)
    jac = np.stack([d_id, t.q_ref * jy[:, 1, :], t.q_ref * jy[:, 2, :]], axis=1)
    return out, jac, y, jy


@dataclass(frozen=True)
class SurrogateDevice:
    nets: tuple[NetModel, ...]
    mode: str = "symmetric_swap"
    polarity: str = "n"
    v_bulk: float = 0.0
    blend_halfwidth: float = 2e-3
    _warned: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown surrogate mode {self.mode!r}")
        if self.polarity not in ("n", "p"):
            raise ValueError(f"polarity must be 'n' or 'p', got {self.polarity!r}")
        need = 2 if self.mode == "two_region" else 1
        if len(self.nets) != need:
            raise ValueError(f"mode {self.mode} needs {need} net(s), got {len(self.nets)}")
        if self.mode == "two_region":
            a, b = self.nets
            if a.transform != b.transform or not (
                np.array_equal(a.input_offset, b.input_offset) and np.array_equal(a.input_half_range, b.input_half_range)
            ):
                raise ValueError("two-region nets must share transform and input normalization")
        if self.blend_halfwidth < 0:
            raise ValueError("blend_halfwidth must be >= 0")

    def linearize(self, vg, vd, vs):
        vg, vd, vs = _as_arrays(vg, vd, vs)
        shape = vg.shape
        bias = np.stack([vg.ravel(), vd.ravel(), vs.ravel()], axis=1)
        if self.polarity == "p":
            bias = self.v_bulk - bias
        self._check_box(bias)
        if self.mode == "symmetric_swap":
            out, jac = self._swap(bias)
        elif self.mode == "two_region":
            out, jac = self._two_region(bias)
        else:
            out, jac, _, _ = net_physical(self.nets[0], bias)
        resp = DeviceResponse.from_id_charges(*(out[:, k].reshape(shape) for k in range(3)))
        jac = DeviceJacobian.from_rows(*(jac[:, k, :].reshape(shape + (3,)) for k in range(3)))
        if self.polarity == "p":
            resp = resp.negated()
        return resp, jac

    def evaluate(self, vg, vd, vs) -> DeviceResponse:
        return self.linearize(vg, vd, vs)[0]

    def jacobian(self, vg, vd, vs) -> DeviceJacobian:
        return self.linearize(vg, vd, vs)[1]

    def _check_box(self, bias):
        if not self._warned and any(net.outside_box(bias) for net in self.nets):
            self._warned.append(True)
            log.warning("surrogate evaluated outside its training box (extrapolating)")

    def _swap(self, bias):
        net = self.nets[0]
        q_ref = net.transform.q_ref
        vg, vd, vs = bias.T
        swap = vd < vs
        cd = np.where(swap, vs, vd)
        cs = np.where(swap, vd, vs)
        canon = np.stack([vg, cd, cs], axis=1)
        seam = np.stack([vg, cs, cs], axis=1)
        out, jac, _, _ = net_physical(net, canon)
        ys, js = net.outputs(seam)
        # seam Jacobian in canonical coordinates (vg, cd, cs)
        js_c = np.zeros_like(js)
        js_c[:, :, 0] = js[:, :, 0]
        js_c[:, :, 2] = js[:, :, 1] + js[:, :, 2]
        out[:, 2] -= q_ref * (0.5 * ys[:, 1] + ys[:, 2])
        jac[:, 2, :] -= q_ref * (0.5 * js_c[:, 1, :] + js_c[:, 2, :])

        if np.any(swap):
            perm = [0, 2, 1]
            i_d, q_g, q_d = out.T
            d_id, d_qg, d_qd = jac[:, 0, :], jac[:, 1, :], jac[:, 2, :]
            out_sw = np.stack([-i_d, q_g, -(q_g + q_d)], axis=1)
            jac_sw = np.stack([-d_id, d_qg, -(d_qg + d_qd)], axis=1)[:, :, perm]
            out = np.where(swap[:, None], out_sw, out)
            jac = np.where(swap[:, None, None], jac_sw, jac)
        return out, jac

    def _two_region(self, bias):
        fwd, rev = self.nets
        if fwd.region_tag == "tfet_rev":
            fwd, rev = rev, fwd
        of, jf, _, _ = net_physical(fwd, bias)
        orv, jr, _, _ = net_physical(rev, bias)
        u = bias[:, 1] - bias[:, 2]
        hw = self.blend_halfwidth
        if hw > 0:
            w = np.clip((u + hw) / (2.0 * hw), 0.0, 1.0)
            dw = np.where(np.abs(u) < hw, 1.0 / (2.0 * hw), 0.0)
        else:
            w = (u >= 0).astype(float)
            dw = np.zeros_like(u)
        grad_w = np.stack([np.zeros_like(u), dw, -dw], axis=1)
        out = w[:, None] * of + (1.0 - w)[:, None] * orv
        jac = (
            w[:, None, None] * jf
            + (1.0 - w)[:, None, None] * jr
            + (of - orv)[:, :, None] * grad_w[:, None, :]
        )
        return out, jac


def from_nets(nets, polarity: str | None = None, v_bulk: float = 0.0, blend_halfwidth: float = 2e-3) -> SurrogateDevice:
    """Assemble a device from nets, picking the mode from their region tags."""
    nets = tuple(nets)
    tags = sorted(n.region_tag for n in nets)
    if tags == ["symmetric_canonical"]:
        mode = "symmetric_swap"
    elif tags == ["tfet_fwd", "tfet_rev"]:
        mode = "two_region"
        nets = tuple(sorted(nets, key=lambda n: n.region_tag))
    elif len(nets) == 1:
        mode = "direct"
    else:
        raise ValueError(f"cannot combine nets with region tags {tags}")
    return SurrogateDevice(nets, mode, polarity or nets[0].polarity, v_bulk, blend_halfwidth)


def load_surrogate(paths, polarity: str | None = None, v_bulk: float = 0.0, blend_halfwidth: float = 2e-3) -> SurrogateDevice:
    if isinstance(paths, (str, Path)):
        paths = [paths]
    return from_nets([NetModel.load(p) for p in paths], polarity, v_bulk, blend_halfwidth)


def train_net(ds: Dataset, spec: mlp.MLPSpec = mlp.MLPSpec(), cfg: mlp.TrainConfig = mlp.TrainConfig(), polarity: str = "n"):
    """Fit one net to a dataset; returns ``(NetModel, loss_history)``."""
    p, hist = mlp.fit(mlp.init(spec, cfg.seed), ds.inputs, ds.targets, cfg)
    return NetModel.from_dataset(p, ds, polarity), hist
