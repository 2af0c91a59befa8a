"""Modified nodal analysis: unknowns are non-ground node voltages followed by
one branch current per voltage source.

The residual is "current leaving each node" (KCL rows) plus the source branch
equations ``v(n+) - v(n-) - V = 0``. Device currents flow into their terminals,
so they add to the residual of the node they leave.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..refdev import REFERENCE_KINDS, Device, make_reference
from ..surrogate import load_surrogate
from .netlist import Capacitor, Device3, ModelCard, Netlist, Resistor, VSource

_REF_OPTIONS = ("polarity", "vbulk", "blend")


def resolve_model(card: ModelCard, base_dir: Path | None = None, cache: dict | None = None) -> Device:
    opts = dict(card.options)
    v_bulk = float(opts.pop("vbulk", 0.0))
    if card.kind in REFERENCE_KINDS:
        overrides = {k: v for k, v in opts.items() if k not in _REF_OPTIONS}
        try:
            return make_reference(card.kind, v_bulk=v_bulk, **overrides)
        except TypeError as exc:
            raise ValueError(f"model {card.name}: bad parameter override ({exc})") from exc
    paths = [Path(f) if Path(f).is_absolute() or base_dir is None else Path(base_dir) / f for f in card.files]
    key = (tuple(str(p) for p in paths), opts.get("polarity"), v_bulk, opts.get("blend", 2e-3))
    if cache is not None and key in cache:
        return cache[key]
    dev = load_surrogate(paths, polarity=opts.get("polarity"), v_bulk=v_bulk, blend_halfwidth=float(opts.get("blend", 2e-3)))
    if cache is not None:
        cache[key] = dev
    return dev


def stamp_device(model: Device, vg, vd, vs):
    """Linearized companion of a device: terminal currents (d, g, s) and their
    3x3 conductance block, plus charges (g, d, s) and the capacitance block.
    Reference and surrogate devices go through the same call."""
    resp, jac = model.linearize(vg, vd, vs)
    return resp.currents, jac.d_i, resp.charges, jac.d_q


@dataclass
class _DeviceGroup:
    model: Device
    names: list
    d: np.ndarray
    g: np.ndarray
    s: np.ndarray


class Circuit:
    """Compiled netlist ready for Newton iterations."""

    def __init__(self, netlist: Netlist, base_dir=None, devices: dict | None = None, model_cache: dict | None = None):
        self.netlist = netlist
        self.node_names = netlist.nodes
        self.node_index = {n: k for k, n in enumerate(self.node_names)}
        self.sources = netlist.sources
        self.source_index = {s.name: k for k, s in enumerate(self.sources)}
        self.n_nodes = len(self.node_names)
        self.size = self.n_nodes + len(self.sources)
        self.ground = self.size  # index of the always-zero slot in extended vectors

        n = self.size + 1
        G = np.zeros((n, n))
        C = np.zeros((n, n))
        for e in netlist.elements:
            if isinstance(e, Resistor):
                self._stamp_pair(G, e.n1, e.n2, 1.0 / e.value)
            elif isinstance(e, Capacitor):
                self._stamp_pair(C, e.n1, e.n2, e.value)
            elif isinstance(e, VSource):
                row = self.n_nodes + self.source_index[e.name]
                p, m = self._idx(e.npos), self._idx(e.nneg)
                G[p, row] += 1.0
                G[m, row] -= 1.0
                G[row, p] += 1.0
                G[row, m] -= 1.0
        self.G_lin = G[:-1, :-1].copy()
        self.C_lin = C[:-1, :-1].copy()
        self.branch_rows = np.arange(self.n_nodes, self.size)

        devices = dict(devices or {})
        cache = {} if model_cache is None else model_cache
        groups: dict[str, _DeviceGroup] = {}
        for e in netlist.elements:
            if not isinstance(e, Device3):
                continue
            if e.model not in devices:
                devices[e.model] = resolve_model(netlist.models[e.model], base_dir, cache)
            grp = groups.setdefault(e.model, _DeviceGroup(devices[e.model], [], [], [], []))
            grp.names.append(e.name)
            grp.d.append(self._idx(e.d))
            grp.g.append(self._idx(e.g))
            grp.s.append(self._idx(e.s))
        self.groups = []
        for grp in groups.values():
            grp.d, grp.g, grp.s = (np.array(a, dtype=int) for a in (grp.d, grp.g, grp.s))
            self.groups.append(grp)
        self.devices = devices

    def _idx(self, node: str) -> int:
        return self.ground if node == "0" else self.node_index[node]

    def _stamp_pair(self, M, a, b, value):
        i, j = self._idx(a), self._idx(b)
        M[i, i] += value
        M[j, j] += value
        M[i, j] -= value
        M[j, i] -= value

    def source_vector(self, t: float = 0.0, scale: float = 1.0, overrides: dict | None = None) -> np.ndarray:
        b = np.zeros(self.size)
        for k, src in enumerate(self.sources):
            v = overrides[src.name] if overrides and src.name in overrides else src.value(t)
            b[self.n_nodes + k] = scale * v
        return b

    def assemble(self, x: np.ndarray, b: np.ndarray, gmin: float = 0.0, with_charge: bool = False):
        """Static residual and Jacobian at ``x``; optionally node charges and dQ/dx."""
        n = self.size + 1
        xe = np.append(x, 0.0)
        f = self.G_lin @ x - b
        J = self.G_lin.copy()
        fe = np.zeros(n)
        Je = np.zeros((n, n))
        qe = np.zeros(n) if with_charge else None
        Qe = np.zeros((n, n)) if with_charge else None
        for grp in self.groups:
            cur, d_i, chg, d_q = stamp_device(grp.model, xe[grp.g], xe[grp.d], xe[grp.s])
            # terminal order: currents (d, g, s), charges (g, d, s), columns (vg, vd, vs)
            i_rows = np.stack([grp.d, grp.g, grp.s], axis=1)
            q_rows = np.stack([grp.g, grp.d, grp.s], axis=1)
            cols = np.stack([grp.g, grp.d, grp.s], axis=1)
            np.add.at(fe, i_rows, cur)
            np.add.at(Je, (i_rows[:, :, None], cols[:, None, :]), d_i)
            if with_charge:
                np.add.at(qe, q_rows, chg)
                np.add.at(Qe, (q_rows[:, :, None], cols[:, None, :]), d_q)
        f += fe[:-1]
        J += Je[:-1, :-1]
        if gmin > 0:
            k = np.arange(self.n_nodes)
            f[k] += gmin * x[k]
            J[k, k] += gmin
        if not with_charge:
            return f, J
        q = self.C_lin @ x + qe[:-1]
        Q = self.C_lin + Qe[:-1, :-1]
        return f, J, q, Q
