"""Newton-Raphson DC operating point, DC sweep and backward-Euler transient."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import Circuit
from .netlist import DcAnalysis, Netlist, OpAnalysis, PrintItem, TranAnalysis

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimOptions:
    abstol: float = 1e-12
    reltol: float = 1e-6
    vntol: float = 1e-6
    max_newton_iters: int = 100
    gmin: float = 1e-12
    damping_clip: float = 0.3
    gmin_steps: int = 10
    source_steps: int = 10

    def __post_init__(self):
        for name in ("abstol", "reltol", "vntol", "max_newton_iters", "gmin", "damping_clip", "gmin_steps", "source_steps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SimOptions.{name} must be positive")


@dataclass
class SimResult:
    """Solved waveforms; one row per operating point, sweep value or time step."""

    kind: str  # "op", "dc" or "tran"
    sweep_name: str
    sweep: np.ndarray
    node_names: list
    source_names: list
    voltages: np.ndarray  # (rows, nodes)
    currents: np.ndarray  # (rows, sources)
    iterations: list = field(default_factory=list)
    prints: list = field(default_factory=list)

    def v(self, node: str) -> np.ndarray:
        node = node.lower()
        if node == "0":
            return np.zeros(len(self.sweep))
        return self.voltages[:, self.node_names.index(node)]

    def i(self, source: str) -> np.ndarray:
        return self.currents[:, self.source_names.index(source.lower())]

    def column(self, item: PrintItem) -> np.ndarray:
        return self.v(item.target) if item.kind == "v" else self.i(item.target)

    def table(self, prints=None):
        items = list(prints or self.prints) or (
            [PrintItem("v", n) for n in self.node_names] + [PrintItem("i", s) for s in self.source_names]
        )
        header = [self.sweep_name] + [str(p) for p in items]
        data = np.column_stack([self.sweep] + [self.column(p) for p in items])
        return header, data

    def to_csv(self, path, prints=None) -> None:
        header, data = self.table(prints)
        lines = [",".join(header)] + [",".join(format(v, ".17g") for v in row) for row in data]
        Path(path).write_text("\n".join(lines) + "\n")


def newton(circuit: Circuit, x0, b, opts: SimOptions, gmin: float = 0.0, h: float | None = None, q_prev=None):
    """Damped Newton. With ``h`` set, solves the backward-Euler step
    ``f(x) + (q(x) - q_prev)/h = 0``. Returns ``(x, iterations)``.

    Convergence is declared when the update computed at the current iterate is
    below ``vntol + reltol*|v|`` for every node and the KCL residual is below
    ``abstol``; the (tiny) final update is still applied. ``iterations`` counts
    the updates taken before that point, so linear circuits report 1.
    """
    x = np.array(x0, dtype=float)
    nn = circuit.n_nodes
    for it in range(opts.max_newton_iters + 1):
        if h is None:
            f, J = circuit.assemble(x, b, gmin)
        else:
            f, J, q, Q = circuit.assemble(x, b, gmin, with_charge=True)
            f = f + (q - q_prev) / h
            J = J + Q / h
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(J)):
            raise ConvergenceError(f"non-finite residual at iteration {it}")
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian at iteration {it}") from exc
        if not np.all(np.isfinite(dx)):
            raise ConvergenceError(f"non-finite Newton update at iteration {it}")
        dv = dx[:nn]
        v = x[:nn]
        di = dx[nn:]
        small_v = np.all(np.abs(dv) <= opts.vntol + opts.reltol * np.abs(v))
        small_i = np.all(np.abs(di) <= opts.abstol + opts.reltol * np.abs(x[nn:]))
        kcl_ok = np.all(np.abs(f[:nn]) <= opts.abstol)
        branch_ok = np.all(np.abs(f[nn:]) <= opts.vntol)
        if small_v and small_i and kcl_ok and branch_ok:
            return x + dx, it
        if it == opts.max_newton_iters:
            break
        if circuit.groups:
            # damping only matters for nonlinear circuits; linear ones take the full step
            dx[:nn] = np.clip(dv, -opts.damping_clip, opts.damping_clip)
        x = x + dx
    worst = int(np.argmax(np.abs(f[:nn]))) if nn else 0
    raise ConvergenceError(
        f"Newton did not converge in {opts.max_newton_iters} iterations "
        f"(max KCL residual {np.max(np.abs(f[:nn])) if nn else 0:.3e} A at node "
        f"{circuit.node_names[worst] if nn else '-'}, last max |dv| {np.max(np.abs(dv)) if nn else 0:.3e} V)"
    )


MAX_BISECTIONS = 8


def _continuation(solve_at, levels, x):
    """Walk a homotopy parameter through ``levels``; a failed step is bisected
    (at most ``MAX_BISECTIONS`` deep) before giving up. Returns ``(x, iterations)``."""
    total = 0
    prev = None
    pending = list(levels)
    depth = {}
    while pending:
        level = pending[0]
        try:
            x, n = solve_at(level, x)
        except ConvergenceError:
            d = depth.get(level, 0)
            if prev is None or d >= MAX_BISECTIONS:
                raise
            mid = 0.5 * (prev + level)
            depth[mid] = d + 1
            depth[level] = d + 1
            pending.insert(0, mid)
            continue
        total += n
        prev = pending.pop(0)
    return x, total


def _solve_op(circuit: Circuit, opts: SimOptions, x0=None, t: float = 0.0, overrides=None):
    """Operating point with gmin stepping and source stepping as fallbacks."""
    b = circuit.source_vector(t, 1.0, overrides)
    start = np.zeros(circuit.size) if x0 is None else np.asarray(x0, dtype=float)
    try:
        return newton(circuit, start, b, opts)
    except ConvergenceError as exc:
        first = exc
    log.debug("plain Newton failed (%s); trying gmin stepping", first)
    try:
        # stepped in log10(gmin); the last level (None) removes gmin entirely
        logs = list(np.linspace(-3.0, np.log10(opts.gmin), opts.gmin_steps))
        x, total = _continuation(lambda lg, x: newton(circuit, x, b, opts, gmin=10.0**lg), logs, start)
        x, n = newton(circuit, x, b, opts)
        return x, total + n
    except ConvergenceError as exc:
        log.debug("gmin stepping failed (%s); trying source stepping", exc)
    try:
        alphas = list(np.linspace(0.0, 1.0, opts.source_steps + 1))
        return _continuation(
            lambda a, x: newton(circuit, x, circuit.source_vector(t, a, overrides), opts),
            alphas,
            np.zeros(circuit.size),
        )
    except ConvergenceError as exc:
        raise ConvergenceError(f"operating point failed after gmin and source stepping: {first}; last: {exc}") from exc


def _result(circuit, kind, sweep_name, sweep, xs, iters, prints):
    xs = np.atleast_2d(np.asarray(xs))
    return SimResult(
        kind,
        sweep_name,
        np.asarray(sweep, dtype=float),
        list(circuit.node_names),
        [s.name for s in circuit.sources],
        xs[:, : circuit.n_nodes],
        xs[:, circuit.n_nodes:],
        list(iters),
        list(prints),
    )


def _circuit(nl_or_circuit, base_dir=None) -> Circuit:
    return nl_or_circuit if isinstance(nl_or_circuit, Circuit) else Circuit(nl_or_circuit, base_dir)


def dc_operating_point(nl, opts: SimOptions = SimOptions(), x0=None) -> SimResult:
    circuit = _circuit(nl)
    x, n = _solve_op(circuit, opts, x0)
    return _result(circuit, "op", "op", [0.0], [x], [n], circuit.netlist.prints)


def sweep_values(start: float, stop: float, step: float) -> np.ndarray:
    n = int(round((stop - start) / step))
    if n < 0:
        raise ValueError("sweep step has the wrong sign")
    return start + step * np.arange(n + 1)


def dc_sweep(nl, source_name: str, start: float, stop: float, step: float, opts: SimOptions = SimOptions()) -> SimResult:
    """Operating point at each source value, warm-started from the previous one."""
    circuit = _circuit(nl)
    source_name = source_name.lower()
    if source_name not in circuit.source_index:
        raise ValueError(f"no voltage source named {source_name!r}")
    values = sweep_values(start, stop, step)
    xs, iters = [], []
    x = None
    for val in values:
        ov = {source_name: float(val)}
        try:
            if x is not None:
                try:
                    x, n = newton(circuit, x, circuit.source_vector(0.0, 1.0, ov), opts)
                except ConvergenceError:
                    x, n = _solve_op(circuit, opts, x, overrides=ov)
            else:
                x, n = _solve_op(circuit, opts, overrides=ov)
        except ConvergenceError as exc:
            raise ConvergenceError(f"dc sweep of {source_name} failed at {val:.6g}: {exc}") from exc
        xs.append(x)
        iters.append(n)
    return _result(circuit, "dc", source_name, values, xs, iters, circuit.netlist.prints)


def transient(nl, tstep: float, tstop: float, opts: SimOptions = SimOptions()) -> SimResult:
    """Fixed-step backward Euler from the t=0 operating point."""
    if not (tstep > 0 and tstop >= tstep):
        raise ValueError("transient needs 0 < tstep <= tstop")
    circuit = _circuit(nl)
    n_steps = int(round(tstop / tstep))
    x, n = _solve_op(circuit, opts, t=0.0)
    _, _, q, _ = circuit.assemble(x, circuit.source_vector(0.0), with_charge=True)
    xs, iters = [x], [n]
    times = tstep * np.arange(n_steps + 1)
    for t in times[1:]:
        b = circuit.source_vector(t)
        try:
            x, n = newton(circuit, x, b, opts, h=tstep, q_prev=q)
        except ConvergenceError as exc:
            raise ConvergenceError(f"transient step failed at t={t:.6g} s: {exc}") from exc
        _, _, q, _ = circuit.assemble(x, b, with_charge=True)
        xs.append(x)
        iters.append(n)
    return _result(circuit, "tran", "time", times, xs, iters, circuit.netlist.prints)


def run_netlist(nl: Netlist, base_dir=None, opts: SimOptions = SimOptions()) -> list[SimResult]:
    """Run every analysis card in order."""
    circuit = Circuit(nl, base_dir)
    results = []
    for a in nl.analyses:
        if isinstance(a, OpAnalysis):
            results.append(dc_operating_point(circuit, opts))
        elif isinstance(a, DcAnalysis):
            results.append(dc_sweep(circuit, a.source, a.start, a.stop, a.step, opts))
        elif isinstance(a, TranAnalysis):
            results.append(transient(circuit, a.tstep, a.tstop, opts))
    return results
