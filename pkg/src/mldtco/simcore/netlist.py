"""Line-oriented SPICE-like netlist parser.

Grammar (one statement per line, keywords case-insensitive)::

    * comment
    V<name> <n+> <n-> dc <val>
    V<name> <n+> <n-> pwl <t0> <v0> <t1> <v1> ...
    R<name> <n1> <n2> <ohms>
    C<name> <n1> <n2> <farads>
    M<name> <d> <g> <s> <model_id>
    .model <model_id> <kind> [file=<path>[,<path>]] [key=value ...]
    .op | .dc <Vname> <start> <stop> <step> | .tran <tstep> <tstop>
    .print <v(node)|i(Vname)> ...
    .end

Extra ``.model`` keys: ``polarity=n|p``, ``vbulk=<volts>`` (bulk of a p device),
``blend=<volts>`` (two-region blend half-width), and any reference-parameter
override such as ``c_gd=0``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

MODEL_KINDS = ("nfin_ref", "pfin_ref", "ntfet_ref", "ptfet_ref", "nn")

_SUFFIXES = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3, "k": 1e3, "meg": 1e6, "g": 1e9, "t": 1e12}
_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)(meg|[fpnumkgt])?[a-z]*$", re.IGNORECASE)


class NetlistError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def parse_value(token: str, line: int | None = None) -> float:
    """Parse ``1.5``, ``10k``, ``2meg``, ``1e-15``, ``100ps`` ..."""
    m = _NUMBER.match(token.strip())
    if not m:
        raise NetlistError(f"bad number {token!r}", line)
    value = float(m.group(1))
    if m.group(2):
        value *= _SUFFIXES[m.group(2).lower()]
    return value


@dataclass(frozen=True)
class Resistor:
    name: str
    n1: str
    n2: str
    value: float


@dataclass(frozen=True)
class Capacitor:
    name: str
    n1: str
    n2: str
    value: float


@dataclass(frozen=True)
class VSource:
    name: str
    npos: str
    nneg: str
    dc: float = 0.0
    pwl: tuple[tuple[float, float], ...] | None = None

    def value(self, t: float = 0.0) -> float:
        if self.pwl is None:
            return self.dc
        ts, vs = zip(*self.pwl)
        if t <= ts[0]:
            return vs[0]
        if t >= ts[-1]:
            return vs[-1]
        for k in range(1, len(ts)):
            if t <= ts[k]:
                t0, t1 = ts[k - 1], ts[k]
                return vs[k - 1] + (vs[k] - vs[k - 1]) * (t - t0) / (t1 - t0)
        return vs[-1]


@dataclass(frozen=True)
class Device3:
    name: str
    d: str
    g: str
    s: str
    model: str


@dataclass(frozen=True)
class ModelCard:
    name: str
    kind: str
    files: tuple[str, ...] = ()
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OpAnalysis:
    pass


@dataclass(frozen=True)
class DcAnalysis:
    source: str
    start: float
    stop: float
    step: float


@dataclass(frozen=True)
class TranAnalysis:
    tstep: float
    tstop: float


@dataclass(frozen=True)
class PrintItem:
    kind: str  # "v" or "i"
    target: str

    def __str__(self):
        return f"{self.kind}({self.target})"


@dataclass
class Netlist:
    elements: list = field(default_factory=list)
    models: dict = field(default_factory=dict)
    analyses: list = field(default_factory=list)
    prints: list = field(default_factory=list)

    @property
    def nodes(self) -> list[str]:
        """Non-ground nodes in order of first appearance."""
        seen = []
        for e in self.elements:
            for n in _terminals(e):
                if n != "0" and n not in seen:
                    seen.append(n)
        return seen

    @property
    def sources(self) -> list[VSource]:
        return [e for e in self.elements if isinstance(e, VSource)]

    def element(self, name: str):
        name = name.lower()
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(name)


def _terminals(e) -> tuple[str, ...]:
    if isinstance(e, (Resistor, Capacitor)):
        return (e.n1, e.n2)
    if isinstance(e, VSource):
        return (e.npos, e.nneg)
    return (e.d, e.g, e.s)


_PRINT_ITEM = re.compile(r"^([vi])\(([^()]+)\)$", re.IGNORECASE)


def parse_netlist(text: str) -> Netlist:
    nl = Netlist()
    device_lines = {}
    ended = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("*"):
            continue
        if ended:
            raise NetlistError("statement after .end", lineno)
        tok = line.split()
        head = tok[0].lower()
        if head.startswith("."):
            ended = _parse_control(nl, head, tok, lineno)
            continue
        kind = head[0]
        name = head
        if kind in "rc":
            if len(tok) != 4:
                raise NetlistError(f"{tok[0]} needs <n1> <n2> <value>", lineno)
            value = parse_value(tok[3], lineno)
            if value <= 0 and kind == "r":
                raise NetlistError(f"resistance must be positive in {tok[0]}", lineno)
            cls = Resistor if kind == "r" else Capacitor
            nl.elements.append(cls(name, tok[1].lower(), tok[2].lower(), value))
        elif kind == "v":
            if len(tok) < 4:
                raise NetlistError(f"{tok[0]} needs <n+> <n-> dc <val> or pwl ...", lineno)
            mode = tok[3].lower()
            if mode == "dc" and len(tok) == 5:
                src = VSource(name, tok[1].lower(), tok[2].lower(), parse_value(tok[4], lineno))
            elif mode == "pwl" and len(tok) >= 6 and len(tok) % 2 == 0:
                vals = [parse_value(v, lineno) for v in tok[4:]]
                pts = tuple(zip(vals[0::2], vals[1::2]))
                if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
                    raise NetlistError(f"pwl times must increase in {tok[0]}", lineno)
                src = VSource(name, tok[1].lower(), tok[2].lower(), pts[0][1], pts)
            else:
                raise NetlistError(f"bad source specification in {tok[0]}", lineno)
            nl.elements.append(src)
        elif kind == "m":
            if len(tok) != 5:
                raise NetlistError(f"{tok[0]} needs <d> <g> <s> <model>", lineno)
            nl.elements.append(Device3(name, tok[1].lower(), tok[2].lower(), tok[3].lower(), tok[4].lower()))
            device_lines[name] = lineno
        else:
            raise NetlistError(f"unknown element {tok[0]!r}", lineno)
        if any(e.name == name for e in nl.elements[:-1]):
            raise NetlistError(f"duplicate element name {tok[0]}", lineno)
    if not ended:
        raise NetlistError("missing .end")
    for e in nl.elements:
        if isinstance(e, Device3) and e.model not in nl.models:
            raise NetlistError(f"undefined model {e.model!r} used by {e.name}", device_lines[e.name])
    if "0" not in {n for e in nl.elements for n in _terminals(e)}:
        raise NetlistError("no ground node '0'")
    names = {e.name for e in nl.elements}
    for a in nl.analyses:
        if isinstance(a, DcAnalysis) and a.source not in names:
            raise NetlistError(f".dc references unknown source {a.source!r}")
    for p in nl.prints:
        if p.kind == "i" and p.target not in names:
            raise NetlistError(f".print references unknown source {p.target!r}")
        if p.kind == "v" and p.target != "0" and p.target not in nl.nodes:
            raise NetlistError(f".print references unknown node {p.target!r}")
    return nl


def _parse_control(nl: Netlist, head: str, tok: list[str], lineno: int) -> bool:
    if head == ".end":
        return True
    if head == ".model":
        if len(tok) < 3:
            raise NetlistError(".model needs <id> <kind>", lineno)
        kind = tok[2].lower()
        if kind not in MODEL_KINDS:
            raise NetlistError(f"unknown model kind {tok[2]!r}", lineno)
        files: tuple[str, ...] = ()
        options = {}
        for item in tok[3:]:
            key, sep, value = item.partition("=")
            if not sep:
                raise NetlistError(f"expected key=value, got {item!r}", lineno)
            key = key.lower()
            if key == "file":
                files = tuple(v for v in value.split(",") if v)
            elif key == "polarity":
                if value.lower() not in ("n", "p"):
                    raise NetlistError(f"polarity must be n or p, got {value!r}", lineno)
                options[key] = value.lower()
            else:
                options[key] = parse_value(value, lineno)
        if kind == "nn" and not files:
            raise NetlistError(f"model {tok[1]} of kind nn needs file=", lineno)
        nl.models[tok[1].lower()] = ModelCard(tok[1].lower(), kind, files, options)
    elif head == ".op":
        nl.analyses.append(OpAnalysis())
    elif head == ".dc":
        if len(tok) != 5:
            raise NetlistError(".dc needs <source> <start> <stop> <step>", lineno)
        start, stop, step = (parse_value(v, lineno) for v in tok[2:])
        if step == 0:
            raise NetlistError(".dc step must be nonzero", lineno)
        nl.analyses.append(DcAnalysis(tok[1].lower(), start, stop, step))
    elif head == ".tran":
        if len(tok) != 3:
            raise NetlistError(".tran needs <tstep> <tstop>", lineno)
        tstep, tstop = (parse_value(v, lineno) for v in tok[1:])
        if not (tstep > 0 and tstop >= tstep):
            raise NetlistError(".tran needs 0 < tstep <= tstop", lineno)
        nl.analyses.append(TranAnalysis(tstep, tstop))
    elif head == ".print":
        for item in tok[1:]:
            m = _PRINT_ITEM.match(item)
            if not m:
                raise NetlistError(f"bad print item {item!r}", lineno)
            nl.prints.append(PrintItem(m.group(1).lower(), m.group(2).lower()))
    else:
        raise NetlistError(f"unknown control statement {tok[0]!r}", lineno)
    return False
