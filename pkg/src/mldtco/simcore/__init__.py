"""Small SPICE-like simulator: netlist parsing, MNA assembly, DC and transient analyses."""

from .analysis import (
    ConvergenceError,
    SimOptions,
    SimResult,
    dc_operating_point,
    dc_sweep,
    newton,
    run_netlist,
    sweep_values,
    transient,
)
from .circuit import Circuit, resolve_model, stamp_device
from .netlist import NetlistError, parse_netlist, parse_value

__all__ = [
    "Circuit",
    "ConvergenceError",
    "NetlistError",
    "SimOptions",
    "SimResult",
    "dc_operating_point",
    "dc_sweep",
    "newton",
    "parse_netlist",
    "parse_value",
    "resolve_model",
    "run_netlist",
    "stamp_device",
    "sweep_values",
    "transient",
]
