"""Neural surrogate device models checked inside a small circuit simulator."""

__version__ = "0.1.0"
