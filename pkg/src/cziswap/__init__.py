"""Gate algebra, pulse-level simulation and characterization tools for a
two-transmon device with a parametrically driven tunable coupler."""

__version__ = "0.1.0"
