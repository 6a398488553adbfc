"""Bus network simulator for comparing actual and time-optimal rider routes under crime exposure."""

__version__ = "0.1.0"
