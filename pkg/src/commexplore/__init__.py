"""Communication-aware multi-robot exploration simulator."""

__version__ = "0.1.0"
