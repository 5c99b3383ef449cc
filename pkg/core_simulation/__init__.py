"""DWDM direct-detection link simulator."""

__version__ = "0.1.0"
