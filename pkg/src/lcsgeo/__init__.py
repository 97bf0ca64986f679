"""Chart-based Lorentzian geometry engine with structure and soliton checks."""

__version__ = "0.1.0"
