"""Joint-angle estimation from tracked image features with a ridge readout."""

__version__ = "0.1.0"
