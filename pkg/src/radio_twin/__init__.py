"""Digital-twin PPG synthesis from OFDM channel measurements."""

__version__ = "0.1.0"
