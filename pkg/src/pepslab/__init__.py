"""Random PEPS contraction, qudit stabilizer PEPS and the replica magnet."""

__version__ = "0.1.0"
