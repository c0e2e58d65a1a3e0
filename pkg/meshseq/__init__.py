"""meshseq: mesh animation encoding, generation and completion."""

__version__ = "1.0.0"
