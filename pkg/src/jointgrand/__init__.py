"""ORBGRAND decoding with joint refinement of the fading-channel estimate."""

__version__ = "0.1.0"
