"""Circuit and coupled-mode models of a two-mode resonator coupled to a magnon."""

__version__ = "0.1.0"
