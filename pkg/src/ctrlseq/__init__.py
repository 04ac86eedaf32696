"""Control-enhanced sequential estimation of a qubit rotation parameter."""

__version__ = "0.1.0"
