"""PSH Extension Lab: numerical checks of plurisubharmonic extension across null sets."""

__version__ = "0.1.0"
