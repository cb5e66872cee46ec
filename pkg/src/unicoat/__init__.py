"""Universal coating of an object by self-organizing particles on the triangular grid."""

__version__ = "0.1.0"
