"""critset - critical sets of master functions on weighted arrangement families."""

__version__ = "0.1.0"
