"""A simulation laboratory for the shock of the Hammersley-Aldous-Diaconis process with sources and sinks."""

__version__ = "0.1.0"
