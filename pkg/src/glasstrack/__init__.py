"""glasstrack: deterministic transparent-object tracking sequences with exact
ground truth, plus the matching OPE evaluation toolkit."""

__version__ = "0.1.0"
