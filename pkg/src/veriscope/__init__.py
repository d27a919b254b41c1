"""Error-propagation analysis for verified databases: labeling probabilities,
provenance-tracking query evaluation, Maximal Error Scores, risky tuples and
budgeted uncertainty reduction."""

__version__ = "0.1.0"
