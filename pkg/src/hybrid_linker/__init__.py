"""Recover issue-commit traceability links with a fused two-channel classifier.

The package generates labeled link candidates from a corpus of issues and
commits, featurizes each candidate through a textual TF-IDF channel and a
non-textual tabular channel, trains one classifier per channel, and fuses
the two probabilities with a tuned linear accumulator.
"""

__version__ = "0.1.0"


class HybridLinkerError(Exception):
    """Base class for errors raised by this package."""
