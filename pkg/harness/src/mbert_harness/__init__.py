"""Multilingual BERT parity harness.

Fine-tunes a BERT-style classifier on train-set files produced by the
hatesynth pipeline and reproduces its evaluation report schema, plus a
Shapley-value word attribution that measures how much of the model's
prediction mass lands on gazetteer entities. The harness talks to the
synthesis pipeline only through its file formats.
"""

__version__ = "0.1.0"


class HarnessError(Exception):
    """Base class for harness failures."""


class DataFormatError(HarnessError):
    """An input file violated the expected schema."""
