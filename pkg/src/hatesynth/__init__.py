"""Synthetic hate-speech training data for limited-data languages.

Three synthesis routes over a common JSON-Lines corpus format: machine
translation of a high-resource corpus, contextual entity substitution
(mask hate targets, translate, re-target), and few-shot language-model
generation. An experiment scheduler materializes incremental augmentation
arms and a built-in classifier evaluates them with macro F1 and a
token-attribution report.
"""

__version__ = "0.1.0"
