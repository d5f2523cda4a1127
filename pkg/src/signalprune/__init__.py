"""Lightweight 1D-CNN signal classification with structured channel pruning.

The package trains a small convolutional classifier on labeled 1D segments,
prunes convolutional kernels by L1 score under an accuracy constraint,
retrains the slimmer network, and reports baseline-vs-pruned metrics.
"""

__version__ = "0.1.0"

from . import data, layers, metrics, model_io, network, prune, report, train  # noqa: E402,F401
