"""Error types shared across the package.

Library code raises these instead of bare ValueError/RuntimeError so the CLI
can map failure classes onto its exit-code contract (2 usage, 3 input/state,
4 numeric).
"""


class InputError(ValueError):
    """Bad input data or on-disk state; CLI exit code 3."""


class ParseError(InputError):
    """Malformed segment file. Carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyInputError(InputError):
    """A file or dataset with nothing in it."""


class DegenerateDatasetError(InputError):
    """Cleaning or filtering left no rows, or emptied out a class."""


class StratificationError(InputError):
    """A class is too small to split across train/val/test."""


class ShapeError(InputError):
    """Dimension mismatch between tensors, parameters, or scalers."""


class LabelError(InputError):
    """A class label outside [0, K)."""


class ConfigError(InputError):
    """Invalid configuration or architecture values."""


class DecisionError(InputError):
    """A pruning decision that does not fit the network it targets."""


class CorruptModelError(InputError):
    """Serialized model failed checksum, schema, or size validation."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; CLI exit code 4."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch
