"""Exception types raised across the package.

Every failure mode that callers are expected to distinguish gets its own
class; everything derives from PmpTrainError so a harness can catch the
package's failures without swallowing genuine bugs.
"""

from __future__ import annotations


class PmpTrainError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PmpTrainError, ValueError):
    """An argument violates a documented contract (dtype, range, layout)."""


class ShapeError(InputError):
    """Array shapes do not compose (geometry mismatch, bad batch axis)."""


class NumericOverflowError(PmpTrainError, FloatingPointError):
    """A forward state became non-finite; carries the offending layer."""

    def __init__(self, layer: int, message: str | None = None):
        self.layer = layer
        super().__init__(message or f"non-finite values in the state produced by layer {layer}")


class LineSearchError(PmpTrainError, RuntimeError):
    """The augmentation-weight escalation exhausted its budget.

    Carries the diagnostic state of the failed iteration so a run can be
    post-mortemed: iteration index, last epsilon tried, escalation count,
    and the objective values on both sides of the acceptance test.
    """

    def __init__(self, iteration: int, epsilon: float, j: int,
                 j_current: float, j_trial: float):
        self.iteration = iteration
        self.epsilon = epsilon
        self.j = j
        self.j_current = j_current
        self.j_trial = j_trial
        super().__init__(
            f"line search failed at iteration {iteration}: "
            f"no sufficient decrease after {j} escalations "
            f"(epsilon={epsilon:.6g}, J(u)={j_current:.6g}, J(w)={j_trial:.6g})"
        )


class ParseError(PmpTrainError, ValueError):
    """Malformed arch text; carries the 1-based offending line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class ConfigError(PmpTrainError, ValueError):
    """Malformed or inconsistent run configuration."""


class IdxFormatError(PmpTrainError, ValueError):
    """An IDX stream violates the format (magic, dtype code, rank)."""


class IdxTruncationError(IdxFormatError):
    """An IDX stream ended before the payload its header promised."""


class IdxCountMismatchError(IdxFormatError):
    """Image and label files declare different sample counts."""
