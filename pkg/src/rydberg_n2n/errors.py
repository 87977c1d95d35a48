"""Exception hierarchy shared by every subpackage.

The CLI maps the three families onto exit codes: configuration problems
exit with 2, data problems with 3, numerical aborts with 4.
"""


class ConfigurationError(ValueError):
    """Invalid parameter value or unknown configuration key."""


class DataError(Exception):
    """Input data is missing, malformed, or incompatible."""


class DimensionError(DataError, ValueError):
    """Array shapes or trace lengths do not agree."""


class LengthError(DimensionError):
    """A sequence length violates an operation's divisibility rule."""


class ContractError(RuntimeError):
    """An API precondition that is not about data shapes was violated."""


class DegenerateTraceError(DataError, ValueError):
    """A trace has zero variance and cannot be standardized."""


class TraceFormatError(DataError):
    """Base class for trace/checkpoint file decoding failures."""


class MalformedHeaderError(TraceFormatError):
    pass


class ChecksumError(TraceFormatError):
    pass


class TruncatedPayloadError(TraceFormatError):
    pass


class NumericalAbort(FloatingPointError):
    """Training produced a non-finite loss.

    Carries enough context to locate the failure: the epoch, the batch
    index within that epoch, and the global gradient norm of the last
    finite backward pass (``nan`` when unavailable).
    """

    def __init__(self, epoch: int, batch: int, grad_norm: float, message: str = ""):
        self.epoch = epoch
        self.batch = batch
        self.grad_norm = grad_norm
        text = f"non-finite loss at epoch {epoch}, batch {batch} (grad norm {grad_norm:.3e})"
        if message:
            text = f"{text}: {message}"
        super().__init__(text)


class NonFiniteError(FloatingPointError):
    """Raised in debug mode when an operation emits NaN or Inf."""
