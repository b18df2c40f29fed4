"""Exception hierarchy shared by all evcharge modules.

Every error carries a stable ``code`` string so the CLI and the harness can
report failures uniformly without string-matching messages.
"""


class EVChargeError(Exception):
    code = "GENERIC"


class TheoremPreconditionError(EVChargeError):
    """(U/L)*(Dmax/Dmin) < 2 or pmax >= L: pricing parameters undefined."""

    code = "THEOREM_PRECONDITION"


class EmptyInstanceError(EVChargeError):
    code = "EMPTY_INSTANCE"


class InvalidConfigError(EVChargeError):
    code = "INVALID_CONFIG"


class ParseError(EVChargeError):
    code = "PARSE_ERROR"

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class IOErrorWrapped(EVChargeError):
    code = "IO_ERROR"


class PriceExceedsPmaxError(EVChargeError):
    code = "PRICE_EXCEEDS_PMAX"


class PriceBelowLError(EVChargeError):
    code = "PRICE_BELOW_L"


class CapacityExceededError(EVChargeError):
    code = "CAPACITY_EXCEEDED"


class InfeasibleCandidateError(EVChargeError):
    code = "INFEASIBLE_CANDIDATE"


class TooLargeError(EVChargeError):
    code = "TOO_LARGE"


class QuantizationError(EVChargeError):
    code = "QUANTIZATION_ERROR"


class ParamsMismatchError(EVChargeError):
    code = "PARAMS_MISMATCH"


class InconsistentOutcomeError(EVChargeError):
    code = "INCONSISTENT_OUTCOME"


class NoTraceError(EVChargeError):
    code = "NO_TRACE"


class WrongClassificationError(EVChargeError):
    code = "WRONG_CLASSIFICATION"


class SchemaMismatchError(EVChargeError):
    code = "SCHEMA_MISMATCH"
