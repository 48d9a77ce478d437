"""Exception hierarchy; the CLI maps these onto exit codes."""


class MixError(Exception):
    exit_code = 3
    kind = "error"

    def to_json(self):
        return {"kind": self.kind, "message": str(self)}


class ConfigError(MixError, ValueError):
    exit_code = 2
    kind = "configuration"

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field

    def to_json(self):
        return {"kind": self.kind, "field": self.field, "message": str(self)}


class ShapeError(MixError, ValueError):
    kind = "shape"


class DomainError(MixError, ValueError):
    kind = "domain"


class FrameError(MixError, ValueError):
    kind = "frame"


class FrameInfeasibleError(FrameError):
    kind = "frame-infeasible"


class DegenerateStateError(MixError, ValueError):
    kind = "degenerate-state"


class SolvabilityError(MixError, ValueError):
    kind = "solvability"


class NumericalError(MixError, RuntimeError):
    kind = "numerical"


class AccuracyError(NumericalError):
    kind = "accuracy"

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class BlowUpError(NumericalError):
    kind = "blow-up"

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
