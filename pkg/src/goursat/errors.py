"""Exception hierarchy. Each family maps onto one CLI exit code."""


class GoursatError(Exception):
    exit_code = 1


class ConfigError(GoursatError):
    exit_code = 2

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(GoursatError):
    exit_code = 3


class MissingDataError(DataError):
    pass


class EvaluationError(DataError):
    pass


class InversionError(DataError):
    pass


class DegeneracyError(DataError):
    pass


class InsufficientGridError(DataError):
    pass


class DivergenceError(GoursatError):
    exit_code = 4


class StepFailure(DivergenceError):
    def __init__(self, message, location=None, diagnostics=None):
        super().__init__(message)
        self.location = location
        self.diagnostics = diagnostics or {}


class HyperbolicityLossError(StepFailure):
    pass


class DomainCoverageError(GoursatError):
    exit_code = 5
