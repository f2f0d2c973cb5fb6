"""Exception types raised across rdlab."""


class RdlabError(Exception):
    """Base class for all rdlab errors."""


class WindowTooLarge(RdlabError):
    pass


class DegenerateCritical(RdlabError):
    pass


class BinMismatch(RdlabError):
    pass


class AttractivityRequired(RdlabError):
    pass


class SizeCapExceeded(RdlabError):
    pass


class SolveFailure(RdlabError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class EmptyTarget(RdlabError):
    pass


class DegenerateSet(RdlabError):
    pass


class OvershootError(RdlabError):
    pass


class GridMismatch(RdlabError):
    pass


class NotConverged(RdlabError):
    def __init__(self, message, value=float("nan"), grad_norm=float("nan")):
        super().__init__(f"{message} (value={value:.6g}, grad_norm={grad_norm:.3e})")
        self.value = value
        self.grad_norm = grad_norm


class SingleWell(RdlabError):
    pass


class StartOutsideA(RdlabError):
    pass


class TooFewSamples(RdlabError):
    pass


class ConfigError(RdlabError):
    """Invalid experiment configuration; ``path`` names the offending key."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
