"""Exception hierarchy shared by every depthsim module."""


class DepthSimError(Exception):
    """Base class for all errors raised by depthsim."""

    kind = "error"


class InvalidInputError(DepthSimError, ValueError):
    kind = "invalid-input"


class ConfigError(DepthSimError, ValueError):
    kind = "config"


class DomainError(DepthSimError, ValueError):
    """A query fell outside the region where a function is defined."""

    kind = "domain"


class DegenerateFrameError(DepthSimError, ValueError):
    """A depth frame carries no valid pixel to compute statistics from."""

    kind = "degenerate-frame"
