"""Exception hierarchy. Everything derives from ``AtnError`` so the CLI can
map validation failures to exit code 2 in one place."""


class AtnError(ValueError):
    pass


# network
class InvalidEdge(AtnError):
    pass


class NotStronglyConnected(AtnError):
    pass


class SameNode(AtnError):
    pass


# simulator
class InvalidConfig(AtnError):
    pass


class InvalidDemand(AtnError):
    pass


class FleetExceedsBerths(AtnError):
    pass


class WindowTooLong(AtnError):
    pass


# evm
class InvalidParams(AtnError):
    pass


class InconsistentViews(AtnError):
    pass


# tuner
class InvalidEnv(AtnError):
    pass


class EmptyBounds(AtnError):
    pass


# learner
class DimensionMismatch(AtnError):
    pass


class TooFewRows(AtnError):
    pass


class ModelMismatch(AtnError):
    pass


class UntrainableActivation(AtnError):
    pass


class DegenerateSplit(AtnError):
    pass
