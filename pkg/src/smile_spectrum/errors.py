"""Exception hierarchy shared by the package."""


class SmileError(Exception):
    """Base class for every error raised by this package."""


# channel layer
class ChannelError(SmileError, ValueError):
    pass


class EmptyStateSpace(ChannelError):
    pass


class NotStochastic(ChannelError):
    pass


class Reducible(ChannelError):
    pass


class Periodic(ChannelError):
    pass


class DegenerateChain(ChannelError):
    pass


class ZeroBaseMean(ChannelError):
    pass


class NoConvergence(SmileError, RuntimeError):
    pass


class SingularSystem(SmileError, RuntimeError):
    pass


# topology
class TopologyError(SmileError, ValueError):
    pass


class SelfLoop(TopologyError):
    pass


class IndexOutOfRange(TopologyError):
    pass


class DuplicateEdge(TopologyError):
    pass


# matching
class Deadlock(SmileError, RuntimeError):
    """No feasible channel remains for some unassigned cell."""


class InvalidAllocation(SmileError, ValueError):
    pass


class InstanceTooLarge(SmileError, ValueError):
    pass


# agent
class AgentError(SmileError, RuntimeError):
    pass


class DoubleInit(AgentError):
    pass


class NotInitialized(AgentError):
    pass


class WrongPhase(AgentError):
    pass


class NotANeighbor(AgentError, ValueError):
    pass


class RecoveryTimeout(AgentError):
    pass


# metrics
class EpsilonNonpositive(SmileError, ValueError):
    pass


class DegenerateGaps(SmileError, ValueError):
    pass


class LengthMismatch(SmileError, ValueError):
    pass


class EigensolverFailure(SmileError, RuntimeError):
    pass


# experiment harness
class ConfigError(SmileError, ValueError):
    pass


class InstanceError(SmileError, ValueError):
    pass


class UnknownKind(ConfigError):
    pass


class DegenerateParams(InstanceError):
    pass
