"""Exception hierarchy shared by the mechanism, the player model and the harness."""


class MechanismError(ValueError):
    """Base class for every error raised by this package."""


class InvalidParticipantCount(MechanismError):
    pass


class DegenerateAlternatives(MechanismError):
    """Raised when a vote computation is asked for fewer than two alternatives."""


class NegativeDepositError(MechanismError):
    pass


class NonZeroSumError(MechanismError):
    pass


class ShapeError(MechanismError):
    pass


class NoParticipantsError(MechanismError):
    pass


class BeliefInfeasibleError(MechanismError):
    """A belief evaluated at some vote vector left the probability simplex."""


class ConfigError(MechanismError):
    pass


class ScenarioError(MechanismError):
    pass
