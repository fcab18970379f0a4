"""Exception and warning types raised across the package."""

from __future__ import annotations


class BetheFFError(Exception):
    """Base class for all numerical errors of the package."""


class PoleAtNonPositiveInteger(BetheFFError):
    pass


class ContourHitsPole(BetheFFError):
    pass


class ArgumentOnRealAxis(BetheFFError):
    pass


class PoleCrossing(BetheFFError):
    pass


class PoleHit(BetheFFError):
    pass


class ContourThroughPole(BetheFFError):
    pass


class FloorBoundary(BetheFFError):
    pass


class NoBracket(BetheFFError):
    pass


class SingularSystem(BetheFFError):
    pass


class EdgeSystemSingular(BetheFFError):
    pass


class KappaFixedPointDiverged(BetheFFError):
    pass


class OmegaOnContour(BetheFFError):
    pass


class MuAtEdge(BetheFFError):
    pass


class ShiftExponentialNearOne(BetheFFError):
    pass


class ContourInvalid(BetheFFError):
    pass


class ThetaAtZeroOfSine(BetheFFError):
    pass


class StepInconsistency(BetheFFError):
    pass


class RepeatedInteger(BetheFFError):
    pass


class RadiusSensitivity(BetheFFError):
    pass


class NewtonDiverged(BetheFFError):
    pass


class RootsCollided(BetheFFError):
    pass


class SingularXi(BetheFFError):
    pass


class CoincidentRootSingularity(BetheFFError):
    pass


class ConfigInvalid(BetheFFError):
    pass


class ComputationFailed(BetheFFError):
    pass


class ConditionSetViolated(UserWarning):
    """String positivity is only guaranteed under the sufficient conditions; warn otherwise."""


class UmklappMismatch(BetheFFError, ValueError):
    pass
