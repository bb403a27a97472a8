"""Exception types shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EngineError):
    """Labels and probability vectors disagree in length or order."""


class DegenerateDistributionError(EngineError):
    """A probability vector has zero total mass and cannot be normalized."""


class ImpossibleObservationError(EngineError):
    """Every state assigns (near-)zero likelihood to the received outcome."""


class ModelValidationError(EngineError):
    """A generative model failed structural validation."""


class ScenarioError(EngineError):
    """A scenario file is missing, malformed, or inconsistent.

    Carries enough context (section/key) to point at the offending line.
    """


class ProviderError(EngineError):
    """A world-model provider returned an unusable response."""

    def __init__(self, message: str, payload: object = None):
        super().__init__(message)
        self.payload = payload


class ReplayExhaustedError(ProviderError):
    """A scripted provider ran out of recorded responses."""


class NoCandidateError(EngineError):
    """Policy selection was invoked with an empty candidate set."""
