"""Generative model containers: likelihoods, dynamics, preferences, priors.

Component arrays are stored raw with shape checks only, so that a
structurally complete but numerically broken model can still be built
and handed to ``validate_model`` for a readable violation report.
Engine code assumes models that passed validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dists import EPS, NORM_ATOL, CategoricalDistribution, normalize
from .errors import ShapeError

# Base mass shared by every outcome a preference entry marks as violating,
# applied before per-channel normalization.
VIOLATION_MASS = 0.01


def _matrix(values, rows: int, cols: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (rows, cols):
        raise ShapeError(f"{what}: expected shape {(rows, cols)}, got {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ObservationModel:
    """Per-channel outcome likelihoods, one row per hidden state."""

    states: tuple[str, ...]
    channels: dict[str, tuple[str, ...]]
    matrices: dict[str, np.ndarray]  # channel -> (n_states, n_outcomes)

    def __post_init__(self):
        for name, outcomes in self.channels.items():
            if name not in self.matrices:
                raise ShapeError(f"channel {name!r} has no likelihood matrix")
            m = _matrix(self.matrices[name], len(self.states), len(outcomes), f"A[{name}]")
            self.matrices[name] = m

    def likelihood_column(self, channel: str, outcome: str) -> np.ndarray:
        """P(outcome | state) for every state, in state order."""
        outcomes = self.channels[channel]
        try:
            j = outcomes.index(outcome)
        except ValueError:
            raise ShapeError(
                f"outcome {outcome!r} not in channel {channel!r} ({len(outcomes)} outcomes)"
            ) from None
        return self.matrices[channel][:, j]

    def predictive(self, channel: str, state_probs: np.ndarray) -> CategoricalDistribution:
        """Push a state distribution through the channel likelihoods."""
        weights = state_probs @ self.matrices[channel]
        return normalize(weights, self.channels[channel])


@dataclass(frozen=True)
class TransitionModel:
    """Action-conditioned state dynamics, tensor[action][from][to]."""

    states: tuple[str, ...]
    actions: tuple[str, ...]
    tensor: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, k = len(self.actions), len(self.states)
        arr = np.asarray(self.tensor, dtype=float)
        if arr.shape != (n, k, k):
            raise ShapeError(f"B tensor: expected {(n, k, k)}, got {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "tensor", arr)

    def matrix(self, action: str) -> np.ndarray:
        try:
            i = self.actions.index(action)
        except ValueError:
            raise ShapeError(f"unknown action {action!r}, have {self.actions}") from None
        return self.tensor[i]

    def push(self, state_probs: np.ndarray, action: str) -> np.ndarray:
        return state_probs @ self.matrix(action)


@dataclass(frozen=True)
class PreferenceEntry:
    """One compiled preference: (channel, confidence weight, outcome sets).

    ``prefer`` outcomes each carry exp(weight) mass, ``avoid`` outcomes
    share VIOLATION_MASS, anything unmentioned keeps neutral mass 1.
    """

    name: str
    channel: str
    weight: float
    prefer: tuple[str, ...] = ()
    avoid: tuple[str, ...] = ()


@dataclass(frozen=True)
class PreferenceModel:
    """Log-preferences over observations, one prior vector per channel."""

    entries: tuple[PreferenceEntry, ...]
    channel_priors: dict[str, CategoricalDistribution]

    @staticmethod
    def compile(
        channels: dict[str, tuple[str, ...]],
        entries: tuple[PreferenceEntry, ...],
    ) -> "PreferenceModel":
        """Turn weighted outcome predicates into per-channel priors."""
        priors: dict[str, CategoricalDistribution] = {}
        for channel, outcomes in channels.items():
            mass = np.ones(len(outcomes))
            for entry in entries:
                if entry.channel != channel:
                    continue
                for o in entry.prefer:
                    mass[outcomes.index(o)] *= math.exp(entry.weight)
                for o in entry.avoid:
                    mass[outcomes.index(o)] *= VIOLATION_MASS / len(entry.avoid)
            priors[channel] = normalize(mass, outcomes)
        return PreferenceModel(entries=tuple(entries), channel_priors=priors)

    def log_prior(self, channel: str) -> np.ndarray:
        p = self.channel_priors[channel].probs
        return np.log(np.clip(p, EPS, 1.0))


@dataclass(frozen=True)
class Policy:
    """A label plus an ordered action sequence."""

    label: str
    actions: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.actions:
            raise ShapeError(f"policy {self.label!r} has no actions")

    @property
    def horizon(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class GenerativeModel:
    """Everything the agent believes about the task, in one bundle."""

    states: tuple[str, ...]
    actions: tuple[str, ...]
    channels: dict[str, tuple[str, ...]]
    a: ObservationModel
    b: TransitionModel
    c: PreferenceModel
    d: CategoricalDistribution
    policies: tuple[Policy, ...] = ()

    def policy(self, label: str) -> Policy:
        for p in self.policies:
            if p.label == label:
                return p
        raise ShapeError(f"unknown policy {label!r}")


@dataclass(frozen=True)
class ValidationReport:
    """Violations as (dotted path, message) pairs; empty means valid."""

    violations: tuple[tuple[str, str], ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        if self.ok:
            return "model valid"
        return "\n".join(f"{path}: {message}" for path, message in self.violations)


def _check_row(out: list, path: str, row: np.ndarray) -> None:
    if np.any(row < 0) or np.any(row > 1):
        out.append((path, f"entries outside [0, 1]: {row.tolist()}"))
        return
    total = float(row.sum())
    if abs(total - 1.0) > NORM_ATOL:
        out.append((path, f"row sums to {total!r}, expected 1.0 +/- {NORM_ATOL}"))


def validate_model(model: GenerativeModel) -> ValidationReport:
    """Structural and numeric audit of a generative model.

    Checks every likelihood row, transition row, preference prior and
    the state prior, plus policy/action cross-references. Returns a
    report instead of raising so callers can show all problems at once.
    """
    v: list[tuple[str, str]] = []
    if len(set(model.states)) != len(model.states):
        v.append(("states", f"duplicate labels in {model.states}"))
    if len(set(model.actions)) != len(model.actions):
        v.append(("actions", f"duplicate labels in {model.actions}"))

    for channel, outcomes in model.channels.items():
        if len(set(outcomes)) != len(outcomes):
            v.append((f"channels.{channel}", "duplicate outcome labels"))
        m = model.a.matrices.get(channel)
        if m is None:
            v.append((f"a.{channel}", "missing likelihood matrix"))
            continue
        for i, state in enumerate(model.states):
            _check_row(v, f"a.{channel}.{state}", m[i])

    for action in model.actions:
        m = model.b.matrix(action)
        for i, state in enumerate(model.states):
            _check_row(v, f"b.{action}.{state}", m[i])

    if model.d.labels != model.states:
        v.append(("d", f"prior labels {model.d.labels} != states {model.states}"))

    for entry in model.c.entries:
        if entry.channel not in model.channels:
            v.append((f"c.{entry.name}", f"unknown channel {entry.channel!r}"))
            continue
        outcomes = model.channels[entry.channel]
        for o in entry.prefer + entry.avoid:
            if o not in outcomes:
                v.append((f"c.{entry.name}", f"unknown outcome {o!r}"))
    for channel in model.channels:
        prior = model.c.channel_priors.get(channel)
        if prior is None:
            v.append((f"c.{channel}", "missing channel prior"))
        elif prior.labels != model.channels[channel]:
            v.append((f"c.{channel}", "prior outcomes disagree with channel"))

    seen = set()
    for p in model.policies:
        if p.label in seen:
            v.append((f"policies.{p.label}", "duplicate policy label"))
        seen.add(p.label)
        for idx, action in enumerate(p.actions):
            if action not in model.actions:
                v.append((f"policies.{p.label}.actions[{idx}]", f"unknown action {action!r}"))

    return ValidationReport(tuple(v))
