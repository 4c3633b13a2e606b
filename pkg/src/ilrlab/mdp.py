"""Average-reward MDP data model and the basic policy/dynamics algebra.

All containers are frozen dataclasses wrapping read-only numpy arrays.
``FiniteMdp`` is deliberately permissive at construction time (only shapes are
checked) so that :func:`validate_mdp` can report every violation as data.
The remaining containers enforce their invariants eagerly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ilrlab.exceptions import DimensionMismatchError, InvalidMdpError

#: Tolerance for row sums of constructed (not measured) probability tables.
STOCHASTIC_TOL = 1e-12

MDP_FORMAT = "ilrlab-mdp"
MDP_FORMAT_VERSION = 1


def _frozen(array, dtype=float):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_stochastic_rows(matrix, what):
    if np.any(~np.isfinite(matrix)):
        raise ValueError(f"{what} contains non-finite entries")
    if np.any(matrix < 0):
        raise ValueError(f"{what} has negative entries (min {matrix.min():.3g})")
    sums = matrix.sum(axis=-1)
    bad = np.abs(sums - 1.0) > STOCHASTIC_TOL
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"{what} row {idx} sums to {sums[idx]!r}, expected 1")


@dataclass(frozen=True)
class FiniteMdp:
    """A finite average-reward MDP ``(S, A, T, R, s1)``.

    Attributes:
        transitions: array of shape ``(S, A, S)``; ``transitions[s, a, s2]`` is
            the probability of moving to ``s2`` after taking ``a`` in ``s``.
        rewards: array of shape ``(S, A)`` with entries in ``[0, 1]``.
        initial_state: index of the start state ``s1``.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    initial_state: int = 0

    def __post_init__(self):
        t = _frozen(self.transitions)
        r = _frozen(self.rewards)
        if t.ndim != 3 or t.shape[0] != t.shape[2] or t.shape[0] < 1 or t.shape[1] < 1:
            raise DimensionMismatchError(f"transitions must have shape (S, A, S), got {t.shape}")
        if r.shape != t.shape[:2]:
            raise DimensionMismatchError(
                f"rewards shape {r.shape} does not match transitions {t.shape[:2]}"
            )
        object.__setattr__(self, "transitions", t)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def reward_table(self) -> "RewardTable":
        return RewardTable(self.rewards, label="extrinsic")

    def with_rewards(self, rewards) -> "FiniteMdp":
        return FiniteMdp(self.transitions, rewards, self.initial_state)


@dataclass(frozen=True)
class Policy:
    """Stationary policy ``pi[s, a]``; rows are action distributions."""

    action_probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.action_probs)
        if p.ndim != 2 or 0 in p.shape:
            raise DimensionMismatchError(f"action_probs must be 2-D, got shape {p.shape}")
        _check_stochastic_rows(p, "policy")
        object.__setattr__(self, "action_probs", p)

    @classmethod
    def from_actions(cls, actions, num_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        if np.any(actions < 0) or np.any(actions >= num_actions):
            raise ValueError(f"actions {actions.tolist()} out of range [0, {num_actions})")
        probs = np.zeros((len(actions), num_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "Policy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    @property
    def num_states(self) -> int:
        return self.action_probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.action_probs.shape[1]

    @property
    def deterministic_flag(self) -> bool:
        p = self.action_probs
        return bool(np.all((p == 0.0) | (p == 1.0)) and np.all((p == 1.0).sum(axis=1) == 1))

    @property
    def actions(self) -> np.ndarray:
        """Chosen action per state; only defined for deterministic policies."""
        if not self.deterministic_flag:
            raise ValueError("actions is only defined for deterministic policies")
        return self.action_probs.argmax(axis=1)

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        return np.array_equal(self.action_probs, other.action_probs)

    def __hash__(self):
        return hash(self.action_probs.tobytes())


@dataclass(frozen=True)
class MarkovChain:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionMismatchError(f"chain matrix must be square, got {m.shape}")
        _check_stochastic_rows(m, "chain")
        object.__setattr__(self, "matrix", m)

    @property
    def num_states(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class StateDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size == 0:
            raise DimensionMismatchError(f"state distribution must be 1-D, got {p.shape}")
        _check_stochastic_rows(p, "state distribution")
        object.__setattr__(self, "probs", p)

    @classmethod
    def point_mass(cls, state: int, num_states: int) -> "StateDistribution":
        p = np.zeros(num_states)
        p[state] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, num_states: int) -> "StateDistribution":
        return cls(np.full(num_states, 1.0 / num_states))

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class OccupancyDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 2 or 0 in p.shape:
            raise DimensionMismatchError(f"occupancy must be 2-D, got {p.shape}")
        _check_stochastic_rows(p.reshape(1, -1), "occupancy")
        object.__setattr__(self, "probs", p)

    def state_marginal(self) -> StateDistribution:
        return StateDistribution(_renormalized(self.probs.sum(axis=1)))


@dataclass(frozen=True)
class RewardTable:
    values: np.ndarray
    label: str = field(default="extrinsic")

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise DimensionMismatchError(f"reward table must be 2-D, got {v.shape}")
        if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise ValueError("reward table entries must lie in [0, 1]")
        object.__setattr__(self, "values", v)


def _renormalized(p):
    """Clip round-off negatives and rescale to unit mass."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    return p / p.sum()


class ValidationOutcome(NamedTuple):
    ok: bool
    violations: tuple

    def __bool__(self):
        return self.ok


def validate_mdp(mdp: FiniteMdp) -> ValidationOutcome:
    """Check every :class:`FiniteMdp` invariant and report the violations.

    Nothing is renormalized or clipped; each message names the offending index
    and the magnitude of the problem.
    """
    violations = []
    t, r = mdp.transitions, mdp.rewards
    if np.any(~np.isfinite(t)):
        violations.append("non-finite transition probabilities")
    for s, a, s2 in np.argwhere(t < 0):
        violations.append(f"negative probability {t[s, a, s2]:.12g} at ({s},{a},{s2})")
    sums = t.sum(axis=2)
    for s, a in np.argwhere(np.abs(sums - 1.0) > STOCHASTIC_TOL):
        violations.append(f"row sum {sums[s, a]:.12g} at ({s},{a})")
    for s, a in np.argwhere(~((r >= 0) & (r <= 1))):
        violations.append(f"reward out of [0,1] at ({s},{a}): {r[s, a]:.12g}")
    if not 0 <= mdp.initial_state < mdp.num_states:
        violations.append(
            f"initial state {mdp.initial_state} out of range [0,{mdp.num_states})"
        )
    return ValidationOutcome(not violations, tuple(violations))


def ensure_valid(mdp: FiniteMdp) -> FiniteMdp:
    outcome = validate_mdp(mdp)
    if not outcome.ok:
        raise InvalidMdpError(outcome.violations)
    return mdp


def _check_policy_dims(mdp, policy):
    if policy.action_probs.shape != (mdp.num_states, mdp.num_actions):
        raise DimensionMismatchError(
            f"policy shape {policy.action_probs.shape} does not match MDP "
            f"({mdp.num_states}, {mdp.num_actions})"
        )


def induced_chain(mdp: FiniteMdp, policy: Policy) -> MarkovChain:
    """State-to-state chain ``P[s, s2] = sum_a pi[s, a] T[s, a, s2]``."""
    _check_policy_dims(mdp, policy)
    if policy.deterministic_flag:
        # exact row selection, no arithmetic on the probabilities
        return MarkovChain(mdp.transitions[np.arange(mdp.num_states), policy.actions])
    matrix = np.einsum("sa,sat->st", policy.action_probs, mdp.transitions)
    return MarkovChain(matrix / matrix.sum(axis=1, keepdims=True))


def occupancy_from_state_dist(rho_s: StateDistribution, policy: Policy) -> OccupancyDistribution:
    if rho_s.num_states != policy.num_states:
        raise DimensionMismatchError(
            f"state distribution has {rho_s.num_states} states, policy has {policy.num_states}"
        )
    return OccupancyDistribution(rho_s.probs[:, None] * policy.action_probs)


def expected_reward(occ: OccupancyDistribution, reward: RewardTable) -> float:
    """Expected per-step reward ``sum_{s,a} occ[s, a] r[s, a]``."""
    if occ.probs.shape != reward.values.shape:
        raise DimensionMismatchError(
            f"occupancy shape {occ.probs.shape} does not match reward shape {reward.values.shape}"
        )
    return float(min(1.0, max(0.0, np.sum(occ.probs * reward.values))))


# -- serialization -----------------------------------------------------------


def mdp_to_dict(mdp: FiniteMdp) -> dict:
    return {
        "format": MDP_FORMAT,
        "version": MDP_FORMAT_VERSION,
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "initial_state": mdp.initial_state,
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
    }


def mdp_from_dict(data: dict, validate: bool = True) -> FiniteMdp:
    try:
        mdp = FiniteMdp(
            np.asarray(data["transitions"], dtype=float),
            np.asarray(data["rewards"], dtype=float),
            int(data["initial_state"]),
        )
    except KeyError as exc:
        raise InvalidMdpError([f"missing field {exc.args[0]!r}"]) from None
    except ValueError as exc:
        raise InvalidMdpError([str(exc)]) from None
    declared = (data.get("num_states", mdp.num_states), data.get("num_actions", mdp.num_actions))
    if declared != (mdp.num_states, mdp.num_actions):
        raise InvalidMdpError(
            [f"declared dimensions {declared} disagree with arrays "
             f"({mdp.num_states}, {mdp.num_actions})"]
        )
    return ensure_valid(mdp) if validate else mdp


def save_mdp(mdp: FiniteMdp, path) -> None:
    Path(path).write_text(json.dumps(mdp_to_dict(mdp), indent=2) + "\n", encoding="utf-8")


def load_mdp(path) -> FiniteMdp:
    """Read an MDP file; raises :class:`InvalidMdpError` if validation fails."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidMdpError([f"malformed MDP file: {exc}"]) from None
    return mdp_from_dict(data)
