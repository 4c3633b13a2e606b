"""Average-reward control: relative value iteration, exact policy evaluation,
and a brute-force enumeration oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ilrlab.chains import chain_structure, limiting_distribution
from ilrlab.exceptions import (
    DimensionMismatchError,
    NonCommunicatingError,
    SearchSpaceTooLargeError,
    SolverError,
)
from ilrlab.mdp import (
    FiniteMdp,
    Policy,
    RewardTable,
    StateDistribution,
    expected_reward,
    induced_chain,
    occupancy_from_state_dist,
)

#: Self-loop weight of the aperiodicity transform used when RVI oscillates.
APERIODICITY_WEIGHT = 0.01
ENUMERATION_LIMIT = 10**6
OSCILLATION_WINDOW = 200


@dataclass(frozen=True)
class SolveResult:
    policy: Policy
    gain: float
    iterations: int
    span_residual: float
    ergodic_under_policy: bool
    method: str = "rvi"


def _as_reward(mdp, reward):
    if not isinstance(reward, RewardTable):
        reward = RewardTable(reward)
    if reward.values.shape != (mdp.num_states, mdp.num_actions):
        raise DimensionMismatchError(
            f"reward shape {reward.values.shape} does not match MDP "
            f"({mdp.num_states}, {mdp.num_actions})"
        )
    return reward


def is_communicating(mdp: FiniteMdp) -> bool:
    """Every state reaches every other under some policy (action-union graph is strongly connected)."""
    union = csr_matrix(mdp.transitions.max(axis=1) > 0)
    n_comp, _ = connected_components(union, directed=True, connection="strong")
    return n_comp == 1


def state_action_limit(mdp: FiniteMdp, policy: Policy) -> StateDistribution:
    """Limiting state distribution of ``policy`` started from ``mdp.initial_state``."""
    chain = induced_chain(mdp, policy)
    start = StateDistribution.point_mass(mdp.initial_state, mdp.num_states)
    return limiting_distribution(chain, start)


def policy_gain(mdp: FiniteMdp, reward, policy: Policy) -> float:
    """Expected per-step reward of ``policy`` from ``s1``.

    Irreducible chains use the stationary distribution; otherwise the Cesaro
    limit from ``s1`` is assembled from absorption probabilities into each
    recurrent class.
    """
    reward = _as_reward(mdp, reward)
    rho_s = state_action_limit(mdp, policy)
    return expected_reward(occupancy_from_state_dist(rho_s, policy), reward)


def _greedy(q, tie_tol):
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - tie_tol, axis=1)


def solve_average_reward(
    mdp: FiniteMdp,
    reward,
    tol: float = 1e-10,
    max_iters: int = 200_000,
    multichain: bool = False,
) -> SolveResult:
    """Gain-optimal deterministic policy for the average-reward criterion.

    Runs relative value iteration with reference state ``s1`` and stops when the
    span of successive differences is at most ``tol``. If the iterates stop
    contracting (a periodic optimal chain), the remaining iterations run on the
    aperiodicity-transformed MDP, which shares gains and optimal policies.
    The greedy policy breaks ties toward the lowest action index and its gain
    is re-evaluated exactly with :func:`policy_gain`.

    Non-communicating MDPs raise :class:`NonCommunicatingError` unless
    ``multichain`` is set, in which case multichain policy iteration is used.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    reward = _as_reward(mdp, reward)
    if not is_communicating(mdp):
        if multichain:
            return multichain_policy_iteration(mdp, reward)
        raise NonCommunicatingError("MDP is not communicating; relative value iteration may diverge")

    r = reward.values
    t = mdp.transitions
    ref = mdp.initial_state
    h = np.zeros(mdp.num_states)
    spans = []
    transformed = False
    span = np.inf
    for k in range(1, max_iters + 1):
        q = r + t @ h
        v = q.max(axis=1)
        diff = v - h
        span = float(diff.max() - diff.min())
        h = v - v[ref]
        spans.append(span)
        if span <= tol:
            break
        if (
            not transformed
            and k > OSCILLATION_WINDOW
            and span >= spans[-1 - OSCILLATION_WINDOW] * (1 - 1e-9)
        ):
            transformed = True
            eye = np.eye(mdp.num_states)[:, None, :]
            t = (1 - APERIODICITY_WEIGHT) * mdp.transitions + APERIODICITY_WEIGHT * eye
    else:
        raise SolverError(f"relative value iteration did not converge in {max_iters} iterations", span)

    # greedy w.r.t. the untransformed one-step lookahead; the self-loop term is action-independent
    q = r + mdp.transitions @ h
    actions = _greedy(q, tie_tol=max(10 * tol, 1e-12))
    policy = Policy.from_actions(actions, mdp.num_actions)
    return SolveResult(
        policy=policy,
        gain=policy_gain(mdp, reward, policy),
        iterations=k,
        span_residual=span,
        ergodic_under_policy=chain_structure(induced_chain(mdp, policy)).ergodic,
        method="rvi-aperiodic" if transformed else "rvi",
    )


def _limit_matrix(mdp, policy):
    chain = induced_chain(mdp, policy)
    n = mdp.num_states
    return np.vstack(
        [limiting_distribution(chain, StateDistribution.point_mass(s, n)).probs for s in range(n)]
    ), chain.matrix


def multichain_policy_iteration(mdp: FiniteMdp, reward, max_iters: int = 10_000, tie_tol: float = 1e-10) -> SolveResult:
    """Howard-style multichain policy iteration with exact evaluation.

    Evaluation uses the limiting matrix ``P*`` for the gain vector and the
    deviation matrix ``(I - P + P*)^-1 (I - P*)`` for the bias. Improvement
    first maximizes ``T g`` and, when that leaves the policy unchanged, maximizes
    ``r + T h`` among the gain-maximizing actions. The incumbent action is kept
    whenever it is among the maximizers.
    """
    reward = _as_reward(mdp, reward)
    r = reward.values
    n = mdp.num_states
    actions = np.argmax(r >= r.max(axis=1, keepdims=True) - tie_tol, axis=1)
    for it in range(1, max_iters + 1):
        policy = Policy.from_actions(actions, mdp.num_actions)
        p_star, p = _limit_matrix(mdp, policy)
        r_pi = r[np.arange(n), actions]
        g = p_star @ r_pi
        h = np.linalg.solve(np.eye(n) - p + p_star, r_pi - g)

        tg = mdp.transitions @ g
        new = _improve(actions, tg, tie_tol)
        if np.array_equal(new, actions):
            admissible = tg >= tg.max(axis=1, keepdims=True) - tie_tol
            q = np.where(admissible, r + mdp.transitions @ h, -np.inf)
            new = _improve(actions, q, tie_tol)
            if np.array_equal(new, actions):
                return SolveResult(
                    policy=policy,
                    gain=policy_gain(mdp, reward, policy),
                    iterations=it,
                    span_residual=0.0,
                    ergodic_under_policy=chain_structure(induced_chain(mdp, policy)).ergodic,
                    method="multichain-pi",
                )
        actions = new
    raise SolverError(f"multichain policy iteration did not converge in {max_iters} iterations")


def _improve(actions, q, tie_tol):
    best = q.max(axis=1)
    current = q[np.arange(len(actions)), actions]
    keep = current >= best - tie_tol
    return np.where(keep, actions, _greedy(q, tie_tol))


def enumerate_optimal(mdp: FiniteMdp, reward, tie_tol: float = 1e-9):
    """Evaluate every deterministic policy; return ``(best_gain, best_policies)``.

    ``best_policies`` lists all policies within ``tie_tol`` of the best gain,
    in lexicographic order of their action vectors.
    """
    reward = _as_reward(mdp, reward)
    if mdp.num_actions ** mdp.num_states > ENUMERATION_LIMIT:
        raise SearchSpaceTooLargeError(
            f"{mdp.num_actions}^{mdp.num_states} policies exceeds {ENUMERATION_LIMIT}"
        )
    gains = []
    for actions in itertools.product(range(mdp.num_actions), repeat=mdp.num_states):
        policy = Policy.from_actions(actions, mdp.num_actions)
        gains.append((policy_gain(mdp, reward, policy), policy))
    best = max(g for g, _ in gains)
    return best, [p for g, p in gains if g >= best - tie_tol]
