"""Experts, demonstration datasets, and the imitation learners.

The reduction itself is small: build the indicator reward of the expert's
visited state-action pairs and hand it to the average-reward solver once.
Behavioral cloning is included as the baseline.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from itertools import groupby
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ilrlab.chains import MixingProfile, chain_structure, mixing_profile
from ilrlab.exceptions import DimensionMismatchError, NoErgodicExpertError
from ilrlab.mdp import (
    FiniteMdp,
    MarkovChain,
    OccupancyDistribution,
    Policy,
    RewardTable,
    StateDistribution,
    induced_chain,
    occupancy_from_state_dist,
)
from ilrlab.rng import generator
from ilrlab.solver import SolveResult, solve_average_reward

DATASET_FORMAT = "ilrlab-dataset"
DATASET_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ExpertSpec:
    policy: Policy
    chain: MarkovChain
    stationary: StateDistribution
    occupancy: OccupancyDistribution
    mixing: MixingProfile

    @property
    def tau_mix(self) -> int:
        return self.mixing.tau_mix

    def support(self) -> frozenset:
        """State-action pairs with positive long-run expert mass."""
        actions = self.policy.actions
        return frozenset(
            (int(s), int(actions[s])) for s in np.flatnonzero(self.stationary.probs > 0)
        )


def expert_from_policy(mdp: FiniteMdp, policy: Policy, t_cap: int = 10_000) -> ExpertSpec:
    """Wrap a deterministic ergodic policy as an expert.

    Raises ``ValueError`` for stochastic policies and the chain-analysis errors
    for reducible or periodic chains.
    """
    if not policy.deterministic_flag:
        raise ValueError("expert policy must be deterministic")
    chain = induced_chain(mdp, policy)
    mixing = mixing_profile(chain, t_cap=t_cap)
    stationary = mixing.stationary
    return ExpertSpec(policy, chain, stationary, occupancy_from_state_dist(stationary, policy), mixing)


def make_expert(mdp: FiniteMdp, rng_seed: int, max_attempts: int = 1000, t_cap: int = 10_000) -> ExpertSpec:
    """Rejection-sample uniformly random deterministic policies until one is ergodic."""
    rng = generator(rng_seed)
    for _ in range(max_attempts):
        actions = rng.integers(0, mdp.num_actions, size=mdp.num_states)
        policy = Policy.from_actions(actions, mdp.num_actions)
        if chain_structure(induced_chain(mdp, policy)).ergodic:
            return expert_from_policy(mdp, policy, t_cap=t_cap)
    raise NoErgodicExpertError(
        f"no ergodic deterministic policy found in {max_attempts} attempts"
    )



def optimal_expert(mdp: FiniteMdp, t_cap: int = 10_000) -> ExpertSpec:
    """The gain-optimal deterministic policy for the extrinsic reward, as an expert.

    Models an expert trained on the task. Raises :class:`NoErgodicExpertError`
    when that policy's chain is not ergodic.
    """
    result = solve_average_reward(mdp, mdp.reward_table, multichain=True)
    if not result.ergodic_under_policy:
        raise NoErgodicExpertError("the extrinsic-optimal policy does not induce an ergodic chain")
    return expert_from_policy(mdp, result.policy, t_cap=t_cap)

@dataclass(frozen=True)
class ExpertDataset:
    """One demonstration trajectory and its empirical distributions.

    ``trajectory`` has shape ``(N, 2)`` with rows ``(state, action)``.
    """

    trajectory: np.ndarray
    histogram: OccupancyDistribution
    state_histogram: StateDistribution
    support: frozenset
    seed: int

    @classmethod
    def from_trajectory(cls, trajectory, num_states: int, num_actions: int, seed: int = 0) -> "ExpertDataset":
        traj = np.array(trajectory, dtype=np.int64).reshape(-1, 2)
        if len(traj) == 0:
            raise ValueError("trajectory must contain at least one step")
        s, a = traj[:, 0], traj[:, 1]
        if s.min() < 0 or s.max() >= num_states or a.min() < 0 or a.max() >= num_actions:
            raise DimensionMismatchError("trajectory contains out-of-range states or actions")
        traj.setflags(write=False)
        counts = np.bincount(s * num_actions + a, minlength=num_states * num_actions)
        counts = counts.reshape(num_states, num_actions)
        n = len(traj)
        support = frozenset((int(x), int(y)) for x, y in np.argwhere(counts > 0))
        return cls(
            trajectory=traj,
            histogram=OccupancyDistribution(counts / n),
            state_histogram=StateDistribution(counts.sum(axis=1) / n),
            support=support,
            seed=int(seed),
        )

    @property
    def n_samples(self) -> int:
        return len(self.trajectory)

    @property
    def num_states(self) -> int:
        return self.histogram.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.histogram.probs.shape[1]

    def prefix(self, n: int) -> "ExpertDataset":
        """The first ``n`` steps, as a dataset of its own."""
        return ExpertDataset.from_trajectory(
            self.trajectory[:n], self.num_states, self.num_actions, self.seed
        )


class TrajectoryReturn(NamedTuple):
    total: float
    per_step: float


def trajectory_return(trajectory, reward: RewardTable) -> TrajectoryReturn:
    traj = np.asarray(trajectory).reshape(-1, 2)
    total = float(reward.values[traj[:, 0], traj[:, 1]].sum())
    return TrajectoryReturn(total, total / len(traj))


def _cumulative(probs):
    """Row-wise CDFs whose entries from the last positive index on are +inf."""
    cum = np.cumsum(probs, axis=-1)
    k = probs.shape[-1]
    last = k - 1 - np.argmax(probs[..., ::-1] > 0, axis=-1)
    return np.where(np.arange(k) >= last[..., None], np.inf, cum)


def _pick(cum, u):
    return (cum <= u[..., None]).sum(axis=-1)


def sample_trajectory(mdp: FiniteMdp, policy: Policy, n_steps: int, rng_seed: int) -> ExpertDataset:
    """Roll out ``policy`` for ``n_steps`` from ``mdp.initial_state``.

    Step ``t`` consumes the uniform pair ``U[t] = (u_action, u_next)`` of a
    Philox stream keyed by ``rng_seed``. For each step the transition map
    ``f_t: S -> S`` is tabulated for every state at once and the prefix
    compositions are formed by a log-depth scan, which avoids a Python-level
    loop over steps.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if policy.action_probs.shape != (mdp.num_states, mdp.num_actions):
        raise DimensionMismatchError("policy does not match MDP dimensions")
    n_s = mdp.num_states
    uniforms = generator(rng_seed).random((n_steps, 2))
    cum_pi = _cumulative(policy.action_probs)
    cum_t = _cumulative(mdp.transitions)
    chunk = max(256, 2**22 // (n_s * n_s))
    states = np.empty(n_steps, dtype=np.int64)
    actions = np.empty(n_steps, dtype=np.int64)
    current = mdp.initial_state
    every = np.arange(n_s)
    for lo in range(0, n_steps, chunk):
        u = uniforms[lo:lo + chunk]
        acts = _pick(cum_pi[None, :, :], u[:, :1])  # (L, S): action taken in each state
        nxt = _pick(cum_t[every[None, :], acts], u[:, 1:2])  # (L, S): successor of each state
        prefix = nxt.copy()
        d = 1
        while d < len(prefix):
            prefix[d:] = np.take_along_axis(prefix[d:], prefix[:-d], axis=1)
            d *= 2
        block = np.empty(len(u), dtype=np.int64)
        block[0] = current
        block[1:] = prefix[:-1, current]
        states[lo:lo + len(u)] = block
        actions[lo:lo + len(u)] = acts[np.arange(len(u)), block]
        current = int(prefix[-1, current])
    return ExpertDataset.from_trajectory(
        np.column_stack([states, actions]), n_s, mdp.num_actions, seed=rng_seed
    )


def intrinsic_reward(mdp: FiniteMdp, support) -> RewardTable:
    """Indicator reward: 1 on the demonstrated state-action pairs, 0 elsewhere."""
    values = np.zeros((mdp.num_states, mdp.num_actions))
    for s, a in support:
        if not (0 <= s < mdp.num_states and 0 <= a < mdp.num_actions):
            raise DimensionMismatchError(f"support pair ({s}, {a}) out of range")
        values[s, a] = 1.0
    return RewardTable(values, label="intrinsic")


class ILRResult(NamedTuple):
    policy: Policy
    intrinsic_gain: float
    result: SolveResult


def ilr(mdp: FiniteMdp, dataset: ExpertDataset, solver_tol: float = 1e-10) -> ILRResult:
    """Imitation by a single average-reward solve on the intrinsic reward.

    The solver only ever sees the transition model and the indicator reward.
    """
    if dataset.n_samples < 1:
        raise ValueError("dataset must be non-empty")
    return ilr_from_support(mdp, dataset.support, solver_tol)


def ilr_from_support(mdp: FiniteMdp, support, solver_tol: float = 1e-10) -> ILRResult:
    reward = intrinsic_reward(mdp, support)
    environment = FiniteMdp(mdp.transitions, np.zeros_like(mdp.rewards), mdp.initial_state)
    result = solve_average_reward(environment, reward, tol=solver_tol, multichain=True)
    return ILRResult(result.policy, result.gain, result)


def behavioral_cloning(mdp: FiniteMdp, dataset: ExpertDataset) -> Policy:
    """Empirical majority action per visited state; uniform at unvisited states.

    Ties go to the lowest action index.
    """
    if dataset.n_samples < 1:
        raise ValueError("dataset must be non-empty")
    if (dataset.num_states, dataset.num_actions) != (mdp.num_states, mdp.num_actions):
        raise DimensionMismatchError("dataset does not match MDP dimensions")
    counts = dataset.histogram.probs
    probs = np.full((mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions)
    visited = counts.sum(axis=1) > 0
    majority = counts.argmax(axis=1)
    probs[visited] = 0.0
    probs[np.flatnonzero(visited), majority[visited]] = 1.0
    return Policy(probs)


@dataclass(frozen=True)
class StreakDecomposition:
    """Maximal runs of agreement with a reference deterministic policy.

    ``streak_lengths`` maps run length to the number of runs of that length.
    """

    streak_lengths: dict
    disagreement_count: int
    agreement_fraction: float
    length: int

    @property
    def num_streaks(self) -> int:
        return sum(self.streak_lengths.values())


def streak_decompose(trajectory, reference: Policy) -> StreakDecomposition:
    if not reference.deterministic_flag:
        raise ValueError("streak decomposition needs a deterministic reference policy")
    traj = np.asarray(trajectory).reshape(-1, 2)
    agree = reference.actions[traj[:, 0]] == traj[:, 1]
    runs = Counter(len(list(g)) for ok, g in groupby(agree.tolist()) if ok)
    n = len(traj)
    disagree = int(n - agree.sum())
    return StreakDecomposition(
        dict(sorted(runs.items())), disagree, float(agree.mean()) if n else 0.0, n
    )


# -- serialization -----------------------------------------------------------


def dataset_to_dict(dataset: ExpertDataset) -> dict:
    return {
        "format": DATASET_FORMAT,
        "version": DATASET_FORMAT_VERSION,
        "seed": dataset.seed,
        "n": dataset.n_samples,
        "num_states": dataset.num_states,
        "num_actions": dataset.num_actions,
        "trajectory": dataset.trajectory.tolist(),
        "histogram": dataset.histogram.probs.tolist(),
        "support": sorted(list(p) for p in dataset.support),
    }


def dataset_from_dict(data: dict) -> ExpertDataset:
    """Rebuild a dataset; stored histogram and support must match the trajectory."""
    dataset = ExpertDataset.from_trajectory(
        data["trajectory"], int(data["num_states"]), int(data["num_actions"]), int(data["seed"])
    )
    if int(data["n"]) != dataset.n_samples:
        raise ValueError(f"stored n={data['n']} but trajectory has {dataset.n_samples} steps")
    if "histogram" in data and not np.allclose(
        np.asarray(data["histogram"]), dataset.histogram.probs, rtol=0, atol=1e-12
    ):
        raise ValueError("stored histogram disagrees with trajectory")
    if "support" in data and {tuple(p) for p in data["support"]} != dataset.support:
        raise ValueError("stored support disagrees with trajectory")
    return dataset


def save_dataset(dataset: ExpertDataset, path) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(dataset)) + "\n", encoding="utf-8")


def load_dataset(path) -> ExpertDataset:
    return dataset_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

