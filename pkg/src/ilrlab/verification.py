"""Seeded, reproducible checks of the imitation guarantees.

Each check returns a :class:`VerificationReport`. Statistical checks compare
an empirical success rate to a required rate with a three-standard-error
allowance; exact checks (theorems) require every trial to succeed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ilrlab.chains import (
    chain_structure,
    mixing_profile,
    total_variation,
    tv_decay_sum,
    tv_sup_oracle,
)
from ilrlab.exceptions import IlrLabError
from ilrlab.imitation import (
    ExpertDataset,
    ExpertSpec,
    ilr,
    ilr_from_support,
    intrinsic_reward,
    make_expert,
    optimal_expert,
    sample_trajectory,
)
from ilrlab.mdp import (
    FiniteMdp,
    MarkovChain,
    OccupancyDistribution,
    Policy,
    RewardTable,
    StateDistribution,
    expected_reward,
    induced_chain,
    occupancy_from_state_dist,
)
from ilrlab.rng import derive_seed, generator
from ilrlab.solver import state_action_limit

#: Comparison slack for inequalities evaluated in floating point.
FLOAT_SLACK = 1e-9


# -- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    measured: float
    bound: float
    satisfied: bool
    flag: str = ""


@dataclass
class VerificationReport:
    check_name: str
    trials: int
    successes: int
    empirical_rate: float
    required_rate: float
    passed: bool
    per_trial_records: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return three_se_slack(self.required_rate, self.trials)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        out["slack"] = self.slack
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version: {CSV_SCHEMA_VERSION}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for rec in self.per_trial_records:
            writer.writerow([rec.trial, rec.seed, repr(rec.measured), repr(rec.bound),
                             int(rec.satisfied), rec.flag])
        return buf.getvalue()

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.check_name}: {self.successes}/{self.trials} "
                f"(rate {self.empirical_rate:.4f}, required {self.required_rate:.4f} "
                f"- slack {self.slack:.4f})")


CSV_SCHEMA_VERSION = 1
RECORD_COLUMNS = ("trial", "seed", "measured", "bound", "satisfied", "flag")


def three_se_slack(required_rate: float, trials: int) -> float:
    p = min(1.0, max(0.0, required_rate))
    return 3.0 * math.sqrt(p * (1 - p) / trials) if trials else 0.0


def make_report(check_name, records, required_rate, details=None) -> VerificationReport:
    trials = len(records)
    successes = sum(1 for r in records if r.satisfied)
    rate = successes / trials if trials else 1.0
    required_rate = min(1.0, max(0.0, required_rate))
    passed = rate >= required_rate - three_se_slack(required_rate, trials) - 1e-15
    return VerificationReport(check_name, trials, successes, rate, required_rate, passed,
                              list(records), dict(details or {}))


# -- plans -------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationPlan:
    eta: float
    delta: float
    epsilon: float
    kappa_bound: float
    n_required: int
    n_trials: int
    master_seed: int
    tau_mix: int
    num_states: int


def required_samples(num_states: int, tau_mix: int, eta: float, delta: float) -> int:
    """Dataset size ``max(800 |S|, 450 log(2/delta)) tau^3 / eta^2``, rounded up.

    The ``800 |S|`` branch is evaluated in exact rational arithmetic.
    """
    if tau_mix == 0:
        return 1
    exact = Fraction(800 * num_states) * tau_mix**3 / Fraction(eta) ** 2
    by_states = -(-exact.numerator // exact.denominator)
    by_conf = math.ceil(450.0 * math.log(2.0 / delta) * tau_mix**3 / eta**2)
    return int(max(by_states, by_conf))


def plan_from_proposition1(mdp: FiniteMdp, expert: ExpertSpec, eta: float, delta: float,
                           n_trials: int = 50, master_seed: int = 0) -> VerificationPlan:
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    tau = expert.tau_mix
    n = required_samples(mdp.num_states, tau, eta, delta)
    epsilon = eta / (2 + 8 * tau)
    kappa = epsilon + math.sqrt(8 * mdp.num_states * tau / n)
    return VerificationPlan(eta, delta, epsilon, kappa, n, n_trials, master_seed, tau, mdp.num_states)


def histogram_tv_bound(num_states: int, tau_mix: int, n_samples: int, epsilon: float) -> float:
    return epsilon + math.sqrt(8 * num_states * tau_mix / n_samples)


def histogram_tv_failure_probability(tau_mix: int, n_samples: int, epsilon: float) -> float:
    if tau_mix == 0:
        return 0.0
    return 2.0 * math.exp(-(epsilon**2) * n_samples / (4.5 * tau_mix))


# -- random instances --------------------------------------------------------


@dataclass(frozen=True)
class RandomMdpSpec:
    num_states: int
    num_actions: int
    branching: int
    reward_style: str = "uniform"
    ensure_communicating: bool = True
    seed: int = 0
    max_attempts: int = 10_000

    def __post_init__(self):
        if self.num_states < 1 or self.num_actions < 1:
            raise ValueError("num_states and num_actions must be positive")
        if not 1 <= self.branching <= self.num_states:
            raise ValueError(
                f"branching {self.branching} must lie in [1, num_states={self.num_states}]"
            )
        if self.reward_style not in ("uniform", "sparse"):
            raise ValueError(f"unknown reward_style {self.reward_style!r}")


def _union_strongly_connected(transitions):
    graph = csr_matrix(transitions.max(axis=1) > 0)
    return connected_components(graph, directed=True, connection="strong")[0] == 1


def generate_random_mdp(spec: RandomMdpSpec) -> FiniteMdp:
    """Garnet-style instance: ``branching`` successors per pair with flat-Dirichlet weights.

    Sparse rewards put a uniform value on roughly a fifth of the pairs and zero
    elsewhere. With ``ensure_communicating`` the instance is redrawn until the
    action-union graph is strongly connected.
    """
    rng = generator(spec.seed)
    n, m, b = spec.num_states, spec.num_actions, spec.branching
    for _ in range(spec.max_attempts):
        transitions = np.zeros((n, m, n))
        for s in range(n):
            for a in range(m):
                succ = rng.choice(n, size=b, replace=False)
                transitions[s, a, succ] = rng.dirichlet(np.ones(b))
        rewards = rng.random((n, m))
        if spec.reward_style == "sparse":
            rewards = np.where(rng.random((n, m)) < 0.2, rewards, 0.0)
        if not spec.ensure_communicating or _union_strongly_connected(transitions):
            return FiniteMdp(transitions, rewards, 0)
    raise IlrLabError(f"no communicating MDP found in {spec.max_attempts} attempts")


def fast_mixing_instance(num_states: int, num_actions: int, branching: int, seed: int = 0,
                         max_tau: int | None = 2, max_attempts: int = 1000,
                         expert_kind: str = "random"):
    """Draw ``(mdp, expert)`` pairs until the expert mixes within ``max_tau`` steps.

    ``expert_kind`` is ``"random"`` (rejection-sampled ergodic policy) or
    ``"optimal"`` (the extrinsic-optimal policy, redrawn until ergodic).
    """
    if expert_kind not in ("random", "optimal"):
        raise ValueError(f"unknown expert_kind {expert_kind!r}")
    for k in range(max_attempts):
        mdp = generate_random_mdp(RandomMdpSpec(num_states, num_actions, branching,
                                                seed=derive_seed(seed, k)))
        try:
            if expert_kind == "optimal":
                expert = optimal_expert(mdp)
            else:
                expert = make_expert(mdp, derive_seed(seed, k, 1))
        except IlrLabError:
            continue
        if max_tau is None or expert.tau_mix <= max_tau:
            return mdp, expert
    raise IlrLabError(f"no expert with tau_mix <= {max_tau} in {max_attempts} draws")


def random_ergodic_chain(num_states: int, rng, max_attempts: int = 10_000) -> MarkovChain:
    """Sparse random chain, redrawn until irreducible and aperiodic."""
    for _ in range(max_attempts):
        out_degree = rng.integers(1, num_states + 1, size=num_states)
        matrix = np.zeros((num_states, num_states))
        for s in range(num_states):
            succ = rng.choice(num_states, size=out_degree[s], replace=False)
            matrix[s, succ] = rng.dirichlet(np.ones(out_degree[s]))
        chain = MarkovChain(matrix / matrix.sum(axis=1, keepdims=True))
        if chain_structure(chain).ergodic:
            return chain
    raise IlrLabError("failed to draw an ergodic chain")


def random_distribution(size, rng, sparsity: float = 0.3) -> np.ndarray:
    """Dirichlet draw with a random subset of entries zeroed (at least one kept)."""
    p = rng.dirichlet(np.ones(size))
    mask = rng.random(size) < sparsity
    mask[rng.integers(size)] = False
    p[mask] = 0.0
    return p / p.sum()


# -- TV identities -----------------------------------------------------------


def check_tv_duality(n_pairs: int = 1000, max_support: int = 12, seed: int = 0) -> VerificationReport:
    """Half-L1 vs brute-force sup, the maximizer set, and the 2*TV reward gap.

    A trial succeeds when all three hold for its random pair.
    """
    records = []
    for i in range(n_pairs):
        trial_seed = derive_seed(seed, i)
        rng = generator(trial_seed)
        size = int(rng.integers(1, max_support + 1))
        p, q = random_distribution(size, rng), random_distribution(size, rng)
        v = rng.random(size)
        tv = total_variation(p, q)
        sup = tv_sup_oracle(p, q)
        maximizer = (p > q).astype(float)
        gap_at_max = float(p @ maximizer - q @ maximizer)
        reward_gap = abs(float(p @ v - q @ v))
        ok = (abs(tv - sup) <= 1e-12 and abs(gap_at_max - tv) <= 1e-12
              and reward_gap <= 2 * tv + 1e-12)
        records.append(TrialRecord(i, trial_seed, tv, sup, ok))
    return make_report("tv-duality", records, 1.0)


# -- mixing ------------------------------------------------------------------


def check_tv_decay(n_chains: int = 200, max_states: int = 15, seed: int = 0,
                 t_cap: int = 100_000) -> VerificationReport:
    """TV-decay sums from every indicator start stay within ``2 tau_mix``.

    One trial per chain; the recorded measurement is the largest sum over starts.
    A trial also requires ``d(l tau) <= 2**-l`` along the computed curve.
    """
    records = []
    for i in range(n_chains):
        trial_seed = derive_seed(seed, i)
        rng = generator(trial_seed)
        n = int(rng.integers(1, max_states + 1))
        chain = random_ergodic_chain(n, rng)
        profile = mixing_profile(chain, t_cap=t_cap)
        worst = max(
            tv_decay_sum(chain, StateDistribution.point_mass(s, n), profile) for s in range(n)
        )
        bound = 2.0 * profile.tau_mix
        ok = worst <= bound + FLOAT_SLACK and profile.submultiplicative()
        records.append(TrialRecord(i, trial_seed, worst, bound, ok,
                                   "" if profile.submultiplicative() else "submultiplicativity"))
    return make_report("lemma3", records, 1.0)


# -- dataset concentration ---------------------------------------------------


def check_lemma4(mdp: FiniteMdp, expert: ExpertSpec, n_samples: int, epsilon: float,
                 n_trials: int, seed: int) -> VerificationReport:
    """Histogram concentration: ``TV(rho_E, rho_hat) <= eps + sqrt(8|S|tau/N)``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    tau = expert.tau_mix
    bound = histogram_tv_bound(mdp.num_states, tau, n_samples, epsilon)
    records = []
    for i in range(n_trials):
        trial_seed = derive_seed(seed, i)
        dataset = sample_trajectory(mdp, expert.policy, n_samples, trial_seed)
        tv = total_variation(expert.occupancy, dataset.histogram)
        records.append(TrialRecord(i, trial_seed, tv, bound, tv <= bound))
    required = 1.0 - histogram_tv_failure_probability(tau, n_samples, epsilon)
    return make_report("lemma4", records, required,
                       {"n_samples": n_samples, "epsilon": epsilon, "tau_mix": tau})


# -- intrinsic reward is achievable ------------------------------------------


@dataclass(frozen=True)
class SupportGainOutcome:
    kappa_realized: float
    intrinsic_gain: float
    satisfied: bool


def check_lemma5(mdp: FiniteMdp, expert: ExpertSpec, dataset: ExpertDataset,
                 solver_tol: float = 1e-10) -> SupportGainOutcome:
    kappa = total_variation(expert.occupancy, dataset.histogram)
    gain = ilr(mdp, dataset, solver_tol).intrinsic_gain
    return SupportGainOutcome(kappa, gain, gain >= 1.0 - kappa - FLOAT_SLACK)


# -- intrinsic implies extrinsic ----------------------------------------------


def check_support_gain_suite(n_triples: int = 100, num_states: int = 5, num_actions: int = 3,
                       branching: int = 3, max_samples: int = 2000,
                       seed: int = 0) -> VerificationReport:
    """Support-gain check on independent (MDP, expert, dataset) triples with random dataset sizes."""
    records = []
    for i in range(n_triples):
        trial_seed = derive_seed(seed, i)
        mdp, expert = fast_mixing_instance(num_states, num_actions, branching, trial_seed,
                                           max_tau=None)
        n = int(generator(derive_seed(trial_seed, 2)).integers(1, max_samples + 1))
        dataset = sample_trajectory(mdp, expert.policy, n, derive_seed(trial_seed, 3))
        out = check_lemma5(mdp, expert, dataset)
        records.append(TrialRecord(i, trial_seed, out.intrinsic_gain, 1.0 - out.kappa_realized,
                                   out.satisfied))
    return make_report("lemma5", records, 1.0)


def expert_intrinsic_reward(mdp: FiniteMdp, expert: ExpertSpec) -> RewardTable:
    return intrinsic_reward(mdp, expert.support())


def policy_occupancy(mdp: FiniteMdp, policy: Policy) -> OccupancyDistribution:
    """Limiting state-action distribution of ``policy`` from ``s1``."""
    return occupancy_from_state_dist(state_action_limit(mdp, policy), policy)


def transfer_worst_case_margin(mdp: FiniteMdp, expert: ExpertSpec, policy: Policy) -> float:
    """Minimum over all rewards in ``[0,1]^{SxA}`` of LHS minus RHS.

    The inequality is linear in the reward, so the minimizing reward is 1
    exactly where ``rho_pi - (1 - kappa) rho_E`` is negative.
    """
    occ = policy_occupancy(mdp, policy).probs
    kappa = 1.0 - expected_reward(OccupancyDistribution(occ), expert_intrinsic_reward(mdp, expert))
    coeff = occ - (1.0 - kappa) * expert.occupancy.probs
    return float(np.minimum(coeff, 0.0).sum() + 4 * expert.tau_mix * kappa)


def check_lemma7(mdp: FiniteMdp, expert: ExpertSpec, policy: Policy,
                 n_random_rewards: int = 100, seed: int = 0) -> VerificationReport:
    """Extrinsic gain of an ergodic policy vs ``(1-kappa) E_E[R] - 4 tau kappa``."""
    if not chain_structure(induced_chain(mdp, policy)).ergodic:
        raise ValueError("check_lemma7 requires a policy with an ergodic induced chain")
    occ = policy_occupancy(mdp, policy)
    kappa = 1.0 - expected_reward(occ, expert_intrinsic_reward(mdp, expert))
    tau = expert.tau_mix
    records = []
    for i in range(n_random_rewards):
        trial_seed = derive_seed(seed, i)
        reward = RewardTable(generator(trial_seed).random((mdp.num_states, mdp.num_actions)))
        lhs = expected_reward(occ, reward)
        rhs = (1 - kappa) * expected_reward(expert.occupancy, reward) - 4 * tau * kappa
        records.append(TrialRecord(i, trial_seed, lhs, rhs, lhs >= rhs - FLOAT_SLACK))
    return make_report("lemma7", records, 1.0, {"kappa": kappa, "tau_mix": tau})


def random_ergodic_policy(mdp: FiniteMdp, rng, deterministic: bool = False,
                          max_attempts: int = 1000) -> Policy:
    for _ in range(max_attempts):
        if deterministic:
            policy = Policy.from_actions(rng.integers(0, mdp.num_actions, mdp.num_states),
                                         mdp.num_actions)
        else:
            probs = rng.dirichlet(np.full(mdp.num_actions, 0.5), size=mdp.num_states)
            policy = Policy(probs / probs.sum(axis=1, keepdims=True))
        if chain_structure(induced_chain(mdp, policy)).ergodic:
            return policy
    raise IlrLabError("failed to draw an ergodic policy")


def check_gain_transfer_suite(n_policies: int = 50, n_random_rewards: int = 100, num_states: int = 5,
                       num_actions: int = 3, branching: int = 3,
                       seed: int = 0) -> VerificationReport:
    """Gain-transfer check over many (MDP, expert, ergodic policy) triples.

    Odd-indexed triples use deterministic policies, even-indexed ones
    stochastic policies. One record per (policy, reward) pair.
    """
    records = []
    for i in range(n_policies):
        policy_seed = derive_seed(seed, i)
        mdp, expert = fast_mixing_instance(num_states, num_actions, branching, policy_seed,
                                           max_tau=None)
        rng = generator(derive_seed(policy_seed, 1))
        try:
            policy = random_ergodic_policy(mdp, rng, deterministic=bool(i % 2))
        except IlrLabError:
            policy = random_ergodic_policy(mdp, rng)
        sub = check_lemma7(mdp, expert, policy, n_random_rewards, derive_seed(policy_seed, 2))
        base = i * n_random_rewards
        records.extend(
            TrialRecord(base + r.trial, r.seed, r.measured, r.bound, r.satisfied, r.flag)
            for r in sub.per_trial_records
        )
    return make_report("lemma7", records, 1.0)


# -- end to end --------------------------------------------------------------


@dataclass(frozen=True)
class ImitationOutcome:
    tv_to_expert: float
    intrinsic_gain: float
    ergodic: bool
    worst_regret: float
    policy: Policy


def evaluate_imitation(mdp: FiniteMdp, expert: ExpertSpec, support, rewards,
                       solver_tol: float = 1e-10) -> ImitationOutcome:
    """Run the reduction on ``support`` and score it against the expert."""
    result = ilr_from_support(mdp, support, solver_tol)
    occ = policy_occupancy(mdp, result.policy)
    tv = total_variation(expert.occupancy, occ)
    regrets = [expected_reward(expert.occupancy, r) - expected_reward(occ, r) for r in rewards]
    return ImitationOutcome(tv, result.intrinsic_gain, result.result.ergodic_under_policy,
                            max(regrets, default=0.0), result.policy)


def check_proposition1(mdp: FiniteMdp, expert: ExpertSpec, plan: VerificationPlan,
                       n_rewards: int = 20, samples_override: int | None = None,
                       solver_tol: float = 1e-10) -> VerificationReport:
    """High-probability TV and reward-recovery guarantee of the reduction.

    A trial succeeds when the learner's chain is ergodic, its TV distance to
    the expert is at most ``eta``, and none of ``n_rewards`` random extrinsic
    rewards shows a regret above ``eta``. Non-ergodic learners are failures
    flagged ``non-ergodic``.
    """
    n = samples_override if samples_override is not None else plan.n_required
    records = []
    for i in range(plan.n_trials):
        trial_seed = derive_seed(plan.master_seed, i)
        dataset = sample_trajectory(mdp, expert.policy, n, trial_seed)
        reward_rng = generator(derive_seed(trial_seed, 1))
        rewards = [RewardTable(reward_rng.random((mdp.num_states, mdp.num_actions)))
                   for _ in range(n_rewards)]
        try:
            out = evaluate_imitation(mdp, expert, dataset.support, rewards, solver_tol)
        except IlrLabError as exc:
            records.append(TrialRecord(i, trial_seed, float("nan"), plan.eta, False,
                                       f"solver-error: {exc}"))
            continue
        ok = out.ergodic and out.tv_to_expert <= plan.eta and out.worst_regret <= plan.eta
        flag = "" if out.ergodic else "non-ergodic"
        records.append(TrialRecord(i, trial_seed, out.tv_to_expert, plan.eta, ok, flag))
    details = {"n_samples": n, "eta": plan.eta, "delta": plan.delta, "tau_mix": plan.tau_mix,
               "epsilon": plan.epsilon, "kappa_bound": plan.kappa_bound}
    return make_report("prop1", records, 1.0 - plan.delta, details)


# -- stochastic experts ------------------------------------------------------


def stochastic_expert_demo(seed: int = 0, expert_probs=(0.5, 0.5), n_samples: int = 10_000,
                           floor: float = 0.1) -> VerificationReport:
    """Single-state MDP with a (possibly) stochastic expert.

    The reduction always returns a deterministic policy, so a stochastic
    expert leaves a TV gap equal to the mass the learner cannot reproduce.
    The report passes when the gap reaches ``floor``, i.e. when imitation
    provably fails; a deterministic expert is the control and does not pass.
    """
    probs = np.asarray(expert_probs, dtype=float)
    num_actions = len(probs)
    mdp = FiniteMdp(np.ones((1, num_actions, 1)), np.zeros((1, num_actions)), 0)
    expert = Policy(probs[None, :])
    dataset = sample_trajectory(mdp, expert, n_samples, seed)
    result = ilr(mdp, dataset)
    rho_e = occupancy_from_state_dist(StateDistribution(np.ones(1)), expert)
    tv = total_variation(rho_e, policy_occupancy(mdp, result.policy))
    counterexample = not expert.deterministic_flag
    ok = counterexample and tv >= floor - 1e-12
    flag = "" if counterexample else "not a counterexample"
    record = TrialRecord(0, int(seed), tv, floor, ok, flag)
    return make_report("stochastic-demo", [record], 1.0,
                       {"expert_probs": probs.tolist(),
                        "learner_actions": result.policy.actions.tolist()})
