"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline; they
are also collected in the terminal summary under "acceptance criteria".
"""

import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from ilrlab.chains import total_variation
from ilrlab.cli import main
from ilrlab.experiments import mean_curve, rows_to_csv, run_sweep
from ilrlab.imitation import behavioral_cloning, make_expert, sample_trajectory
from ilrlab.mdp import FiniteMdp
from ilrlab.rng import derive_seed, generator
from ilrlab.solver import enumerate_optimal, policy_gain, solve_average_reward
from ilrlab.verification import (
    RandomMdpSpec,
    check_tv_decay,
    check_lemma4,
    check_support_gain_suite,
    check_gain_transfer_suite,
    check_proposition1,
    check_tv_duality,
    fast_mixing_instance,
    generate_random_mdp,
    histogram_tv_failure_probability,
    plan_from_proposition1,
    stochastic_expert_demo,
)

from conftest import record_criterion

MASTER_SEED = 2024
FRACTIONS = [2.0**-k for k in range(12, -1, -1)]


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def test_criterion_01_tv_identities():
    rep, secs = timed(check_tv_duality, 1000, max_support=12, seed=MASTER_SEED)
    ok = rep.successes == 1000 and secs < 5
    record_criterion(1, ok, f"TV = sup-oracle, maximizer set, 2TV bound: {rep.successes}/1000 in {secs:.2f}s (< 5s)")
    assert ok


def test_criterion_02_mixing_decay_sums():
    rep, secs = timed(check_tv_decay, 200, max_states=15, seed=MASTER_SEED)
    violations = rep.trials - rep.successes
    ok = rep.trials == 200 and violations == 0 and secs < 60
    record_criterion(2, ok, f"decay sum <= 2 tau and d(l tau) <= 2^-l: {violations} violations / 200 chains in {secs:.1f}s (< 60s)")
    assert ok


def test_criterion_03_solver_matches_enumeration():
    start = time.perf_counter()
    worst = 0.0
    for i in range(100):
        seed = derive_seed(MASTER_SEED, 3, i)
        rng = generator(seed)
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        mdp = generate_random_mdp(RandomMdpSpec(n, m, int(rng.integers(1, n + 1)), seed=seed))
        res = solve_average_reward(mdp, mdp.rewards)
        best, _ = enumerate_optimal(mdp, mdp.rewards)
        worst = max(worst, abs(res.gain - best))
        assert abs(policy_gain(mdp, mdp.rewards, res.policy) - res.gain) <= 1e-9
    secs = time.perf_counter() - start
    ok = worst <= 1e-6 and secs < 60
    record_criterion(3, ok, f"solver vs enumeration on 100 MDPs: max |gap| {worst:.2e} (<= 1e-6) in {secs:.1f}s (< 60s)")
    assert ok


def test_criterion_04_intrinsic_gain_certificate():
    rep, secs = timed(check_support_gain_suite, 100, seed=MASTER_SEED)
    failures = rep.trials - rep.successes
    ok = rep.trials == 100 and failures == 0 and secs < 120
    record_criterion(4, ok, f"intrinsic gain >= 1 - TV: {failures} failures / 100 triples in {secs:.1f}s (< 120s)")
    assert ok


def test_criterion_05_extrinsic_lower_bound():
    rep, secs = timed(check_gain_transfer_suite, 50, 100, seed=MASTER_SEED)
    failures = rep.trials - rep.successes
    ok = rep.trials == 5000 and failures == 0 and secs < 120
    record_criterion(5, ok, f"extrinsic >= (1-k)E_E - 4 tau k: {failures} failures / 50x100 in {secs:.1f}s (< 120s)")
    assert ok


def test_criterion_06_end_to_end_guarantee():
    start = time.perf_counter()
    rates, passes, sizes, taus = [], [], [], []
    for k in range(20):
        mdp, expert = fast_mixing_instance(5, 3, 3, derive_seed(MASTER_SEED, 6, k), max_tau=2)
        plan = plan_from_proposition1(mdp, expert, 0.5, 0.2, n_trials=50, master_seed=derive_seed(MASTER_SEED, 6, k, 1))
        rep = check_proposition1(mdp, expert, plan)
        rates.append(rep.empirical_rate)
        passes.append(rep.passed)
        sizes.append(plan.n_required)
        taus.append(expert.tau_mix)
    secs = time.perf_counter() - start
    ok = all(passes) and max(sizes) <= 128000 and max(taus) <= 2 and secs < 600
    record_criterion(
        6, ok,
        f"20 MDPs x 50 trials, eta=0.5 delta=0.2: min rate {min(rates):.2f} (>= 0.63), "
        f"N in [{min(sizes)}, {max(sizes)}], tau in {sorted(set(taus))}, {secs:.0f}s (< 600s)",
    )
    assert ok


def sticky_chain_mdp():
    return FiniteMdp(np.array([[[0.9, 0.1]], [[0.2, 0.8]]]), np.zeros((2, 1)))


def test_criterion_07_histogram_concentration():
    mdp = sticky_chain_mdp()
    expert = make_expert(mdp, MASTER_SEED)
    eps, n = 0.05, 10_000
    rep, secs = timed(check_lemma4, mdp, expert, n, eps, 500, MASTER_SEED)
    allowed = histogram_tv_failure_probability(expert.tau_mix, n, eps)
    violation_rate = 1 - rep.empirical_rate
    ok = rep.passed and expert.tau_mix == 3 and secs < 120
    record_criterion(
        7, ok,
        f"2-state chain, eps={eps}, N={n}, tau={expert.tau_mix}: violation rate {violation_rate:.3f} "
        f"<= {allowed:.3f} + 3SE {rep.slack:.3f}, {secs:.1f}s (< 120s)",
    )
    assert ok


def test_criterion_08_dataset_size_sweep():
    start = time.perf_counter()
    rhos, gaps, bc_ok = [], [], True
    for k in range(10):
        mdp, expert = fast_mixing_instance(5, 3, 3, derive_seed(MASTER_SEED, 8, k), max_tau=None, expert_kind="optimal")
        rows = run_sweep(mdp, expert, FRACTIONS, trials=20, seed=derive_seed(MASTER_SEED, 8, k, 1), max_n=4096)
        fr, means = mean_curve(rows, "ILR")
        rhos.append(spearmanr(fr, means).statistic)
        gaps.append(abs(means[-1] - rows[0].expert_gain))
        # BC at full coverage: identical to the expert wherever the expert has stationary mass
        visited = expert.stationary.probs > 0
        for trial in range(20):
            ds = sample_trajectory(mdp, expert.policy, 4096, derive_seed(derive_seed(MASTER_SEED, 8, k, 1), trial))
            pi = behavioral_cloning(mdp, ds)
            bc_ok &= bool(np.array_equal(pi.action_probs[visited], expert.policy.action_probs[visited]))
    secs = time.perf_counter() - start
    ok = min(rhos) >= 0 and max(gaps) <= 0.02 and bc_ok and secs < 600
    record_criterion(
        8, ok,
        f"10 MDPs x 13 fractions x 20 trials: min Spearman {min(rhos):.2f} (>= 0), "
        f"max |ILR - expert| at full coverage {max(gaps):.1e} (<= 0.02), BC = expert on support: {bc_ok}, {secs:.0f}s",
    )
    assert ok


def test_criterion_09_stochastic_expert_counterexample():
    rep = stochastic_expert_demo(MASTER_SEED)
    tv = rep.per_trial_records[0].measured
    ok = abs(tv - 0.5) <= 1e-9 and rep.passed
    record_criterion(9, ok, f"1-state/2-action 50/50 expert: TV(expert, learner) = {tv!r} (0.5 +- 1e-9)")
    assert ok


def _artifacts(workdir):
    """Run a representative set of commands and return their output bytes."""
    mdp = workdir / "m.json"
    codes = [
        main(["gen-mdp", "--states", "5", "--actions", "3", "--branching", "3", "--seed", "3", "-o", str(mdp)]),
        main(["verify", "prop1", "--trials", "5", "--seed", "4", "--out", str(workdir / "prop1.json")]),
        main(["verify", "lemma4", "--trials", "50", "--samples", "2000", "--seed", "4", "--out", str(workdir / "lemma4.json")]),
        main(["verify", "lemma5", "--trials", "10", "--seed", "4", "--out", str(workdir / "lemma5.json")]),
        main(["imitate", str(mdp), "--samples", "500", "--seed", "4", "--out", str(workdir / "imitate.json")]),
        main(["sweep", str(mdp), "--trials", "3", "--samples", "512", "--seed", "4", "--out", str(workdir / "sweep.csv")]),
    ]
    assert codes == [0] * len(codes)
    return {p.name: p.read_bytes() for p in sorted(workdir.iterdir())}


def test_criterion_10_byte_identical_reruns(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    first.mkdir()
    second.mkdir()
    a, b = _artifacts(first), _artifacts(second)
    mdp = sticky_chain_mdp()
    rep_a, rep_b = (check_lemma4(mdp, make_expert(mdp, 0), 1000, 0.05, 20, MASTER_SEED) for _ in range(2))
    same = a == b and rep_a.to_json() == rep_b.to_json() and rep_a.to_csv() == rep_b.to_csv()
    ok = same and len(a) == 9
    record_criterion(10, ok, f"{len(a)} CLI artifacts + in-process report byte-identical across reruns: {same}")
    assert ok
