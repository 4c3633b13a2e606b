"""Dataset-size sweeps comparing the reduction with behavioral cloning."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import astuple, dataclass, fields

import numpy as np

from ilrlab.chains import total_variation
from ilrlab.imitation import ExpertSpec, behavioral_cloning, ilr, intrinsic_reward, sample_trajectory
from ilrlab.mdp import FiniteMdp, expected_reward
from ilrlab.rng import derive_seed
from ilrlab.verification import CSV_SCHEMA_VERSION, policy_occupancy

METHODS = ("ILR", "BC")


@dataclass(frozen=True)
class SweepRow:
    dataset_fraction: float
    n_samples: int
    method: str
    extrinsic_gain: float
    expert_gain: float
    tv_to_expert: float
    intrinsic_gain: float
    trial: int
    seed: int


SWEEP_COLUMNS = tuple(f.name for f in fields(SweepRow))


def fraction_sizes(fractions, max_n: int) -> list:
    return [max(1, int(round(f * max_n))) for f in fractions]


def run_sweep(mdp: FiniteMdp, expert: ExpertSpec, fractions, methods=METHODS,
              trials: int = 20, seed: int = 0, max_n: int = 4096,
              solver_tol: float = 1e-10) -> list:
    """One row per (fraction, method, trial).

    Each trial samples a single expert trajectory of ``max_n`` steps; smaller
    datasets are its prefixes, so a fraction means "the first part of the
    demonstration".
    """
    fractions = [float(f) for f in fractions]
    if any(not 0 < f <= 1 for f in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    extrinsic = mdp.reward_table
    expert_gain = expected_reward(expert.occupancy, extrinsic)
    rows = []
    for trial in range(trials):
        trial_seed = derive_seed(seed, trial)
        full = sample_trajectory(mdp, expert.policy, max_n, trial_seed)
        for fraction, n in zip(fractions, fraction_sizes(fractions, max_n)):
            dataset = full.prefix(n)
            r_int = intrinsic_reward(mdp, dataset.support)
            for method in methods:
                if method == "ILR":
                    policy = ilr(mdp, dataset, solver_tol).policy
                else:
                    policy = behavioral_cloning(mdp, dataset)
                occ = policy_occupancy(mdp, policy)
                rows.append(SweepRow(
                    dataset_fraction=fraction,
                    n_samples=n,
                    method=method,
                    extrinsic_gain=expected_reward(occ, extrinsic),
                    expert_gain=expert_gain,
                    tv_to_expert=total_variation(expert.occupancy, occ),
                    intrinsic_gain=expected_reward(occ, r_int),
                    trial=trial,
                    seed=trial_seed,
                ))
    order = {m: i for i, m in enumerate(methods)}
    rows.sort(key=lambda r: (r.dataset_fraction, order[r.method], r.trial))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version: {CSV_SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in astuple(row)])
    return buf.getvalue()


def mean_curve(rows, method: str, column: str = "extrinsic_gain"):
    """``(fractions, means)`` of ``column`` for one method, sorted by fraction."""
    groups = defaultdict(list)
    for row in rows:
        if row.method == method:
            groups[row.dataset_fraction].append(getattr(row, column))
    fracs = sorted(groups)
    return np.asarray(fracs), np.asarray([np.mean(groups[f]) for f in fracs])


def gain_transfer_holds(row: SweepRow, tau_mix: int) -> bool:
    """Check a row against ``(1-kappa) E_E[R] - 4 tau kappa`` with ``kappa = 1 - intrinsic``.

    Using the dataset's support instead of the full expert support only
    enlarges ``kappa``, which weakens the bound.
    """
    kappa = 1.0 - row.intrinsic_gain
    return row.extrinsic_gain >= (1 - kappa) * row.expert_gain - 4 * tau_mix * kappa - 1e-9
