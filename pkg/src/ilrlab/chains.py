"""Exact analysis of finite Markov chains.

Structure (irreducibility, period, recurrent classes), stationary and limiting
distributions, total variation, and the mixing-time profile ``d(t)`` used by
the TV-decay bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from ilrlab.exceptions import (
    DimensionMismatchError,
    MixingError,
    PeriodicChainError,
    ReducibleChainError,
    SingularSystemError,
    SupportTooLargeError,
)
from ilrlab.mdp import MarkovChain, OccupancyDistribution, StateDistribution, _renormalized

#: Mixing-time threshold; the constants 2*tau and 2**-l downstream depend on it.
MIX_THRESHOLD = 0.25
#: d(t_cap) below this certifies the truncated TV-decay tail.
TAIL_CERTIFICATE = 1e-9
STATIONARY_RESIDUAL_TOL = 1e-10
TV_SUP_MAX_SUPPORT = 20


@dataclass(frozen=True)
class ChainStructure:
    """Communication structure of a chain.

    ``period`` is the period of the unique recurrent class when the chain is
    irreducible; for reducible chains it is the period of the first recurrent
    class (``class_periods`` holds all of them).
    """

    irreducible: bool
    period: int
    recurrent_classes: tuple
    class_periods: tuple
    transient_states: tuple

    @property
    def aperiodic(self) -> bool:
        return self.period == 1

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.period == 1


@dataclass(frozen=True)
class MixingProfile:
    tau_mix: int
    d_curve: np.ndarray
    t_cap: int
    tail_certified: bool
    stationary: StateDistribution

    def submultiplicative(self, tol: float = 1e-12) -> bool:
        """Check ``d(l * tau_mix) <= 2**-l`` for every ``l`` on the curve."""
        if self.tau_mix == 0:
            return bool(np.all(self.d_curve <= tol))
        ells = np.arange(0, self.t_cap // self.tau_mix + 1)
        return bool(np.all(self.d_curve[ells * self.tau_mix] <= 2.0 ** -ells + tol))


def _edge_graph(matrix):
    return csr_matrix(matrix > 0)


def _class_period(matrix, members):
    members = np.asarray(sorted(members))
    if len(members) == 1:
        return 1 if matrix[members[0], members[0]] > 0 else 0
    sub = _edge_graph(matrix[np.ix_(members, members)])
    order, _ = breadth_first_order(sub, 0, directed=True, return_predecessors=True)
    level = np.full(len(members), -1)
    level[0] = 0
    for u in order:
        for v in sub.indices[sub.indptr[u]:sub.indptr[u + 1]]:
            if level[v] < 0:
                level[v] = level[u] + 1
    period = 0
    rows, cols = sub.nonzero()
    for u, v in zip(rows, cols):
        period = gcd(period, int(abs(level[u] + 1 - level[v])))
    return period


def chain_structure(chain: MarkovChain) -> ChainStructure:
    """SCC decomposition of the positive-probability graph plus BFS-level period."""
    matrix = chain.matrix
    n_comp, labels = connected_components(_edge_graph(matrix), directed=True, connection="strong")
    recurrent = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        outside = np.ones(len(matrix), dtype=bool)
        outside[members] = False
        if not np.any(matrix[np.ix_(members, outside)] > 0):
            recurrent.append(tuple(int(s) for s in members))
    recurrent.sort()
    periods = tuple(_class_period(matrix, c) for c in recurrent)
    in_class = {s for c in recurrent for s in c}
    transient = tuple(s for s in range(len(matrix)) if s not in in_class)
    irreducible = n_comp == 1
    return ChainStructure(irreducible, periods[0], tuple(recurrent), periods, transient)


def _solve_balance(matrix):
    n = len(matrix)
    a = matrix.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        rho = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"balance equations are singular: {exc}") from None
    if not np.all(np.isfinite(rho)):
        raise SingularSystemError("balance equations produced non-finite values")
    return rho


def stationary_distribution(chain: MarkovChain) -> StateDistribution:
    """Unique solution of ``rho P = rho``, ``sum(rho) = 1`` for an irreducible chain."""
    structure = chain_structure(chain)
    if not structure.irreducible:
        raise ReducibleChainError(
            f"chain is reducible; recurrent classes {list(structure.recurrent_classes)}",
            structure.recurrent_classes,
        )
    rho = _renormalized(_solve_balance(chain.matrix.copy()))
    residual = np.abs(rho @ chain.matrix - rho).max()
    if residual > STATIONARY_RESIDUAL_TOL:
        raise SingularSystemError(f"stationary residual {residual:.3g} exceeds tolerance")
    return StateDistribution(rho)


def limiting_distribution(chain: MarkovChain, start: StateDistribution) -> StateDistribution:
    """Cesaro limit of ``start P^i`` for any finite chain.

    Mass is split across recurrent classes by absorption probabilities and
    spread inside each class by the class's stationary distribution.
    """
    _check_same_size(chain.num_states, start.num_states)
    structure = chain_structure(chain)
    if structure.irreducible:
        return stationary_distribution(chain)
    matrix = chain.matrix
    p = start.probs
    transient = np.asarray(structure.transient_states, dtype=int)
    limit = np.zeros(chain.num_states)
    if transient.size:
        fundamental = np.eye(transient.size) - matrix[np.ix_(transient, transient)]
    for members in structure.recurrent_classes:
        members = np.asarray(members)
        weight = p[members].sum()
        if transient.size:
            into = matrix[np.ix_(transient, members)].sum(axis=1)
            absorb = np.linalg.solve(fundamental, into)
            weight += p[transient] @ absorb
        if weight <= 0:
            continue
        sub = matrix[np.ix_(members, members)]
        sub = sub / sub.sum(axis=1, keepdims=True)
        limit[members] += weight * _renormalized(_solve_balance(sub))
    return StateDistribution(_renormalized(limit))


def cesaro_average(chain: MarkovChain, start: StateDistribution, n_terms: int) -> StateDistribution:
    """``(1/n) sum_{i<n} start P^i`` by binary doubling of (partial sum, power)."""
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    _check_same_size(chain.num_states, start.num_states)
    matrix = chain.matrix
    n = chain.num_states
    # acc_sum = sum_{i<k} P^i and acc_pow = P^k for the bits consumed so far
    acc_sum, acc_pow = np.zeros((n, n)), np.eye(n)
    blk_sum, blk_pow = np.eye(n), matrix.copy()  # block of length 2^j
    k = n_terms
    while k:
        if k & 1:
            acc_sum = acc_sum + acc_pow @ blk_sum
            acc_pow = acc_pow @ blk_pow
        k >>= 1
        if k:
            blk_sum = blk_sum + blk_pow @ blk_sum
            blk_pow = blk_pow @ blk_pow
    return StateDistribution(_renormalized(start.probs @ acc_sum / n_terms))


def _as_probs(p):
    if isinstance(p, (StateDistribution, OccupancyDistribution)):
        return p.probs
    return np.asarray(p, dtype=float)


def _check_same_size(a, b):
    if a != b:
        raise DimensionMismatchError(f"dimension mismatch: {a} vs {b}")


def total_variation(p, q) -> float:
    """Half the L1 distance between two distributions over the same set."""
    p, q = _as_probs(p), _as_probs(q)
    if p.shape != q.shape:
        raise DimensionMismatchError(f"distribution shapes differ: {p.shape} vs {q.shape}")
    return float(min(1.0, 0.5 * np.abs(p - q).sum()))


class TvSup(NamedTuple):
    value: float
    subset: frozenset


def tv_sup_oracle(p, q, return_subset: bool = False):
    """Brute-force ``max_M |p(M) - q(M)|`` over all subsets of the support.

    Ties prefer subsets where ``p`` exceeds ``q``, then smaller subsets, then
    lower bitmask order. Returns the value, or a :class:`TvSup` when
    ``return_subset`` is set.
    """
    p, q = _as_probs(p).ravel(), _as_probs(q).ravel()
    if p.shape != q.shape:
        raise DimensionMismatchError(f"distribution shapes differ: {p.shape} vs {q.shape}")
    n = p.size
    if n > TV_SUP_MAX_SUPPORT:
        raise SupportTooLargeError(f"support of size {n} exceeds {TV_SUP_MAX_SUPPORT}")
    diff = p - q
    signed = np.zeros(1)
    sizes = np.zeros(1, dtype=np.int64)
    for x in range(n):
        # subsets containing x occupy mask bit x
        signed = np.concatenate([signed, signed + diff[x]])
        sizes = np.concatenate([sizes, sizes + 1])
    gap = np.abs(signed)
    best = gap.max()
    ties = np.flatnonzero(gap >= best - 1e-15)
    mask = min(ties, key=lambda m: (signed[m] < 0, sizes[m], m))
    value = float(gap[mask])
    if not return_subset:
        return value
    return TvSup(value, frozenset(x for x in range(n) if mask >> x & 1))


def mixing_profile(chain: MarkovChain, t_cap: int = 10_000) -> MixingProfile:
    """Exact worst-start TV curve ``d(t)`` and the mixing time ``tau_mix``.

    Evaluation stops at ``t_cap`` or once ``d(t)`` reaches round-off level
    (below 1e-12); the profile's ``t_cap`` is the last evaluated ``t``.
    """
    structure = chain_structure(chain)
    if not structure.irreducible:
        raise ReducibleChainError(
            "mixing analysis needs an irreducible chain", structure.recurrent_classes
        )
    if not structure.aperiodic:
        raise PeriodicChainError(f"chain has period {structure.period}")
    stationary = stationary_distribution(chain)
    rho = stationary.probs
    matrix = chain.matrix
    dist = np.eye(chain.num_states)
    curve = []
    tau = None
    for t in range(t_cap + 1):
        d = min(1.0, float(0.5 * np.abs(dist - rho).sum(axis=1).max()))
        curve.append(d)
        if tau is None and d <= MIX_THRESHOLD:
            tau = t
        if tau is not None and d < 1e-12:
            break
        dist = dist @ matrix
    if tau is None:
        raise MixingError(f"d(t) stayed above 1/4 up to t_cap={t_cap}; increase t_cap")
    d_curve = np.asarray(curve)
    d_curve.setflags(write=False)
    last = len(curve) - 1
    return MixingProfile(tau, d_curve, last, bool(d_curve[-1] < TAIL_CERTIFICATE), stationary)


def tv_decay_sum(chain: MarkovChain, start: StateDistribution, profile: MixingProfile) -> float:
    """Upper estimate of ``sum_{t>=0} TV(start P^t, rho)``.

    The explicit sum runs to ``profile.t_cap``; the remainder is bounded by
    ``2 tau_mix d(t_cap)`` using ``d(t + l tau) <= d(t) 2**-l``.
    """
    if not profile.tail_certified:
        raise MixingError("profile tail is not certified; increase t_cap")
    _check_same_size(chain.num_states, start.num_states)
    rho = profile.stationary.probs
    dist = start.probs.copy()
    total = 0.0
    for _ in range(profile.t_cap + 1):
        total += 0.5 * np.abs(dist - rho).sum()
        dist = dist @ chain.matrix
    return float(total + 2 * profile.tau_mix * profile.d_curve[-1])
