"""scikit-learn style wrappers around the imitation learners.

Demonstrations are passed the way a classifier sees labelled data: ``X`` holds
visited states (shape ``(n,)`` or ``(n, 1)``) and ``y`` the expert's actions,
in trajectory order. ``predict`` returns the learned action per state.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ilrlab.imitation import ExpertDataset, behavioral_cloning, ilr
from ilrlab.mdp import FiniteMdp


def check_states(X, num_states: int) -> np.ndarray:
    """Validate a state column and return it as a 1-D int array."""
    X = np.asarray(X)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError(f"expected states of shape (n,) or (n, 1), got {X.shape}")
    if X.size == 0:
        raise ValueError("at least one state is required")
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise ValueError("states must be integer indices")
        X = X.astype(np.int64)
    if X.min() < 0 or X.max() >= num_states:
        raise ValueError(f"states must lie in [0, {num_states})")
    return X.astype(np.int64)


def check_demonstrations(X, y, mdp: FiniteMdp) -> ExpertDataset:
    states = check_states(X, mdp.num_states)
    actions = check_states(y, mdp.num_actions)
    if len(states) != len(actions):
        raise ValueError(f"X has {len(states)} rows but y has {len(actions)}")
    return ExpertDataset.from_trajectory(
        np.column_stack([states, actions]), mdp.num_states, mdp.num_actions
    )


class _PolicyEstimator(ClassifierMixin, BaseEstimator):
    def predict_proba(self, X):
        check_is_fitted(self, "policy_")
        return self.policy_.action_probs[check_states(X, self.mdp.num_states)]

    def predict(self, X):
        """Most probable action per state (lowest index on ties)."""
        return self.predict_proba(X).argmax(axis=1)

    def _store(self, dataset, policy):
        self.policy_ = policy
        self.support_ = dataset.support
        self.classes_ = np.arange(self.mdp.num_actions)
        self.n_features_in_ = 1


class ILRImitator(_PolicyEstimator):
    """Imitation by one average-reward solve on the demonstrations' indicator reward.

    Parameters:
        mdp: the environment; its extrinsic rewards are never read.
        solver_tol: span tolerance for relative value iteration.

    Attributes:
        policy_: learned deterministic policy.
        intrinsic_gain_: long-run fraction of time the learner spends on demonstrated pairs.
        solve_result_: the solver's full result.
    """

    def __init__(self, mdp=None, solver_tol=1e-10):
        self.mdp = mdp
        self.solver_tol = solver_tol

    def fit(self, X, y):
        if self.mdp is None:
            raise ValueError("ILRImitator needs an mdp")
        dataset = check_demonstrations(X, y, self.mdp)
        result = ilr(self.mdp, dataset, self.solver_tol)
        self._store(dataset, result.policy)
        self.intrinsic_gain_ = result.intrinsic_gain
        self.solve_result_ = result.result
        return self


class BehavioralCloning(_PolicyEstimator):
    """Per-state majority vote over demonstrated actions; uniform where unseen."""

    def __init__(self, mdp=None):
        self.mdp = mdp

    def fit(self, X, y):
        if self.mdp is None:
            raise ValueError("BehavioralCloning needs an mdp")
        dataset = check_demonstrations(X, y, self.mdp)
        self._store(dataset, behavioral_cloning(self.mdp, dataset))
        return self
