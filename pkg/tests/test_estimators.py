import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ilrlab.estimators import BehavioralCloning, ILRImitator, check_demonstrations, check_states
from ilrlab.imitation import behavioral_cloning, ilr, sample_trajectory
from ilrlab.verification import fast_mixing_instance


@pytest.fixture(scope="module")
def demo():
    mdp, expert = fast_mixing_instance(5, 3, 3, seed=12)
    ds = sample_trajectory(mdp, expert.policy, 3000, 5)
    return mdp, expert, ds


def test_get_params_and_clone(demo):
    mdp, _, _ = demo
    est = ILRImitator(mdp=mdp, solver_tol=1e-9)
    assert est.get_params() == {"mdp": mdp, "solver_tol": 1e-9}
    copy = clone(est)
    assert copy.solver_tol == 1e-9
    assert np.array_equal(copy.mdp.transitions, mdp.transitions)
    est.set_params(solver_tol=1e-8)
    assert est.solver_tol == 1e-8
    assert BehavioralCloning(mdp=mdp).get_params() == {"mdp": mdp}


def test_ilr_estimator_matches_function(demo):
    mdp, expert, ds = demo
    X, y = ds.trajectory[:, 0], ds.trajectory[:, 1]
    est = ILRImitator(mdp=mdp).fit(X.reshape(-1, 1), y)
    ref = ilr(mdp, ds)
    assert est.policy_ == ref.policy
    assert est.intrinsic_gain_ == ref.intrinsic_gain
    assert est.support_ == ds.support
    np.testing.assert_array_equal(est.predict(np.arange(5)), ref.policy.actions)
    assert est.predict_proba([0, 1]).shape == (2, 3)
    assert est.classes_.tolist() == [0, 1, 2]


def test_bc_estimator_matches_function(demo):
    mdp, _, ds = demo
    est = BehavioralCloning(mdp=mdp).fit(ds.trajectory[:, 0], ds.trajectory[:, 1])
    assert est.policy_ == behavioral_cloning(mdp, ds)
    states = ds.trajectory[:, 0]
    assert est.score(states, est.predict(states)) == 1.0


def test_not_fitted(demo):
    mdp, _, _ = demo
    with pytest.raises(NotFittedError):
        ILRImitator(mdp=mdp).predict([0])


def test_missing_mdp():
    with pytest.raises(ValueError):
        ILRImitator().fit([0], [0])
    with pytest.raises(ValueError):
        BehavioralCloning().fit([0], [0])


def test_input_validation(demo):
    mdp, _, _ = demo
    assert check_states([1.0, 2.0], 5).dtype == np.int64
    with pytest.raises(ValueError):
        check_states([0.5], 5)
    with pytest.raises(ValueError):
        check_states([7], 5)
    with pytest.raises(ValueError):
        check_states(np.zeros((2, 2)), 5)
    with pytest.raises(ValueError):
        check_states([], 5)
    with pytest.raises(ValueError):
        check_demonstrations([0, 1], [0], mdp)
