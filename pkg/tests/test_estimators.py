import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from minep import QuadGame, load_fixture
from minep.estimators import (EquilibriumOracle, GameCertifier, MixedIntegerEquilibrium,
                              RelaxedEquilibrium, TwoPhaseEquilibrium)
from minep.validation import InvalidGameError, check_joint_point, check_weights

ALL = [GameCertifier, RelaxedEquilibrium, MixedIntegerEquilibrium, TwoPhaseEquilibrium,
       EquilibriumOracle]


@pytest.mark.parametrize("cls", ALL)
def test_params_round_trip_through_clone(cls):
    est = cls()
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params
    key = next(iter(params))
    est.set_params(**{key: params[key]})


def test_certifier_attributes():
    c = GameCertifier(weights="unit").fit("example-5")
    assert c.dominant_ and c.alpha_ == pytest.approx(0.9, abs=1e-12)
    assert c.mu_ < 0 and c.beta_ is None
    c = GameCertifier().fit(load_fixture("example-4"))
    assert not c.dominant_ and c.spectral_radius_ >= 1
    c = GameCertifier(weights=[1.0, 1.0]).fit(load_fixture("example-1"))
    assert c.alpha_ == pytest.approx(0.55) and c.beta_ == 0.5


def test_mixed_estimator_on_example_1():
    est = MixedIntegerEquilibrium().fit(load_fixture("example-1"), x0=[-1.0, 1.0])
    assert est.stop_reason_ == "cycle-detected" and len(est.cycle_) == 4
    assert not est.converged_
    np.testing.assert_array_equal(est.predict([[0.0, 0.0], [1.0, 1.0]]) > 1e-9, [False, True])
    np.testing.assert_array_equal(est.transform([[0.0, 0.0]]), [[0.0, 0.0]])


def test_mixed_estimator_default_start():
    est = MixedIntegerEquilibrium().fit("example-2")
    assert est.converged_
    np.testing.assert_array_equal(est.equilibrium_, [0.0, 0.0])


def test_relaxed_estimator():
    est = RelaxedEquilibrium(schedule="jacobi", step_tol=1e-13).fit("example-2")
    assert est.converged_
    np.testing.assert_allclose(est.transform(est.equilibrium_), [est.equilibrium_], atol=1e-12)


def test_two_phase_estimator():
    est = TwoPhaseEquilibrium().fit("example-2")
    assert est.certified_ and est.converged_
    np.testing.assert_allclose(est.equilibrium_, [0.0, 0.0], atol=1e-12)


def test_oracle_estimator():
    est = EquilibriumOracle().fit(load_fixture("example-2", bound=2.0))
    assert est.n_equilibria_ == 1
    np.testing.assert_array_equal(est.predict([[0.0, 0.0], [1.0, 0.0]]), [True, False])
    assert EquilibriumOracle().fit("example-3").equilibria_.shape == (0, 2)


def test_unfitted_estimators_raise():
    with pytest.raises(NotFittedError):
        MixedIntegerEquilibrium().predict([[0.0, 0.0]])


def test_input_validation():
    bad = QuadGame(dims=(1,), int_counts=(0,), Q=[[[[-1.0]]]], c=[[0.0]], lower=None, upper=None)
    with pytest.raises(InvalidGameError) as err:
        GameCertifier().fit(bad)
    assert err.value.issues
    with pytest.raises(TypeError):
        GameCertifier().fit(3)
    g = load_fixture("example-1")
    np.testing.assert_array_equal(check_joint_point(g, [[1.0], [2.0]]), [1.0, 2.0])
    with pytest.raises(ValueError):
        check_joint_point(g, [0.5, 0.0], feasible=True)
    with pytest.raises(ValueError):
        check_weights([1.0, 0.0], 2)
