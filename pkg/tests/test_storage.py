import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynstc.errors import ConfigError, InvalidPhiError
from dynstc.model import example_plant
from dynstc.storage import (ParameterSet, c_window, from_assumption1, in_region_of_attraction,
                            quadratic_bundle, roa_radius, u_value, window_value)

LAM = 0.2


@pytest.fixture(scope="module")
def bundle():
    return quadratic_bundle(0.505, LAM)


def _set_with_coeff(coeff, gamma1=25.0):
    return ParameterSet(0.01, 5.0, gamma1, 37.0, 185.0, 1.0, coeff / gamma1)


def test_from_assumption1_values():
    core = from_assumption1(5.0, 37.0, 0.01, 0.2)
    assert (core.gamma0, core.gamma1, core.l0, core.l1) == (5.0, 25.0, 37.0, 185.0)
    assert from_assumption1(265.6, 37.0, 0.01, 0.2).gamma1 == pytest.approx(1328.0, rel=1e-12)
    near = from_assumption1(3.0, 1.0, 0.0, 1 - 1e-9)
    assert near.gamma1 == pytest.approx(near.gamma0, rel=1e-8)


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.1, 1.5])
def test_from_assumption1_rejects_lambda(lam):
    with pytest.raises(ConfigError):
        from_assumption1(1.0, 1.0, 0.0, lam)


def test_parameter_set_validation():
    with pytest.raises(ConfigError):
        ParameterSet(0.0, -1.0, 1.0, 0.0, 0.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        ParameterSet(0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0)


def test_w_tilde_forms(bundle):
    assert bundle.w_tilde(0, 2.0, -1.5) == 2.0
    assert bundle.w_tilde(0, 2.0, 1.0) == 3.0
    assert bundle.w_tilde(1, 2.0, -1.5) == 0.5
    assert bundle.w_tilde(1, 2.0, -2.0) == pytest.approx(0.4)


def test_u_value_back_solved_example(bundle):
    p = _set_with_coeff(14.5625)
    u = u_value(bundle, p, p.phi1_init, 1, np.array([2.0]), np.array([-2.0]), np.array([2.0]))
    assert u == pytest.approx(4.35, abs=1e-12)
    assert u_value(bundle, p, 1.0, 0, np.zeros(1), np.zeros(1), np.zeros(1)) == 0.0


def test_u_value_rejects_negative_phi(bundle):
    p = _set_with_coeff(1.0)
    with pytest.raises(InvalidPhiError):
        u_value(bundle, p, -1e-3, 0, np.ones(1), np.ones(1), np.ones(1))
    with pytest.raises(InvalidPhiError):
        u_value(bundle, p, np.nan, 0, np.ones(1), np.ones(1), np.ones(1))


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-3, 3), e=st.floats(-6, 6), s=st.floats(-6, 6), ell=st.sampled_from([0, 1]),
       phi=st.floats(0, 100))
def test_u_dominates_state_storage(bundle, x, e, s, ell, phi):
    p = _set_with_coeff(3.0)
    u = u_value(bundle, p, phi, ell, np.array([x]), np.array([e]), np.array([s]))
    assert u >= bundle.v_tilde(np.array([x]))


def test_c_window_examples(bundle):
    # zero state storage so that the current term is set by the window value alone
    p = _set_with_coeff(3.0 / (LAM * LAM))
    x, e = np.zeros(1), np.ones(1)
    assert window_value(bundle, p, x, e) == pytest.approx(3.0)
    assert c_window(bundle, p, x, e, [5.0], 4.55, 2) == pytest.approx(4.0)
    assert c_window(bundle, p, x, e, [], 4.55, 1) == pytest.approx(3.0)
    p9 = _set_with_coeff(9.0 / (LAM * LAM))
    assert c_window(bundle, p9, x, e, [9.0], 4.55, 2) == 4.55
    with pytest.raises(ConfigError):
        c_window(bundle, p, x, e, [], 4.55, 0)
    with pytest.raises(ValueError):
        c_window(bundle, p, x, e, [1.0, 2.0], 4.55, 2)


def test_region_of_attraction(bundle):
    p = _set_with_coeff(14.5625)
    assert in_region_of_attraction(bundle, p, [0.0], 4.55)
    assert in_region_of_attraction(bundle, p, [2.0], 4.55)
    assert not in_region_of_attraction(bundle, p, [3.0], 4.55)
    value = window_value(bundle, p, np.array([3.0]), np.array([-3.0]))
    assert value == pytest.approx(4.545 + 14.5625 * 0.36, rel=1e-12)
    r = roa_radius(bundle, p, 4.55)
    assert in_region_of_attraction(bundle, p, [r * (1 - 1e-9)], 4.55)
    assert not in_region_of_attraction(bundle, p, [r * (1 + 1e-9)], 4.55)


@pytest.mark.parametrize("lam", [0.2, 0.5, 0.9])
def test_jump_inequalities_random(lam):
    b = quadratic_bundle(0.505, lam)
    rng = np.random.default_rng(1)
    e = rng.uniform(-6, 6, (10_000, 1))
    s = rng.uniform(-6, 6, (10_000, 1))
    assert np.all(b.w_tilde(1, e, -e) <= lam * b.w_tilde(0, e, s))
    assert np.all(b.w_tilde(0, s + e, -(s + e)) <= b.w_tilde(1, e, s))


def test_state_storage_positive(bundle):
    assert bundle.v_tilde(np.zeros(1)) == 0.0
    xs = np.linspace(-3, 3, 101)
    xs = xs[xs != 0][:, None]
    assert np.all(bundle.v_tilde(xs) > 0)


@pytest.mark.parametrize("ell", [0, 1])
def test_error_storage_flow_bound_finite_differences(bundle, ell):
    """Directional derivative of W along g, by central differences, away from the kink."""
    plant = example_plant()
    lam = bundle.lam
    l_const = 37.0 / lam if ell else 37.0
    x = np.linspace(-3, 3, 41)
    e = np.linspace(-6, 6, 41)
    s = np.linspace(-6, 6, 21)
    X, E, S = np.meshgrid(x, e, s, indexing="ij")
    g = -plant.f(X[..., None], E[..., None])[..., 0]
    kappa = lam if ell else 1.0
    away = np.abs(kappa * np.abs(E) - np.abs(E + S)) > 1e-6
    away &= (E != 0) & (E + S != 0)
    h = 1e-7
    w_plus = bundle.w_tilde(ell, (E + h * g)[..., None], S[..., None])
    w_minus = bundle.w_tilde(ell, (E - h * g)[..., None], S[..., None])
    deriv = (w_plus - w_minus) / (2 * h)
    w = bundle.w_tilde(ell, E[..., None], S[..., None])
    rhs = l_const * w + np.abs(X)
    # branch switches within the difference stencil are skipped as well
    stable = np.abs(kappa * np.abs(E) - np.abs(E + S)) > 4 * h * np.abs(g) + 1e-6
    mask = away & stable
    assert mask.sum() > 10_000
    assert np.all(deriv[mask] <= rhs[mask] + 1e-6)
