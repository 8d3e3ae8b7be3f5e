from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lmcf.ambient import (
    AmbientSpace,
    HoloVolumeForm,
    volume_compatibility_sides,
    apply_J,
    bakry_emery,
    complex_structure,
    hermitian_dot,
    make_ambient,
    omega_f_on_frame,
    potential_gradient,
    potential_value,
    sigma,
    soliton_flow_map,
)
from lmcf.errors import ExpiredFlowError

finite = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)


def vec(n):
    return arrays(np.float64, (n,), elements=finite)


SHRINKER = make_ambient("shrinker")
EXPANDER = make_ambient("expander")
TRANSLATOR = make_ambient("translator", T=(0.0, -1.0))
CONSTANT = make_ambient("constant")


def test_potential_values():
    assert potential_value(SHRINKER, [0.0, 0.0]) == 0.0
    assert potential_value(SHRINKER, [np.sqrt(2.0), 0.0]) == pytest.approx(1.0, abs=1e-15)
    assert potential_value(TRANSLATOR, [0.3, -1.2]) == pytest.approx(2.4, abs=1e-15)
    assert potential_value(EXPANDER, [1.0, 1.0]) == -1.0
    assert potential_value(CONSTANT, [3.0, 4.0]) == 0.0


def test_potential_gradients():
    np.testing.assert_array_equal(potential_gradient(SHRINKER, [1.0, 2.0]), [1.0, 2.0])
    np.testing.assert_array_equal(potential_gradient(TRANSLATOR, [7.0, -3.0]), [0.0, -2.0])
    np.testing.assert_array_equal(potential_gradient(CONSTANT, [7.0, -3.0]), [0.0, 0.0])
    np.testing.assert_array_equal(potential_gradient(EXPANDER, [1.0, 2.0]), [-1.0, -2.0])


def test_bakry_emery_values():
    assert bakry_emery(SHRINKER, [1.0, 0.0], [1.0, 0.0]) == 1.0
    assert bakry_emery(EXPANDER, [0.0, 1.0], [0.0, 1.0]) == -1.0
    assert bakry_emery(TRANSLATOR, [0.3, 2.0], [-1.0, 4.0]) == 0.0


def test_soliton_constants():
    assert (SHRINKER.c, EXPANDER.c, TRANSLATOR.c, CONSTANT.c) == (1.0, -1.0, 0.0, 0.0)


def test_sigma_values_and_expiry():
    assert sigma(SHRINKER, 0.5) == 0.5
    assert sigma(TRANSLATOR, 7.0) == 1.0
    assert sigma(EXPANDER, 1.0) == 2.0
    with pytest.raises(ExpiredFlowError):
        sigma(SHRINKER, 1.0)


def test_flow_map_examples():
    np.testing.assert_allclose(soliton_flow_map(SHRINKER, 0.75, [1.0, 0.0]), [2.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(soliton_flow_map(TRANSLATOR, 2.0, [0.0, 0.0]), [0.0, -2.0], atol=1e-14)
    z = np.array([0.4, -1.3])
    for amb in (SHRINKER, EXPANDER, TRANSLATOR, CONSTANT):
        np.testing.assert_array_equal(soliton_flow_map(amb, 0.0, z), z)


def test_flow_map_inverse_round_trip():
    z = np.array([[0.4, -1.3], [2.0, 0.5]])
    for amb in (SHRINKER, EXPANDER, TRANSLATOR):
        np.testing.assert_allclose(amb.flow_map_inverse(0.3, amb.flow_map(0.3, z)), z, atol=1e-14)


@pytest.mark.parametrize("amb", [SHRINKER, EXPANDER, TRANSLATOR], ids=["shrinker", "expander", "translator"])
def test_flow_map_solves_its_ode(amb):
    # central difference in t against grad f / (2 sigma)
    rng = np.random.default_rng(1)
    z = rng.uniform(-2, 2, size=(20, 2))
    h = 1e-5
    for t in (0.0, 0.2, 0.5):
        dphi = (amb.flow_map(t + h, z) - amb.flow_map(t - h, z)) / (2 * h) if t > 0 else (
            amb.flow_map(t + h, z) - z
        ) / h
        rhs = amb.gradient(amb.flow_map(t, z)) / (2.0 * amb.sigma(t))
        tol = 1e-8 if t > 0 else 1e-4
        assert np.max(np.abs(dphi - rhs)) < tol


def test_custom_potential_uses_numerical_flow_map():
    # a custom copy of the shrinker must reproduce the closed form through the integrator
    custom = make_ambient("custom", hessian=np.eye(2), linear=np.zeros(2), c=1.0)
    z = np.array([[1.0, 0.0], [0.3, -0.7]])
    np.testing.assert_allclose(custom.flow_map(0.75, z), SHRINKER.flow_map(0.75, z), atol=1e-8)


def test_config_round_trip():
    for amb in (SHRINKER, EXPANDER, TRANSLATOR, CONSTANT, make_ambient("shrinker", m=2)):
        again = AmbientSpace.from_config(amb.to_config())
        assert again.to_config() == amb.to_config()


def test_translator_needs_unit_direction():
    with pytest.raises(ValueError):
        make_ambient("translator", T=(0.0, -2.0))


@settings(max_examples=200, deadline=None)
@given(vec(4), vec(4))
def test_hessian_is_j_invariant(x, y):
    for amb in (make_ambient("shrinker", m=2), make_ambient("expander", m=2), make_ambient("translator", m=2, T=(0, 0, 0, 1))):
        assert amb.hess(apply_J(x), apply_J(y)) == amb.hess(x, y)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([1, 2]).flatmap(lambda m: vec(2 * m)))
def test_soliton_identity(xi):
    m = xi.size // 2
    for amb in (make_ambient("shrinker", m=m), make_ambient("expander", m=m), make_ambient("constant", m=m)):
        assert bakry_emery(amb, xi, xi) - amb.c * hermitian_dot(xi, xi) == 0.0


def test_complex_structure_squares_to_minus_identity():
    for m in (1, 2):
        J = complex_structure(m)
        np.testing.assert_array_equal(J @ J, -np.eye(2 * m))
        np.testing.assert_array_equal(apply_J(np.eye(2 * m)), (J @ np.eye(2 * m).T).T)


def test_omega_on_standard_frames():
    for m in (1, 2):
        form = HoloVolumeForm(make_ambient("constant", m=m))
        frame = np.eye(2 * m)[0::2]  # d/dx_1, ..., d/dx_m
        assert omega_f_on_frame(form, np.zeros(2 * m), frame) == pytest.approx(1.0)
        turned = frame.copy()
        turned[0] = apply_J(frame[0])
        assert omega_f_on_frame(form, np.ones(2 * m), turned) == pytest.approx(1j)


def test_translator_form_is_real_positive_on_grim_reaper_tangents():
    form = HoloVolumeForm(TRANSLATOR)
    for x in np.linspace(-1.4, 1.4, 15):
        z = np.array([x, -np.log(np.cos(x))])
        tangent = np.array([[np.cos(x), np.sin(x)]])
        val = omega_f_on_frame(form, z, tangent)
        assert val.real == pytest.approx(np.exp(-0.5 * TRANSLATOR.value(z)), rel=1e-14)
        assert abs(val.imag) < 1e-14


def test_volume_compatibility_translator():
    rng = np.random.default_rng(5)
    for m, T in ((1, (0.0, -1.0)), (2, (0.0, 0.6, 0.0, -0.8))):
        form = HoloVolumeForm(make_ambient("translator", m=m, T=T))
        for z in rng.uniform(-3, 3, size=(200, 2 * m)):
            lhs, rhs = volume_compatibility_sides(form, z)
            assert abs(rhs - lhs) <= 1e-12 * abs(lhs)


def test_holomorphic_form_rejects_non_steady_ambient():
    with pytest.raises(ValueError):
        HoloVolumeForm(SHRINKER)
