from __future__ import annotations

import numpy as np
import pytest

from lmcf.ambient import make_ambient
from lmcf.errors import CFLViolation, ExpiredFlowError, MeshDegenerationError
from lmcf.families import circle, grim_reaper, line, product_torus
from lmcf.flow import (
    correspondence_check,
    glmcf_evolve,
    hausdorff,
    krmcf_from_glmcf,
    mcf_evolve,
    perturbation_experiment,
)
from lmcf.lagrangian import CLOSED_CURVE, DiscreteLagrangian, f_minimality_residual

SHRINKER = make_ambient("shrinker")
TRANSLATOR = make_ambient("translator", T=(0.0, -1.0))
CONSTANT = make_ambient("constant")
ROOT2 = np.sqrt(2.0)


def _radii(trace):
    return np.array([np.mean(np.linalg.norm(s, axis=1)) for s in trace.states])


# -- GLMCF -----------------------------------------------------------------------------


def test_shrinker_circle_is_a_fixed_point():
    L0 = circle(ROOT2, 256)
    trace = glmcf_evolve(L0, SHRINKER, 1e-4, 10000, record_every=500)
    drift = max(np.max(np.linalg.norm(s - L0.vertices, axis=1)) for s in trace.states)
    assert drift <= 1e-3
    assert trace.max_volume_increase() <= 1e-8


def test_clamped_grim_reaper_is_nearly_fixed():
    L0 = grim_reaper(n=121, backend="polyline")
    trace = glmcf_evolve(L0, TRANSLATOR, 5e-5, 20000, record_every=2000)
    inner = L0.interior_mask(2.0 / 3.0)
    drift = max(np.max(np.linalg.norm((s - L0.vertices)[inner], axis=1)) for s in trace.states)
    assert drift <= 1e-2
    assert trace.max_volume_increase() <= 1e-8


def test_unit_circle_plain_limit_follows_closed_form():
    trace = glmcf_evolve(circle(1.0, 64), CONSTANT, 1e-4, 4000, record_every=100)
    exact = np.sqrt(1.0 - 2.0 * trace.times)
    assert np.max(np.abs(_radii(trace) - exact)) <= 1e-3


def test_trace_diagnostics_are_complete():
    trace = glmcf_evolve(circle(ROOT2, 64), SHRINKER, 1e-3, 20, record_every=5)
    assert np.all(np.diff(trace.times) > 0)
    for key in ("soliton_residual", "f_volume", "lagrangian_defect", "min_edge", "perturbation_norm", "f_volume_step_change"):
        assert len(trace.diagnostics[key]) == len(trace.times)


def test_fixed_point_step_is_small():
    L0 = circle(ROOT2, 128, backend="polyline")
    tau = f_minimality_residual(L0, SHRINKER)
    dt = 1e-4
    trace = glmcf_evolve(L0, SHRINKER, dt, 1, redistribute_every=0)
    step = np.max(np.linalg.norm(trace.states[-1] - L0.vertices, axis=1))
    assert step <= (tau + 1e-12) * dt


def test_volume_is_monotone_away_from_solitons():
    ell = DiscreteLagrangian(CLOSED_CURVE, np.column_stack([1.5 * np.cos(np.linspace(0, 2 * np.pi, 128, endpoint=False)), 0.8 * np.sin(np.linspace(0, 2 * np.pi, 128, endpoint=False))]))
    trace = glmcf_evolve(ell, SHRINKER, 2e-4, 2000)
    assert trace.max_volume_increase() <= 1e-8
    assert trace.diagnostics["f_volume"][-1] < trace.diagnostics["f_volume"][0]


def test_torus_flow_preserves_lagrangian_condition():
    amb = make_ambient("shrinker", m=2)
    trace = glmcf_evolve(product_torus(1.2, 1.6, 16), amb, 1e-3, 200, record_every=20)
    assert np.max(trace.diagnostics["lagrangian_defect"]) <= 1e-8
    assert trace.max_volume_increase() <= 1e-8
    fixed = glmcf_evolve(product_torus(ROOT2, ROOT2, 16), amb, 1e-3, 200)
    np.testing.assert_allclose(fixed.states[-1], [ROOT2, ROOT2], atol=1e-12)


def test_cfl_violation_is_reported():
    with pytest.raises(CFLViolation):
        glmcf_evolve(circle(1.0, 256), CONSTANT, 1e-2, 10)


def test_mesh_degeneration_is_reported():
    with pytest.raises((MeshDegenerationError, CFLViolation)):
        mcf_evolve(circle(0.3, 64), 2e-5, 10000, redistribute_every=0)


def test_bad_arguments():
    with pytest.raises(ValueError):
        glmcf_evolve(circle(1.0, 64), CONSTANT, -1.0, 10)
    with pytest.raises(ValueError):
        glmcf_evolve(circle(1.0, 64), CONSTANT, 1e-4, 10, scheme="leapfrog")


# -- plain MCF ------------------------------------------------------------------------


def test_mcf_circle_benchmark():
    trace = mcf_evolve(circle(ROOT2, 256), 1e-4, 5000, record_every=100)
    exact = np.sqrt(2.0 - 2.0 * trace.times)
    assert np.max(np.abs(_radii(trace) - exact)) <= 1e-3


def test_mcf_semi_implicit_unit_circle():
    trace = mcf_evolve(circle(1.0, 256), 1e-4, 4000, scheme="semi-implicit", record_every=100)
    exact = np.sqrt(1.0 - 2.0 * trace.times)
    assert np.max(np.abs(_radii(trace) - exact)) <= 1e-3


def test_mcf_circle_converges_at_second_order():
    errs = []
    for n, dt in ((32, 4e-4), (64, 1e-4)):
        trace = mcf_evolve(circle(ROOT2, n), dt, int(round(0.2 / dt)), redistribute_every=0, record_every=10)
        errs.append(np.max(np.abs(_radii(trace) - np.sqrt(2.0 - 2.0 * trace.times))))
    assert errs[0] / errs[1] > 3.5


def test_mcf_line_is_stationary():
    L0 = line((0.6, 0.8), n=65, backend="polyline")
    trace = mcf_evolve(L0, 1e-4, 100)
    np.testing.assert_array_equal(trace.states[-1], L0.vertices)


def test_mcf_grim_reaper_apex_speed():
    L0 = grim_reaper(n=201, backend="polyline")
    dt, steps = 2e-5, 2500
    trace = mcf_evolve(L0, dt, steps)
    apex = L0.shape[0] // 2
    velocity = (trace.states[-1][apex] - L0.vertices[apex]) / trace.times[-1]
    assert abs(velocity[0]) <= 1e-2
    assert abs(velocity[1] - 1.0) <= 1e-2


# -- correspondence -------------------------------------------------------------------------


def test_mapped_shrinker_trace_is_the_shrinking_circle():
    stationary = glmcf_evolve(circle(ROOT2, 64), SHRINKER, 1e-3, 800, redistribute_every=0)
    times = np.linspace(0.0, 0.5, 11)
    mapped = krmcf_from_glmcf(stationary, SHRINKER, times)
    np.testing.assert_allclose(_radii(mapped), np.sqrt(2.0 - 2.0 * times), atol=1e-3)


def test_mapped_grim_reaper_trace_translates():
    L0 = grim_reaper(n=121, backend="polyline")
    stationary = glmcf_evolve(L0, TRANSLATOR, 5e-5, 2000, redistribute_every=0)
    mapped = krmcf_from_glmcf(stationary, TRANSLATOR, np.array([0.0, 0.05, 0.1]))
    inner = L0.interior_mask(2.0 / 3.0)
    for t, state in zip(mapped.times, mapped.states):
        shifted = L0.vertices - t * TRANSLATOR.T
        assert np.max(np.linalg.norm((state - shifted)[inner], axis=1)) <= 1e-3


def test_steady_time_reparametrisation_is_identity():
    assert TRANSLATOR.reparametrized_time(0.37) == 0.37
    assert CONSTANT.reparametrized_time(2.0) == 2.0


def test_mapping_beyond_the_trace_is_rejected():
    stationary = glmcf_evolve(circle(ROOT2, 64), SHRINKER, 1e-3, 10)
    with pytest.raises(ValueError):
        krmcf_from_glmcf(stationary, SHRINKER, np.array([0.5]))
    with pytest.raises(ExpiredFlowError):
        krmcf_from_glmcf(stationary, SHRINKER, np.array([1.0]))


def test_shrinker_circle_correspondence():
    res = correspondence_check(circle(ROOT2, 256), SHRINKER, 0.5, dt=1e-4, compare_every=50)
    assert res.max_discrepancy <= 1e-3


def test_constant_potential_correspondence_is_trivial():
    res = correspondence_check(circle(1.0, 64), CONSTANT, 0.2, dt=1e-4, compare_every=100)
    assert res.max_discrepancy <= 1e-12


def test_grim_reaper_correspondence():
    res = correspondence_check(grim_reaper(x_max=1.5, n=151, backend="polyline"), TRANSLATOR, 0.5, dt=3e-5, compare_every=1000)
    assert res.max_discrepancy <= 1e-2


def test_hausdorff_distance():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[0.0, 0.5], [1.0, 0.0]])
    assert hausdorff(a, b) == 0.5


# -- perturbations ----------------------------------------------------------------------------


def _bump(L, width=0.1):
    s = np.linspace(-1.0, 1.0, L.shape[0])
    return np.exp(-((s / width) ** 2))


def test_grim_reaper_bump_decays():
    L0 = grim_reaper(n=121, backend="polyline")
    rep = perturbation_experiment(L0, TRANSLATOR, _bump(L0), 0.01, 0.5, 5e-5)
    assert rep.monotone_after_transient
    assert rep.norms[-1] < rep.norms[0]
    assert rep.observation.startswith("observed")


def test_shrinker_circle_lowest_mode_grows():
    L0 = circle(ROOT2, 128)
    u = np.cos(2 * np.pi * np.arange(128) / 128)
    rep = perturbation_experiment(L0, SHRINKER, u, 0.01, 1.0, 2e-4)
    assert rep.log_slope > 0
    assert rep.norms[-1] > rep.norms[0]
    assert "growth" in rep.observation


def test_zero_perturbation_stays_at_the_fixed_point():
    L0 = circle(ROOT2, 64)
    rep = perturbation_experiment(L0, SHRINKER, np.ones(64), 0.0, 0.1, 1e-3)
    assert np.max(rep.norms) <= 1e-12


def test_oversized_perturbation_is_rejected():
    L0 = circle(ROOT2, 64)
    with pytest.raises(ValueError):
        perturbation_experiment(L0, SHRINKER, np.ones(64), 1.0, 0.1, 1e-3)
