"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.integrate import quad

from lmcf.ambient import HoloVolumeForm, make_ambient
from lmcf.calibration import volume_compatibility_check, calibration_inequality_sample, tangent_plane_slack, translator_equation_check
from lmcf.families import circle, grim_reaper, line, product_torus
from lmcf.flow import correspondence_check, glmcf_evolve, mcf_evolve
from lmcf.lagrangian import f_minimality_residual
from lmcf.scenarios import build_ambient, build_geometry, builtin_names, execute, load_builtin
from lmcf.spectral import build_complex, translator_identities
from lmcf.variation import (
    first_variation,
    first_variation_fd,
    first_variation_richardson,
    hamiltonian_mode,
    random_clamped_variations,
    second_variation,
    stability_report,
    unit_normal,
    weighted_norm_sq,
)

SHRINKER = make_ambient("shrinker")
EXPANDER = make_ambient("expander")
TRANSLATOR = make_ambient("translator", T=(0.0, -1.0))
ROOT2 = np.sqrt(2.0)
REFINEMENT = (64, 128, 256, 512)


class Verdict:
    """Collects named checks and timed sections for one criterion."""

    def __init__(self, number: int):
        self.number = number
        self.checks: dict[str, bool] = {}
        self.values: dict[str, float] = {}

    def check(self, name: str, ok, value=None) -> None:
        self.checks[name] = bool(ok)
        if value is not None:
            self.values[name] = float(value)

    @contextmanager
    def timed(self, name: str, limit: float):
        start = time.perf_counter()
        yield
        elapsed = time.perf_counter() - start
        self.check(f"runtime {name} < {limit:g} s", elapsed < limit, elapsed)

    def finish(self, capsys) -> None:
        failed = [k for k, ok in self.checks.items() if not ok]
        status = "FAIL" if failed else "PASS"
        shown = ", ".join(f"{k}={v:.3g}" for k, v in self.values.items())
        line = f"criterion {self.number}: {status}  {shown}"
        if failed:
            line += f"  [failed: {'; '.join(failed)}]"
        with capsys.disabled():
            print(f"\n{line}")
        assert not failed, line


def _orders(ns, vals):
    vals = np.asarray(vals)
    return np.log(vals[:-1] / vals[1:]) / np.log(np.asarray(ns[1:]) / np.asarray(ns[:-1]))


def _radii(trace):
    return np.array([np.mean(np.linalg.norm(s, axis=1)) for s in trace.states])


@pytest.fixture(scope="module")
def builtin_runs(tmp_path_factory):
    """Every built-in scenario executed twice into separate output roots."""
    roots = [tmp_path_factory.mktemp("first"), tmp_path_factory.mktemp("second")]
    return {name: [execute(load_builtin(name), root) for root in roots] for name in builtin_names()}


def test_criterion_1_critical_point_certificate(capsys):
    v = Verdict(1)
    cases = {
        "shrinker circle": (lambda: circle(ROOT2, 512), SHRINKER),
        "grim reaper": (lambda: grim_reaper(), TRANSLATOR),
        "expander line": (lambda: line((0.6, 0.8), n=257), EXPANDER),
    }
    for name, (build, amb) in cases.items():
        with v.timed(name, 1.0):
            res = f_minimality_residual(build(), amb)
        v.check(f"{name} residual <= 1e-8", res <= 1e-8, res)
    circ = [f_minimality_residual(circle(ROOT2, n, backend="polyline"), SHRINKER) for n in REFINEMENT]
    reap = [f_minimality_residual(grim_reaper(n=n, backend="polyline"), TRANSLATOR) for n in REFINEMENT]
    flat = [f_minimality_residual(line((0.6, 0.8), n=n, backend="polyline"), EXPANDER) for n in REFINEMENT]
    for name, vals in (("circle", circ), ("reaper", reap)):
        orders = _orders(REFINEMENT, vals)
        v.check(f"{name} polyline order >= 1.9", np.all(orders >= 1.9) and np.all(np.diff(vals) < 0), orders.min())
    # the polyline line is exact; only rounding remains
    v.check("line polyline residual at rounding level", max(flat) <= 1e-10, max(flat))
    v.finish(capsys)


def test_criterion_2_first_variation_oracle(capsys):
    v = Verdict(2)
    r = 1.0
    target = 2 * np.pi * np.exp(-(r**2) / 4) * (1 - r**2 / 2)
    # independent route: differentiate V_f(r) = int_0^{2 pi} e^{-r^2/4} r dphi numerically
    volume = lambda rr: quad(lambda phi: np.exp(-(rr**2) / 4) * rr, 0.0, 2 * np.pi)[0]
    v.check("closed form matches pi e^{-1/4}", abs(target - np.pi * np.exp(-0.25)) <= 1e-15)
    v.check("closed form matches dV/dr", abs((volume(r + 1e-5) - volume(r - 1e-5)) / 2e-5 - target) <= 1e-8)
    with v.timed("first variation", 1.0):
        L = circle(r, 256)
        xi = -unit_normal(L)
        exact = first_variation(L, SHRINKER, xi)
        fd = first_variation_fd(L, SHRINKER, xi, 1e-4)
        rich = first_variation_richardson(L, SHRINKER, xi)
    v.check("|analytic - fd| <= 1e-4", abs(exact - fd) <= 1e-4, abs(exact - fd))
    v.check("|analytic - target| <= 1e-4", abs(exact - target) <= 1e-4, abs(exact - target))
    v.check("|analytic - richardson| <= 1e-6", abs(exact - rich) <= 1e-6, abs(exact - rich))
    v.finish(capsys)


def test_criterion_3_second_variation_oracle(capsys):
    v = Verdict(3)
    target = -(np.pi * ROOT2 / 4) * np.exp(-0.5)
    with v.timed("second variation", 5.0):
        L = circle(ROOT2, 512)
        u, xi = hamiltonian_mode(L, 1)
        rep = second_variation(L, SHRINKER, xi, fd_step=1e-3)
    s = np.arange(512) * (2 * np.pi * ROOT2 / 512)
    v.check("mode is sin(s / sqrt 2)", np.max(np.abs(u - np.sin(s / ROOT2))) <= 1e-12)
    v.check("|Q_f - target| <= 1e-2", abs(rep.Q_f - target) <= 1e-2, rep.Q_f)
    v.check("|Q_f fd - target| <= 5e-2", abs(rep.Q_f_fd - target) <= 5e-2, rep.Q_f_fd)
    v.finish(capsys)


def test_criterion_4_spectral_criterion(capsys):
    v = Verdict(4)
    with v.timed("both eigensolves", 30.0):
        circ = stability_report(circle(ROOT2, 512), SHRINKER)
        torus = stability_report(product_torus(ROOT2, ROOT2, 64), make_ambient("shrinker", m=2))
    v.check("circle lambda1 = 0.5 +- 1e-3", abs(circ.lambda1 - 0.5) <= 1e-3, circ.lambda1)
    v.check("torus lambda1 = 0.5 +- 2e-3", abs(torus.lambda1 - 0.5) <= 2e-3, torus.lambda1)
    for name, rep in (("circle", circ), ("torus", torus)):
        v.check(f"{name} hamiltonian-f-unstable", rep.classification == "hamiltonian-f-unstable")
        v.check(f"{name} witness Q_f < 0", rep.witness_Q is not None and rep.witness_Q < 0, rep.witness_Q)
    v.finish(capsys)


def test_criterion_5_stability_corollaries(capsys):
    v = Verdict(5)
    with v.timed("400 quadratic forms", 10.0):
        reaper = grim_reaper(n=401)
        cx = build_complex(reaper, TRANSLATOR)
        q_reaper = [second_variation(reaper, TRANSLATOR, xi, cx=cx).Q_f for xi in random_clamped_variations(reaper, 200, np.random.default_rng(11))]
        flat = line((1.0, 0.0), n=257)
        cx = build_complex(flat, EXPANDER)
        q_line, norms = [], []
        for xi in random_clamped_variations(flat, 200, np.random.default_rng(7)):
            q_line.append(second_variation(flat, EXPANDER, xi, cx=cx).Q_f)
            norms.append(weighted_norm_sq(flat, EXPANDER, xi))
    v.check("reaper min Q_f >= -1e-6", min(q_reaper) >= -1e-6, min(q_reaper))
    v.check("line min Q_f >= 0.9 min norm", min(q_line) >= 0.9 * min(norms), min(q_line) / min(norms))
    v.finish(capsys)


def test_criterion_6_translator_package(capsys):
    v = Verdict(6)
    with v.timed("translator package", 1.0):
        L = grim_reaper()
        _, deviation = translator_equation_check(L, TRANSLATOR)
        ids = translator_identities(L, TRANSLATOR)
    v.check("translator equation <= 1e-6", deviation <= 1e-6, deviation)
    for name in ("laplacian_identity", "energy_identity", "steady_identity", "witten_theta"):
        value = ids.max_abs(name)
        v.check(f"{name} <= 1e-6", value <= 1e-6, value)
    v.finish(capsys)


def test_criterion_7_correspondence(capsys):
    v = Verdict(7)
    with v.timed("correspondence", 60.0):
        res = correspondence_check(circle(ROOT2, 256, backend="polyline"), SHRINKER, 0.5, dt=1e-4, compare_every=50)
    v.check("max Hausdorff <= 1e-3", res.max_discrepancy <= 1e-3, res.max_discrepancy)
    v.check("covers t in [0, 0.5]", res.times[0] == 0.0 and abs(res.times[-1] - 0.5) <= 1e-12)
    gaps = []
    for t in np.linspace(0.05, 0.5, 10):
        s_quad, _ = quad(lambda tau: 1.0 / (1.0 - SHRINKER.c * tau), 0.0, t, epsabs=1e-14, epsrel=1e-14)
        gaps.append(abs(SHRINKER.reparametrized_time(t) - s_quad))
        gaps.append(abs(-np.log(1.0 - t) - s_quad))
    v.check("s(t) closed form vs quadrature <= 1e-8", max(gaps) <= 1e-8, max(gaps))
    v.finish(capsys)


def test_criterion_8_calibration(capsys):
    v = Verdict(8)
    with v.timed("calibration", 5.0):
        form = HoloVolumeForm(TRANSLATOR)
        res = calibration_inequality_sample(form, 100_000, np.random.default_rng(0))
        slack = tangent_plane_slack(grim_reaper(), form)
        compat = volume_compatibility_check(form, 1000, np.random.default_rng(1))
    v.check("100000 samples", res.n_samples == 100_000)
    v.check("min slack >= -1e-12", res.min_slack >= -1e-12, res.min_slack)
    v.check("tangent-plane slack <= 1e-10", np.max(np.abs(slack)) <= 1e-10, np.max(np.abs(slack)))
    v.check("volume compatibility relative error <= 1e-12", compat <= 1e-12, compat)
    v.finish(capsys)


def test_criterion_9_flow_sanity(capsys):
    v = Verdict(9)
    with v.timed("benchmark and monotonicity sweep", 60.0):
        trace = mcf_evolve(circle(ROOT2, 256), 1e-4, 4000, record_every=50)
        err = np.max(np.abs(_radii(trace) - np.sqrt(2.0 - 2.0 * trace.times)))
        increases = {}
        for name in builtin_names():
            sc = load_builtin(name)
            L, amb = build_geometry(sc), build_ambient(sc)
            h = L.polyline().edge_lengths.min() if L.is_curve else 2 * np.pi * min(L.family["params"].values()) / 64
            increases[name] = glmcf_evolve(L, amb, 0.2 * h**2, 200).max_volume_increase()
    v.check("circle radius error <= 1e-3 to t = 0.4", err <= 1e-3 and abs(trace.times[-1] - 0.4) <= 1e-12, err)
    worst = max(increases, key=increases.get)
    v.check(f"V_f step increase <= 1e-8 on every built-in (worst {worst})", increases[worst] <= 1e-8, increases[worst])
    v.finish(capsys)


def test_criterion_10_determinism(builtin_runs, capsys):
    v = Verdict(10)
    mismatched, compared = [], 0
    with v.timed("byte comparison", 1.0):
        for name, ((_, a), (_, b)) in builtin_runs.items():
            for path in sorted(a.glob("*.csv")):
                compared += 1
                if path.read_bytes() != (b / path.name).read_bytes():
                    mismatched.append(f"{name}/{path.name}")
    v.check("every built-in emitted CSV", all(any(d.glob("*.csv")) for (_, d), _ in builtin_runs.values()))
    v.check(f"byte-identical CSV ({compared} files)", not mismatched, len(mismatched))
    v.finish(capsys)


def test_manifests_carry_the_headline_numbers(builtin_runs):
    res = {name: runs[0][0]["results"] for name, runs in builtin_runs.items()}
    assert res["shrinker-circle-residual"]["residual"] <= 1e-8
    assert res["grim-reaper-residual"]["residual"] <= 1e-8
    assert res["expander-line-residual"]["residual"] <= 1e-8
    for name in ("shrinker-circle-residual", "grim-reaper-residual"):
        assert min(res[name]["polyline_refinement"]["observed_order"]) >= 1.9
    fv = res["shrinker-unit-circle-first-variation"]["first_variation"]
    assert abs(fv["analytic"] - np.pi * np.exp(-0.25)) <= 1e-4
    assert fv["fd_gap"] <= 1e-4 and fv["richardson_gap"] <= 1e-6
    head = res["shrinker-circle-secondvar"]["headline"]
    target = -(np.pi * ROOT2 / 4) * np.exp(-0.5)
    assert abs(head["Q_f"] - target) <= 1e-2 and abs(head["Q_f_fd"] - target) <= 5e-2
    assert abs(res["shrinker-circle-spectrum"]["lambda1"] - 0.5) <= 1e-3
    assert abs(res["clifford-torus-shrinker-spectrum"]["lambda1"] - 0.5) <= 2e-3
    for name in ("shrinker-circle-spectrum", "clifford-torus-shrinker-spectrum"):
        assert res[name]["stability"]["classification"] == "hamiltonian-f-unstable"
        assert res[name]["stability"]["witness_Q"] < 0
    assert res["grim-reaper-secondvar"]["random"]["count"] == 200
    assert res["grim-reaper-secondvar"]["random"]["min_Q_f"] >= -1e-6
    rnd = res["expander-line-secondvar"]["random"]
    assert rnd["count"] == 200 and rnd["min_Q_f"] >= 0.9 * rnd["min_weighted_norm_sq"]
    ids = res["grim-reaper-identities"]["translator"]
    for key in ("equation_deviation", "laplacian_identity", "energy_identity", "steady_identity", "witten_theta"):
        assert ids[key] <= 1e-6
    corr = res["shrinker-circle-correspond"]
    assert corr["max_discrepancy"] <= 1e-3 and corr["s_quadrature_gap"] <= 1e-8
    cal = res["grim-reaper-translator-eq"]
    assert cal["samples"] == 100_000 and cal["min_slack"] >= -1e-12
    assert cal["tangent_plane_slack_max"] <= 1e-10 and cal["volume_compatibility_error"] <= 1e-12
    bench = res["mcf-circle-benchmark"]
    assert bench["radius_benchmark"]["max_error"] <= 1e-3 and bench["final_time"] == pytest.approx(0.4)
    for name, r in res.items():
        if "max_volume_increase" in r:
            assert r["max_volume_increase"] <= 1e-8, name
