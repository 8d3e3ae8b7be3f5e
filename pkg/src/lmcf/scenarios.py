"""Scenario files: validation, the built-in catalog and task execution.

A scenario is a JSON object with ``ambient``, ``geometry``, ``task``,
optional ``output`` and ``seed`` blocks.  Running one writes a manifest
(``manifest.json``) with the scenario echo, library versions and every
headline number, plus task-specific CSV and SVG files.
"""

from __future__ import annotations

import copy
import json
import math
import os
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
from scipy.integrate import quad

from .ambient import POTENTIALS, AmbientSpace, HoloVolumeForm, apply_J
from .calibration import (
    volume_compatibility_check,
    calibration_inequality_sample,
    fslag_residual,
    tangent_plane_slack,
    translator_equation_check,
)
from .errors import NotFMinimalError, ScenarioError
from .families import FAMILIES, build_family
from .flow import correspondence_check, glmcf_evolve, perturbation_experiment
from .lagrangian import (
    CLOSED_CURVE,
    OPEN_CURVE,
    DiscreteLagrangian,
    default_minimality_tolerance,
    f_minimality_residual,
    generalized_mean_curvature,
    lagrangian_angle,
    winding_number,
    write_vertex_csv,
)
from .report import svg_plot, versions, write_csv, write_json
from .spectral import build_complex, spectrum, steady_identity, translator_identities
from .variation import (
    clamped_mode,
    f_volume,
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

TASKS = ("secondvar", "spectrum", "flow", "calibrate", "residual", "correspond")
OUT_ENV = "LMCF_OUT_DIR"
DEFAULT_OUT_ROOT = "lmcf-out"
CURVE_RESOLUTION = (8, 65536)
GRID_RESOLUTION = (8, 256)

_number = {"type": "number"}
_posnum = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}

TASK_SCHEMAS: dict[str, dict] = {
    "residual": {
        "properties": {
            "variation": {"enum": ["none", "normal", "outward_normal"]},
            "fd_step": _posnum,
            "richardson_step": _posnum,
            "refinement": {"type": "array", "items": _posint},
            "identities": {"type": "boolean"},
        }
    },
    "spectrum": {"properties": {"k": {"type": "integer", "minimum": 2, "maximum": 64}}},
    "secondvar": {
        "properties": {
            "mode": {"enum": ["analytic", "fd", "both"]},
            "fd_step": _posnum,
            "headline_mode": _posint,
            "fourier_modes": {"type": "integer", "minimum": 0, "maximum": 64},
            "random": {"type": "integer", "minimum": 0, "maximum": 100000},
            "random_modes": _posint,
        }
    },
    "flow": {
        "required": ["dt", "steps"],
        "properties": {
            "dt": _posnum,
            "steps": {"type": "integer", "minimum": 0},
            "scheme": {"enum": ["explicit", "semi-implicit"]},
            "record_every": _posint,
            "redistribute_every": {"type": "integer", "minimum": 0},
            "snapshots": {"type": "integer", "minimum": 0, "maximum": 200},
            "correspond": {"type": "boolean"},
            "perturb": {
                "type": "object",
                "required": ["profile", "eps"],
                "properties": {
                    "profile": {"enum": ["bump", "mode"]},
                    "eps": {"type": "number", "minimum": 0},
                    "width": _posnum,
                    "k": {"type": "integer", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
    },
    "calibrate": {
        "properties": {
            "samples": {"type": "integer", "minimum": 1, "maximum": 10000000},
            "compat_points": {"type": "integer", "minimum": 0, "maximum": 1000000},
            "radius": _posnum,
        }
    },
    "correspond": {
        "required": ["horizon"],
        "properties": {
            "horizon": _posnum,
            "dt": _posnum,
            "compare_every": _posint,
            "scheme": {"enum": ["explicit", "semi-implicit"]},
        },
    },
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["ambient", "geometry", "task"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "ambient": {
            "type": "object",
            "required": ["potential"],
            "additionalProperties": False,
            "properties": {
                "potential": {"enum": list(POTENTIALS)},
                "m": {"enum": [1, 2]},
                "T": {"type": "array", "items": _number},
                "hessian": {"type": "array", "items": {"type": "array", "items": _number}},
                "linear": {"type": "array", "items": _number},
                "c": _number,
            },
        },
        "geometry": {
            "type": "object",
            "required": ["family", "resolution"],
            "additionalProperties": False,
            "properties": {
                "family": {"type": "string"},
                "params": {"type": "object"},
                "resolution": {
                    "oneOf": [
                        {"type": "integer"},
                        {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                    ]
                },
                "backend": {"enum": ["analytic", "polyline"]},
                "truncation": _posnum,
            },
        },
        "task": {
            "type": "object",
            "required": ["type"],
            "properties": {"type": {"enum": list(TASKS)}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["json", "csv", "svg"]}},
            },
        },
    },
}

TRUNCATION_PARAM = {"grim_reaper": "x_max", "line": "half_length", "cubic_slag_graph": "half_width"}
SURFACE_FAMILIES = ("product_torus", "cubic_slag_graph")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _path(err: jsonschema.ValidationError, prefix: str = "") -> str:
    parts = [prefix] if prefix else []
    parts += [str(p) for p in err.absolute_path]
    return ".".join(parts) or "<root>"


def _check_finite(obj, where: str = "") -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ScenarioError(f"{where or '<root>'}: numeric parameters must be finite")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}" if where else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, f"{where}.{i}")


def validate_scenario(sc: dict) -> dict:
    """Schema plus semantic checks; returns a normalised deep copy."""
    if not isinstance(sc, dict):
        raise ScenarioError("<root>: a scenario must be a JSON object")
    _check_finite(sc)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(sc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ScenarioError(f"{_path(e)}: {e.message}")
    task = sc["task"]
    sub = dict(TASK_SCHEMAS[task["type"]])
    sub = {"type": "object", **sub}
    sub.setdefault("properties", {})
    sub["properties"] = {"type": {"const": task["type"]}, **sub["properties"]}
    sub["additionalProperties"] = False
    errors = sorted(jsonschema.Draft202012Validator(sub).iter_errors(task), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ScenarioError(f"{_path(e, 'task')}: {e.message}")
    geo = sc["geometry"]
    fam = geo["family"]
    if fam not in FAMILIES:
        raise ScenarioError(f"geometry.family: unknown family {fam!r}; expected one of {sorted(FAMILIES)}")
    res = geo["resolution"]
    if fam in SURFACE_FAMILIES:
        dims = res if isinstance(res, list) else [res, res]
        lo, hi = GRID_RESOLUTION
        if any(not lo <= d <= hi for d in dims):
            raise ScenarioError(f"geometry.resolution: grids need {lo}..{hi} samples per direction")
        if geo.get("backend", "analytic") != "analytic":
            raise ScenarioError("geometry.backend: surfaces are only available with analytic jets")
    else:
        lo, hi = CURVE_RESOLUTION
        if isinstance(res, list) or not lo <= res <= hi:
            raise ScenarioError(f"geometry.resolution: curves need an integer vertex count in {lo}..{hi}")
    if "truncation" in geo and fam not in TRUNCATION_PARAM:
        raise ScenarioError(f"geometry.truncation: family {fam!r} is not truncated")
    return copy.deepcopy(sc)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def _scenario_files() -> list:
    root = resources.files("lmcf").joinpath("scenarios")
    return sorted((p for p in root.iterdir() if p.name.endswith(".json")), key=lambda p: p.name)


def builtin_names() -> list[str]:
    return [p.name[: -len(".json")] for p in _scenario_files()]


def load_builtin(name: str) -> dict:
    for p in _scenario_files():
        if p.name == f"{name}.json":
            return json.loads(p.read_text())
    raise ScenarioError(f"scenario: no built-in scenario named {name!r}")


def list_scenarios() -> list[dict]:
    out = []
    for name in builtin_names():
        sc = load_builtin(name)
        out.append(
            {
                "name": name,
                "task": sc["task"]["type"],
                "potential": sc["ambient"]["potential"],
                "family": sc["geometry"]["family"],
                "description": sc.get("description", ""),
            }
        )
    return out


def load_scenario(ref: str | os.PathLike | dict) -> dict:
    """A dict, a path to a JSON file, or the name of a built-in scenario."""
    if isinstance(ref, dict):
        return ref
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        try:
            return json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ScenarioError(f"scenario: cannot read {str(path)!r}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario: invalid JSON in {str(path)!r}: {exc}") from exc
    return load_builtin(str(ref))


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def build_ambient(sc: dict) -> AmbientSpace:
    try:
        return AmbientSpace.from_config(sc["ambient"])
    except ValueError as exc:
        raise ScenarioError(f"ambient: {exc}") from exc


def build_geometry(sc: dict) -> DiscreteLagrangian:
    geo = sc["geometry"]
    params = dict(geo.get("params", {}))
    if "truncation" in geo:
        params[TRUNCATION_PARAM[geo["family"]]] = geo["truncation"]
    try:
        return build_family(geo["family"], params, geo["resolution"], geo.get("backend", "analytic"))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"geometry.params: {exc}") from exc


def output_dir(sc: dict, out_root: str | os.PathLike | None = None) -> Path:
    root = out_root or os.environ.get(OUT_ENV)
    name = sc.get("name", "scenario")
    if root:
        return Path(root) / name
    return Path(sc.get("output", {}).get("dir", os.path.join(DEFAULT_OUT_ROOT, name)))


class _Writer:
    def __init__(self, directory: Path, formats):
        self.dir = directory
        self.formats = set(formats)
        self.artifacts: list[str] = []

    def csv(self, name: str, columns: dict) -> None:
        if "csv" in self.formats:
            write_csv(self.dir / name, columns)
            self.artifacts.append(name)

    def vertex_csv(self, name: str, L: DiscreteLagrangian, fields: dict) -> None:
        if "csv" in self.formats:
            write_vertex_csv(self.dir / name, L, fields)
            self.artifacts.append(name)

    def svg(self, name: str, series, **kw) -> None:
        if "svg" in self.formats:
            svg_plot(self.dir / name, series, **kw)
            self.artifacts.append(name)

    def json(self, name: str, data) -> None:
        if "json" in self.formats:
            write_json(self.dir / name, data)
            self.artifacts.append(name)


def _curve_xy(verts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return verts[:, 0], verts[:, 1]


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


def _default_variation(L: DiscreteLagrangian, choice: str) -> np.ndarray | None:
    if choice == "none" or not L.is_curve:
        return None
    nu = unit_normal(L)
    if choice == "outward_normal":
        nu = -nu  # J tau points inward on counter-clockwise curves
    # normal fields carry no boundary flux, so open curves need no clamping here;
    # zeroing the end values would make the field non-smooth
    return nu


def _observed_orders(ns, vals) -> list[float]:
    out = []
    for i in range(1, len(ns)):
        if vals[i] > 0 and vals[i - 1] > 0:
            out.append(float(np.log(vals[i - 1] / vals[i]) / np.log(ns[i] / ns[i - 1])))
        else:
            out.append(float("nan"))
    return out


def task_residual(sc, L, amb, rng, w: _Writer) -> dict:
    t = sc["task"]
    res = f_minimality_residual(L, amb)
    tol = default_minimality_tolerance(L)
    out: dict[str, Any] = {
        "residual": res,
        "tolerance": tol,
        "f_minimal": bool(res <= tol),
        "backend": L.backend,
        "V_f": f_volume(L, amb),
        "lagrangian_defect": L.lagrangian_defect(),
    }
    if L.kind == CLOSED_CURVE:
        out["winding_number"] = winding_number(L)
    xi = _default_variation(L, t.get("variation", "outward_normal"))
    if xi is not None:
        h = t.get("fd_step", 1e-4)
        exact = first_variation(L, amb, xi)
        fd = first_variation_fd(L, amb, xi, h)
        rich = first_variation_richardson(L, amb, xi, t.get("richardson_step", 1e-3))
        out["first_variation"] = {
            "variation": t.get("variation", "outward_normal"),
            "analytic": exact,
            "fd": fd,
            "fd_step": h,
            "fd_gap": abs(exact - fd),
            "richardson": rich,
            "richardson_gap": abs(exact - rich),
        }
    if t.get("refinement"):
        geo = sc["geometry"]
        ns = [int(n) for n in t["refinement"]]
        vals = []
        for n in ns:
            fine = build_geometry({**sc, "geometry": {**geo, "resolution": n, "backend": "polyline"}})
            vals.append(f_minimality_residual(fine, amb))
        out["polyline_refinement"] = {"N": ns, "residual": vals, "observed_order": _observed_orders(ns, vals)}
        w.csv("refinement.csv", {"N": ns, "residual": vals})
    fields = {"K_norm": np.linalg.norm(generalized_mean_curvature(L, amb), axis=-1)}
    fields["H_norm"] = np.linalg.norm(L.mean_curvature_field, axis=-1)
    if L.is_lagrangian_dimension:
        fields["theta"] = lagrangian_angle(L)
    if amb.T is not None and amb.is_steady and L.is_curve and t.get("identities", True):
        ids = translator_identities(L, amb)
        theta0, dev = translator_equation_check(L, amb)
        const, spread = steady_identity(L, amb)
        out["translator"] = {
            "equation_theta0": theta0,
            "equation_deviation": dev,
            "laplacian_identity": ids.max_abs("laplacian_identity"),
            "energy_identity": ids.max_abs("energy_identity"),
            "steady_identity": ids.max_abs("steady_identity"),
            "steady_constant": const,
            "steady_spread": spread,
            "witten_theta": ids.max_abs("witten_theta"),
            "eigen_bound_max": float(np.max(ids.eigen_bound[ids.interior])),
        }
        fields.update(
            {
                "laplacian_identity": ids.laplacian_identity,
                "energy_identity": ids.energy_identity,
                "steady_identity": ids.steady_identity,
                "witten_theta": ids.witten_theta,
            }
        )
    w.vertex_csv("vertices.csv", L, fields)
    idx = np.arange(L.size)
    w.svg("residual.svg", [(idx, fields["K_norm"].reshape(-1), "|K|")], title="f-minimality residual",
          xlabel="sample", ylabel="|H + (p/2m) grad f^perp|")
    return out


def task_spectrum(sc, L, amb, rng, w: _Writer) -> dict:
    k = sc["task"].get("k", 6)
    cx = build_complex(L, amb)
    spec = spectrum(cx, k=k)
    out: dict[str, Any] = {
        "eigenvalues": spec.eigenvalues,
        "lambda1": spec.lambda1,
        "dirichlet": spec.dirichlet,
        "max_eigen_residual": float(spec.residuals.max()),
        "c": amb.c,
    }
    try:
        rep = stability_report(L, amb)
        out["stability"] = rep.as_dict()
    except NotFMinimalError as exc:  # report the spectrum only
        out["stability"] = {"classification": "not-evaluated", "reason": str(exc)}
    w.csv(
        "eigenvalues.csv",
        {"index": np.arange(len(spec.eigenvalues)), "eigenvalue": spec.eigenvalues, "residual": spec.residuals},
    )
    w.vertex_csv("eigenfunctions.csv", L, {f"u{j}": spec.eigenfunctions[:, j] for j in range(spec.eigenfunctions.shape[1])})
    w.svg("eigenvalues.svg", [(np.arange(len(spec.eigenvalues)), spec.eigenvalues, "eigenvalues")],
          title="Witten Laplacian spectrum", xlabel="index", ylabel="lambda", markers=True)
    return out


def task_secondvar(sc, L, amb, rng, w: _Writer) -> dict:
    t = sc["task"]
    if not L.is_curve:
        raise ScenarioError("geometry.family: the secondvar task runs on curves")
    mode = t.get("mode", "both")
    h = t.get("fd_step", 1e-3)
    use_fd = mode in ("fd", "both")
    cx = build_complex(L, amb)
    k0 = t.get("headline_mode", 1)
    out: dict[str, Any] = {"mode": mode}
    if L.is_closed:
        u, xi = hamiltonian_mode(L, k0)
        rep = second_variation(L, amb, xi, fd_step=h if use_fd else None, cx=cx)
        norm_u = cx.inner(u, u)
        lam = float(np.sum(cx.stiffness @ u * u) / norm_u)
        out["headline"] = {
            "variation": f"hamiltonian sin({k0} phi)",
            **rep.as_dict(),
            "u_weighted_norm_sq": norm_u,
            "rayleigh_quotient": lam,
            "eigen_mode_prediction": lam * (lam - amb.c) * norm_u,
        }
    else:
        xi = clamped_mode(L, k0)
        rep = second_variation(L, amb, xi, fd_step=h if use_fd else None, cx=cx)
        out["headline"] = {"variation": f"clamped sin({k0} pi sigma) nu", **rep.as_dict()}
    if mode == "fd":
        out["headline"]["Q_f"] = None
    labels, ks, qa, qf = [], [], [], []
    for k in range(1, t.get("fourier_modes", 6) + 1):
        fields = []
        if L.is_closed:
            fields = [("sin", hamiltonian_mode(L, k, "sin")[1]), ("cos", hamiltonian_mode(L, k, "cos")[1])]
        else:
            fields = [("clamped", clamped_mode(L, k))]
        for name, xi in fields:
            rep = second_variation(L, amb, xi, fd_step=h if use_fd else None, cx=cx)
            labels.append(name)
            ks.append(k)
            qa.append(rep.Q_f if mode != "fd" else float("nan"))
            qf.append(rep.Q_f_fd if use_fd else float("nan"))
    if ks:
        w.csv("modes.csv", {"kind": labels, "k": ks, "Q_f": qa, "Q_f_fd": qf})
        series = []
        if mode != "fd":
            series.append((np.arange(len(ks)), qa, "assembled"))
        if use_fd:
            series.append((np.arange(len(ks)), qf, "finite difference"))
        w.svg("modes.svg", series, title="Q_f over Fourier variations", xlabel="mode index", ylabel="Q_f", markers=True)
    n_random = t.get("random", 0)
    if n_random:
        if L.kind != OPEN_CURVE:
            raise ScenarioError("task.random: random clamped variations need an open curve")
        qs, norms = [], []
        for xi in random_clamped_variations(L, n_random, rng, t.get("random_modes", 8)):
            qs.append(second_variation(L, amb, xi, cx=cx).Q_f)
            norms.append(weighted_norm_sq(L, amb, xi))
        qs, norms = np.array(qs), np.array(norms)
        out["random"] = {
            "count": n_random,
            "min_Q_f": float(qs.min()),
            "min_weighted_norm_sq": float(norms.min()),
            "min_ratio": float(np.min(qs / norms)),
        }
        w.csv("random.csv", {"index": np.arange(n_random), "Q_f": qs, "weighted_norm_sq": norms})
    return out


def _profile(L: DiscreteLagrangian, spec: dict) -> np.ndarray:
    if spec["profile"] == "mode":
        k = spec.get("k", 1)
        if L.is_closed:
            return np.cos(k * 2.0 * np.pi * np.arange(L.shape[0]) / L.shape[0])
        return np.sin(max(k, 1) * np.pi * np.linspace(0.0, 1.0, L.shape[0]))
    # bump centred at the middle sample, width in parameter fraction
    sigma = np.linspace(-0.5, 0.5, L.shape[0])
    prof = np.exp(-((sigma / spec.get("width", 0.1)) ** 2))
    if L.kind == OPEN_CURVE:
        prof[0] = prof[-1] = 0.0
    return prof


def _radius_prediction(L0: DiscreteLagrangian, amb: AmbientSpace, times: np.ndarray) -> np.ndarray | None:
    fam = L0.family or {}
    if fam.get("name") != "circle" or np.any(amb.linear) or not np.allclose(amb.hessian, amb.hessian[0, 0] * np.eye(2)):
        return None
    r0 = fam["params"]["r"]
    a = amb.hessian[0, 0]
    if a == 0.0:
        sq = r0**2 - 2.0 * times
    else:
        sq = 2.0 / a + (r0**2 - 2.0 / a) * np.exp(a * times)
    return np.sqrt(np.maximum(sq, 0.0))


def task_flow(sc, L, amb, rng, w: _Writer) -> dict:
    t = sc["task"]
    dt, steps = t["dt"], t["steps"]
    scheme = t.get("scheme", "explicit")
    rec = t.get("record_every", 10)
    out: dict[str, Any] = {"dt": dt, "steps": steps, "scheme": scheme, "final_time": dt * steps}
    trace = glmcf_evolve(
        L, amb, dt, steps, scheme, redistribute_every=t.get("redistribute_every"), record_every=rec
    )
    d = trace.diagnostics
    out["max_volume_increase"] = trace.max_volume_increase()
    out["volume_monotone"] = bool(out["max_volume_increase"] <= 1e-8)
    out["initial_soliton_residual"] = float(d["soliton_residual"][0])
    out["final_soliton_residual"] = float(d["soliton_residual"][-1])
    out["final_f_volume"] = float(d["f_volume"][-1])
    out["max_lagrangian_defect"] = float(d["lagrangian_defect"].max())
    cols = {"t": trace.times, **{k: v for k, v in d.items()}}
    if L.is_curve:
        first, last = trace.states[0], trace.states[-1]
        mask = L.interior_mask(2.0 / 3.0 if L.kind == OPEN_CURVE else None)
        out["max_vertex_drift"] = float(np.max(np.linalg.norm(last - first, axis=-1)[mask]))
        pred = _radius_prediction(L, amb, trace.times)
        if pred is not None:
            center = np.asarray(L.family["params"].get("center", [0.0, 0.0]))
            radius = np.array([np.mean(np.linalg.norm(s - center, axis=1)) for s in trace.states])
            cols["radius"] = radius
            cols["radius_exact"] = pred
            err = np.abs(radius - pred)
            out["radius_benchmark"] = {"r0": L.family["params"]["r"], "max_error": float(err.max()),
                                       "final_radius": float(radius[-1]), "final_exact": float(pred[-1])}
        n_snap = t.get("snapshots", 8)
        if n_snap:
            picks = np.unique(np.linspace(0, len(trace) - 1, n_snap).round().astype(int))
            w.json("snapshots.json", [{"t": float(trace.times[i]), "kind": trace.kind, "vertices": trace.states[i]} for i in picks])
            w.svg("filmstrip.svg", [(*_curve_xy(trace.states[i]), f"t={trace.times[i]:.3g}") for i in picks],
                  title="flow snapshots", xlabel="x", ylabel="y", equal_aspect=True)
    else:
        cols["r1"], cols["r2"] = trace.states[:, 0], trace.states[:, 1]
    w.csv("diagnostics.csv", cols)
    if "perturb" in t:
        p = t["perturb"]
        rep = perturbation_experiment(L, amb, _profile(L, p), p["eps"], dt * steps, dt, record_every=rec)
        out["perturbation"] = rep.as_dict()
        w.csv("perturbation.csv", {"t": rep.times, "norm": rep.norms})
        w.svg("perturbation.svg", [(rep.times, np.log10(np.maximum(rep.norms, 1e-300)), "log10 norm")],
              title="weighted normal perturbation", xlabel="t", ylabel="log10 ||dF^perp||_w")
    if t.get("correspond"):
        out["correspondence"] = _correspond(L, amb, dt * steps, dt, rec, scheme, w)
    return out


def _correspond(L, amb, horizon, dt, every, scheme, w: _Writer) -> dict:
    res = correspondence_check(L, amb, horizon, dt=dt, compare_every=every, scheme=scheme)
    s_closed = amb.reparametrized_time(horizon)
    s_quad, _ = quad(lambda tau: 1.0 / amb.sigma(tau), 0.0, horizon, epsabs=1e-14, epsrel=1e-14)
    s_vals = np.array([amb.reparametrized_time(x) for x in res.times])
    w.csv("correspondence.csv", {"t": res.times, "s": s_vals, "discrepancy": res.discrepancies})
    w.svg("correspondence.svg", [(res.times, res.discrepancies, "Hausdorff gap")],
          title="mapped GLMCF vs direct MCF", xlabel="t", ylabel="distance")
    return {
        "horizon": horizon,
        "max_discrepancy": res.max_discrepancy,
        "s_closed_form": s_closed,
        "s_quadrature": s_quad,
        "s_quadrature_gap": abs(s_closed - s_quad),
        "glmcf_max_volume_increase": float(np.max(res.mapped.diagnostics["f_volume_step_change"], initial=0.0)),
    }


def task_correspond(sc, L, amb, rng, w: _Writer) -> dict:
    t = sc["task"]
    if not L.is_curve:
        raise ScenarioError("geometry.family: the correspond task runs on curves")
    return _correspond(L, amb, t["horizon"], t.get("dt", 1e-4), t.get("compare_every", 10), t.get("scheme", "explicit"), w)


def task_calibrate(sc, L, amb, rng, w: _Writer) -> dict:
    t = sc["task"]
    try:
        form = HoloVolumeForm(amb)
    except ValueError as exc:
        raise ScenarioError(f"ambient.potential: {exc}") from exc
    res = calibration_inequality_sample(form, t.get("samples", 10000), rng, t.get("radius", 3.0))
    out: dict[str, Any] = {
        "samples": res.n_samples,
        "min_slack": res.min_slack,
        "worst_sample": res.worst.as_dict(),
    }
    if t.get("compat_points", 1000):
        out["volume_compatibility_error"] = volume_compatibility_check(form, t.get("compat_points", 1000), rng, t.get("radius", 3.0))
    order = np.argsort(res.slacks)[:32]
    w.csv("worst_samples.csv", {"rank": np.arange(len(order)), "slack": res.slacks[order]})
    if L.is_lagrangian_dimension:
        slack = tangent_plane_slack(L, form)
        fs = fslag_residual(L, form)
        out["tangent_plane_slack_max"] = float(np.max(slack))
        out["fslag"] = {"phase": fs.phase, "max_deviation": fs.max_deviation, "phase_spread": fs.phase_spread}
        fields = {"theta_f": lagrangian_angle(L, form), "tangent_slack": slack}
        if amb.T is not None and L.is_curve:
            theta0, dev = translator_equation_check(L, amb)
            out["translator_equation"] = {"theta0": theta0, "deviation": dev}
            fields["theta"] = lagrangian_angle(L)
            fields["F_dot_JT"] = L.vertices @ apply_J(amb.T)
        w.vertex_csv("vertices.csv", L, fields)
        if "theta" in fields:
            idx = np.arange(L.size)
            w.svg("translator_equation.svg", [(idx, fields["theta"], "theta"), (idx, fields["F_dot_JT"], "<F, JT>")],
                  title="translator equation", xlabel="sample", ylabel="angle")
    return out


RUNNERS = {
    "residual": task_residual,
    "spectrum": task_spectrum,
    "secondvar": task_secondvar,
    "flow": task_flow,
    "calibrate": task_calibrate,
    "correspond": task_correspond,
}


def execute(sc: dict, out_root: str | os.PathLike | None = None) -> tuple[dict, Path]:
    """Validate and run a scenario; returns (manifest, output directory).

    Raises ScenarioError on invalid input and other LmcfError subclasses on
    numerical failure.
    """
    sc = validate_scenario(sc)
    amb = build_ambient(sc)
    L = build_geometry(sc)
    if L.n != amb.dim:
        raise ScenarioError(f"ambient.m: geometry lives in R^{L.n} but the ambient is C^{amb.m}")
    directory = output_dir(sc, out_root)
    directory.mkdir(parents=True, exist_ok=True)
    formats = sc.get("output", {}).get("formats", ["json", "csv", "svg"])
    writer = _Writer(directory, formats)
    rng = np.random.default_rng(sc.get("seed", 0))
    results = RUNNERS[sc["task"]["type"]](sc, L, amb, rng, writer)
    manifest = {
        "scenario": sc,
        "versions": versions(),
        "geometry": {"kind": L.kind, "backend": L.backend, "samples": L.size},
        "results": results,
        "artifacts": writer.artifacts,
    }
    write_json(directory / "manifest.json", manifest)
    return manifest, directory
