"""Time stepping for generalized Lagrangian mean curvature flow.

Curves move by dF/dt = H + 1/2 (grad f)^perp with the positions-only
discretisation (turning-angle curvature, bisector normals).  Clamped curve
ends stay fixed.  Product tori move through their radii, which keeps them
exactly Lagrangian.

The flow is the negative gradient flow of V_f, so every trace records the
change of V_f across each Euler step (redistribution steps are
reparametrisations and are excluded from that bookkeeping).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial.distance import directed_hausdorff

from .ambient import AmbientSpace, apply_J, make_ambient
from .errors import CFLViolation, MeshDegenerationError
from .families import product_torus
from .lagrangian import (
    CLOSED_CURVE,
    OPEN_CURVE,
    PRODUCT_TORUS,
    DiscreteLagrangian,
    generalized_mean_curvature,
)
from .variation import f_volume

CFL_CONSTANT = 0.25
DEGENERATION_FRACTION = 1e-3
REDISTRIBUTE_EVERY = 10
DIAGNOSTIC_FRACTION = 2.0 / 3.0

EXPLICIT = "explicit"
SEMI_IMPLICIT = "semi-implicit"


@dataclass(frozen=True, eq=False)
class FlowTrace:
    """Recorded states with per-record diagnostics.

    ``states`` holds vertex arrays (or torus radii, see ``params``) and
    ``diagnostics`` maps names to arrays aligned with ``times``.
    """

    kind: str
    times: np.ndarray
    states: np.ndarray
    diagnostics: dict[str, np.ndarray]
    ambient: AmbientSpace
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> DiscreteLagrangian:
        return self._build(self.states[i])

    def _build(self, arr: np.ndarray) -> DiscreteLagrangian:
        if self.kind == PRODUCT_TORUS:
            n1, n2 = self.params["resolution"]
            return product_torus(arr[0], arr[1], n1, n2)
        return DiscreteLagrangian(self.kind, arr)

    def interpolate(self, s: float) -> np.ndarray:
        """Linear interpolation of the stored state in time."""
        t = self.times
        if s < t[0] - 1e-12 or s > t[-1] + 1e-12:
            raise ValueError(f"time {s} lies outside the trace range [{t[0]}, {t[-1]}]")
        j = int(np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2))
        lam = (s - t[j]) / (t[j + 1] - t[j])
        lam = float(np.clip(lam, 0.0, 1.0))
        return (1.0 - lam) * self.states[j] + lam * self.states[j + 1]

    def max_volume_increase(self) -> float:
        return float(np.max(self.diagnostics["f_volume_step_change"], initial=0.0))


# ---------------------------------------------------------------------------
# curve kinematics
# ---------------------------------------------------------------------------


def _diagnostic_mask(L: DiscreteLagrangian) -> np.ndarray:
    return L.interior_mask(DIAGNOSTIC_FRACTION if L.kind == OPEN_CURVE else None)


def _velocity(L: DiscreteLagrangian, ambient: AmbientSpace) -> np.ndarray:
    v = generalized_mean_curvature(L, ambient)
    if L.kind == OPEN_CURVE:
        v[0] = v[-1] = 0.0
    return v


def _arclength_laplacian(verts: np.ndarray, closed: bool):
    import scipy.sparse as sp

    n = verts.shape[0]
    if closed:
        e = np.roll(verts, -1, axis=0) - verts
        inv = 1.0 / np.linalg.norm(e, axis=1)
        dual = 0.5 * (1.0 / inv + np.roll(1.0 / inv, 1))
        left = np.roll(inv, 1) / dual
        right = inv / dual
        rows = np.concatenate([np.arange(n)] * 3)
        cols = np.concatenate([np.arange(n), (np.arange(n) - 1) % n, (np.arange(n) + 1) % n])
        vals = np.concatenate([-(left + right), left, right])
    else:
        e = np.diff(verts, axis=0)
        inv = 1.0 / np.linalg.norm(e, axis=1)
        dual = 0.5 * (1.0 / inv[:-1] + 1.0 / inv[1:])
        left = inv[:-1] / dual
        right = inv[1:] / dual
        idx = np.arange(1, n - 1)
        rows = np.concatenate([idx] * 3)
        cols = np.concatenate([idx, idx - 1, idx + 1])
        vals = np.concatenate([-(left + right), left, right])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _semi_implicit_step(L: DiscreteLagrangian, ambient: AmbientSpace, dt: float) -> np.ndarray:
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    verts = L.vertices
    drift = 0.5 * L.normal_part(ambient.gradient(verts))
    if L.kind == OPEN_CURVE:
        drift[0] = drift[-1] = 0.0
    lap = _arclength_laplacian(verts, L.kind == CLOSED_CURVE)
    system = (sp.identity(verts.shape[0]) - dt * lap).tocsc()
    return spla.splu(system).solve(verts + dt * drift)


def redistribute(verts: np.ndarray) -> np.ndarray:
    """Resample a closed curve uniformly in arclength (periodic cubic spline)."""
    closed = np.vstack([verts, verts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    spline = CubicSpline(s, closed, bc_type="periodic", axis=0)
    n = verts.shape[0]
    targets = s[-1] * np.arange(n) / n
    return spline(targets)


def _curve_diagnostics(L, ambient, reference) -> dict[str, float]:
    mask = _diagnostic_mask(L)
    res = np.linalg.norm(generalized_mean_curvature(L, ambient), axis=-1)[mask]
    out = {
        "soliton_residual": float(res.max()) if res.size else 0.0,
        "f_volume": f_volume(L, ambient),
        "lagrangian_defect": L.lagrangian_defect(),
        "min_edge": float(L.edge_lengths.min()),
    }
    out["perturbation_norm"] = perturbation_norm(L, reference, ambient) if reference is not None else 0.0
    return out


def perturbation_norm(L: DiscreteLagrangian, reference: DiscreteLagrangian, ambient: AmbientSpace) -> float:
    """Weighted L2 norm of the normal part of F - F_ref, measured with the reference normal."""
    delta = reference.normal_part(L.vertices - reference.vertices)
    w = np.exp(-0.5 * ambient.value(reference.vertices)) * reference.measure
    mask = _diagnostic_mask(reference)
    return float(np.sqrt(np.sum((np.sum(delta**2, axis=-1) * w)[mask])))


def glmcf_evolve(
    L0: DiscreteLagrangian,
    ambient: AmbientSpace,
    dt: float,
    steps: int,
    scheme: str = EXPLICIT,
    *,
    redistribute_every: int | None = None,
    record_every: int = 1,
    cfl: float = CFL_CONSTANT,
) -> FlowTrace:
    """Evolve by dF/dt = H + 1/2 (grad f)^perp.

    ``scheme`` is ``"explicit"`` (forward Euler, CFL-checked every step) or
    ``"semi-implicit"`` (backward Euler in the curve Laplacian).  Closed
    curves are resampled uniformly every ``redistribute_every`` steps
    (default 10, 0 disables).
    """
    if not dt > 0 or steps < 0:
        raise ValueError("need dt > 0 and a non-negative step count")
    if scheme not in (EXPLICIT, SEMI_IMPLICIT):
        raise ValueError(f"unknown scheme {scheme!r}")
    if ambient.dim != L0.n:
        raise ValueError("immersion and ambient dimensions differ")
    if L0.kind == PRODUCT_TORUS:
        return _torus_evolve(L0, ambient, dt, steps, record_every)
    if not L0.is_curve:
        raise ValueError("only curves and product tori can be evolved")
    if redistribute_every is None:
        redistribute_every = REDISTRIBUTE_EVERY if L0.kind == CLOSED_CURVE else 0
    L = L0.polyline()
    h0 = float(L.edge_lengths.min())
    times, states, diags = [0.0], [L.vertices.copy()], [_curve_diagnostics(L, ambient, None)]
    diags[0]["f_volume_step_change"] = 0.0
    v_before = diags[0]["f_volume"]
    step_change = 0.0
    for k in range(1, steps + 1):
        h_min = float(L.edge_lengths.min())
        if h_min < DEGENERATION_FRACTION * h0:
            raise MeshDegenerationError(f"min edge {h_min:.3e} fell below {DEGENERATION_FRACTION} of the initial {h0:.3e}")
        if scheme == EXPLICIT:
            if dt > cfl * h_min**2:
                raise CFLViolation(f"dt = {dt:.3e} exceeds {cfl} * h_min^2 = {cfl * h_min**2:.3e} at step {k}")
            new = L.vertices + dt * _velocity(L, ambient)
        else:
            new = _semi_implicit_step(L, ambient, dt)
        L = DiscreteLagrangian(L.kind, new)
        v_after = f_volume(L, ambient)
        step_change = max(step_change, v_after - v_before)
        if redistribute_every and k % redistribute_every == 0:
            L = DiscreteLagrangian(L.kind, redistribute(L.vertices))
            v_after = f_volume(L, ambient)
        v_before = v_after
        if k % record_every == 0 or k == steps:
            d = _curve_diagnostics(L, ambient, None)
            d["f_volume_step_change"] = step_change
            step_change = 0.0
            times.append(k * dt)
            states.append(L.vertices.copy())
            diags.append(d)
    return _pack(L0.kind, times, states, diags, ambient, {"dt": dt, "scheme": scheme})


def _pack(kind, times, states, diags, ambient, params) -> FlowTrace:
    keys = diags[0].keys()
    table = {key: np.array([d[key] for d in diags]) for key in keys}
    return FlowTrace(kind, np.array(times), np.array(states), table, ambient, params)


def _torus_evolve(L0, ambient, dt, steps, record_every) -> FlowTrace:
    if np.any(ambient.linear) or not np.allclose(ambient.hessian, ambient.hessian[0, 0] * np.eye(4)):
        raise ValueError("product tori evolve only under rotationally symmetric potentials")
    fam = L0.family or {}
    params = fam.get("params", {})
    r = np.array([params.get("r1"), params.get("r2")], dtype=float)
    if np.any(~np.isfinite(r)):
        raise ValueError("product torus needs its family radii")
    res = fam.get("resolution", list(L0.shape))
    a = ambient.hessian[0, 0]

    def diag(radii):
        T = product_torus(radii[0], radii[1], res[0], res[1])
        return {
            "soliton_residual": float(np.max(np.abs(-1.0 / radii + 0.5 * a * radii))),
            "f_volume": f_volume(T, ambient),
            "lagrangian_defect": T.lagrangian_defect(),
            "min_edge": float(T.edge_lengths.min()),
            "perturbation_norm": 0.0,
        }

    times, states, diags = [0.0], [r.copy()], [diag(r)]
    diags[0]["f_volume_step_change"] = 0.0
    v_before = diags[0]["f_volume"]
    for k in range(1, steps + 1):
        r = r + dt * (-1.0 / r + 0.5 * a * r)
        if np.any(r <= 0):
            raise MeshDegenerationError("torus factor collapsed")
        if k % record_every == 0 or k == steps:
            d = diag(r)
            d["f_volume_step_change"] = max(0.0, d["f_volume"] - v_before) if record_every == 1 else 0.0
            v_before = d["f_volume"]
            times.append(k * dt)
            states.append(r.copy())
            diags.append(d)
    return _pack(PRODUCT_TORUS, times, states, diags, ambient, {"dt": dt, "resolution": list(res)})


def mcf_evolve(L0: DiscreteLagrangian, dt: float, steps: int, scheme: str = EXPLICIT, **kwargs) -> FlowTrace:
    """Plain mean curvature flow dF/dt = H."""
    return glmcf_evolve(L0, make_ambient("constant", m=L0.m), dt, steps, scheme, **kwargs)


# ---------------------------------------------------------------------------
# correspondence with the coupled flow
# ---------------------------------------------------------------------------


def krmcf_from_glmcf(trace: FlowTrace, ambient: AmbientSpace, times=None) -> FlowTrace:
    """C_t = phi_t^{-1}(F_{s(t)}) with s(t) = int_0^t d tau / sigma(tau).

    By default maps every trace time t whose s(t) is still inside the
    trace.  Raises ``ExpiredFlowError`` when sigma(t) <= 0.
    """
    if trace.kind == PRODUCT_TORUS:
        raise ValueError("map torus traces through their radii instead")
    if times is None:
        end = trace.times[-1]
        times = [t for t in trace.times if ambient.reparametrized_time(t) <= end + 1e-12] if ambient.c <= 0 else [
            t for t in trace.times if ambient.c * t < 1.0 and ambient.reparametrized_time(t) <= end + 1e-12
        ]
    plain = make_ambient("constant", m=ambient.m)
    out_t, out_s, diags = [], [], []
    for t in times:
        s = ambient.reparametrized_time(t)
        verts = ambient.flow_map_inverse(t, trace.interpolate(s))
        L = DiscreteLagrangian(trace.kind, verts)
        d = _curve_diagnostics(L, plain, None)
        d["f_volume_step_change"] = 0.0
        d["s"] = s
        out_t.append(float(t))
        out_s.append(verts)
        diags.append(d)
    return _pack(trace.kind, out_t, out_s, diags, plain, {"source": "glmcf", "potential": ambient.potential})


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


def densify(verts: np.ndarray, closed: bool, factor: int = 16) -> np.ndarray:
    """Points spaced along every edge, so vertex-to-set distances approximate distances to the polyline."""
    pts = np.vstack([verts, verts[:1]]) if closed else verts
    lam = np.arange(factor)[:, None] / factor
    seg = pts[:-1, None, :] + lam[None] * (pts[1:, None, :] - pts[:-1, None, :])
    return np.vstack([seg.reshape(-1, verts.shape[1]), pts[-1:]])


def interior_hausdorff(a: np.ndarray, b: np.ndarray, mask: np.ndarray, closed: bool = False) -> float:
    """Symmetric vertex-to-polyline distance using only the masked vertices of each side as sources."""
    return float(
        max(directed_hausdorff(a[mask], densify(b, closed))[0], directed_hausdorff(b[mask], densify(a, closed))[0])
    )


@dataclass(frozen=True, eq=False)
class CorrespondenceResult:
    max_discrepancy: float
    times: np.ndarray
    discrepancies: np.ndarray
    mapped: FlowTrace
    direct: FlowTrace


def correspondence_check(
    L0: DiscreteLagrangian,
    ambient: AmbientSpace,
    horizon: float,
    dt: float = 1e-4,
    compare_every: int = 10,
    scheme: str = EXPLICIT,
) -> CorrespondenceResult:
    """Compare a direct MCF run with the mapped stationary GLMCF trace up to ``horizon``.

    Closed curves use the Hausdorff distance between vertex sets.  Open
    curves slide along themselves while clamped, so their vertices are
    compared with the other polyline, using only the interior two-thirds as
    sources.
    """
    if ambient.c > 0 and ambient.c * horizon >= 1.0:
        ambient.sigma(horizon)
    s_end = ambient.reparametrized_time(horizon)
    n_glmcf = int(np.ceil(s_end / dt - 1e-9))
    n_mcf = int(round(horizon / dt))
    stationary = glmcf_evolve(L0, ambient, dt, n_glmcf, scheme, redistribute_every=0)
    direct = mcf_evolve(L0, dt, n_mcf, scheme, redistribute_every=0, record_every=compare_every)
    mapped = krmcf_from_glmcf(stationary, ambient, times=direct.times)
    if L0.kind == OPEN_CURVE:
        mask = L0.interior_mask(DIAGNOSTIC_FRACTION)
        gaps = np.array([interior_hausdorff(a, b, mask) for a, b in zip(mapped.states, direct.states)])
    else:
        gaps = np.array([hausdorff(a, b) for a, b in zip(mapped.states, direct.states)])
    return CorrespondenceResult(float(gaps.max()), direct.times, gaps, mapped, direct)


# ---------------------------------------------------------------------------
# perturbation experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PerturbationReport:
    times: np.ndarray
    norms: np.ndarray
    log_slope: float
    monotone_after_transient: bool
    observation: str
    perturbed: FlowTrace
    base: FlowTrace

    def as_dict(self) -> dict:
        return {
            "log_slope": self.log_slope,
            "monotone_after_transient": self.monotone_after_transient,
            "observation": self.observation,
            "initial_norm": float(self.norms[0]),
            "final_norm": float(self.norms[-1]),
        }


def length_scale(L: DiscreteLagrangian) -> float:
    pts = L.vertices.reshape(-1, L.n)
    return float(np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))


def perturbation_experiment(
    L0: DiscreteLagrangian,
    ambient: AmbientSpace,
    profile: np.ndarray,
    eps: float,
    horizon: float,
    dt: float,
    *,
    record_every: int = 10,
    transient: float = 0.2,
) -> PerturbationReport:
    """Flow F_0 + eps u nu next to the unperturbed flow and track ||dF^perp||_w(t).

    The report states what was observed in this run; it is evidence, not a
    stability proof.
    """
    if not L0.is_curve:
        raise ValueError("perturbation experiments run on curves")
    profile = np.asarray(profile, dtype=float)
    if eps * np.max(np.abs(profile), initial=0.0) > 0.1 * length_scale(L0):
        raise ValueError("perturbation amplitude exceeds 0.1 of the curve's length scale")
    base_curve = L0.polyline()
    nu = apply_J(base_curve.tangent_frame[:, 0, :])
    bump = eps * profile[:, None] * nu
    if L0.kind == OPEN_CURVE:
        bump[0] = bump[-1] = 0.0
    steps = int(round(horizon / dt))
    redist = 0
    base = glmcf_evolve(base_curve, ambient, dt, steps, redistribute_every=redist, record_every=record_every)
    start = DiscreteLagrangian(L0.kind, base_curve.vertices + bump)
    pert = glmcf_evolve(start, ambient, dt, steps, redistribute_every=redist, record_every=record_every)
    norms = np.array([perturbation_norm(pert.state(i), base.state(i), ambient) for i in range(len(base))])
    times = base.times
    late = times >= transient * horizon
    tiny = 1e-300
    if norms[0] <= 1e-14:
        slope, mono, obs = 0.0, True, "observed: unperturbed run stays at the fixed point within drift"
    else:
        slope = float(np.polyfit(times[late], np.log(np.maximum(norms[late], tiny)), 1)[0])
        mono = bool(np.all(np.diff(norms[late]) <= 1e-12 * norms[0]))
        obs = f"observed {'decay' if slope < 0 else 'growth'} of the perturbation norm (log-slope {slope:.4g})"
    return PerturbationReport(times, norms, slope, mono, obs, pert, base)
