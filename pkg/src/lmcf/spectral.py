"""Weighted discrete exterior calculus and the Witten Laplacian.

Functions live on vertices, 1-forms on edges (edge integrals), 2-forms on
the triangles of a parameter grid.  With weight w = exp(-(p/2m) f) the
assembled pieces are

* ``mass``: lumped vertex mass w_i * mu_i,
* ``conductance``: per-edge weights c_e so that sum_e c_e (du_e)^2 is the
  weighted Dirichlet energy,
* ``d0`` (and ``d1`` on grids): signed incidence matrices.

The Witten Laplacian uses the positive convention
``Delta_f u = d*_f du = M^{-1} d0^T C d0 u``; pass ``analyst_sign=True`` to
get its negation ``Delta u - 1/2 <grad f, grad u>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ambient import AmbientSpace
from .errors import DegenerateGeometryError, SolverError
from .lagrangian import DiscreteLagrangian, OneForm, differential, lagrangian_angle

DENSE_LIMIT = 1500


@dataclass(frozen=True, eq=False)
class WeightedComplex:
    L: DiscreteLagrangian
    ambient: AmbientSpace | None
    weight: np.ndarray  # exp(-(p/2m) f) per vertex, flattened
    mass: np.ndarray  # lumped mass per vertex, flattened
    conductance: np.ndarray  # per edge
    d0: sp.csr_matrix
    d1: sp.csr_matrix | None = None
    face_weight: np.ndarray | None = None  # w / area per triangle, for the 2-form norm

    @property
    def n_vertices(self) -> int:
        return self.mass.shape[0]

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        return (self.d0.T @ sp.diags(self.conductance) @ self.d0).tocsr()

    @cached_property
    def dirichlet(self) -> bool:
        return bool(self.L.boundary_mask().any())

    @cached_property
    def free(self) -> np.ndarray:
        """Indices of vertices carrying unknowns (boundary removed for clamped meshes)."""
        return np.flatnonzero(~self.L.boundary_mask().reshape(-1))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.mass * np.ravel(u) * np.ravel(v)))

    def form_inner(self, a: OneForm | np.ndarray, b: OneForm | np.ndarray) -> float:
        ea = a.edges if isinstance(a, OneForm) else np.asarray(a)
        eb = b.edges if isinstance(b, OneForm) else np.asarray(b)
        return float(np.sum(self.conductance * ea * eb))


def _weights(L: DiscreteLagrangian, ambient: AmbientSpace | None, points: np.ndarray) -> np.ndarray:
    if ambient is None:
        return np.ones(points.shape[:-1])
    return np.exp(-(L.p / (2.0 * ambient.m)) * ambient.value(points))


def _incidence(n_rows: int, n_cols: int, rows, cols, vals) -> sp.csr_matrix:
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))


def build_complex(L: DiscreteLagrangian, ambient: AmbientSpace | None = None) -> WeightedComplex:
    """Assemble mass, edge conductances and incidences for ``L``.

    ``ambient=None`` gives the unweighted complex (weight 1).
    """
    if ambient is not None and ambient.dim != L.n:
        raise ValueError("immersion and ambient dimensions differ")
    if L.size < 3:
        raise DegenerateGeometryError("a complex needs at least three vertices")
    flat = L.vertices.reshape(-1, L.n)
    e = L.edges
    n_e, n_v = len(e), flat.shape[0]
    d0 = _incidence(n_e, n_v, np.repeat(np.arange(n_e), 2), e.ravel(), np.tile([-1.0, 1.0], n_e))
    w = _weights(L, ambient, flat)
    mass = w * L.measure.reshape(-1)
    if np.any(mass[~L.boundary_mask().reshape(-1)] <= 0):
        raise DegenerateGeometryError("non-positive vertex mass")
    if L.is_curve:
        if L.d1 is None:
            mid = 0.5 * (flat[e[:, 0]] + flat[e[:, 1]])
            cond = _weights(L, ambient, mid) / L.edge_lengths
        else:
            ratio = w / L.speed
            cond = 0.5 * (ratio[e[:, 0]] + ratio[e[:, 1]]) / L.spacing[0]
        return WeightedComplex(L, ambient, w, mass, cond, d0)
    return _surface_complex(L, ambient, w, mass, d0)


def _surface_complex(L, ambient, w, mass, d0) -> WeightedComplex:
    _, _, tri_v, tri_e, tri_s, tri_p = L._grid_edges
    n_e = d0.shape[0]
    g = L.metric.reshape(-1, 2, 2)
    root_g = L.speed.reshape(-1)
    scale = np.asarray(L.spacing)
    coords = tri_p * scale  # parameter coordinates of the three corners
    # gradients of barycentric coordinates in parameter space
    edge1 = coords[:, 1] - coords[:, 0]
    edge2 = coords[:, 2] - coords[:, 0]
    jac = np.stack([edge1, edge2], axis=-1)  # 2x2, columns are edges
    jac_inv = np.linalg.inv(jac)
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = ref @ jac_inv  # (T, 3, 2)
    param_area = 0.5 * np.abs(np.linalg.det(jac))
    g_avg = g[tri_v].mean(axis=1)
    g_inv = np.linalg.inv(g_avg)
    omega = (w[tri_v] * root_g[tri_v]).mean(axis=1)
    local = (param_area * omega)[:, None, None] * np.einsum("tai,tij,tbj->tab", grads, g_inv, grads)
    # corner pairs (0,1), (1,2), (2,0) sit on the three signed edges of each triangle
    cond = np.zeros(n_e)
    for k, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
        np.add.at(cond, tri_e[:, k], -local[:, a, b])
    n_t = len(tri_v)
    d1 = _incidence(n_t, n_e, np.repeat(np.arange(n_t), 3), tri_e.ravel(), tri_s.ravel())
    metric_area = param_area * np.sqrt(np.linalg.det(g_avg))
    face_w = w[tri_v].mean(axis=1) / metric_area
    return WeightedComplex(L, ambient, w, mass, cond, d0, d1, face_w)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def d_star(cx: WeightedComplex, alpha: OneForm | np.ndarray) -> np.ndarray:
    """Weighted codifferential M^{-1} d0^T C alpha, per vertex (grid-shaped)."""
    edges = alpha.edges if isinstance(alpha, OneForm) else np.asarray(alpha)
    out = (cx.d0.T @ (cx.conductance * edges)) / cx.mass
    return out.reshape(cx.L.shape)


def witten_apply(cx: WeightedComplex, u: np.ndarray, analyst_sign: bool = False) -> np.ndarray:
    """Delta_f u = d*_f du (positive convention), or its negation."""
    u = np.asarray(u, dtype=float)
    out = (cx.stiffness @ u.reshape(-1)) / cx.mass
    out = out.reshape(cx.L.shape)
    return -out if analyst_sign else out


def exterior_d1(cx: WeightedComplex, alpha: OneForm | np.ndarray) -> np.ndarray:
    """d on 1-forms: per-triangle circulation (zero-length for curves)."""
    edges = alpha.edges if isinstance(alpha, OneForm) else np.asarray(alpha)
    if cx.d1 is None:
        return np.zeros(0)
    return cx.d1 @ edges


def two_form_norm_sq(cx: WeightedComplex, beta: np.ndarray) -> float:
    if cx.face_weight is None:
        return 0.0
    return float(np.sum(cx.face_weight * beta**2))


def witten_1form_apply(cx: WeightedComplex, alpha: OneForm) -> OneForm:
    """Delta_f alpha = d d*_f alpha on curves (every 1-form is closed there)."""
    if not cx.L.is_curve:
        raise ValueError("the 1-form Witten Laplacian is implemented on curves only")
    g = d_star(cx, alpha)
    return differential(cx.L, g)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # (n_vertices, k), mass-orthonormal, zero on clamped vertices
    residuals: np.ndarray  # ||K u - lambda M u|| per pair
    dirichlet: bool

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0] if self.dirichlet else self.eigenvalues[1])

    @property
    def first_mode(self) -> np.ndarray:
        return self.eigenfunctions[:, 0 if self.dirichlet else 1]


def spectrum(cx: WeightedComplex, k: int = 6, dense: bool | None = None) -> SpectrumResult:
    """Lowest ``k`` eigenpairs of K u = lambda M u (Dirichlet on clamped vertices)."""
    free = cx.free
    K = cx.stiffness[free][:, free]
    m = cx.mass[free]
    n = len(free)
    k = min(k, n - 1)
    root = np.sqrt(m)
    A = sp.diags(1.0 / root) @ K @ sp.diags(1.0 / root)
    dense = n <= DENSE_LIMIT if dense is None else dense
    if dense:
        vals, vecs = scipy.linalg.eigh(A.toarray(), subset_by_index=[0, k - 1])
    else:
        try:
            # fixed start vector keeps repeated runs bit-identical
            v0 = np.random.default_rng(12345).standard_normal(n)
            vals, vecs = spla.eigsh(A.tocsc(), k=k, sigma=-1e-2, which="LM", tol=1e-12, v0=v0)
        except (spla.ArpackNoConvergence, RuntimeError) as exc:
            raise SolverError(f"eigensolver failed: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    funcs = vecs / root[:, None]
    res = np.linalg.norm(K @ funcs - (m[:, None] * funcs) * vals[None, :], axis=0)
    full = np.zeros((cx.n_vertices, k))
    full[free] = funcs
    # fix signs for reproducibility: largest-magnitude entry positive
    pivot = np.argmax(np.abs(full), axis=0)
    full *= np.sign(full[pivot, np.arange(k)])
    return SpectrumResult(vals, full, res, cx.dirichlet)


def lambda1(cx: WeightedComplex, k: int = 4) -> SpectrumResult:
    """Smallest nonzero (closed) or smallest Dirichlet (clamped) eigenvalue, with neighbours."""
    return spectrum(cx, k=k)


# ---------------------------------------------------------------------------
# translator identities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TranslatorIdentities:
    """Per-vertex residual fields on a translator, with an interior mask."""

    laplacian_identity: np.ndarray  # Delta f + 2 |H|^2
    energy_identity: np.ndarray  # |H|^2 + |grad f|^2 / 4 - 1
    steady_identity: np.ndarray  # Delta f - |grad f|^2 / 2 + 2
    eigen_bound: np.ndarray  # Delta_f e^{f/4} + e^{f/4}/4 (analyst sign), should be <= 0
    witten_theta: np.ndarray  # Delta_f theta
    interior: np.ndarray

    def max_abs(self, name: str) -> float:
        return float(np.max(np.abs(getattr(self, name)[self.interior])))


def restricted_potential_calculus(L: DiscreteLagrangian, ambient: AmbientSpace) -> tuple[np.ndarray, np.ndarray]:
    """(Delta F*f, |grad F*f|^2) per sample.

    With jets: Delta f = tr_L Hess f + <grad f, H> and the tangential
    gradient is the projection of the ambient one.  Without jets the
    unweighted discrete Laplacian and differential are used.
    """
    f = ambient.value(L.vertices)
    if L.backend == "analytic":
        trace = np.einsum("...kn,nm,...km->...", L.tangent_frame, ambient.hessian, L.tangent_frame)
        grad = ambient.gradient(L.vertices)
        lap = trace + np.sum(grad * L.mean_curvature_field, axis=-1)
        tangential = L.tangent_part(grad)
        return lap, np.sum(tangential**2, axis=-1)
    plain = build_complex(L, None)
    lap = witten_apply(plain, f, analyst_sign=True)
    grad_sq = np.sum(differential(L, f).pointwise ** 2, axis=-1)
    return lap, grad_sq


def translator_identities(L: DiscreteLagrangian, ambient: AmbientSpace, cx: WeightedComplex | None = None) -> TranslatorIdentities:
    if ambient.T is None or ambient.c != 0.0 or np.any(ambient.hessian):
        raise ValueError(f"translator identities need a translator potential, got {ambient.potential!r}")
    lap, grad_sq = restricted_potential_calculus(L, ambient)
    h_sq = np.sum(L.mean_curvature_field**2, axis=-1)
    f = ambient.value(L.vertices)
    bound = 0.25 * np.exp(0.25 * f) * (lap - 0.25 * grad_sq + 1.0)
    cx = build_complex(L, ambient) if cx is None else cx
    theta = lagrangian_angle(L)
    return TranslatorIdentities(
        laplacian_identity=lap + 2.0 * h_sq,
        energy_identity=h_sq + 0.25 * grad_sq - 1.0,
        steady_identity=lap - 0.5 * grad_sq + 2.0,
        eigen_bound=bound,
        witten_theta=witten_apply(cx, theta),
        interior=L.interior_mask(),
    )


def steady_identity(L: DiscreteLagrangian, ambient: AmbientSpace) -> tuple[float, float]:
    """(mean, max - min) of Delta f - |grad f|^2 / 2 over interior samples."""
    if not ambient.is_steady:
        raise ValueError("the steady identity needs a steady potential")
    lap, grad_sq = restricted_potential_calculus(L, ambient)
    vals = (lap - 0.5 * grad_sq)[L.interior_mask()]
    return float(np.mean(vals)), float(np.ptp(vals))


__all__ = [
    "WeightedComplex",
    "SpectrumResult",
    "TranslatorIdentities",
    "build_complex",
    "d_star",
    "witten_apply",
    "witten_1form_apply",
    "exterior_d1",
    "two_form_norm_sq",
    "spectrum",
    "lambda1",
    "translator_identities",
    "steady_identity",
    "restricted_potential_calculus",
]
