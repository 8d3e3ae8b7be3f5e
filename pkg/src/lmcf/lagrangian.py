"""Discrete Lagrangian immersions and their first-order geometry.

A :class:`DiscreteLagrangian` is either a polyline (positions only) or a
sampled parametric family that carries exact first and second derivative
jets on a uniform parameter grid.  The two backends share one interface:

* ``polyline`` curves use the turning angle over dual length as curvature
  and chord geometry everywhere else;
* ``analytic`` curves and surfaces read H, frames and the metric straight
  off the jets, and differentiate sampled fields spectrally along periodic
  directions (fourth-order differences along clamped ones).

Normal fields are plain arrays shaped like ``L.vertices``.  One-forms carry
per-edge integrals (aligned with ``L.edges``) plus their pointwise
components in the orthonormal tangent frame.

The isomorphism NL -> T*L is fixed as ``omega_tilde(xi)(X) = <xi, J X>``,
so that for curves the unit normal J tau maps to ds and
``omega_tilde(H) = d theta``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .ambient import AmbientSpace, HoloVolumeForm, apply_J, make_ambient
from .errors import DegenerateGeometryError

CLOSED_CURVE = "closed_curve"
OPEN_CURVE = "open_curve"
PRODUCT_TORUS = "product_torus"
PARAMETRIC_GRID = "parametric_grid"
KINDS = (CLOSED_CURVE, OPEN_CURVE, PRODUCT_TORUS, PARAMETRIC_GRID)


class Measure(NamedTuple):
    weights: np.ndarray
    total: float


# ---------------------------------------------------------------------------
# parametric differentiation
# ---------------------------------------------------------------------------

_D1_LEFT = np.array([[-25, 48, -36, 16, -3, 0], [-3, -10, 18, -6, 1, 0]]) / 12.0
_D2_LEFT = np.array([[45, -154, 214, -156, 61, -10], [10, -15, -4, 14, -6, 1]]) / 12.0


def param_derivative(values: np.ndarray, spacing: float, periodic: bool, axis: int = 0, order: int = 1) -> np.ndarray:
    """Derivative of sampled data along one parameter axis.

    Periodic axes are differentiated spectrally (exact for band-limited
    data); clamped axes use fourth-order finite differences with one-sided
    stencils at the ends.
    """
    x = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = x.shape[0]
    if periodic:
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=spacing)
        if order == 1 and n % 2 == 0:
            k[n // 2] = 0.0
        mult = (1j * k) ** order
        xf = np.fft.fft(x, axis=0)
        out = np.fft.ifft(xf * mult.reshape((-1,) + (1,) * (x.ndim - 1)), axis=0).real
    else:
        if n < 6:
            raise DegenerateGeometryError("need at least 6 samples along a clamped parameter axis")
        out = np.empty_like(x)
        if order == 1:
            out[2:-2] = (x[:-4] - 8 * x[1:-3] + 8 * x[3:-1] - x[4:]) / 12.0
            left = _D1_LEFT
            sign = -1.0
        elif order == 2:
            out[2:-2] = (-x[:-4] + 16 * x[1:-3] - 30 * x[2:-2] + 16 * x[3:-1] - x[4:]) / 12.0
            left = _D2_LEFT
            sign = 1.0
        else:
            raise ValueError("order must be 1 or 2")
        for row in range(2):
            out[row] = np.tensordot(left[row], x[:6], axes=(0, 0))
            out[n - 1 - row] = sign * np.tensordot(left[row], x[::-1][:6], axes=(0, 0))
        out = out / spacing**order
    return np.moveaxis(out, 0, axis)


def _unit(v: np.ndarray, what: str = "vector") -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm <= 1e-300):
        raise DegenerateGeometryError(f"degenerate {what}")
    return v / norm


# ---------------------------------------------------------------------------
# the immersion
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteLagrangian:
    """Sampled immersion L -> C^m.

    Curves store ``vertices`` as ``(N, 2m)``; tori and grids as
    ``(N1, N2, 2m)``.  Jets (``d1``, ``d2``) are optional for curves and
    required for surfaces: curves use ``(N, 2m)`` arrays, surfaces
    ``(N1, N2, 2, 2m)`` and ``(N1, N2, 2, 2, 2m)``.
    """

    kind: str
    vertices: np.ndarray
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None
    spacing: tuple = ()
    periodic: tuple = ()
    family: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        v = np.asarray(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", v)
        if not np.all(np.isfinite(v)):
            raise DegenerateGeometryError("non-finite vertex coordinates")
        if v.shape[-1] % 2:
            raise ValueError("ambient dimension must be even")
        if self.is_curve:
            if v.ndim != 2:
                raise ValueError("curve vertices must be an (N, 2m) array")
            need = 3 if self.kind == CLOSED_CURVE else 2
            if v.shape[0] < need:
                raise DegenerateGeometryError(f"{self.kind} needs at least {need} vertices")
            object.__setattr__(self, "periodic", (self.kind == CLOSED_CURVE,))
            if np.any(self.edge_lengths <= 1e-14 * max(1.0, np.abs(v).max())):
                raise DegenerateGeometryError("repeated consecutive vertices")
        else:
            if v.ndim != 3:
                raise ValueError("surface vertices must be an (N1, N2, 2m) array")
            if self.d1 is None or self.d2 is None:
                raise ValueError("surfaces enter only through families with exact jets")
            if self.kind == PRODUCT_TORUS:
                object.__setattr__(self, "periodic", (True, True))
            if len(self.periodic) != 2:
                raise ValueError("parametric grids need a periodic flag per direction")
        if self.d1 is not None:
            object.__setattr__(self, "d1", np.asarray(self.d1, dtype=float))
            object.__setattr__(self, "d2", np.asarray(self.d2, dtype=float))
            object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
            object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
            if len(self.spacing) != self.p:
                raise ValueError("analytic samples need one parameter spacing per direction")

    # -- basic shape --------------------------------------------------------

    @property
    def is_curve(self) -> bool:
        return self.kind in (CLOSED_CURVE, OPEN_CURVE)

    @property
    def is_closed(self) -> bool:
        if self.is_curve:
            return self.kind == CLOSED_CURVE
        return all(self.periodic)

    @property
    def p(self) -> int:
        return 1 if self.is_curve else 2

    @property
    def n(self) -> int:
        return self.vertices.shape[-1]

    @property
    def m(self) -> int:
        return self.n // 2

    @property
    def shape(self) -> tuple:
        return self.vertices.shape[:-1]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def backend(self) -> str:
        return "polyline" if self.d1 is None else "analytic"

    @property
    def is_lagrangian_dimension(self) -> bool:
        return self.p == self.m

    def polyline(self) -> DiscreteLagrangian:
        """Drop the jets (curves only)."""
        if not self.is_curve:
            raise ValueError("surfaces have no polyline backend")
        return DiscreteLagrangian(self.kind, self.vertices.copy(), family=None)

    def with_vertices(self, vertices: np.ndarray) -> DiscreteLagrangian:
        """Same connectivity, new positions, positions-only backend."""
        if self.is_curve:
            return DiscreteLagrangian(self.kind, vertices)
        raise ValueError("surfaces must be rebuilt from their family")

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        if self.kind == OPEN_CURVE:
            mask[0] = mask[-1] = True
        elif not self.is_curve:
            if not self.periodic[0]:
                mask[0, :] = mask[-1, :] = True
            if not self.periodic[1]:
                mask[:, 0] = mask[:, -1] = True
        return mask

    def interior_mask(self, fraction: float | None = None) -> np.ndarray:
        """Samples away from the boundary; ``fraction`` keeps only the central part."""
        mask = ~self.boundary_mask()
        if fraction is not None and self.kind == OPEN_CURVE:
            n = self.shape[0]
            cut = int(np.floor(n * (1.0 - fraction) / 2.0))
            mask[:cut] = False
            mask[n - cut:] = False
        return mask

    # -- edges and cells ----------------------------------------------------

    @cached_property
    def edges(self) -> np.ndarray:
        """(E, 2) vertex index pairs into the flattened vertex array."""
        if self.is_curve:
            n = self.shape[0]
            a = np.arange(n if self.is_closed else n - 1)
            return np.column_stack([a, (a + 1) % n])
        return self._grid_edges[0]

    @cached_property
    def _grid_edges(self):
        n1, n2 = self.shape
        idx = np.arange(n1 * n2).reshape(n1, n2)
        p0, p1 = self.periodic
        i_end = n1 if p0 else n1 - 1
        j_end = n2 if p1 else n2 - 1
        ii, jj = np.meshgrid(np.arange(i_end), np.arange(n2), indexing="ij")
        e0 = np.column_stack([idx[ii, jj].ravel(), idx[(ii + 1) % n1, jj].ravel()])
        ii, jj = np.meshgrid(np.arange(n1), np.arange(j_end), indexing="ij")
        e1 = np.column_stack([idx[ii, jj].ravel(), idx[ii, (jj + 1) % n2].ravel()])
        ii, jj = np.meshgrid(np.arange(i_end), np.arange(j_end), indexing="ij")
        ed = np.column_stack([idx[ii, jj].ravel(), idx[(ii + 1) % n1, (jj + 1) % n2].ravel()])
        edges = np.vstack([e0, e1, ed])
        # parameter displacement of every edge, in grid steps
        steps = np.vstack([
            np.tile([1.0, 0.0], (len(e0), 1)),
            np.tile([0.0, 1.0], (len(e1), 1)),
            np.tile([1.0, 1.0], (len(ed), 1)),
        ])
        # triangles (a, b, c) and (a, c, d) of each cell, as signed edge lists
        n_e0, n_e1 = len(e0), len(e1)
        cell_i, cell_j = ii.ravel(), jj.ravel()
        k0 = lambda i, j: i * n2 + j  # noqa: E731
        k1 = lambda i, j: n_e0 + i * j_end + j  # noqa: E731
        kd = lambda i, j: n_e0 + n_e1 + i * j_end + j  # noqa: E731
        ip = (cell_i + 1) % n1
        jp = (cell_j + 1) % n2
        tri_edges = np.vstack([
            np.column_stack([k0(cell_i, cell_j), k1(ip, cell_j), kd(cell_i, cell_j)]),
            np.column_stack([kd(cell_i, cell_j), k0(cell_i, jp), k1(cell_i, cell_j)]),
        ])
        tri_signs = np.vstack([
            np.tile([1.0, 1.0, -1.0], (len(cell_i), 1)),
            np.tile([1.0, -1.0, -1.0], (len(cell_i), 1)),
        ])
        a = idx[cell_i, cell_j]
        b = idx[ip, cell_j]
        c = idx[ip, jp]
        d = idx[cell_i, jp]
        tri_verts = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
        tri_param = np.vstack([
            np.tile([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], (len(a), 1, 1)),
            np.tile([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]], (len(a), 1, 1)),
        ])
        return edges, steps, tri_verts, tri_edges, tri_signs, tri_param

    @property
    def triangles(self) -> np.ndarray:
        if self.is_curve:
            raise ValueError("curves have no 2-cells")
        return self._grid_edges[2]

    @cached_property
    def edge_vectors(self) -> np.ndarray:
        flat = self.vertices.reshape(-1, self.n)
        e = self.edges
        return flat[e[:, 1]] - flat[e[:, 0]]

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors, axis=-1)

    def edge_param_steps(self) -> np.ndarray:
        """Parameter displacement of each edge (analytic backend)."""
        if self.is_curve:
            return np.full((len(self.edges), 1), self.spacing[0])
        return self._grid_edges[1] * np.asarray(self.spacing)

    # -- first-order geometry -----------------------------------------------

    @cached_property
    def metric(self) -> np.ndarray:
        """Induced metric g_ij per sample, shape ``shape + (p, p)``."""
        if self.d1 is None:
            raise ValueError("metric needs jets")
        jac = self.d1.reshape(self.shape + (self.p, self.n))
        return np.einsum("...in,...jn->...ij", jac, jac)

    @cached_property
    def speed(self) -> np.ndarray:
        """sqrt(det g) per sample (analytic backend)."""
        det = np.linalg.det(self.metric)
        if np.any(det <= 0.0):
            raise DegenerateGeometryError("degenerate tangent (immersion fails)")
        return np.sqrt(det)

    @cached_property
    def tangent_frame(self) -> np.ndarray:
        """Oriented orthonormal tangent frame, shape ``shape + (p, 2m)``."""
        if self.is_curve:
            if self.d1 is not None:
                return _unit(self.d1, "tangent")[:, None, :]
            tau = _unit(self.edge_vectors, "edge")
            if self.is_closed:
                prev = np.roll(tau, 1, axis=0)
                t = _unit(prev + tau, "vertex tangent (cusp)")
            else:
                t = np.empty_like(self.vertices)
                t[1:-1] = _unit(tau[:-1] + tau[1:], "vertex tangent (cusp)")
                t[0] = tau[0]
                t[-1] = tau[-1]
            return t[:, None, :]
        f1 = self.d1[..., 0, :]
        f2 = self.d1[..., 1, :]
        e1 = _unit(f1, "tangent")
        e2 = _unit(f2 - np.sum(f2 * e1, axis=-1, keepdims=True) * e1, "tangent")
        return np.stack([e1, e2], axis=-2)

    def tangent_part(self, v: np.ndarray) -> np.ndarray:
        fr = self.tangent_frame
        coeff = np.einsum("...kn,...n->...k", fr, v)
        return np.einsum("...k,...kn->...n", coeff, fr)

    def normal_part(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return v - self.tangent_part(v)

    @cached_property
    def measure(self) -> np.ndarray:
        """Dual length / area attached to every sample."""
        if self.d1 is None:
            lengths = self.edge_lengths
            if self.is_closed:
                return 0.5 * (lengths + np.roll(lengths, 1))
            w = np.zeros(self.shape[0])
            w[:-1] += 0.5 * lengths
            w[1:] += 0.5 * lengths
            return w
        w = self.speed * np.prod(self.spacing)
        for axis, per in enumerate(self.periodic):
            if not per:
                idx = [slice(None)] * self.p
                for end in (0, -1):
                    idx[axis] = end
                    w[tuple(idx)] *= 0.5
        return w

    @cached_property
    def mean_curvature_field(self) -> np.ndarray:
        if self.is_curve:
            if self.d1 is not None:
                t = _unit(self.d1, "tangent")
                acc = self.d2 - np.sum(self.d2 * t, axis=-1, keepdims=True) * t
                return acc / np.sum(self.d1 * self.d1, axis=-1, keepdims=True)
            tau = _unit(self.edge_vectors, "edge")
            if self.is_closed:
                prev, nxt = np.roll(tau, 1, axis=0), tau
                dual = self.measure
            else:
                prev, nxt = tau[:-1], tau[1:]
                dual = self.measure[1:-1]
            dot = np.clip(np.sum(prev * nxt, axis=-1), -1.0, 1.0)
            diff = nxt - prev
            cross = np.linalg.norm(nxt - dot[:, None] * prev, axis=-1)
            angle = np.arctan2(cross, dot)
            dn = np.linalg.norm(diff, axis=-1, keepdims=True)
            direction = np.divide(diff, dn, out=np.zeros_like(diff), where=dn > 0)
            h = (angle / dual)[:, None] * direction
            if self.is_closed:
                return h
            out = np.zeros_like(self.vertices)
            out[1:-1] = h
            return out
        g_inv = np.linalg.inv(self.metric)
        trace = np.einsum("...ij,...ijn->...n", g_inv, self.d2)
        return self.normal_part(trace)

    @cached_property
    def turning_angles(self) -> np.ndarray:
        """Signed turning angle at every vertex of a planar polyline."""
        if not (self.is_curve and self.n == 2):
            raise ValueError("turning angles are defined for curves in C")
        tau = _unit(self.edge_vectors, "edge")
        ang = np.arctan2(tau[:, 1], tau[:, 0])
        if self.is_closed:
            return _wrap(ang - np.roll(ang, 1))
        out = np.zeros(self.shape[0])
        out[1:-1] = _wrap(np.diff(ang))
        return out

    def lagrangian_defect(self) -> float:
        """max |omega(e_1, e_2)| over samples (zero for curves in C)."""
        if self.is_curve:
            return 0.0
        fr = self.tangent_frame
        return float(np.max(np.abs(np.sum(apply_J(fr[..., 0, :]) * fr[..., 1, :], axis=-1))))

    def check_quasi_uniform(self, min_vertices: int = 8, max_ratio: float = 10.0) -> None:
        """Sampling contract for closed curves used in experiments."""
        if self.kind != CLOSED_CURVE:
            return
        if self.shape[0] < min_vertices:
            raise DegenerateGeometryError(f"closed curves need at least {min_vertices} vertices")
        lengths = self.edge_lengths
        if lengths.max() / lengths.min() > max_ratio:
            raise DegenerateGeometryError("edge-length ratio exceeds quasi-uniform bound")

    # -- variations ---------------------------------------------------------

    def displaced(self, field_: np.ndarray, h: float) -> DiscreteLagrangian:
        """Straight-line displacement F + h * field, jets updated consistently."""
        field_ = np.asarray(field_, dtype=float)
        if field_.shape != self.vertices.shape:
            raise ValueError("displacement field must match the vertex array")
        verts = self.vertices + h * field_
        if self.d1 is None:
            return DiscreteLagrangian(self.kind, verts)
        if self.is_curve:
            dxi = param_derivative(field_, self.spacing[0], self.periodic[0])
            ddxi = param_derivative(field_, self.spacing[0], self.periodic[0], order=2)
            return DiscreteLagrangian(
                self.kind, verts, self.d1 + h * dxi, self.d2 + h * ddxi, self.spacing, self.periodic
            )
        d1 = np.empty_like(self.d1)
        d2 = np.empty_like(self.d2)
        first = [param_derivative(field_, self.spacing[a], self.periodic[a], axis=a) for a in range(2)]
        for a in range(2):
            d1[..., a, :] = self.d1[..., a, :] + h * first[a]
            for b in range(2):
                if a == b:
                    sec = param_derivative(field_, self.spacing[a], self.periodic[a], axis=a, order=2)
                else:
                    sec = param_derivative(first[a], self.spacing[b], self.periodic[b], axis=b)
                d2[..., a, b, :] = self.d2[..., a, b, :] + h * sec
        # symmetrise the mixed partials
        mixed = 0.5 * (d2[..., 0, 1, :] + d2[..., 1, 0, :])
        d2[..., 0, 1, :] = d2[..., 1, 0, :] = mixed
        return DiscreteLagrangian(self.kind, verts, d1, d2, self.spacing, self.periodic)

    # -- exchange -----------------------------------------------------------

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "vertices": self.vertices.reshape(-1, self.n).tolist()}
        if not self.is_curve:
            out["grid_shape"] = list(self.shape)
        if self.family is not None:
            out["family"] = self.family
        return out

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> DiscreteLagrangian:
        if "family" in data and data["family"]:
            from .families import build_family

            fam = dict(data["family"])
            return build_family(fam["name"], fam.get("params", {}), fam["resolution"], fam.get("backend", "analytic"))
        verts = np.asarray(data["vertices"], dtype=float)
        kind = data["kind"]
        if kind not in (CLOSED_CURVE, OPEN_CURVE):
            raise ValueError("surface meshes must carry a family block to regenerate jets")
        return cls(kind, verts)


def _wrap(a: np.ndarray) -> np.ndarray:
    return (a + np.pi) % (2.0 * np.pi) - np.pi


# ---------------------------------------------------------------------------
# one-forms and the isomorphism omega_tilde
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OneForm:
    """Discrete 1-form: per-edge integrals plus pointwise frame components."""

    edges: np.ndarray
    pointwise: np.ndarray

    def __neg__(self) -> OneForm:
        return OneForm(-self.edges, -self.pointwise)

    def pointwise_norm(self) -> np.ndarray:
        return np.linalg.norm(self.pointwise, axis=-1)


def _edge_tangents(L: DiscreteLagrangian) -> tuple[np.ndarray, np.ndarray]:
    """Tangent vectors used to integrate pointwise forms along each edge (at both ends)."""
    e = L.edges
    if L.d1 is None:
        vec = L.edge_vectors
        return vec, vec
    jac = L.d1.reshape((L.size, L.p, L.n))
    steps = L.edge_param_steps()
    ta = np.einsum("ek,ekn->en", steps, jac[e[:, 0]])
    tb = np.einsum("ek,ekn->en", steps, jac[e[:, 1]])
    return ta, tb


def _pointwise_to_edges(L: DiscreteLagrangian, ambient_vectors: np.ndarray) -> np.ndarray:
    """Integrate X -> <w, X> (w per vertex) along edges by the trapezoid rule."""
    flat = ambient_vectors.reshape(-1, L.n)
    e = L.edges
    ta, tb = _edge_tangents(L)
    return 0.5 * (np.sum(flat[e[:, 0]] * ta, axis=-1) + np.sum(flat[e[:, 1]] * tb, axis=-1))


def omega_tilde(L: DiscreteLagrangian, xi: np.ndarray) -> OneForm:
    """alpha_xi(X) = <xi, J X> for a normal field ``xi``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != L.vertices.shape:
        raise ValueError("normal field must match the vertex array")
    # <xi, J X> = <-J xi, X>
    covector = -apply_J(xi)
    pointwise = np.einsum("...kn,...n->...k", L.tangent_frame, covector)
    return OneForm(_pointwise_to_edges(L, covector), pointwise)


def sharp(L: DiscreteLagrangian, alpha: OneForm) -> np.ndarray:
    return np.einsum("...k,...kn->...n", alpha.pointwise, L.tangent_frame)


def omega_tilde_inv(L: DiscreteLagrangian, alpha: OneForm) -> np.ndarray:
    """xi = J alpha^sharp, projected to the normal space."""
    return L.normal_part(apply_J(sharp(L, alpha)))


def differential(L: DiscreteLagrangian, u: np.ndarray) -> OneForm:
    """Discrete d on vertex functions: exact edge differences, pointwise gradient."""
    u = np.asarray(u, dtype=float)
    if u.shape != L.shape:
        raise ValueError("function must have one value per sample")
    flat = u.reshape(-1)
    e = L.edges
    edge_vals = flat[e[:, 1]] - flat[e[:, 0]]
    if L.is_curve and L.d1 is None:
        slopes = edge_vals / L.edge_lengths
        lengths = L.edge_lengths
        if L.is_closed:
            lp, sp = np.roll(lengths, 1), np.roll(slopes, 1)
            grad = (lp * slopes + lengths * sp) / (lp + lengths)
        else:
            grad = np.empty(L.shape[0])
            grad[1:-1] = (lengths[:-1] * slopes[1:] + lengths[1:] * slopes[:-1]) / (lengths[:-1] + lengths[1:])
            grad[0], grad[-1] = slopes[0], slopes[-1]
        return OneForm(edge_vals, grad[:, None])
    if L.is_curve:
        du = param_derivative(u, L.spacing[0], L.periodic[0])
        return OneForm(edge_vals, (du / L.speed)[:, None])
    partial = np.stack(
        [param_derivative(u, L.spacing[a], L.periodic[a], axis=a) for a in range(2)], axis=-1
    )
    g_inv = np.linalg.inv(L.metric)
    grad_vec = np.einsum("...ij,...j,...in->...n", g_inv, partial, L.d1)
    pointwise = np.einsum("...kn,...n->...k", L.tangent_frame, grad_vec)
    return OneForm(edge_vals, pointwise)


def angle_differential(L: DiscreteLagrangian, theta: np.ndarray) -> OneForm:
    """d theta for an angle-valued function (closed, not exact, on closed meshes).

    Edge values are wrapped differences; pointwise values come from
    Im(e^{-i theta} d e^{i theta}), which is single valued.
    """
    theta = np.asarray(theta, dtype=float)
    flat = theta.reshape(-1)
    e = L.edges
    edge_vals = _wrap(flat[e[:, 1]] - flat[e[:, 0]])
    dc = differential(L, np.cos(theta)).pointwise
    ds = differential(L, np.sin(theta)).pointwise
    pointwise = np.cos(theta)[..., None] * ds - np.sin(theta)[..., None] * dc
    return OneForm(edge_vals, pointwise)


def gradient_vector(L: DiscreteLagrangian, u: np.ndarray) -> np.ndarray:
    """Tangential gradient of a vertex function as an ambient vector field."""
    return sharp(L, differential(L, u))


# ---------------------------------------------------------------------------
# spec-level operations
# ---------------------------------------------------------------------------


def induced_measure(L: DiscreteLagrangian) -> Measure:
    w = L.measure
    return Measure(w, float(np.sum(w)))


def mean_curvature(L: DiscreteLagrangian) -> np.ndarray:
    return L.mean_curvature_field


def default_form(m: int) -> HoloVolumeForm:
    return HoloVolumeForm(make_ambient("constant", m=m))


def _pullback_values(L: DiscreteLagrangian, form: HoloVolumeForm) -> np.ndarray:
    if not L.is_lagrangian_dimension:
        raise ValueError("the Lagrangian angle needs p = m")
    if form.m != L.m:
        raise ValueError("form and immersion live in different dimensions")
    return form.on_frame(L.vertices, L.tangent_frame)


def lagrangian_angle(L: DiscreteLagrangian, form: HoloVolumeForm | None = None) -> np.ndarray:
    """theta per sample with F^* Omega_f = e^{i theta} e^{-f/2} dV_g, unwrapped from sample 0."""
    form = default_form(L.m) if form is None else form
    vals = _pullback_values(L, form)
    scale = np.exp(-0.5 * form.ambient.value(L.vertices))
    if np.any(np.abs(vals) <= 1e-10 * scale):
        raise DegenerateGeometryError("vanishing pullback of the holomorphic volume form")
    theta = np.angle(vals)
    if L.is_curve:
        return np.unwrap(theta)
    theta[:, 0] = np.unwrap(theta[:, 0])
    return np.unwrap(theta, axis=1)


def winding_number(L: DiscreteLagrangian, form: HoloVolumeForm | None = None) -> int:
    if L.kind != CLOSED_CURVE:
        raise ValueError("winding number is defined for closed curves")
    theta = lagrangian_angle(L, form)
    closing = _wrap(theta[0] - theta[-1])
    return int(round((theta[-1] - theta[0] + closing) / (2.0 * np.pi)))


def generalized_mean_curvature(L: DiscreteLagrangian, ambient: AmbientSpace) -> np.ndarray:
    """K = H + (p/2m) (grad f)^perp."""
    if ambient.dim != L.n:
        raise ValueError("immersion and ambient dimensions differ")
    coeff = L.p / (2.0 * ambient.m)
    k = L.mean_curvature_field + coeff * L.normal_part(ambient.gradient(L.vertices))
    if L.kind == OPEN_CURVE and L.d1 is None:
        k[0] = k[-1] = 0.0
    return k


def f_minimality_residual(L: DiscreteLagrangian, ambient: AmbientSpace, weighted: bool = False) -> float:
    """max |K| over interior samples, or the weighted L2 norm of K."""
    k = np.linalg.norm(generalized_mean_curvature(L, ambient), axis=-1)
    mask = L.interior_mask()
    if weighted:
        w = L.measure * np.exp(-(L.p / (2.0 * ambient.m)) * ambient.value(L.vertices))
        return float(np.sqrt(np.sum((k**2 * w)[mask])))
    return float(np.max(k[mask]))


def default_minimality_tolerance(L: DiscreteLagrangian) -> float:
    if L.backend == "analytic":
        return 1e-6
    return 10.0 * float(np.max(L.edge_lengths)) ** 2


def write_vertex_csv(path: str | Path, L: DiscreteLagrangian, fields: dict[str, np.ndarray]) -> None:
    """Per-vertex scalar fields next to the coordinates."""
    flat = L.vertices.reshape(-1, L.n)
    cols = {f"x{i}": flat[:, i] for i in range(L.n)}
    for name, values in fields.items():
        cols[name] = np.asarray(values, dtype=float).reshape(-1)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["index", *cols])
        for i in range(flat.shape[0]):
            writer.writerow([i, *(format(float(c[i]), ".17g") for c in cols.values())])
