"""Flat Kähler ambients C^m with a real holomorphy potential.

Points of C^m are stored as real vectors in R^{2m} with interleaved
coordinates ``(x1, y1, x2, y2, ...)``, so ``z_k = v[2k] + i v[2k+1]`` and the
complex structure J is multiplication by ``i`` on every factor.

Every supported potential is quadratic-plus-linear,

    f(z) = 1/2 <z, A z> + <b, z>,

which covers the Gaussian shrinker (A = I), the Gaussian expander (A = -I),
the translator (A = 0, b = 2T) and the constant potential.  Translators use
the normalisation f = 2<z, T> so that grad f = 2T and the soliton equation
reads H + T^perp = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DegenerateGeometryError, ExpiredFlowError

SHRINKER = "shrinker"
EXPANDER = "expander"
TRANSLATOR = "translator"
CONSTANT = "constant"
CUSTOM = "custom"
POTENTIALS = (SHRINKER, EXPANDER, TRANSLATOR, CONSTANT, CUSTOM)


def complex_structure(m: int) -> np.ndarray:
    """Matrix of J on R^{2m} in interleaved coordinates."""
    block = np.array([[0.0, -1.0], [1.0, 0.0]])
    return np.kron(np.eye(m), block)


def apply_J(v: np.ndarray) -> np.ndarray:
    """Apply J to the last axis of ``v`` (shape ``(..., 2m)``)."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


def to_complex(v: np.ndarray) -> np.ndarray:
    """Interleaved real vectors ``(..., 2m)`` -> complex vectors ``(..., m)``."""
    v = np.asarray(v, dtype=float)
    return v[..., 0::2] + 1j * v[..., 1::2]


def from_complex(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def hermitian_dot(x: np.ndarray, y: np.ndarray) -> np.ndarray | float:
    """Euclidean <x, y> summed per complex coordinate: sum_j (x_j y_j + x'_j y'_j).

    J swaps the two terms of each pair, so the result is exactly J-invariant.
    """
    prod = np.asarray(x, float) * np.asarray(y, float)
    pairs = prod.reshape(prod.shape[:-1] + (-1, 2))
    out = (pairs[..., 0] + pairs[..., 1]).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _is_scalar_matrix(a: np.ndarray) -> float | None:
    c = a[0, 0]
    if np.allclose(a, c * np.eye(a.shape[0]), atol=1e-14, rtol=0.0):
        return float(c)
    return None


@dataclass(frozen=True, eq=False)
class AmbientSpace:
    """C^m with potential f(z) = 1/2 <z, A z> + <b, z>.

    Build instances with :func:`make_ambient` (or :meth:`from_config`)
    rather than directly.
    """

    m: int
    potential: str
    hessian: np.ndarray
    linear: np.ndarray
    c: float
    T: np.ndarray | None = None
    _flow_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return 2 * self.m

    @property
    def J(self) -> np.ndarray:
        return complex_structure(self.m)

    @property
    def is_steady(self) -> bool:
        return self.c == 0.0 and not np.any(self.hessian)

    # -- potential side ------------------------------------------------------

    def value(self, z: np.ndarray) -> np.ndarray | float:
        z = np.asarray(z, dtype=float)
        quad = 0.5 * np.einsum("...i,ij,...j->...", z, self.hessian, z)
        return quad + z @ self.linear

    def gradient(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z @ self.hessian.T + self.linear

    def hess(self, x: np.ndarray, y: np.ndarray) -> np.ndarray | float:
        """Ambient Hessian Hess f(x, y) (constant in z).

        Scalar Hessians use :func:`hermitian_dot`, so J-invariance holds bit for bit.
        """
        x, y = np.asarray(x, float), np.asarray(y, float)
        scalar = _is_scalar_matrix(self.hessian)
        if scalar is not None:
            return scalar * hermitian_dot(x, y)
        return np.einsum("...i,ij,...j->...", x, self.hessian, y)

    def bakry_emery(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray | float:
        """Ric_f(xi, eta) = Ric + Hess f; the flat ambient has Ric = 0."""
        return self.hess(xi, eta)

    # -- Kähler-Ricci soliton side ---------------------------------------------

    def sigma(self, t: float) -> float:
        s = 1.0 - self.c * t
        if s <= 0.0:
            raise ExpiredFlowError(f"sigma({t}) = {s} <= 0: soliton flow expired")
        return s

    def reparametrized_time(self, t: float) -> float:
        """s(t) = int_0^t d tau / sigma(tau)."""
        self.sigma(t)
        if self.c == 0.0:
            return float(t)
        return float(-np.log1p(-self.c * t) / self.c)

    def flow_map(self, t: float, z: np.ndarray) -> np.ndarray:
        """phi_t(z): flow of grad f / (2 sigma(t)) started at the identity."""
        self.sigma(t)
        z = np.asarray(z, dtype=float)
        if self.potential == SHRINKER:
            return z / np.sqrt(1.0 - t)
        if self.potential == EXPANDER:
            return z / np.sqrt(1.0 + t)
        if self.potential == TRANSLATOR:
            return z + t * self.T
        if self.potential == CONSTANT:
            return z.copy()
        mat, shift = self._affine_flow(t)
        return z @ mat.T + shift

    def flow_map_inverse(self, t: float, z: np.ndarray) -> np.ndarray:
        self.sigma(t)
        z = np.asarray(z, dtype=float)
        if self.potential == SHRINKER:
            return z * np.sqrt(1.0 - t)
        if self.potential == EXPANDER:
            return z * np.sqrt(1.0 + t)
        if self.potential == TRANSLATOR:
            return z - t * self.T
        if self.potential == CONSTANT:
            return z.copy()
        mat, shift = self._affine_flow(t)
        return np.linalg.solve(mat, (z - shift).T).T

    def _affine_flow(self, t: float, steps_per_unit: int = 2000) -> tuple[np.ndarray, np.ndarray]:
        # phi_t is affine because grad f is; integrate the matrix and offset parts with RK4.
        key = float(t)
        if key in self._flow_cache:
            return self._flow_cache[key]
        n = self.dim
        nsteps = max(16, int(np.ceil(abs(t) * steps_per_unit)))
        h = t / nsteps
        a, b = self.hessian, self.linear

        def rhs(tau, y):
            mat, shift = y[:, :n], y[:, n]
            scale = 1.0 / (2.0 * (1.0 - self.c * tau))
            return np.column_stack([scale * (a @ mat), scale * (a @ shift + b)])

        y = np.column_stack([np.eye(n), np.zeros(n)])
        tau = 0.0
        for _ in range(nsteps):
            k1 = rhs(tau, y)
            k2 = rhs(tau + h / 2, y + h / 2 * k1)
            k3 = rhs(tau + h / 2, y + h / 2 * k2)
            k4 = rhs(tau + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            tau += h
        out = (y[:, :n].copy(), y[:, n].copy())
        self._flow_cache[key] = out
        return out

    def to_config(self) -> dict[str, Any]:
        cfg: dict[str, Any] = {"m": self.m, "potential": self.potential}
        if self.potential == TRANSLATOR:
            cfg["T"] = [float(x) for x in self.T]
        if self.potential == CUSTOM:
            cfg["hessian"] = self.hessian.tolist()
            cfg["linear"] = self.linear.tolist()
            cfg["c"] = self.c
        return cfg

    @classmethod
    def from_config(cls, cfg: dict[str, Any]) -> AmbientSpace:
        return make_ambient(
            cfg.get("potential", CONSTANT),
            m=int(cfg.get("m", 1)),
            T=cfg.get("T"),
            hessian=cfg.get("hessian"),
            linear=cfg.get("linear"),
            c=cfg.get("c"),
        )

    def __repr__(self) -> str:
        extra = f", T={self.T.tolist()}" if self.T is not None else ""
        return f"AmbientSpace(m={self.m}, potential={self.potential!r}, c={self.c}{extra})"


def make_ambient(
    potential: str,
    m: int = 1,
    T=None,
    hessian=None,
    linear=None,
    c: float | None = None,
) -> AmbientSpace:
    """Construct an ambient C^m with one of the supported potentials.

    ``T`` is required for translators and must be a unit vector in R^{2m}.
    ``custom`` takes a J-invariant symmetric ``hessian`` and a ``linear``
    term; ``c`` defaults to the scalar value of the Hessian when it is a
    multiple of the identity.
    """
    if m not in (1, 2):
        raise ValueError(f"complex dimension m must be 1 or 2, got {m}")
    potential = str(potential).lower()
    if potential not in POTENTIALS:
        raise ValueError(f"unknown potential {potential!r}; expected one of {POTENTIALS}")
    n = 2 * m
    eye = np.eye(n)
    t_vec = None
    if potential == SHRINKER:
        a, b, cc = eye.copy(), np.zeros(n), 1.0
    elif potential == EXPANDER:
        a, b, cc = -eye, np.zeros(n), -1.0
    elif potential == CONSTANT:
        a, b, cc = np.zeros((n, n)), np.zeros(n), 0.0
    elif potential == TRANSLATOR:
        if T is None:
            raise ValueError("translator potential needs a direction T")
        t_vec = np.asarray(T, dtype=float).reshape(-1)
        if t_vec.shape != (n,) or not np.all(np.isfinite(t_vec)):
            raise ValueError(f"T must be a finite vector of length {n}")
        if abs(np.linalg.norm(t_vec) - 1.0) > 1e-12:
            raise ValueError("translator direction T must have unit length")
        a, b, cc = np.zeros((n, n)), 2.0 * t_vec, 0.0
    else:
        if hessian is None:
            raise ValueError("custom potential needs a constant hessian")
        a = np.asarray(hessian, dtype=float)
        b = np.zeros(n) if linear is None else np.asarray(linear, dtype=float)
        if a.shape != (n, n) or b.shape != (n,):
            raise ValueError(f"custom potential needs a {n}x{n} hessian and a length-{n} linear term")
        if not np.allclose(a, a.T, atol=1e-14):
            raise ValueError("hessian must be symmetric")
        j = complex_structure(m)
        if not np.allclose(j.T @ a @ j, a, atol=1e-12):
            raise ValueError("hessian is not J-invariant: f is not a real holomorphy potential")
        scalar = _is_scalar_matrix(a)
        if c is None:
            if scalar is None:
                raise ValueError("custom hessian is not a multiple of the identity; pass c explicitly")
            cc = scalar
        else:
            cc = float(c)
        if not np.any(a):
            t_vec = b / 2.0
    return AmbientSpace(m=m, potential=potential, hessian=a, linear=b, c=float(cc), T=t_vec)


@dataclass(frozen=True, eq=False)
class HoloVolumeForm:
    """e^{-i theta0} Omega_f on C^m for a steady (or constant) potential.

    Omega_f = exp(-f/2 - i <z, J T>) dz^1 ^ ... ^ dz^m; for the constant
    potential this is the standard Omega.
    """

    ambient: AmbientSpace
    phase_offset: float = 0.0

    def __post_init__(self):
        if not self.ambient.is_steady:
            raise ValueError(
                f"Omega_f is only built for steady potentials, not {self.ambient.potential!r}"
            )

    @property
    def m(self) -> int:
        return self.ambient.m

    def prefactor(self, z: np.ndarray) -> np.ndarray | complex:
        """Scalar factor multiplying dz^1 ^ ... ^ dz^m at ``z`` (rotation included)."""
        z = np.asarray(z, dtype=float)
        amb = self.ambient
        f = amb.value(z)
        if amb.T is None:
            twist = 0.0
        else:
            twist = z @ apply_J(amb.T)
        return np.exp(-0.5 * f - 1j * twist - 1j * self.phase_offset)

    def on_frame(self, z: np.ndarray, frame: np.ndarray) -> np.ndarray | complex:
        """Evaluate the form at ``z`` on ``frame`` (shape ``(..., m, 2m)``)."""
        return self.prefactor(z) * complex_det(frame)

    def rotated(self, theta0: float) -> HoloVolumeForm:
        return HoloVolumeForm(self.ambient, float(theta0))


def complex_det(frame: np.ndarray) -> np.ndarray | complex:
    """dz^1 ^ ... ^ dz^m evaluated on m real vectors (rows of ``frame``)."""
    frame = np.asarray(frame, dtype=float)
    zc = to_complex(frame)  # (..., m vectors, m complex coords)
    m = zc.shape[-1]
    if m == 1:
        return zc[..., 0, 0]
    if m == 2:
        return zc[..., 0, 0] * zc[..., 1, 1] - zc[..., 1, 0] * zc[..., 0, 1]
    return np.linalg.det(np.swapaxes(zc, -1, -2))


def omega_f_on_frame(form: HoloVolumeForm, z: np.ndarray, frame: np.ndarray) -> complex:
    """Omega_f (rotated by the form's phase) at ``z`` on ``frame``.

    Raises :class:`DegenerateGeometryError` when the m frame vectors are not
    linearly independent over R.
    """
    frame = np.atleast_2d(np.asarray(frame, dtype=float))
    m = form.m
    if frame.shape != (m, 2 * m):
        raise ValueError(f"frame must have shape ({m}, {2 * m})")
    sv = np.linalg.svd(frame, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise DegenerateGeometryError("frame vectors are linearly dependent")
    return complex(form.on_frame(z, frame))


def potential_value(ambient: AmbientSpace, z) -> float:
    return float(ambient.value(np.asarray(z, dtype=float)))


def potential_gradient(ambient: AmbientSpace, z) -> np.ndarray:
    return ambient.gradient(np.asarray(z, dtype=float))


def bakry_emery(ambient: AmbientSpace, xi, eta) -> float:
    return float(ambient.bakry_emery(xi, eta))


def sigma(ambient: AmbientSpace, t: float) -> float:
    return ambient.sigma(t)


def soliton_flow_map(ambient: AmbientSpace, t: float, z) -> np.ndarray:
    return ambient.flow_map(t, z)


def wedge_on_frame(forms_a, forms_b, vectors: np.ndarray, p: int, q: int) -> complex:
    """(a ^ b)(v_1, ..., v_{p+q}) for a p-form ``a`` and q-form ``b`` given as callables.

    Each callable takes a ``(k, n)`` array of vectors and returns the form's
    value.  Uses the determinant convention, summing over (p, q)-shuffles.
    """
    from itertools import combinations

    idx = list(range(p + q))
    total = 0.0 + 0.0j
    for first in combinations(idx, p):
        rest = [i for i in idx if i not in first]
        perm = list(first) + rest
        sign = _perm_sign(perm)
        total += sign * forms_a(vectors[list(first)]) * forms_b(vectors[rest])
    return total


def _perm_sign(perm: list[int]) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def volume_compatibility_sides(form: HoloVolumeForm, z: np.ndarray) -> tuple[float, complex]:
    """Both sides of e^{-f} w^m/m! = (-1)^{m(m-1)/2} (i/2)^m Omega_f ^ conj(Omega_f).

    Evaluated on the standard oriented frame (dx1, dy1, ..., dxm, dym) at z.
    The phase rotation of ``form`` cancels in Omega_f ^ conj(Omega_f).
    """
    amb = form.ambient
    m = amb.m
    basis = np.eye(2 * m)
    lhs = float(np.exp(-amb.value(z)))  # w^m/m! is the volume form, = 1 on the frame

    def omega(vecs):
        return form.on_frame(z, vecs)

    def omega_bar(vecs):
        return np.conj(form.on_frame(z, vecs))

    rhs = (-1) ** (m * (m - 1) // 2) * (0.5j) ** m * wedge_on_frame(omega, omega_bar, basis, m, m)
    return lhs, complex(rhs)
