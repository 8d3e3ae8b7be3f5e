"""The f-volume, its first and second variation, and stability classification.

Finite-difference cross-checks displace vertices along straight lines,
F + h xi.  At a critical point the first variation vanishes, so the second
derivative along any path with initial velocity xi equals the quadratic
form Q_f(xi); away from critical points only first derivatives are
compared, and both sides use the same path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ambient import AmbientSpace, apply_J
from .errors import NotFMinimalError
from .lagrangian import (
    OPEN_CURVE,
    DiscreteLagrangian,
    default_minimality_tolerance,
    differential,
    f_minimality_residual,
    omega_tilde,
    omega_tilde_inv,
)
from .spectral import SpectrumResult, WeightedComplex, build_complex, d_star, exterior_d1, lambda1, two_form_norm_sq

SPECTRAL_TOLERANCE = 1e-3
FD_STEP_FLOOR = 1e-8


def _volume_weight(L: DiscreteLagrangian, ambient: AmbientSpace) -> np.ndarray:
    return np.exp(-(L.p / (2.0 * ambient.m)) * ambient.value(L.vertices))


def f_volume(L: DiscreteLagrangian, ambient: AmbientSpace) -> float:
    """V_f = sum_i exp(-(p/2m) f(F_i)) mu_i."""
    return float(np.sum(_volume_weight(L, ambient) * L.measure))


def first_variation(L: DiscreteLagrangian, ambient: AmbientSpace, xi: np.ndarray) -> float:
    """-int <H + (p/2m) grad f, xi> exp(-(p/2m) f) dV."""
    xi = np.asarray(xi, dtype=float)
    drift = L.mean_curvature_field + (L.p / (2.0 * ambient.m)) * ambient.gradient(L.vertices)
    density = np.sum(drift * xi, axis=-1) * _volume_weight(L, ambient) * L.measure
    return float(-np.sum(density))


def _check_step(h: float) -> None:
    if not h > FD_STEP_FLOOR:
        raise ValueError(f"finite-difference step {h} is below the round-off floor {FD_STEP_FLOOR}")


def first_variation_fd(L: DiscreteLagrangian, ambient: AmbientSpace, xi: np.ndarray, h: float = 1e-4) -> float:
    _check_step(h)
    plus = f_volume(L.displaced(xi, h), ambient)
    minus = f_volume(L.displaced(xi, -h), ambient)
    return (plus - minus) / (2.0 * h)


def first_variation_richardson(L: DiscreteLagrangian, ambient: AmbientSpace, xi: np.ndarray, h: float = 1e-3) -> float:
    """Extrapolate the central difference from steps h and h/2 (kills the h^2 term)."""
    coarse = first_variation_fd(L, ambient, xi, h)
    fine = first_variation_fd(L, ambient, xi, 0.5 * h)
    return (4.0 * fine - coarse) / 3.0


@dataclass(frozen=True)
class VariationReport:
    V_f: float
    first_variation_analytic: float
    first_variation_fd: float | None
    Q_f: float
    Q_f_terms: tuple[float, float, float]
    Q_f_fd: float | None
    residual_f_minimality: float

    def as_dict(self) -> dict:
        return {
            "V_f": self.V_f,
            "first_variation_analytic": self.first_variation_analytic,
            "first_variation_fd": self.first_variation_fd,
            "Q_f": self.Q_f,
            "Q_f_terms": {
                "d_alpha_sq": self.Q_f_terms[0],
                "codifferential_sq": self.Q_f_terms[1],
                "ricci_term": self.Q_f_terms[2],
            },
            "Q_f_fd": self.Q_f_fd,
            "residual_f_minimality": self.residual_f_minimality,
        }


def _require_critical(L: DiscreteLagrangian, ambient: AmbientSpace, tol: float | None) -> float:
    res = f_minimality_residual(L, ambient)
    tol = default_minimality_tolerance(L) if tol is None else tol
    if res > tol:
        raise NotFMinimalError(f"f-minimality residual {res:.3e} exceeds tolerance {tol:.3e}")
    return res


def _require_clamped(L: DiscreteLagrangian, xi: np.ndarray) -> None:
    if L.kind == OPEN_CURVE or (not L.is_curve and not all(L.periodic)):
        edge = np.abs(xi[L.boundary_mask()])
        if edge.size and edge.max() > 1e-12:
            raise ValueError("variations of clamped meshes must vanish on the boundary")


def quadratic_form_terms(cx: WeightedComplex, xi: np.ndarray) -> tuple[float, float, float]:
    """(||d alpha||^2_w, ||d*_f alpha||^2_w, int Ric_f(xi, xi) w) for alpha = omega_tilde(xi)."""
    L, ambient = cx.L, cx.ambient
    alpha = omega_tilde(L, xi)
    closed_part = two_form_norm_sq(cx, exterior_d1(cx, alpha))
    co = d_star(cx, alpha).reshape(-1)
    co_sq = float(np.sum(cx.mass * co**2))
    ric = ambient.bakry_emery(xi, xi).reshape(-1)
    ricci_term = float(np.sum(cx.mass * ric))
    return closed_part, co_sq, ricci_term


def second_variation(
    L: DiscreteLagrangian,
    ambient: AmbientSpace,
    xi: np.ndarray,
    *,
    tol: float | None = None,
    fd_step: float | None = None,
    cx: WeightedComplex | None = None,
) -> VariationReport:
    """Assemble Q_f(xi) = ||d alpha||^2 + ||d*_f alpha||^2 - int Ric_f(xi, xi) e^{-f/2}.

    Refuses non-Lagrangian dimensions and bases that are not f-minimal
    within ``tol``.  With ``fd_step`` the finite-difference cross-checks are
    filled in as well.
    """
    if not L.is_lagrangian_dimension:
        raise ValueError("the second variation formula needs p = m")
    xi = np.asarray(xi, dtype=float)
    _require_clamped(L, xi)
    res = _require_critical(L, ambient, tol)
    cx = build_complex(L, ambient) if cx is None else cx
    terms = quadratic_form_terms(cx, xi)
    q = terms[0] + terms[1] - terms[2]
    fv_fd = q_fd = None
    if fd_step is not None:
        fv_fd = first_variation_fd(L, ambient, xi, fd_step)
        q_fd = second_variation_fd(L, ambient, xi, fd_step, tol=tol)
    return VariationReport(
        V_f=f_volume(L, ambient),
        first_variation_analytic=first_variation(L, ambient, xi),
        first_variation_fd=fv_fd,
        Q_f=q,
        Q_f_terms=terms,
        Q_f_fd=q_fd,
        residual_f_minimality=res,
    )


def second_variation_fd(
    L: DiscreteLagrangian, ambient: AmbientSpace, xi: np.ndarray, h: float = 1e-3, *, tol: float | None = None
) -> float:
    """(V_f(F + h xi) - 2 V_f(F) + V_f(F - h xi)) / h^2 at an f-minimal base."""
    _check_step(h)
    _require_critical(L, ambient, tol)
    plus = f_volume(L.displaced(xi, h), ambient)
    minus = f_volume(L.displaced(xi, -h), ambient)
    return (plus - 2.0 * f_volume(L, ambient) + minus) / h**2


def hamiltonian_field(L: DiscreteLagrangian, u: np.ndarray) -> np.ndarray:
    """xi = omega_tilde^{-1}(du)."""
    return omega_tilde_inv(L, differential(L, u))


@dataclass(frozen=True, eq=False)
class StabilityReport:
    classification: str
    c: float
    lambda1: float
    spectrum: SpectrumResult
    witness_u: np.ndarray | None
    witness_Q: float | None

    @property
    def unstable(self) -> bool:
        return self.classification == "hamiltonian-f-unstable"

    def as_dict(self) -> dict:
        return {
            "classification": self.classification,
            "c": self.c,
            "lambda1": self.lambda1,
            "dirichlet": self.spectrum.dirichlet,
            "witness_Q": self.witness_Q,
        }


def stability_report(
    L: DiscreteLagrangian, ambient: AmbientSpace, *, tol: float | None = None, spectral_tol: float = SPECTRAL_TOLERANCE
) -> StabilityReport:
    """Classify by comparing lambda_1 of the Witten Laplacian with the soliton constant c.

    c <= 0 is f-stable outright; for c > 0 the immersion is Hamiltonian
    f-stable iff lambda_1 >= c (up to ``spectral_tol``), and an unstable
    verdict carries the lowest eigenfunction with its Q_f value.
    """
    _require_critical(L, ambient, tol)
    cx = build_complex(L, ambient)
    spec = lambda1(cx)
    lam = spec.lambda1
    c = ambient.c
    witness_u = witness_q = None
    if c <= 0.0:
        label = "f-stable"
    elif lam >= c - spectral_tol:
        label = "hamiltonian-f-stable"
    else:
        label = "hamiltonian-f-unstable"
        witness_u = spec.first_mode.reshape(L.shape)
        xi = hamiltonian_field(L, witness_u)
        xi[L.boundary_mask()] = 0.0
        witness_q = second_variation(L, ambient, xi, tol=tol, cx=cx).Q_f
    return StabilityReport(label, c, lam, spec, witness_u, witness_q)


# ---------------------------------------------------------------------------
# families of test variations
# ---------------------------------------------------------------------------


def unit_normal(L: DiscreteLagrangian) -> np.ndarray:
    """nu = J tau on curves."""
    if not L.is_curve:
        raise ValueError("unit normals are defined here for curves")
    return apply_J(L.tangent_frame[:, 0, :])


def parameter_phase(L: DiscreteLagrangian) -> np.ndarray:
    """Uniform parameter in [0, 2 pi) for closed curves, [0, 1] for open ones."""
    n = L.shape[0]
    if L.is_closed:
        return 2.0 * np.pi * np.arange(n) / n
    return np.linspace(0.0, 1.0, n)


def hamiltonian_mode(L: DiscreteLagrangian, k: int, kind: str = "sin") -> tuple[np.ndarray, np.ndarray]:
    """(u, xi) with u = sin(k phi) or cos(k phi) on a closed curve and xi = omega_tilde^{-1}(du)."""
    if not L.is_closed or not L.is_curve:
        raise ValueError("Hamiltonian Fourier modes are defined on closed curves")
    phase = parameter_phase(L)
    u = np.sin(k * phase) if kind == "sin" else np.cos(k * phase)
    return u, hamiltonian_field(L, u)


def clamped_mode(L: DiscreteLagrangian, k: int) -> np.ndarray:
    """sin(k pi sigma) nu on an open curve, sigma the normalised parameter."""
    return np.sin(k * np.pi * parameter_phase(L))[:, None] * unit_normal(L)


def random_clamped_variations(
    L: DiscreteLagrangian, count: int, rng: np.random.Generator, modes: int = 8
) -> list[np.ndarray]:
    """Random normal fields sum_k a_k sin(k pi sigma) nu with a_k ~ N(0, 1/k^2), zero at the ends."""
    sigma = parameter_phase(L)
    basis = np.sin(np.pi * np.outer(np.arange(1, modes + 1), sigma))
    nu = unit_normal(L)
    out = []
    for _ in range(count):
        coeff = rng.standard_normal(modes) / np.arange(1, modes + 1)
        prof = coeff @ basis
        prof[0] = prof[-1] = 0.0
        out.append(prof[:, None] * nu)
    return out


def weighted_norm_sq(L: DiscreteLagrangian, ambient: AmbientSpace, xi: np.ndarray) -> float:
    """int |xi|^2 e^{-f/2} dV."""
    w = np.exp(-0.5 * ambient.value(L.vertices)) * L.measure
    return float(np.sum(np.sum(np.asarray(xi) ** 2, axis=-1) * w))
