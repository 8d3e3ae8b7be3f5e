"""f-calibrations built from Omega_f and f-special Lagrangian checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ambient import AmbientSpace, HoloVolumeForm, volume_compatibility_sides, apply_J, from_complex
from .lagrangian import DiscreteLagrangian, lagrangian_angle, omega_tilde
from .spectral import WeightedComplex, build_complex, d_star, exterior_d1, two_form_norm_sq


@dataclass(frozen=True)
class CalibrationSample:
    z: np.ndarray
    frame: np.ndarray
    lhs: float
    rhs: float
    slack: float

    def as_dict(self) -> dict:
        return {
            "z": self.z.tolist(),
            "frame": self.frame.tolist(),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
        }


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    min_slack: float
    worst: CalibrationSample
    slacks: np.ndarray
    n_samples: int


def random_points(rng: np.random.Generator, n: int, m: int, radius: float = 3.0) -> np.ndarray:
    return rng.uniform(-radius, radius, size=(n, 2 * m))


def random_frames(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """Orthonormal m-frames in R^{2m} from QR of Gaussian matrices (signs fixed by R)."""
    g = rng.standard_normal((n, 2 * m, m))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[:, None, :]
    return np.swapaxes(q, -1, -2)


def random_lagrangian_frames(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """Orthonormal frames of random Lagrangian planes: real images of a random unitary."""
    g = rng.standard_normal((n, m, m)) + 1j * rng.standard_normal((n, m, m))
    q, r = np.linalg.qr(g)
    q = q * (np.diagonal(r, axis1=-2, axis2=-1) / np.abs(np.diagonal(r, axis1=-2, axis2=-1)))[:, None, :]
    return from_complex(np.swapaxes(q, -1, -2))


def _phase_aligned(form: HoloVolumeForm, z: np.ndarray, frames: np.ndarray) -> np.ndarray:
    # rotate the first vector by a unit complex number so the form is real and positive there
    vals = form.on_frame(z, frames)
    zc = frames[..., 0, 0::2] + 1j * frames[..., 0, 1::2]
    zc = zc * np.exp(-1j * np.angle(vals))[:, None]
    out = frames.copy()
    out[..., 0, :] = from_complex(zc)
    return out


def calibration_inequality_sample(
    form: HoloVolumeForm, n_samples: int, rng: np.random.Generator | None = None, radius: float = 3.0
) -> CalibrationResult:
    """Worst slack e^{-f/2} vol_P - Re(e^{-i theta0} Omega_f)|_P over random points and planes.

    Planes mix generic frames, Lagrangian frames and Lagrangian frames
    turned to the calibrating phase (where the inequality is tight).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    m = form.m
    z = random_points(rng, n_samples, m, radius)
    n_generic = n_samples // 2
    n_lag = (n_samples - n_generic) // 2
    n_tight = n_samples - n_generic - n_lag
    frames = np.concatenate(
        [
            random_frames(rng, n_generic, m),
            random_lagrangian_frames(rng, n_lag, m),
            random_lagrangian_frames(rng, n_tight, m),
        ]
    )
    tight = slice(n_generic + n_lag, n_samples)
    frames[tight] = _phase_aligned(form, z[tight], frames[tight])
    lhs = np.real(form.on_frame(z, frames))
    rhs = np.exp(-0.5 * form.ambient.value(z))  # unit volume on orthonormal frames
    slack = rhs - lhs
    i = int(np.argmin(slack))
    worst = CalibrationSample(z[i], frames[i], float(lhs[i]), float(rhs[i]), float(slack[i]))
    return CalibrationResult(float(slack[i]), worst, slack, n_samples)


def tangent_plane_slack(L: DiscreteLagrangian, form: HoloVolumeForm) -> np.ndarray:
    """Per-sample slack of the calibration on the tangent planes of ``L``."""
    lhs = np.real(form.on_frame(L.vertices, L.tangent_frame))
    rhs = np.exp(-0.5 * form.ambient.value(L.vertices))
    return rhs - lhs


class FSlagResult(NamedTuple):
    phase: float
    max_deviation: float  # max |Im(e^{-i phase} F*Omega_f)| / (e^{-f/2} dV_g)
    phase_spread: float  # max |theta - phase|


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def fslag_residual(L: DiscreteLagrangian, form: HoloVolumeForm) -> FSlagResult:
    theta = lagrangian_angle(L, form)
    phase = float(_wrap(np.mean(theta)))
    offset = theta - phase
    offset = offset - 2.0 * np.pi * np.round(np.mean(offset) / (2.0 * np.pi))
    return FSlagResult(phase, float(np.max(np.abs(np.sin(offset)))), float(np.max(np.abs(offset))))


def translator_equation_check(L: DiscreteLagrangian, ambient: AmbientSpace) -> tuple[float, float]:
    """(mean, max - min) of theta - <F, J T> with the classical unwrapped angle."""
    if ambient.T is None:
        raise ValueError("the translator equation needs a translator potential")
    theta = lagrangian_angle(L)
    vals = theta - L.vertices @ apply_J(ambient.T)
    return float(np.mean(vals)), float(np.ptp(vals))


def fslag_deformation_residual(
    L: DiscreteLagrangian, ambient: AmbientSpace, xi: np.ndarray, cx: WeightedComplex | None = None
) -> tuple[float, float]:
    """(||d omega_tilde(xi)||_w, ||d*_f omega_tilde(xi)||_w), the latter over interior vertices."""
    cx = build_complex(L, ambient) if cx is None else cx
    alpha = omega_tilde(L, xi)
    closed = np.sqrt(two_form_norm_sq(cx, exterior_d1(cx, alpha)))
    co = d_star(cx, alpha).reshape(-1)
    mask = L.interior_mask().reshape(-1)
    return float(closed), float(np.sqrt(np.sum((cx.mass * co**2)[mask])))


def volume_compatibility_check(form: HoloVolumeForm, n_points: int, rng: np.random.Generator | None = None, radius: float = 3.0) -> float:
    """Max relative mismatch of e^{-f} w^m/m! against the Omega_f ^ conj(Omega_f) expression."""
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    for z in random_points(rng, n_points, form.m, radius):
        lhs, rhs = volume_compatibility_sides(form, z)
        worst = max(worst, abs(rhs - lhs) / abs(lhs))
    return worst
