"""Built-in analytic families with exact jets.

Every builder returns a :class:`~lmcf.lagrangian.DiscreteLagrangian` that
remembers how it was made (``family`` block), so meshes can be exchanged
as JSON and regenerated with their jets.
"""

from __future__ import annotations

from typing import Any, Callable

import numpy as np

from .lagrangian import CLOSED_CURVE, OPEN_CURVE, PARAMETRIC_GRID, PRODUCT_TORUS, DiscreteLagrangian


def _finish(L: DiscreteLagrangian, name: str, params: dict, resolution, backend: str) -> DiscreteLagrangian:
    fam = {"name": name, "params": params, "resolution": resolution, "backend": backend}
    if backend == "polyline":
        L = L.polyline()
    elif backend != "analytic":
        raise ValueError(f"unknown backend {backend!r}")
    object.__setattr__(L, "family", fam)
    return L


def circle(r: float = 1.0, n: int = 256, center=(0.0, 0.0), backend: str = "analytic") -> DiscreteLagrangian:
    """Round circle of radius ``r`` sampled uniformly in angle, counter-clockwise."""
    if not r > 0:
        raise ValueError("radius must be positive")
    h = 2.0 * np.pi / n
    phi = h * np.arange(n)
    c, s = np.cos(phi), np.sin(phi)
    ctr = np.asarray(center, dtype=float)
    verts = ctr + r * np.column_stack([c, s])
    d1 = r * np.column_stack([-s, c])
    d2 = -r * np.column_stack([c, s])
    L = DiscreteLagrangian(CLOSED_CURVE, verts, d1, d2, (h,), (True,))
    return _finish(L, "circle", {"r": float(r), "center": [float(x) for x in ctr]}, int(n), backend)


def ellipse(a: float = 1.0, b: float = 0.5, n: int = 256, backend: str = "analytic") -> DiscreteLagrangian:
    h = 2.0 * np.pi / n
    phi = h * np.arange(n)
    c, s = np.cos(phi), np.sin(phi)
    verts = np.column_stack([a * c, b * s])
    d1 = np.column_stack([-a * s, b * c])
    d2 = -verts
    L = DiscreteLagrangian(CLOSED_CURVE, verts, d1, d2, (h,), (True,))
    return _finish(L, "ellipse", {"a": float(a), "b": float(b)}, int(n), backend)


def line(
    direction=(1.0, 0.0), offset=(0.0, 0.0), n: int = 257, half_length: float = 3.0, backend: str = "analytic"
) -> DiscreteLagrangian:
    """Straight segment ``offset + s * direction``, s in [-half_length, half_length]."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    off = np.asarray(offset, dtype=float)
    s = np.linspace(-half_length, half_length, n)
    verts = off + s[:, None] * u
    d1 = np.tile(u, (n, 1))
    d2 = np.zeros_like(verts)
    L = DiscreteLagrangian(OPEN_CURVE, verts, d1, d2, (s[1] - s[0],), (False,))
    params = {"direction": u.tolist(), "offset": off.tolist(), "half_length": float(half_length)}
    return _finish(L, "line", params, int(n), backend)


def _rotation_to(T: np.ndarray) -> np.ndarray:
    # rotation of the plane taking (0, -1) to T
    ang = np.arctan2(T[1], T[0]) + 0.5 * np.pi
    c, s = np.cos(ang), np.sin(ang)
    return np.array([[c, -s], [s, c]])


def grim_reaper(
    T=(0.0, -1.0), x_max: float = 1.2, n: int = 801, offset=(0.0, 0.0), backend: str = "analytic"
) -> DiscreteLagrangian:
    """Translating curve for direction ``T``, truncated and clamped.

    For T = (0, -1) this is the graph (x, -ln cos x) over [-x_max, x_max],
    parametrised by x; other directions are rigid rotations of it.
    """
    T = np.asarray(T, dtype=float)
    if T.shape != (2,) or abs(np.linalg.norm(T) - 1.0) > 1e-12:
        raise ValueError("grim reaper direction must be a unit vector in R^2")
    if not 0.0 < x_max < 0.5 * np.pi:
        raise ValueError("x_max must lie in (0, pi/2)")
    x = np.linspace(-x_max, x_max, n)
    tan, sec = np.tan(x), 1.0 / np.cos(x)
    verts = np.column_stack([x, -np.log(np.cos(x))])
    d1 = np.column_stack([np.ones_like(x), tan])
    d2 = np.column_stack([np.zeros_like(x), sec**2])
    R = _rotation_to(T)
    off = np.asarray(offset, dtype=float)
    L = DiscreteLagrangian(OPEN_CURVE, verts @ R.T + off, d1 @ R.T, d2 @ R.T, (x[1] - x[0],), (False,))
    params = {"T": T.tolist(), "x_max": float(x_max), "offset": off.tolist()}
    return _finish(L, "grim_reaper", params, int(n), backend)


def product_torus(r1: float = np.sqrt(2.0), r2: float = np.sqrt(2.0), n1: int = 64, n2: int | None = None) -> DiscreteLagrangian:
    """Product of two round circles in C^2, sampled on a uniform periodic grid."""
    n2 = n1 if n2 is None else n2
    h1, h2 = 2.0 * np.pi / n1, 2.0 * np.pi / n2
    p1, p2 = np.meshgrid(h1 * np.arange(n1), h2 * np.arange(n2), indexing="ij")
    c1, s1, c2, s2 = np.cos(p1), np.sin(p1), np.cos(p2), np.sin(p2)
    z = np.zeros_like(p1)
    verts = np.stack([r1 * c1, r1 * s1, r2 * c2, r2 * s2], axis=-1)
    d1 = np.stack(
        [np.stack([-r1 * s1, r1 * c1, z, z], axis=-1), np.stack([z, z, -r2 * s2, r2 * c2], axis=-1)], axis=-2
    )
    d2 = np.zeros(p1.shape + (2, 2, 4))
    d2[..., 0, 0, :] = np.stack([-r1 * c1, -r1 * s1, z, z], axis=-1)
    d2[..., 1, 1, :] = np.stack([z, z, -r2 * c2, -r2 * s2], axis=-1)
    L = DiscreteLagrangian(PRODUCT_TORUS, verts, d1, d2, (h1, h2), (True, True))
    return _finish(L, "product_torus", {"r1": float(r1), "r2": float(r2)}, [int(n1), int(n2)], "analytic")


def cubic_slag_graph(k: float = 0.3, half_width: float = 1.0, n: int = 33) -> DiscreteLagrangian:
    """Gradient graph of psi = k (x1^3 - 3 x1 x2^2) / 3, a special Lagrangian of phase 0.

    z_j = x_j + i d_j psi over the square [-half_width, half_width]^2, clamped.
    """
    x = np.linspace(-half_width, half_width, n)
    h = x[1] - x[0]
    a, b = np.meshgrid(x, x, indexing="ij")
    one, zero = np.ones_like(a), np.zeros_like(a)
    psi1 = k * (a**2 - b**2)
    psi2 = -2.0 * k * a * b
    psi11, psi12, psi22 = 2.0 * k * a, -2.0 * k * b, -2.0 * k * a
    verts = np.stack([a, psi1, b, psi2], axis=-1)
    d1 = np.stack(
        [np.stack([one, psi11, zero, psi12], axis=-1), np.stack([zero, psi12, one, psi22], axis=-1)], axis=-2
    )
    c = 2.0 * k * one
    d2 = np.zeros(a.shape + (2, 2, 4))
    # third derivatives: psi111 = 2k, psi112 = 0, psi122 = -2k, psi222 = 0
    d2[..., 0, 0, :] = np.stack([zero, c, zero, zero], axis=-1)
    d2[..., 0, 1, :] = np.stack([zero, zero, zero, -c], axis=-1)
    d2[..., 1, 0, :] = d2[..., 0, 1, :]
    d2[..., 1, 1, :] = np.stack([zero, -c, zero, zero], axis=-1)
    L = DiscreteLagrangian(PARAMETRIC_GRID, verts, d1, d2, (h, h), (False, False))
    return _finish(L, "cubic_slag_graph", {"k": float(k), "half_width": float(half_width)}, int(n), "analytic")


FAMILIES: dict[str, Callable[..., DiscreteLagrangian]] = {
    "circle": circle,
    "ellipse": ellipse,
    "line": line,
    "grim_reaper": grim_reaper,
    "product_torus": product_torus,
    "cubic_slag_graph": cubic_slag_graph,
}


def build_family(name: str, params: dict[str, Any], resolution, backend: str = "analytic") -> DiscreteLagrangian:
    """Instantiate a named family from plain (JSON-like) parameters."""
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}")
    params = dict(params or {})
    if name == "product_torus":
        res = resolution if isinstance(resolution, (list, tuple)) else [resolution, resolution]
        return product_torus(n1=int(res[0]), n2=int(res[1]), **params)
    if name == "cubic_slag_graph":
        res = resolution[0] if isinstance(resolution, (list, tuple)) else resolution
        return cubic_slag_graph(n=int(res), **params)
    return FAMILIES[name](n=int(resolution), backend=backend, **params)
