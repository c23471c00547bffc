"""Chart-based Riemannian target manifolds.

Every target lives in a single global chart; nontrivial topology enters
only through circle-valued components with a declared period, which map
fields represent by continuous lifts plus integer winding data.  Evaluators
are vectorized over arbitrary batches of points: coordinates are passed
component-first as ``(n, ...)`` and tensors come back node-major
(``metric -> (..., n, n)``, ``christoffel -> (..., n, n, n)`` indexed
``[i, j, k] = Gamma^i_jk``, ``curvature -> (..., n, n, n, n)`` with
``R(v, w, v, w) = K (|v|^2 |w|^2 - <v, w>^2)`` for constant curvature K).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2.0 * math.pi


class TargetError(ValueError):
    pass


class ChartExit(RuntimeError):
    """A point left the chart domain of its target."""


@dataclass(frozen=True)
class TargetManifold:
    name: str
    dim: int
    metric: Callable[[np.ndarray], np.ndarray]
    christoffel: Callable[[np.ndarray], np.ndarray]
    curvature: Callable[[np.ndarray], np.ndarray]
    chart_contains: Callable[[np.ndarray], bool]
    periods: tuple[float | None, ...]       # per component, None if not circle-valued
    curvature_sign: str                     # flat | nonpositive | negative | positive
    curvature_bound: float                  # sup of |sectional curvature|
    is_flat: bool
    constant_curvature: float

    @property
    def periodic_components(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.periods) if p is not None)

    def sectional(self, points: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Sectional curvature of the plane spanned by X, Y at each point."""
        g = self.metric(points)
        R = self.curvature(points)
        num = np.einsum("...ijkl,i...,j...,k...,l...->...", R, X, Y, X, Y)
        gxx = np.einsum("...ij,i...,j...->...", g, X, X)
        gyy = np.einsum("...ij,i...,j...->...", g, Y, Y)
        gxy = np.einsum("...ij,i...,j...->...", g, X, Y)
        return num / (gxx * gyy - gxy ** 2)


def _flat_evaluators(n: int):
    def metric(F):
        F = np.asarray(F)
        out = np.zeros(F.shape[1:] + (n, n))
        for i in range(n):
            out[..., i, i] = 1.0
        return out

    def christoffel(F):
        F = np.asarray(F)
        return np.zeros(F.shape[1:] + (n, n, n))

    def curvature(F):
        F = np.asarray(F)
        return np.zeros(F.shape[1:] + (n, n, n, n))

    return metric, christoffel, curvature


def _constant_curvature_tensor(metric_fn, K: float):
    def curvature(F):
        g = metric_fn(F)
        return K * (np.einsum("...ik,...jl->...ijkl", g, g)
                    - np.einsum("...il,...jk->...ijkl", g, g))
    return curvature


def _make_flat(name: str, n: int, periods) -> TargetManifold:
    metric, christoffel, curvature = _flat_evaluators(n)
    return TargetManifold(
        name=name, dim=n, metric=metric, christoffel=christoffel,
        curvature=curvature, chart_contains=lambda F: bool(np.all(np.isfinite(F))),
        periods=tuple(periods), curvature_sign="flat", curvature_bound=0.0,
        is_flat=True, constant_curvature=0.0,
    )


def _make_hyperbolic_plane() -> TargetManifold:
    # upper half plane (u, v), v > 0, metric (du^2 + dv^2)/v^2, K = -1
    def metric(F):
        F = np.asarray(F)
        v = F[1]
        out = np.zeros(F.shape[1:] + (2, 2))
        out[..., 0, 0] = 1.0 / v ** 2
        out[..., 1, 1] = 1.0 / v ** 2
        return out

    def christoffel(F):
        F = np.asarray(F)
        v = F[1]
        G = np.zeros(F.shape[1:] + (2, 2, 2))
        inv = 1.0 / v
        G[..., 0, 0, 1] = -inv
        G[..., 0, 1, 0] = -inv
        G[..., 1, 0, 0] = inv
        G[..., 1, 1, 1] = -inv
        return G

    return TargetManifold(
        name="hyperbolic_plane", dim=2, metric=metric, christoffel=christoffel,
        curvature=_constant_curvature_tensor(metric, -1.0),
        chart_contains=lambda F: bool(np.all(np.asarray(F)[1] > 0.0) and np.all(np.isfinite(F))),
        periods=(None, None), curvature_sign="negative", curvature_bound=1.0,
        is_flat=False, constant_curvature=-1.0,
    )


def _make_hyperbolic_cylinder(period: float) -> TargetManifold:
    # Fermi coordinates (u, theta) around the closed geodesic u = 0:
    # metric du^2 + cosh^2(u) dtheta^2, K = -1, theta periodic.
    def metric(F):
        F = np.asarray(F)
        u = F[0]
        out = np.zeros(F.shape[1:] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = np.cosh(u) ** 2
        return out

    def christoffel(F):
        F = np.asarray(F)
        u = F[0]
        G = np.zeros(F.shape[1:] + (2, 2, 2))
        G[..., 0, 1, 1] = -np.cosh(u) * np.sinh(u)
        t = np.tanh(u)
        G[..., 1, 0, 1] = t
        G[..., 1, 1, 0] = t
        return G

    return TargetManifold(
        name="hyperbolic_cylinder", dim=2, metric=metric, christoffel=christoffel,
        curvature=_constant_curvature_tensor(metric, -1.0),
        chart_contains=lambda F: bool(np.all(np.isfinite(F))),
        periods=(None, period), curvature_sign="negative", curvature_bound=1.0,
        is_flat=False, constant_curvature=-1.0,
    )


SPHERE_CHART_LIMIT = 1e3


def _make_sphere() -> TargetManifold:
    # unit sphere in the stereographic chart, g = 4 delta / (1 + |y|^2)^2,
    # K = +1; runs abort once coordinates approach the chart boundary.
    def metric(F):
        F = np.asarray(F)
        r2 = F[0] ** 2 + F[1] ** 2
        c = 4.0 / (1.0 + r2) ** 2
        out = np.zeros(F.shape[1:] + (2, 2))
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        return out

    def christoffel(F):
        # conformal metric e^{2 rho} delta with rho = log(2/(1+r^2)):
        # Gamma^i_jk = d_k rho delta_ij + d_j rho delta_ik - d_i rho delta_jk
        F = np.asarray(F)
        r2 = F[0] ** 2 + F[1] ** 2
        drho = np.stack([-2.0 * F[0] / (1.0 + r2), -2.0 * F[1] / (1.0 + r2)])
        G = np.zeros(F.shape[1:] + (2, 2, 2))
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    val = 0.0
                    if i == j:
                        val = val + drho[k]
                    if i == k:
                        val = val + drho[j]
                    if j == k:
                        val = val - drho[i]
                    G[..., i, j, k] = val
        return G

    return TargetManifold(
        name="sphere", dim=2, metric=metric, christoffel=christoffel,
        curvature=_constant_curvature_tensor(metric, 1.0),
        chart_contains=lambda F: bool(
            np.all(np.sqrt(np.sum(np.asarray(F) ** 2, axis=0)) < SPHERE_CHART_LIMIT)
            and np.all(np.isfinite(F))),
        periods=(None, None), curvature_sign="positive", curvature_bound=1.0,
        is_flat=False, constant_curvature=1.0,
    )


TARGET_NAMES = ("euclidean", "circle", "flat_torus", "hyperbolic_plane",
                "hyperbolic_cylinder", "sphere")


def catalog_lookup(name: str, params: dict | None = None) -> TargetManifold:
    """Instantiate a catalog target by name.

    ``euclidean``: dim (default 1).  ``circle``: period (default 1).
    ``flat_torus``: dim (default 2), periods (default 1 each).
    ``hyperbolic_cylinder``: period of the angular coordinate (default 2 pi).
    """
    params = dict(params or {})
    if name == "euclidean":
        n = int(params.get("dim", 1))
        return _make_flat("euclidean", n, (None,) * n)
    if name == "circle":
        period = float(params.get("period", 1.0))
        return _make_flat("circle", 1, (period,))
    if name == "flat_torus":
        n = int(params.get("dim", 2))
        periods = params.get("periods")
        if periods is None:
            periods = (1.0,) * n
        periods = tuple(float(p) for p in periods)
        if len(periods) != n:
            raise TargetError("flat_torus needs one period per component")
        return _make_flat("flat_torus", n, periods)
    if name == "hyperbolic_plane":
        return _make_hyperbolic_plane()
    if name == "hyperbolic_cylinder":
        return _make_hyperbolic_cylinder(float(params.get("period", TWO_PI)))
    if name == "sphere":
        return _make_sphere()
    raise TargetError(f"unknown target {name!r}")


# ---------------------------------------------------------------------------
# distance


def _acosh1p(t: np.ndarray) -> np.ndarray:
    """arccosh(1 + t) for t >= 0, accurate near 0."""
    t = np.maximum(t, 0.0)
    return np.log1p(t + np.sqrt(t * (2.0 + t)))


def geodesic_distance(target: TargetManifold, p, q, hint=None) -> np.ndarray:
    """Length of the connecting geodesic in the lift class selected by ``hint``.

    ``hint`` counts extra windings of the connecting path per periodic
    component: the displacement used is ``(q - p) - hint * period``.  All
    catalog targets admit closed forms (the cylinder through the Fermi
    coordinate identity ``cosh d = cosh u1 cosh u2 cosh(dtheta)
    - sinh u1 sinh u2``).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    delta = q - p
    if hint is not None:
        hint = np.asarray(hint, dtype=np.float64)
        for c, per in enumerate(target.periods):
            if per is not None:
                delta[c] = delta[c] - hint[c] * per
            elif np.any(hint[c]):
                raise TargetError(f"component {c} is not circle-valued, hint must be 0")

    if target.is_flat:
        return np.sqrt(np.sum(delta ** 2, axis=0))
    if target.name == "hyperbolic_plane":
        v1, v2 = p[1], q[1]
        t = (delta[0] ** 2 + delta[1] ** 2) / (2.0 * v1 * v2)
        return _acosh1p(t)
    if target.name == "hyperbolic_cylinder":
        u1, u2 = p[0], q[0]
        # cosh d - 1 = (cosh(u1-u2) - 1) + cosh u1 cosh u2 (cosh dtheta - 1)
        t = 2.0 * np.sinh(0.5 * (u1 - u2)) ** 2 \
            + np.cosh(u1) * np.cosh(u2) * 2.0 * np.sinh(0.5 * delta[1]) ** 2
        return _acosh1p(t)
    if target.name == "sphere":
        n1 = _stereo_to_sphere(p)
        n2 = _stereo_to_sphere(q)
        dot = np.clip(np.sum(n1 * n2, axis=0), -1.0, 1.0)
        return np.arccos(dot)
    raise TargetError(f"no distance for target {target.name!r}")


def _stereo_to_sphere(y: np.ndarray) -> np.ndarray:
    r2 = y[0] ** 2 + y[1] ** 2
    return np.stack([2.0 * y[0], 2.0 * y[1], r2 - 1.0]) / (1.0 + r2)


# ---------------------------------------------------------------------------
# transport and geodesics


def parallel_transport(target: TargetManifold, curve: np.ndarray, v: np.ndarray,
                       substeps: int = 8) -> np.ndarray:
    """Transport ``v`` along a sampled path by solving ``v' + Gamma(x)(x', v) = 0``.

    The path is interpolated linearly between samples and integrated with
    classical fourth-order Runge-Kutta (``substeps`` stages per segment);
    transport is a ``g``-isometry, which the integrator preserves to its
    discretization order.
    """
    curve = np.asarray(curve, dtype=np.float64)
    v = np.array(v, dtype=np.float64, copy=True)
    if curve.ndim != 2 or curve.shape[1] != target.dim:
        raise TargetError("curve must have shape (nsamples, dim)")

    def rhs(x, vec):
        if not target.chart_contains(x.reshape(target.dim, 1)):
            raise ChartExit(f"transport left the chart of {target.name} at {x}")
        G = target.christoffel(x.reshape(target.dim, 1))[0]
        return -np.einsum("ijk,j,k->i", G, xdot, vec)

    for a in range(curve.shape[0] - 1):
        xa, xb = curve[a], curve[a + 1]
        xdot = xb - xa  # segment parametrized over tau in [0, 1]
        hstep = 1.0 / substeps
        for s in range(substeps):
            x0 = xa + (xb - xa) * (s / substeps)
            x_half = xa + (xb - xa) * ((s + 0.5) / substeps)
            x1 = xa + (xb - xa) * ((s + 1.0) / substeps)
            k1 = rhs(x0, v)
            k2 = rhs(x_half, v + 0.5 * hstep * k1)
            k3 = rhs(x_half, v + 0.5 * hstep * k2)
            k4 = rhs(x1, v + hstep * k3)
            v = v + (hstep / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return v


def geodesic_shoot(target: TargetManifold, p: np.ndarray, v: np.ndarray,
                   nsteps: int = 256) -> np.ndarray:
    """Integrate the geodesic ODE from ``p`` with initial velocity ``v``.

    Returns the sampled path over unit time, shape ``(nsteps + 1, dim)``;
    the path length equals the ``g``-norm of ``v`` up to integrator error.
    """
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)

    def acc(x, xdot):
        G = target.christoffel(x.reshape(target.dim, 1))[0]
        return -np.einsum("ijk,j,k->i", G, xdot, xdot)

    h = 1.0 / nsteps
    path = np.empty((nsteps + 1, target.dim))
    path[0] = p
    x, u = p.copy(), v.copy()
    for s in range(nsteps):
        k1x, k1u = u, acc(x, u)
        k2x, k2u = u + 0.5 * h * k1u, acc(x + 0.5 * h * k1x, u + 0.5 * h * k1u)
        k3x, k3u = u + 0.5 * h * k2u, acc(x + 0.5 * h * k2x, u + 0.5 * h * k2u)
        k4x, k4u = u + h * k3u, acc(x + h * k3x, u + h * k3u)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        path[s + 1] = x
    return path
