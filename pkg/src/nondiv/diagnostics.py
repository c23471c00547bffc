"""Monitored quantities: energy density, sup-speed, homotopy distance,
parallel-section residual, and the second-order identity check behind the
sup-speed monotone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import MapField
from .geometry import DomainStructure
from .operators import Workspace, apply_linear, gradients, pullback_form, tension

CSV_COLUMNS = ("t", "sup_speed", "total_energy", "sup_eta", "homotopy_sup",
               "drift_s", "drift_phi", "parallel_residual")


@dataclass(frozen=True)
class MonitorRecord:
    """One sampled row of the flow monitors.

    ``sup_speed`` is the raw quantity ``sup_x g_ij(f) fdot^i fdot^j``
    (squared speed) with ``fdot`` identified with the tension field;
    ``drift`` holds the measure-weighted tension of up to two periodic
    target components and ``mu_avg`` their measure-weighted lifts (used by
    the circling regression, not written to CSV).
    """

    t: float
    sup_speed: float
    total_energy: float
    sup_eta: float
    homotopy_sup: float
    drift: tuple[float, float]
    parallel_residual: float
    mu_avg: tuple[float, ...] = ()

    def csv_row(self) -> list[float]:
        return [self.t, self.sup_speed, self.total_energy, self.sup_eta,
                self.homotopy_sup, self.drift[0], self.drift[1], self.parallel_residual]


def speed_squared_field(domain: DomainStructure, field: MapField,
                        tau: np.ndarray) -> np.ndarray:
    """Pointwise ``g_ij(f) fdot^i fdot^j`` with ``fdot = tau``."""
    if field.target.is_flat:
        return np.sum(tau * tau, axis=0)
    g = field.target.metric(field.values)
    return np.einsum("...ab,a...,b...->...", g, tau, tau, optimize=True)


def energy_density(domain: DomainStructure, field: MapField,
                   grads: np.ndarray | None = None) -> np.ndarray:
    """Energy density: half the domain-cometric trace of the pullback metric,

        eta(x) = 1/2 A^{jk}(x) g_ab(f(x)) d_j f^a d_k f^b

    with centered gradients on the lifts.
    """
    G = pullback_form(domain, field, grads=grads)
    if field.target.is_flat:
        eta = 0.5 * np.einsum("aa...->...", G)
    else:
        g = field.target.metric(field.values)
        eta = 0.5 * np.einsum("...ab,ab...->...", g, G, optimize=True)
    return eta


def total_energy(domain: DomainStructure, eta: np.ndarray) -> float:
    return float(eta.sum() * domain.grid.cell_volume)


def homotopy_distance_field(f: MapField, f0: MapField) -> np.ndarray:
    """Nodewise geodesic distance in the class fixed by the shared lifts.

    Both maps must carry the same winding data; the connecting geodesics
    are the ones selected by hint zero between the lifts.
    """
    from .targets import geodesic_distance

    if not f.same_class(f0):
        raise ValueError("maps are not in the same homotopy class (winding mismatch)")
    return geodesic_distance(f.target, f0.values, f.values)


def covariant_derivative(domain: DomainStructure, field: MapField, v: np.ndarray,
                         grads_f: np.ndarray | None = None) -> np.ndarray:
    """Pullback covariant derivative of a section ``v`` along ``f``:

        (D_j v)^i = d_j v^i + Gamma^i_ab(f) d_j f^a v^b

    shape (ncomp, d, *shape), centered differences throughout.
    """
    if grads_f is None:
        grads_f = gradients(domain, field)
    grads_v = gradients(domain, MapField(field.grid, field.target,
                                         np.ascontiguousarray(v),
                                         np.zeros_like(field.winding)))
    if field.target.is_flat:
        return grads_v
    Gam = field.target.christoffel(field.values)
    return grads_v + np.einsum("...iab,aj...,b...->ij...", Gam, grads_f, v, optimize=True)


def parallel_section_residual(domain: DomainStructure, field: MapField, v: np.ndarray,
                              grads_f: np.ndarray | None = None) -> float:
    """Sup of ``|D v|`` in the A-weighted g-norm; zero iff v is parallel along f."""
    Dv = covariant_derivative(domain, field, v, grads_f=grads_f)
    if field.target.is_flat:
        sq = np.einsum("...jk,aj...,ak...->...", domain.A, Dv, Dv, optimize=True)
    else:
        g = field.target.metric(field.values)
        sq = np.einsum("...jk,...ab,aj...,bk...->...", domain.A, g, Dv, Dv, optimize=True)
    return float(np.sqrt(max(float(sq.max()), 0.0)))


def curvature_quadratic(domain: DomainStructure, field: MapField, v: np.ndarray,
                        grads_f: np.ndarray | None = None) -> np.ndarray:
    """Pointwise curvature term ``-A^{jk} R(v, d_j f, v, d_k f)``.

    Nonnegative wherever the target curvature is nonpositive; this is the
    mechanism that makes the squared speed a subsolution of the linear
    parabolic operator.
    """
    if grads_f is None:
        grads_f = gradients(domain, field)
    if field.target.is_flat:
        return np.zeros(field.grid.shape)
    R = field.target.curvature(field.values)
    return -np.einsum("...jk,...abce,a...,bj...,c...,ek...->...",
                      domain.A, R, v, grads_f, v, grads_f, optimize=True)


def bochner_residual(domain: DomainStructure, f0: MapField, f1: MapField,
                     delta: float) -> np.ndarray:
    """Residual of the evolution identity for the squared speed.

    With ``v = tension(f)`` (the flow velocity) the identity reads

        (A^{jk} d2_{jk} + B^j d_j - d_t)(g_ij v^i v^j)
            = 2 A^{jk} ( g(D_j v, D_k v) - 1/2 R(v, d_j f, v, d_k f) )

    The time derivative is a forward difference between the two snapshots
    (``f1`` at time ``delta`` after ``f0``); the residual converges to zero
    under grid refinement at the order of the drift discretization.
    """
    target = f0.target
    v0 = tension(domain, f0)
    v1 = tension(domain, f1)
    S0 = speed_squared_field(domain, f0, v0)
    S1 = speed_squared_field(domain, f1, v1)
    lhs = apply_linear(domain, S0) - (S1 - S0) / delta

    grads_f = gradients(domain, f0)
    Dv = covariant_derivative(domain, f0, v0, grads_f=grads_f)
    if target.is_flat:
        grad_term = 2.0 * np.einsum("...jk,aj...,ak...->...", domain.A, Dv, Dv, optimize=True)
        curv_term = 0.0
    else:
        g = target.metric(f0.values)
        grad_term = 2.0 * np.einsum("...jk,...ab,aj...,bk...->...",
                                    domain.A, g, Dv, Dv, optimize=True)
        R = target.curvature(f0.values)
        curv_term = -np.einsum("...jk,...abce,a...,bj...,c...,ek...->...",
                               domain.A, R, v0, grads_f, v0, grads_f, optimize=True)
    return lhs - (grad_term + curv_term)


# ---------------------------------------------------------------------------
# post-run guards over monitor histories


def energy_ratio(history: list[MonitorRecord], volume: float,
                 skip_fraction: float = 0.1) -> float:
    """Largest ratio of pointwise peak energy to running mean energy.

    Finite on every run that stays bounded; pinned per scenario by its
    golden record (no universal constant is available).
    """
    if len(history) < 2:
        return 0.0
    start = max(1, int(len(history) * skip_fraction))
    best = 0.0
    running = 0.0
    for i, rec in enumerate(history):
        running = max(running, rec.total_energy / volume)
        if i >= start and running > 1e-300:
            best = max(best, rec.sup_eta / running)
    return best


def gradient_growth(history: list[MonitorRecord]) -> tuple[float, float]:
    """Coefficients witnessing ``sup|df|(t) <= alpha + beta t``.

    Returns the initial sup-gradient and the smallest nonnegative slope
    that dominates the recorded history.
    """
    if not history:
        return 0.0, 0.0
    sup_df = [np.sqrt(2.0 * max(rec.sup_eta, 0.0)) for rec in history]
    alpha = sup_df[0]
    beta = 0.0
    for rec, s in zip(history, sup_df):
        if rec.t > 0 and s > alpha:
            beta = max(beta, (s - alpha) / rec.t)
    return float(alpha), float(beta)
