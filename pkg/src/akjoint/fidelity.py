"""Spin-direction fidelities for the two-detector pointer.

The pointer direction is the angle of the measured momentum in the
``(p1, p2)`` plane.  Each fidelity is an infimum over system states of
``<chi| c 1 + v.sigma |chi>``, which is ``c - |v|``; the state-dependent
parts integrate to zero by kernel parity, so ``|v|`` is evaluated and
reported rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effects import Effect
from .errors import PreconditionError
from .kernels import KernelTable2, composite_gauss_legendre

SPIN = 0.5
SPIN_SQ = SPIN + SPIN**2  # s(s+1) = 3/4
ETA_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AnglePOVM:
    """Angle POVM ``E(theta) = a(theta) 1 + b(theta) sigma_x + c(theta) sigma_y`` on quadrature nodes."""

    theta: np.ndarray
    weights: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def total(self) -> Effect:
        """Integral of ``E(theta)`` over the node range, as an effect."""
        w = self.weights
        return Effect(2 * float(w @ self.a), (2 * float(w @ self.b), 2 * float(w @ self.c), 0.0))


def angle_povm(table: KernelTable2, theta_range=(0.0, 2 * np.pi), n_theta: int = 256) -> AnglePOVM:
    """Radial integrals of ``|T|^2`` terms at each pointer angle."""
    if not table.symmetric:
        raise PreconditionError("the angle POVM needs equal detector widths")
    lo, hi = theta_range
    n_theta -= n_theta % 8
    th, wth = composite_gauss_legendre(lo, hi, n_theta)
    rmax = max(table.config.momentum_extents())
    r, wr = composite_gauss_legendre(0.0, rmax, table.config.grid_points // 2)
    R, TH = np.meshgrid(r, th, indexing="ij")
    e, f, g = table.evaluate(R * np.cos(TH), R * np.sin(TH))
    rw = (wr * r)[:, None]
    a = ((e * e + f * f + g * g) * rw).sum(0)
    b = (2 * e * f * rw).sum(0)
    c = (2 * e * g * rw).sum(0)
    return AnglePOVM(th, wth, a, b, c)


def _direction_cosines(table: KernelTable2):
    P1, P2 = np.meshgrid(table.p1, table.p2, indexing="ij")
    rad = np.hypot(P1, P2)
    # Gauss-Legendre nodes never sit on the axes, so the origin is only
    # approached, never hit; the disk below the innermost node radius is the
    # one-cell exclusion and carries O(cell^2) of a bounded integrand.
    cell = np.min(np.abs(table.p1)) * np.sqrt(2)
    keep = rad >= cell * (1 - 1e-12)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_t = np.where(keep, P1 / rad, 0.0)
        sin_t = np.where(keep, P2 / rad, 0.0)
    return cos_t, sin_t, table.weights * keep


@dataclass(frozen=True)
class StateForm:
    """``<chi| const 1 + vector.sigma |chi>`` with infimum ``const - |vector|``."""

    const: float
    vector: tuple[float, float, float]

    @property
    def infimum(self) -> float:
        return self.const - float(np.linalg.norm(self.vector))

    def at(self, bloch) -> float:
        return self.const + float(np.dot(self.vector, bloch))


def eta_i_form(table: KernelTable2) -> StateForm:
    cos_t, sin_t, w = _direction_cosines(table)
    e, f, g = table.e0, table.f0, table.g0
    n = e * e + f * f + g * g
    const = np.sum(w * (e * f * cos_t + e * g * sin_t))
    vx = 0.5 * np.sum(w * n * cos_t)
    vy = 0.5 * np.sum(w * n * sin_t)
    return StateForm(float(const), (float(vx), float(vy), 0.0))


def eta_i_direct(table: KernelTable2) -> float:
    """Retrodictive fidelity by Cartesian quadrature of ``e0 f0 p1/|p| + e0 g0 p2/|p|``."""
    return eta_i_form(table).infimum


def eta_i_closed(a_prime: float) -> float:
    if not 0.0 <= a_prime <= 2 / np.pi + 1e-6:
        raise PreconditionError(f"a' = {a_prime} lies outside [0, 2/pi]")
    return np.pi * a_prime / 4


def eta_f_form(table: KernelTable2) -> StateForm:
    cos_t, sin_t, w = _direction_cosines(table)
    e, f, g = table.e0, table.f0, table.g0
    ee, ff, gg, fg = e * e, f * f, g * g, f * g
    vx = np.sum(w * (cos_t * (ee + ff - gg) + 2 * fg * sin_t))
    vy = np.sum(w * (sin_t * (ee - ff + gg) + 2 * fg * cos_t))
    const = np.sum(w * (e * f * cos_t + e * g * sin_t))
    return StateForm(float(const), (float(vx), float(vy), 0.0))


def eta_f_direct(table: KernelTable2) -> float:
    """Predictive fidelity from the closed-form integrand over the pointer plane."""
    if not table.symmetric:
        raise PreconditionError("eta_f evaluation assumes equal detector widths")
    return eta_f_form(table).infimum


def eta_d_form(table: KernelTable2) -> StateForm:
    w = table.weights
    e, f, g = table.e0, table.f0, table.g0
    const = 0.75 * np.sum(w * (e * e + f * f + g * g))
    return StateForm(float(const), (float(0.5 * np.sum(w * e * f)), float(0.5 * np.sum(w * e * g)), 0.0))


def eta_d_direct(table: KernelTable2) -> float:
    """Disturbance fidelity; equals 3/4 by normalization of the kernels."""
    return eta_d_form(table).infimum


def error_measures(eta_i: float, eta_f: float, eta_d: float) -> tuple[float, float, float]:
    """rms errors ``sqrt(s(s+1) - eta^2)``; the disturbance error carries an extra sqrt 2."""
    bound = np.sqrt(SPIN_SQ)
    for name, eta in (("eta_i", eta_i), ("eta_f", eta_f), ("eta_d", eta_d)):
        if not abs(eta) <= bound + ETA_TOL:
            raise PreconditionError(f"{name} = {eta} exceeds sqrt(3/4)")

    def root(eta):
        return float(np.sqrt(max(0.0, SPIN_SQ - eta * eta)))

    return root(eta_i), root(eta_f), float(np.sqrt(2)) * root(eta_d)


@dataclass(frozen=True)
class FidelityReport:
    sigmas: tuple[float, float]
    a_prime: float
    eta_i: float
    eta_i_closed: float
    eta_f: float
    eta_d: float
    delta_ei: float
    delta_ef: float
    delta_d: float
    spin: float = SPIN

    @property
    def closed_form_gap(self) -> float:
        return abs(self.eta_i - self.eta_i_closed)


def fidelity_report(table: KernelTable2) -> FidelityReport:
    from .two_detector import compute_marginals

    mp = compute_marginals(table)
    ei = eta_i_direct(table)
    ef = eta_f_direct(table) if table.symmetric else float("nan")
    ed = eta_d_direct(table)
    # the proportionality rests on rotational symmetry of the kernels
    closed = eta_i_closed(mp.a_prime) if table.symmetric else float("nan")
    d_ei, d_ef, d_d = error_measures(ei, ef if np.isfinite(ef) else ei, ed)
    return FidelityReport(
        table.sigmas, mp.a_prime, ei, closed, ef, ed, d_ei, d_ef if np.isfinite(ef) else float("nan"), d_d
    )
