"""Momentum-space measurement kernels for Gaussian pointer states.

The interaction ``U = exp(i q.sigma)`` expands as ``e(q) I + f(q) sigma_x +
g(q) sigma_y [+ h(q) sigma_z]`` with ``e = cos|q|`` and ``f = i q_1 sin|q|/|q|``
etc.  The kernels ``e0, f0, g0 [, h0]`` are the Fourier transforms of these
functions times the product of pointer wavefunctions.  With even pointer
states the factor ``i`` is absorbed by the odd sine transform, so every
stored kernel is real.

Fourier convention: ``phi0(p) = (2 pi)^(-d/2) int exp(-i q.p) phi(q) dq``.

Transforms are computed by direct quadrature, not FFT: position integrals use
the trapezoid rule on the half-line (all integrands are even in each ``q_i``),
and momenta are composite Gauss-Legendre nodes mirrored about zero so that
half-plane and quadrant integrals are spectrally accurate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import j0, j1

from .errors import ConfigError, KernelBuildError, NumericalError, PreconditionError

GL_ORDER = 8
SINC_SERIES_BELOW = 1e-4
NORM_TOL = 1e-6
# Gaussian amplitude exp(-q^2/4s^2) is below 1e-15 beyond 12 s; its transform
# exp(-s^2 p^2) is below 1e-21 beyond 7/s (plus the unit momentum kick).
POSITION_WINDOW = 12.0
MOMENTUM_WINDOW = 7.0


@dataclass(frozen=True)
class DetectorConfig:
    """Pointer-state widths and numerical settings.

    ``sigmas`` are the position-space standard deviations of the Gaussian
    pointer states (two or three detectors).  ``grid_extent`` is the momentum
    half-width of the kernel grid; ``None`` picks ``1 + 7/sigma`` per axis.
    """

    sigmas: tuple[float, ...]
    grid_extent: float | None = None
    grid_points: int = 512
    mc_samples: int = 2**22
    mc_strata: int = 8
    seed: int = 0

    def __post_init__(self):
        sigmas = tuple(float(s) for s in np.atleast_1d(self.sigmas))
        object.__setattr__(self, "sigmas", sigmas)
        if len(sigmas) not in (2, 3):
            raise ConfigError(f"need 2 or 3 detector widths, got {len(sigmas)}")
        if not all(np.isfinite(s) and s > 0 for s in sigmas):
            raise ConfigError(f"detector widths must be positive, got {sigmas}")
        if self.grid_points < 256 or self.grid_points % (2 * GL_ORDER):
            raise ConfigError(
                f"grid_points must be >= 256 and a multiple of {2 * GL_ORDER}, got {self.grid_points}"
            )
        if self.grid_extent is not None:
            need = 8.0 * max(max(sigmas), 1.0 / min(sigmas), 1.0)
            if self.grid_extent < need:
                raise ConfigError(f"grid_extent {self.grid_extent} < required {need:.4g}")
        if self.mc_strata < 1 or self.mc_samples < 2 * self.mc_strata ** len(sigmas):
            raise ConfigError("mc_samples must allow at least two samples per stratum")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def ndim(self) -> int:
        return len(self.sigmas)

    def momentum_extents(self) -> tuple[float, ...]:
        if self.grid_extent is not None:
            return (float(self.grid_extent),) * self.ndim
        return tuple(1.0 + MOMENTUM_WINDOW / s for s in self.sigmas)

    def with_sigmas(self, *sigmas: float) -> "DetectorConfig":
        return DetectorConfig(
            tuple(sigmas), self.grid_extent, self.grid_points, self.mc_samples, self.mc_strata, self.seed
        )


def gaussian_psi(q, sigma: float):
    """Unit-norm Gaussian amplitude with position standard deviation ``sigma``."""
    if not sigma > 0:
        raise PreconditionError(f"sigma must be positive, got {sigma}")
    q = np.asarray(q, dtype=float)
    return (2.0 * np.pi * sigma**2) ** -0.25 * np.exp(-(q**2) / (4.0 * sigma**2))


def sinc_r(R):
    """``sin(R)/R`` with the removable singularity handled by its series."""
    R = np.asarray(R, dtype=float)
    small = R < SINC_SERIES_BELOW
    safe = np.where(small, 1.0, R)
    R2 = R * R
    return np.where(small, 1.0 - R2 / 6.0 + R2 * R2 / 120.0, np.sin(safe) / safe)


def unitary_kernels2(q1, q2):
    """``(e, f_im, g_im)`` where ``f = i f_im`` and ``g = i g_im``."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    R = np.hypot(q1, q2)
    s = sinc_r(R)
    return np.cos(R), q1 * s, q2 * s


def unitary_kernels3(q1, q2, q3):
    q1, q2, q3 = (np.asarray(q, dtype=float) for q in (q1, q2, q3))
    R = np.sqrt(q1 * q1 + q2 * q2 + q3 * q3)
    s = sinc_r(R)
    return np.cos(R), q1 * s, q2 * s, q3 * s


def position_nodes(sigma: float, p_extent: float) -> tuple[np.ndarray, np.ndarray]:
    """Half-line trapezoid nodes for even integrands, weights doubled to cover the full line.

    The step resolves momenta up to ``2 * p_extent`` without aliasing.
    """
    qmax = POSITION_WINDOW * sigma
    dq = np.pi / (2.0 * p_extent)
    n = max(int(np.ceil(qmax / dq)) + 1, 16)
    q = np.linspace(0.0, qmax, n)
    w = np.full(n, q[1] - q[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return q, 2.0 * w


def composite_gauss_legendre(a: float, b: float, n: int, order: int = GL_ORDER):
    if n % order:
        raise ValueError(f"node count {n} is not a multiple of {order}")
    x, w = leggauss(order)
    edges = np.linspace(a, b, n // order + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
    weights = 0.5 * (hi - lo) * w * np.ones_like(nodes)
    return nodes.ravel(), weights.ravel()


def momentum_nodes(p_extent: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric momentum nodes on ``[-p_extent, p_extent]``; no node sits at 0."""
    half, w = composite_gauss_legendre(0.0, p_extent, n // 2)
    return np.concatenate([-half[::-1], half]), np.concatenate([w[::-1], w])


SELECTORS2 = {
    "ee": lambda e, f, g: e * e,
    "ff": lambda e, f, g: f * f,
    "gg": lambda e, f, g: g * g,
    "ef": lambda e, f, g: e * f,
    "eg": lambda e, f, g: e * g,
    "fg": lambda e, f, g: f * g,
    "norm": lambda e, f, g: e * e + f * f + g * g,
}


@dataclass(frozen=True, eq=False)
class KernelTable2:
    """Kernels ``e0, f0, g0`` on a tensor grid ``p1 x p2`` with quadrature weights."""

    config: DetectorConfig
    p1: np.ndarray
    p2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    e0: np.ndarray
    f0: np.ndarray
    g0: np.ndarray
    # weighted position-space integrands, kept for off-grid evaluation
    _q1: np.ndarray = field(repr=False)
    _q2: np.ndarray = field(repr=False)
    _E: np.ndarray = field(repr=False)
    _F: np.ndarray = field(repr=False)
    _G: np.ndarray = field(repr=False)

    @property
    def sigmas(self) -> tuple[float, float]:
        return self.config.sigmas

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.w1, self.w2)

    @property
    def symmetric(self) -> bool:
        return self.sigmas[0] == self.sigmas[1]

    def evaluate(self, p1, p2, chunk: int = 4096):
        """Kernels at arbitrary momenta by direct quadrature (same accuracy as the grid)."""
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        shape = np.broadcast_shapes(p1.shape, p2.shape)
        a = np.broadcast_to(p1, shape).ravel()
        b = np.broadcast_to(p2, shape).ravel()
        out = np.empty((3, a.size))
        for s in range(0, a.size, chunk):
            x1 = np.outer(a[s : s + chunk], self._q1)
            x2 = np.outer(b[s : s + chunk], self._q2)
            c1, s1, c2, s2 = np.cos(x1), np.sin(x1), np.cos(x2), np.sin(x2)
            out[0, s : s + chunk] = np.einsum("ki,kj,ij->k", c1, c2, self._E, optimize=True)
            out[1, s : s + chunk] = np.einsum("ki,kj,ij->k", s1, c2, self._F, optimize=True)
            out[2, s : s + chunk] = np.einsum("ki,kj,ij->k", c1, s2, self._G, optimize=True)
        return tuple(o.reshape(shape) for o in out)

    def density(self, bloch, p1=None, p2=None):
        """Outcome density ``p(p1, p2)`` for the system state with Bloch vector ``bloch``.

        On the grid when ``p1``/``p2`` are omitted.  The ``sigma_z`` term
        ``-2 Im(g0 f0*)`` vanishes identically for real kernels.
        """
        if p1 is None:
            e, f, g = self.e0, self.f0, self.g0
        else:
            e, f, g = self.evaluate(p1, p2)
        x, y, _ = bloch
        return e * e + f * f + g * g + 2 * x * e * f + 2 * y * e * g

    def parity_defect(self) -> float:
        """Largest relative violation of the even/odd structure of the kernels."""
        scale = max(np.abs(self.e0).max(), np.abs(self.f0).max(), np.abs(self.g0).max())
        d = max(
            np.abs(self.e0 - self.e0[::-1, :]).max(),
            np.abs(self.e0 - self.e0[:, ::-1]).max(),
            np.abs(self.f0 + self.f0[::-1, :]).max(),
            np.abs(self.f0 - self.f0[:, ::-1]).max(),
            np.abs(self.g0 - self.g0[::-1, :]).max(),
            np.abs(self.g0 + self.g0[:, ::-1]).max(),
        )
        return float(d / scale)

    def quadrant_norm(self) -> float:
        m1, m2 = self.p1 >= 0, self.p2 >= 0
        n = (self.e0**2 + self.f0**2 + self.g0**2) * self.weights
        return float(n[np.ix_(m1, m2)].sum())


def build_kernel_table2(cfg: DetectorConfig) -> KernelTable2:
    if cfg.ndim != 2:
        raise PreconditionError("build_kernel_table2 needs exactly two detector widths")
    s1, s2 = cfg.sigmas
    P1, P2 = cfg.momentum_extents()
    q1, wq1 = position_nodes(s1, P1)
    q2, wq2 = position_nodes(s2, P2)
    Q1, Q2 = np.meshgrid(q1, q2, indexing="ij")
    e, f_im, g_im = unitary_kernels2(Q1, Q2)
    base = np.outer(wq1 * gaussian_psi(q1, s1), wq2 * gaussian_psi(q2, s2)) / (2.0 * np.pi)
    E, F, G = e * base, f_im * base, g_im * base

    p1, w1 = momentum_nodes(P1, cfg.grid_points)
    p2, w2 = momentum_nodes(P2, cfg.grid_points)
    C1, S1 = np.cos(np.outer(p1, q1)), np.sin(np.outer(p1, q1))
    C2, S2 = np.cos(np.outer(p2, q2)), np.sin(np.outer(p2, q2))
    e0 = C1 @ E @ C2.T
    f0 = S1 @ F @ C2.T
    g0 = C1 @ G @ S2.T
    table = KernelTable2(cfg, p1, p2, w1, w2, e0, f0, g0, q1, q2, E, F, G)
    defect = abs(table.quadrant_norm() - 0.25)
    if defect > NORM_TOL:
        raise KernelBuildError("kernel grid fails quadrant normalization 1/4", defect)
    return table


@dataclass(frozen=True)
class Region:
    """Momentum-plane region: optional sign constraints and/or an angular sector.

    ``p1``/``p2`` are +1 (``p >= 0``), -1 (``p < 0``) or ``None``; ``sector``
    is ``(theta_lo, theta_hi)`` in radians, measured from the ``p1`` axis.
    """

    p1: int | None = None
    p2: int | None = None
    sector: tuple[float, float] | None = None

    @classmethod
    def quadrant(cls, label: str) -> "Region":
        return cls(1 if label[0] == "+" else -1, 1 if label[1] == "+" else -1)


FULL = Region()


def _circle_pieces(lo: float, hi: float) -> list[tuple[float, float]]:
    """An arc [lo, hi] as sub-intervals of [0, 2 pi)."""
    if hi - lo >= 2 * np.pi:
        return [(0.0, 2 * np.pi)]
    if hi <= lo:
        return []
    a = lo % (2 * np.pi)
    b = a + (hi - lo)
    if b <= 2 * np.pi:
        return [(a, b)]
    return [(a, 2 * np.pi), (0.0, b - 2 * np.pi)]


def _intersect(xs, ys):
    out = []
    for a, b in xs:
        for c, d in ys:
            lo, hi = max(a, c), min(b, d)
            if hi > lo:
                out.append((lo, hi))
    return out


def _region_arcs(region: Region) -> list[tuple[float, float]]:
    arcs = _circle_pieces(*region.sector)
    if region.p1 is not None:
        arc = (-np.pi / 2, np.pi / 2) if region.p1 > 0 else (np.pi / 2, 3 * np.pi / 2)
        arcs = _intersect(arcs, _circle_pieces(*arc))
    if region.p2 is not None:
        arc = (0.0, np.pi) if region.p2 > 0 else (np.pi, 2 * np.pi)
        arcs = _intersect(arcs, _circle_pieces(*arc))
    return arcs


def polar_nodes(table: KernelTable2, arcs, n_theta_panel: int = 8, n_r: int | None = None):
    """Polar Gauss-Legendre nodes covering the given arcs, with ``p dp dtheta`` weights."""
    rmax = max(table.config.momentum_extents())
    n_r = n_r or table.config.grid_points // 2
    r, wr = composite_gauss_legendre(0.0, rmax, n_r)
    th_all, wth_all = [], []
    for lo, hi in arcs:
        panels = max(1, int(np.ceil((hi - lo) / (np.pi / 8))))
        th, wth = composite_gauss_legendre(lo, hi, panels * n_theta_panel, n_theta_panel)
        th_all.append(th)
        wth_all.append(wth)
    th = np.concatenate(th_all)
    wth = np.concatenate(wth_all)
    R, TH = np.meshgrid(r, th, indexing="ij")
    W = np.outer(wr * r, wth)
    return R, TH, W


def integrate_region2(table: KernelTable2, selector: str, region: Region = FULL) -> float:
    """Quadrature of a kernel product over a region of the momentum plane.

    Sign-only regions use the tensor grid; regions with an angular sector
    are integrated on polar nodes with kernels evaluated off-grid.
    """
    try:
        fn = SELECTORS2[selector]
    except KeyError:
        raise PreconditionError(f"unknown selector {selector!r}; choose from {sorted(SELECTORS2)}")
    if region.sector is None:
        vals = fn(table.e0, table.f0, table.g0) * table.weights
        m1 = np.ones(table.p1.size, bool) if region.p1 is None else (np.sign(region.p1) * table.p1 >= 0)
        m2 = np.ones(table.p2.size, bool) if region.p2 is None else (np.sign(region.p2) * table.p2 >= 0)
        return float(vals[np.ix_(m1, m2)].sum())
    arcs = _region_arcs(region)
    if not arcs:
        return 0.0
    R, TH, W = polar_nodes(table, arcs)
    e, f, g = table.evaluate(R * np.cos(TH), R * np.sin(TH))
    return float((fn(e, f, g) * W).sum())


@dataclass(frozen=True, eq=False)
class RadialTable:
    """Radial kernels for a rotationally symmetric pointer state.

    ``e0(p, theta) = e1(p)``, ``f0 = f1(p) cos(theta)``, ``g0 = f1(p) sin(theta)``.
    """

    sigma: float
    p: np.ndarray
    w: np.ndarray
    e1: np.ndarray
    f1: np.ndarray
    _r: np.ndarray = field(repr=False)
    _wr: np.ndarray = field(repr=False)

    def evaluate(self, p) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(p, dtype=float)
        x = np.multiply.outer(p, self._r)
        return j0(x) @ (self._wr * np.cos(self._r)), j1(x) @ (self._wr * np.sin(self._r))

    def normalization(self) -> float:
        return float(np.sum(self.w * (self.e1**2 + self.f1**2) * 2 * np.pi * self.p))

    def e1f1_moment(self) -> float:
        """``int e1 f1 p dp``, equal to a'/8."""
        return float(np.sum(self.w * self.e1 * self.f1 * self.p))

    @property
    def a_prime(self) -> float:
        return 8.0 * self.e1f1_moment()


def build_radial_table(sigma: float, p_max: float | None = None, n: int = 512) -> RadialTable:
    """Hankel-transform form of the kernels for ``sigma_1 = sigma_2 = sigma``.

    The angular integrals reduce to Bessel kernels::

        e1(p) = int_0^inf J0(p r) cos(r) phi(r) r dr
        f1(p) = int_0^inf J1(p r) sin(r) phi(r) r dr

    with ``phi(r) = psi(q1) psi(q2)`` the radial pointer amplitude.
    """
    if not sigma > 0:
        raise PreconditionError(f"sigma must be positive, got {sigma}")
    p_max = p_max or 1.0 + MOMENTUM_WINDOW / sigma
    rmax = POSITION_WINDOW * sigma
    panels = max(4, int(np.ceil(rmax * (p_max + 1.0) / np.pi)))
    r, wr = composite_gauss_legendre(0.0, rmax, panels * GL_ORDER)
    phi = np.exp(-(r**2) / (4 * sigma**2)) / np.sqrt(2 * np.pi * sigma**2)
    wr = wr * r * phi
    n_half = n - n % GL_ORDER
    p, w = composite_gauss_legendre(0.0, p_max, n_half)
    tab = RadialTable(float(sigma), p, w, np.empty(0), np.empty(0), r, wr)
    e1, f1 = tab.evaluate(p)
    tab = RadialTable(float(sigma), p, w, e1, f1, r, wr)
    residual = abs(tab.normalization() - 1.0)
    if residual > NORM_TOL:
        raise NumericalError(f"radial quadrature did not converge: normalization residual {residual:.3e}")
    return tab


@dataclass(frozen=True, eq=False)
class KernelTable3:
    """Kernels ``e0, f0, g0, h0`` on a dense 3D Gauss-Legendre grid.

    Used as the deterministic oracle for the Monte-Carlo three-detector path.
    """

    config: DetectorConfig
    p: tuple[np.ndarray, np.ndarray, np.ndarray]
    w: tuple[np.ndarray, np.ndarray, np.ndarray]
    e0: np.ndarray
    k0: np.ndarray  # (3, ...) stack of f0, g0, h0

    @property
    def weights(self) -> np.ndarray:
        return np.einsum("a,b,c->abc", *self.w)

    def normalization(self) -> float:
        return float(((self.e0**2 + (self.k0**2).sum(0)) * self.weights).sum())

    def marginal(self, axis: int) -> float:
        """``4 int_{p_axis >= 0} e0 k0[axis]``."""
        vals = self.e0 * self.k0[axis] * self.weights
        mask = self.p[axis] >= 0
        return 4.0 * float(np.take(vals, np.flatnonzero(mask), axis=axis).sum())

    def parity_defect(self) -> float:
        scale = max(np.abs(self.e0).max(), np.abs(self.k0).max())
        d = 0.0
        for ax in range(3):
            d = max(d, np.abs(self.e0 - np.flip(self.e0, ax)).max())
            for k in range(3):
                sign = -1.0 if k == ax else 1.0
                d = max(d, np.abs(self.k0[k] - sign * np.flip(self.k0[k], ax)).max())
        return float(d / scale)


def build_kernel_table3(cfg: DetectorConfig, n: int = 96) -> KernelTable3:
    if cfg.ndim != 3:
        raise PreconditionError("build_kernel_table3 needs exactly three detector widths")
    extents = cfg.momentum_extents()
    qs, bases = [], []
    for s, P in zip(cfg.sigmas, extents):
        q, wq = position_nodes(s, P)
        qs.append(q)
        bases.append(wq * gaussian_psi(q, s))
    Q = np.meshgrid(*qs, indexing="ij")
    e, f_im, g_im, h_im = unitary_kernels3(*Q)
    base = np.einsum("i,j,k->ijk", *bases) / (2 * np.pi) ** 1.5
    ps, ws, cs, ss = [], [], [], []
    for q, P in zip(qs, extents):
        p, w = momentum_nodes(P, n)
        ps.append(p)
        ws.append(w)
        cs.append(np.cos(np.outer(p, q)))
        ss.append(np.sin(np.outer(p, q)))

    def transform(arr, odd_axis):
        mats = [ss[a] if a == odd_axis else cs[a] for a in range(3)]
        return np.einsum("ai,bj,ck,ijk->abc", *mats, arr * base, optimize=True)

    e0 = transform(e, None)
    k0 = np.stack([transform(f_im, 0), transform(g_im, 1), transform(h_im, 2)])
    table = KernelTable3(cfg, tuple(ps), tuple(ws), e0, k0)
    defect = abs(table.normalization() - 1.0)
    if defect > NORM_TOL:
        raise KernelBuildError("3D kernel grid fails normalization", defect)
    return table
