"""Stratified Monte-Carlo integration of three-detector kernel products.

Storing the 3D kernels on a dense grid is the oracle path
(:func:`akjoint.kernels.build_kernel_table3`); the default path samples in a
mixed representation instead.  Parseval's theorem over the two momenta
transverse to a chosen direction ``n`` turns

    int_{p.n >= 0} e0(p) k0_j(p) d^3p

into an integral over ``(p_n, t)`` where ``p_n`` is the momentum along ``n``
and ``t`` the transverse *position*.  The transverse factor is exactly the
Gaussian density ``|psi(t)|^2``, so ``t`` is drawn from it with unit weight;
``p_n`` is drawn half-normal, and the remaining 1D transform along ``n`` is a
short trapezoid sum evaluated per sample.

Strata tile the unit cube of the three uniform variates; each stratum has its
own RNG stream derived from ``(seed, stratum)`` so results are bit-identical
for a fixed seed regardless of execution order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import ndtri

from .errors import NumericalError, PreconditionError
from .kernels import POSITION_WINDOW, SINC_SERIES_BELOW, DetectorConfig

SELECTORS3 = ("ef", "eg", "eh", "norm")
_AXIS = {"ef": 0, "eg": 1, "eh": 2}


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_samples: int

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be non-negative")

    def scaled(self, c: float) -> "MCEstimate":
        return MCEstimate(c * self.value, abs(c) * self.stderr, self.n_samples)

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.stderr


def stratified_mc(sampler, dim: int, n_samples: int, strata: int, seed: int, threads: int = 1) -> MCEstimate:
    """Integrate over the unit cube with ``strata**dim`` equal cells and proportional allocation.

    ``sampler(u)`` maps an ``(n, dim)`` array of uniform points to integrand
    values.  The standard error combines per-stratum sample variances.
    """
    cells = strata**dim
    per = n_samples // cells
    if per < 2:
        raise PreconditionError(f"{n_samples} samples cannot cover {cells} strata with two samples each")
    vol = 1.0 / cells

    def one(h: int):
        idx = np.array(np.unravel_index(h, (strata,) * dim))
        rng = np.random.default_rng([seed, h])
        u = (idx + rng.random((per, dim))) / strata
        vals = sampler(u)
        bad = ~np.isfinite(vals)
        if bad.any():
            k = int(np.argmax(bad))
            raise NumericalError(f"non-finite integrand {vals[k]} at unit-cube point {u[k].tolist()} (stratum {h})")
        return vals.mean(), vals.var(ddof=1) / per

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(one, range(cells)))
    else:
        parts = [one(h) for h in range(cells)]
    mean = np.array([m for m, _ in parts])
    var = np.array([v for _, v in parts])
    return MCEstimate(float(vol * mean.sum()), float(vol * np.sqrt(var.sum())), per * cells)


@njit(cache=True, nogil=True)
def _sinc(R):
    if R < SINC_SERIES_BELOW:
        R2 = R * R
        return 1.0 - R2 / 6.0 + R2 * R2 / 120.0
    return np.sin(R) / R


@njit(cache=True, nogil=True)
def _axis_products(p, ta, tb, q, w, out_ek, out_norm):
    """Along-axis transforms per sample; the pointer state is a product so ``t`` decouples.

    ``E = int cos(p q) cos R psi``, ``K = int sin(p q) q sinc R psi`` and the
    transverse partner ``Kt = int cos(p q) sinc R psi`` (times ``t``), all on
    the half line with doubled weights folded into ``w``.
    """
    m = q.shape[0]
    dq = q[1] - q[0]
    for s in range(p.shape[0]):
        rho2 = ta[s] * ta[s] + tb[s] * tb[s]
        # cos/sin(p q_i) by rotation, q_i = i dq
        cstep, sstep = np.cos(p[s] * dq), np.sin(p[s] * dq)
        c, sn = 1.0, 0.0
        E = 0.0
        K = 0.0
        Kt = 0.0
        for i in range(m):
            R = np.sqrt(q[i] * q[i] + rho2)
            sc = _sinc(R)
            E += w[i] * c * np.cos(R)
            K += w[i] * sn * q[i] * sc
            Kt += w[i] * c * sc
            c, sn = c * cstep - sn * sstep, sn * cstep + c * sstep
        out_ek[s] = E * K
        out_norm[s] = E * E + K * K + Kt * Kt * rho2


@njit(cache=True, nogil=True)
def _direction_products(p, t, basis, cond_mean, cond_sd, nodes, w, out_ek, out_norm):
    """General direction: complex transform along ``n`` of the conditional pointer amplitude.

    ``basis`` rows are ``(n, u, v)``; ``t`` holds transverse coordinates.
    ``nodes`` are standardised full-line positions ``(s - mu)/sd``.
    """
    m = nodes.shape[0]
    for k in range(p.shape[0]):
        mu = cond_mean[0] * t[k, 0] + cond_mean[1] * t[k, 1]
        Er = 0.0
        Ei = 0.0
        Kr = np.zeros(3)
        Ki = np.zeros(3)
        for i in range(m):
            s = mu + cond_sd * nodes[i]
            q0 = s * basis[0, 0] + t[k, 0] * basis[1, 0] + t[k, 1] * basis[2, 0]
            q1 = s * basis[0, 1] + t[k, 0] * basis[1, 1] + t[k, 1] * basis[2, 1]
            q2 = s * basis[0, 2] + t[k, 0] * basis[1, 2] + t[k, 1] * basis[2, 2]
            R = np.sqrt(q0 * q0 + q1 * q1 + q2 * q2)
            sc = _sinc(R)
            ph = p[k] * s
            c, sn = np.cos(ph), -np.sin(ph)
            er = w[i] * np.cos(R)
            Er += er * c
            Ei += er * sn
            f = w[i] * sc
            Kr[0] += f * q0 * c
            Ki[0] += f * q0 * sn
            Kr[1] += f * q1 * c
            Ki[1] += f * q1 * sn
            Kr[2] += f * q2 * c
            Ki[2] += f * q2 * sn
        # k0 = i * K, so Re(E conj(i K)) = Im(E conj(K))
        nrm = Er * Er + Ei * Ei
        for j in range(3):
            out_ek[k, j] = Ei * Kr[j] - Er * Ki[j]
            nrm += Kr[j] * Kr[j] + Ki[j] * Ki[j]
        out_norm[k] = nrm


def _axis_nodes(sigma: float, p_extent: float):
    # The trapezoid rule on a Gaussian-damped integrand aliases at 2 pi/dq - p;
    # dq = pi/P keeps that beyond every momentum the sampler draws with any weight.
    qmax = POSITION_WINDOW * sigma
    dq = np.pi / p_extent
    n = max(int(np.ceil(qmax / dq)) + 1, 16)
    q = np.arange(n) * dq
    w = np.full(n, dq)
    w[0] *= 0.5
    psi = (2 * np.pi * sigma**2) ** -0.25 * np.exp(-(q**2) / (4 * sigma**2))
    return q, 2.0 * w * psi / np.sqrt(2 * np.pi)


def _half_normal(u, scale):
    p = scale * ndtri(0.5 + 0.5 * u)
    pdf = 2.0 * np.exp(-0.5 * (p / scale) ** 2) / (scale * np.sqrt(2 * np.pi))
    return p, pdf


def _momentum_scale(sigma: float) -> float:
    # |kernels|^2 decays like exp(-2 sigma^2 (p - 1)^2) along an axis; a
    # somewhat wider half-normal keeps the importance ratio bounded.
    return 1.0 + 1.0 / (2.0 * sigma)


def mc_integrate3(cfg: DetectorConfig, selector: str, threads: int = 1) -> MCEstimate:
    """Monte-Carlo estimate of a three-detector kernel integral.

    ``ef``/``eg``/``eh``: ``int e0 k0_j`` over the half-space ``p_j >= 0``
    (times 4 this is the marginal unsharpness).  ``norm``: the full-space
    integral of ``e0^2 + f0^2 + g0^2 + h0^2``.
    """
    if cfg.ndim != 3:
        raise PreconditionError("mc_integrate3 needs three detector widths")
    if selector not in SELECTORS3:
        raise PreconditionError(f"unknown selector {selector!r}; choose from {SELECTORS3}")
    axis = _AXIS.get(selector, 0)
    sig = cfg.sigmas[axis]
    others = [cfg.sigmas[k] for k in range(3) if k != axis]
    q, w = _axis_nodes(sig, cfg.momentum_extents()[axis])
    scale = _momentum_scale(sig)
    want_norm = selector == "norm"

    def sampler(u):
        p, pdf = _half_normal(u[:, 0], scale)
        ta = others[0] * ndtri(u[:, 1])
        tb = others[1] * ndtri(u[:, 2])
        ek = np.empty(len(p))
        nrm = np.empty(len(p))
        _axis_products(p, ta, tb, q, w, ek, nrm)
        # norm integrand is even in p_n, so the half line counts twice
        return 2.0 * nrm / pdf if want_norm else ek / pdf

    seed = _stream_seed(cfg.seed, selector)
    return stratified_mc(sampler, 3, cfg.mc_samples, cfg.mc_strata, seed, threads)


def _stream_seed(seed: int, tag: str) -> list[int]:
    # distinct, reproducible streams per integral so estimates are independent
    return [int(seed), sum(ord(c) << (8 * i) for i, c in enumerate(tag))]


def orthonormal_frame(n) -> np.ndarray:
    """Rows ``(n, u, v)``: a right-handed orthonormal frame with first axis ``n``."""
    n = np.asarray(n, dtype=float)
    norm = np.linalg.norm(n)
    if not norm > 0:
        raise PreconditionError("direction must be non-zero")
    n = n / norm
    helper = np.eye(3)[np.argmin(np.abs(n))]
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    return np.array([n, u, np.cross(n, u)])


@dataclass(frozen=True)
class DirectionalEstimate:
    """``4 int_{p.n >= 0} e0 k0`` (a 3-vector) and the full-space normalization."""

    direction: np.ndarray
    vector: tuple[MCEstimate, MCEstimate, MCEstimate]
    norm: MCEstimate

    @property
    def values(self) -> np.ndarray:
        return np.array([v.value for v in self.vector])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([v.stderr for v in self.vector])


def mc_direction3(cfg: DetectorConfig, direction, threads: int = 1) -> DirectionalEstimate:
    """Effect vector for measuring momentum along an arbitrary unit direction.

    The pointer density in the rotated frame is a correlated Gaussian; the
    transverse coordinates are sampled from their marginal and the 1D
    transform uses the conditional amplitude along ``direction``.
    """
    if cfg.ndim != 3:
        raise PreconditionError("mc_direction3 needs three detector widths")
    frame = orthonormal_frame(direction)
    cov = frame @ np.diag(np.square(cfg.sigmas)) @ frame.T
    c_tt = cov[1:, 1:]
    c_st = cov[0, 1:]
    cond_mean = np.linalg.solve(c_tt, c_st)
    cond_var = cov[0, 0] - c_st @ cond_mean
    cond_sd = float(np.sqrt(cond_var))
    chol = np.linalg.cholesky(c_tt)
    extent = max(cfg.momentum_extents())
    # full-line nodes s = mu + sd z, |z| <= 12 where the amplitude is negligible
    dz = np.pi / (extent * cond_sd)
    half = int(np.ceil(POSITION_WINDOW / dz))
    z = np.arange(-half, half + 1) * dz
    amp = (2 * np.pi * cond_var) ** -0.25 * np.exp(-(z**2) / 4)
    w = dz * cond_sd * amp / np.sqrt(2 * np.pi)
    scale = _momentum_scale(min(cfg.sigmas))

    def run(component: int | None):
        def sampler(u):
            p, pdf = _half_normal(u[:, 0], scale)
            t = ndtri(u[:, 1:]) @ chol.T
            ek = np.empty((len(p), 3))
            nrm = np.empty(len(p))
            _direction_products(p, t, frame, cond_mean, cond_sd, z, w, ek, nrm)
            return 2.0 * nrm / pdf if component is None else 4.0 * (ek[:, component] / pdf)

        tag = "dn" if component is None else f"d{component}"
        return stratified_mc(sampler, 3, cfg.mc_samples, cfg.mc_strata, _stream_seed(cfg.seed, tag), threads)

    local = [run(j) for j in range(3)]
    return DirectionalEstimate(frame[0], tuple(local), run(None))


def mc_integrate2(table, selector: str, n_samples: int = 2**18, strata: int = 16, seed: int = 0) -> MCEstimate:
    """Stratified MC over the ``p1 >= 0`` half-plane using off-grid kernel evaluation.

    Exists to validate the estimator against the deterministic 2D grid.
    """
    from .kernels import SELECTORS2

    fn = SELECTORS2[selector]
    s1, s2 = table.sigmas
    sc1, sc2 = 1.0 / (np.sqrt(2) * s1), 1.0 / (np.sqrt(2) * s2)
    sc1, sc2 = 1.0 + sc1, 1.0 + sc2

    def sampler(u):
        p1, pdf1 = _half_normal(u[:, 0], sc1)
        p2 = sc2 * ndtri(u[:, 1])
        pdf2 = np.exp(-0.5 * (p2 / sc2) ** 2) / (sc2 * np.sqrt(2 * np.pi))
        e, f, g = table.evaluate(p1, p2)
        return fn(e, f, g) / (pdf1 * pdf2)

    return stratified_mc(sampler, 2, n_samples, strata, seed)
