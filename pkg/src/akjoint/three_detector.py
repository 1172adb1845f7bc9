"""Three-detector joint measurement of sigma_x, sigma_y and sigma_z.

Each detector's momentum sign is the outcome for one spin component, giving
eight effects ``(1 +- a' sigma_x +- b' sigma_y +- c' sigma_z)/8``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effects import SIGNS3, TOL, Effect, JointObservable3, build_joint3, is_valid_effect
from .errors import PreconditionError
from .fermat import ft_condition
from .kernels import DetectorConfig, build_kernel_table3
from .montecarlo import MCEstimate, mc_integrate3

ORTHOGONAL_BOUND = 1 / np.sqrt(3)


@dataclass(frozen=True)
class TripleMarginals:
    a_prime: MCEstimate
    b_prime: MCEstimate
    c_prime: MCEstimate
    sigmas: tuple[float, float, float]

    @property
    def values(self) -> np.ndarray:
        return np.array([self.a_prime.value, self.b_prime.value, self.c_prime.value])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([self.a_prime.stderr, self.b_prime.stderr, self.c_prime.stderr])


def compute_triple(cfg: DetectorConfig, threads: int = 1) -> TripleMarginals:
    """``a' = 4 int_{p1>=0} e0 f0`` and its two partners, by Monte Carlo."""
    if cfg.ndim != 3:
        raise PreconditionError("three detector widths are required")
    est = [mc_integrate3(cfg, sel, threads).scaled(4.0) for sel in ("ef", "eg", "eh")]
    return TripleMarginals(*est, cfg.sigmas)


def compute_triple_grid(cfg: DetectorConfig, n: int = 96) -> tuple[float, float, float]:
    """Deterministic dense-grid values of ``(a', b', c')``; the oracle for :func:`compute_triple`."""
    table = build_kernel_table3(cfg, n)
    return tuple(table.marginal(k) for k in range(3))


def sweep_triple(sigmas, cfg: DetectorConfig | None = None, threads: int = 1) -> list[TripleMarginals]:
    """Marginals along a list of width triples, in input order."""
    base = cfg or DetectorConfig((1.0, 1.0, 1.0))
    out = []
    for s in sigmas:
        s = tuple(float(v) for v in np.broadcast_to(s, 3))
        out.append(compute_triple(base.with_sigmas(*s), threads))
    return out


def triple_povm(values) -> dict[str, Effect]:
    """The eight effects for marginal unsharpness ``(a', b', c')``.

    Accepts a :class:`TripleMarginals` or a plain triple of numbers.
    """
    if isinstance(values, TripleMarginals):
        values = values.values
    a, b, c = (float(v) for v in values)
    j = JointObservable3.from_vectors((a, 0, 0), (0, b, 0), (0, 0, c))
    effects = build_joint3(j)
    for label, e in effects.items():
        if not is_valid_effect(e, TOL):
            raise PreconditionError(
                f"outcome {label} is not a valid effect for (a', b', c') = ({a:.6g}, {b:.6g}, {c:.6g})"
            )
    return effects


def povm_total(effects: dict[str, Effect]) -> Effect:
    total = Effect(0.0)
    for key in SIGNS3:
        total = total + effects[key]
    return total


@dataclass(frozen=True)
class NecessaryReport:
    l: tuple[float, float, float]
    m: tuple[float, float, float]
    n: tuple[float, float, float]
    min_total: float
    holds: bool
    orthogonal: bool
    sum_of_squares: float
    pairwise_ok: bool


def check_necessary(l, m=None, n=None) -> NecessaryReport:
    """Fermat-Toricelli necessary condition for an unbiased triple.

    Pass either three vectors, or a :class:`TripleMarginals` / number triple
    read as ``(a' x, b' y, c' z)``.
    """
    if m is None:
        vals = l.values if isinstance(l, TripleMarginals) else np.asarray(l, dtype=float)
        l, m, n = np.diag(vals)
    l, m, n = (np.asarray(v, dtype=float) for v in (l, m, n))
    cond = ft_condition(l, m, n)
    dots = (abs(l @ m), abs(m @ n), abs(n @ l))
    orthogonal = max(dots) <= 1e-12
    sq = float(l @ l + m @ m + n @ n)
    pairwise = all(
        np.linalg.norm(u + v) + np.linalg.norm(u - v) <= 2 + 1e-9 for u, v in ((l, m), (m, n), (n, l))
    )
    return NecessaryReport(tuple(l), tuple(m), tuple(n), cond.min_total, cond.holds, orthogonal, sq, pairwise)
