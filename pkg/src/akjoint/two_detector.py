"""Two-detector joint measurement of sigma_x and sigma_y.

Each detector's momentum sign is the outcome for one spin component.  The
resulting joint POVM is ``G_{s1 s2} = (1 + s1 a' sigma_x + s2 b' sigma_y)/4``
with marginal unsharpness ``a'``, ``b'`` fixed by the kernel table.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .effects import PAULI, SIGNS2, TOL, Effect, JointObservable2, UnsharpObservable, build_joint2
from .errors import PreconditionError
from .kernels import DetectorConfig, KernelTable2, Region, build_kernel_table2, integrate_region2

LABELS = SIGNS2


def _signs(label: str) -> tuple[int, int]:
    if label not in LABELS:
        raise PreconditionError(f"outcome must be one of {LABELS}, got {label!r}")
    return (1 if label[0] == "+" else -1), (1 if label[1] == "+" else -1)


@dataclass(frozen=True)
class BlochState:
    r: tuple[float, float, float]

    def __post_init__(self):
        r = tuple(float(c) for c in np.asarray(self.r, dtype=float).reshape(3))
        object.__setattr__(self, "r", r)
        if np.linalg.norm(r) > 1 + TOL:
            raise PreconditionError(f"Bloch vector {r} lies outside the unit ball")

    @property
    def x(self) -> float:
        return self.r[0]

    @property
    def y(self) -> float:
        return self.r[1]

    @property
    def z(self) -> float:
        return self.r[2]

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.r)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.r))

    def matrix(self) -> np.ndarray:
        return 0.5 * (np.eye(2) + np.einsum("i,ijk->jk", self.vector, PAULI))

    @classmethod
    def from_matrix(cls, rho: np.ndarray) -> "BlochState":
        rho = rho / np.trace(rho).real
        return cls(tuple(np.real(np.einsum("ijk,kj->i", PAULI, rho))))

    def rotated_z(self, theta: float) -> "BlochState":
        c, s = np.cos(theta), np.sin(theta)
        return BlochState((c * self.x - s * self.y, s * self.x + c * self.y, self.z))


MIXED = BlochState((0.0, 0.0, 0.0))


@dataclass(frozen=True)
class MarginalPair:
    a_prime: float
    b_prime: float
    sigmas: tuple[float, float] = (float("nan"), float("nan"))

    @property
    def uncertainty_lhs(self) -> float:
        return self.a_prime**2 + self.b_prime**2


def compute_marginals(table: KernelTable2) -> MarginalPair:
    """``a' = 4 int_{p1>=0} e0 f0`` and ``b' = 4 int_{p2>=0} e0 g0``."""
    a = 4.0 * integrate_region2(table, "ef", Region(p1=1))
    b = 4.0 * integrate_region2(table, "eg", Region(p2=1))
    return MarginalPair(a, b, table.sigmas)


def marginals_for(sigma_a: float, sigma_b: float, cfg: DetectorConfig | None = None) -> MarginalPair:
    cfg = (cfg or DetectorConfig((1.0, 1.0))).with_sigmas(sigma_a, sigma_b)
    return compute_marginals(build_kernel_table2(cfg))


def sweep_marginals(pairs, cfg: DetectorConfig | None = None, threads: int = 1) -> list[MarginalPair]:
    """Marginals for each ``(sigma_a, sigma_b)``, returned in input order."""
    pairs = [tuple(map(float, p)) for p in pairs]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda p: marginals_for(*p, cfg), pairs))
    return [marginals_for(a, b, cfg) for a, b in pairs]


def joint_povm(mp: MarginalPair) -> dict[str, Effect]:
    j = JointObservable2(
        UnsharpObservable(0.0, (mp.a_prime, 0.0, 0.0)),
        UnsharpObservable(0.0, (0.0, mp.b_prime, 0.0)),
        0.0,
        (0.0, 0.0, 0.0),
    )
    return build_joint2(j)


def outcome_probabilities(mp: MarginalPair, chi: BlochState) -> dict[str, float]:
    out = {}
    for label in LABELS:
        s1, s2 = _signs(label)
        out[label] = 0.25 * (1.0 + s1 * mp.a_prime * chi.x + s2 * mp.b_prime * chi.y)
    return out


@dataclass(frozen=True)
class QuadrantCoefficients:
    """Kernel-product integrals over one outcome quadrant."""

    ef: float
    eg: float
    fg: float
    ff: float
    gg: float
    ee: float


def quadrant_coefficients(table: KernelTable2, outcome: str = "++") -> QuadrantCoefficients:
    region = Region.quadrant(outcome)
    return QuadrantCoefficients(
        *(integrate_region2(table, s, region) for s in ("ef", "eg", "fg", "ff", "gg", "ee"))
    )


@dataclass(frozen=True)
class PostState:
    outcome: str
    probability: float
    state: BlochState

    @property
    def bloch_magnitude(self) -> float:
        return self.state.norm

    @property
    def uncertainty_product(self) -> float:
        """``Delta sigma_x * Delta sigma_y`` in the post-measurement state."""
        x, y, _ = self.state.r
        return float(np.sqrt(max(0.0, 1 - x * x) * max(0.0, 1 - y * y)))

    @property
    def angle_to_x_deg(self) -> float:
        return float(np.degrees(np.arctan2(self.state.y, self.state.x)))


def post_state(table: KernelTable2, chi: BlochState, outcome: str = "++") -> PostState:
    """Post-measurement Bloch vector from the closed-form quadrant expressions.

    For ``++``::

        x' = (a'/2 + 4 y c_fg + 2 x (1/4 - 2 c_gg)) / (x a' + y b' + 1)
        y' = (b'/2 + 4 x c_fg + 2 y (1/4 - 2 c_ff)) / (x a' + y b' + 1)
        z' = 2 z (1/4 - 2 (c_ff + c_gg)) / (x a' + y b' + 1)

    Other outcomes use the same expressions with each coefficient integrated
    over that outcome's quadrant (``a'/2 -> 4 int_Q e0 f0`` and so on).
    These expressions give exactly half of the Bloch vector obtained from
    the Kraus operators (see :func:`post_state_physical`); the direction and
    the outcome probability agree.
    """
    c = quadrant_coefficients(table, outcome)
    x, y, z = chi.r
    denom = 1.0 + 8.0 * (x * c.ef + y * c.eg)
    prob = denom / 4.0
    if prob <= TOL:
        raise PreconditionError(f"outcome {outcome} has zero probability for state {chi.r}")
    quarter = 0.25
    xp = (4 * c.ef + 4 * y * c.fg + 2 * x * (quarter - 2 * c.gg)) / denom
    yp = (4 * c.eg + 4 * x * c.fg + 2 * y * (quarter - 2 * c.ff)) / denom
    zp = 2 * z * (quarter - 2 * (c.ff + c.gg)) / denom
    return PostState(outcome, float(prob), BlochState((xp, yp, zp)))


def kraus_coefficients(table: KernelTable2, outcome: str = "++") -> np.ndarray:
    """Gram matrix ``C[a, b] = int_Q k_a k_b`` of ``k = (e0, f0, g0)`` over the quadrant."""
    m1 = _signs(outcome)[0] * table.p1 >= 0
    m2 = _signs(outcome)[1] * table.p2 >= 0
    w = table.weights[np.ix_(m1, m2)]
    ks = [k[np.ix_(m1, m2)] for k in (table.e0, table.f0, table.g0)]
    return np.array([[np.sum(w * a * b) for b in ks] for a in ks])


def post_state_physical(table: KernelTable2, chi: BlochState, outcome: str = "++") -> PostState:
    """Post-measurement state built directly as ``int_Q T rho T`` with ``T = e0 + f0 sx + g0 sy``."""
    C = kraus_coefficients(table, outcome)
    ops = [np.eye(2), PAULI[0], PAULI[1]]
    rho = chi.matrix()
    out = sum(C[a, b] * ops[a] @ rho @ ops[b] for a in range(3) for b in range(3))
    prob = float(np.trace(out).real)
    if prob <= TOL:
        raise PreconditionError(f"outcome {outcome} has zero probability for state {chi.r}")
    return PostState(outcome, prob, BlochState.from_matrix(out))


def oblique_probabilities(a_prime: float, theta: float, chi: BlochState) -> dict[str, float]:
    """Outcome probabilities when the second momentum is read along angle ``theta``.

    Labels give the signs of ``p.x`` and ``p.(cos theta, sin theta)``.
    Requires identical detector widths so that ``a' = b'``.
    """
    if not 0.0 <= theta <= np.pi:
        raise PreconditionError(f"theta must lie in [0, pi], got {theta}")
    x, y = chi.x, chi.y
    c, s = np.cos(theta), np.sin(theta)
    same = 0.5 - theta / (2 * np.pi)
    cross = theta / (2 * np.pi)
    q = a_prime / 4
    return {
        "++": float(same + q * (1 + c) * x + q * s * y),
        "+-": float(cross + q * (1 - c) * x - q * s * y),
        "-+": float(cross + q * (c - 1) * x + q * s * y),
        "--": float(same - q * (1 + c) * x - q * s * y),
    }


def oblique_probabilities_numeric(table: KernelTable2, theta: float, chi: BlochState) -> dict[str, float]:
    """Same probabilities by direct sector quadrature of the outcome density."""
    out = {}
    x, y = chi.x, chi.y
    for label in LABELS:
        s1, s2 = _signs(label)
        # p.x has sign s1 and p.d has sign s2: an angular sector
        lo1 = -np.pi / 2 if s1 > 0 else np.pi / 2
        lo2 = theta - np.pi / 2 if s2 > 0 else theta + np.pi / 2
        lo, hi = max(lo1, lo2), min(lo1, lo2) + np.pi
        if hi <= lo:  # the two half-planes overlap across the branch cut
            lo1 += 2 * np.pi
            lo, hi = max(lo1, lo2), min(lo1, lo2) + np.pi
        region = Region(sector=(lo, hi))
        out[label] = (
            integrate_region2(table, "norm", region)
            + 2 * x * integrate_region2(table, "ef", region)
            + 2 * y * integrate_region2(table, "eg", region)
        )
    return out


def symmetry_probe(
    table: KernelTable2,
    chi: BlochState,
    symmetry: str = "reflect_p2",
    theta: float = np.pi / 3,
    n_probe: int = 200,
    seed: int = 0,
) -> float:
    """Largest density mismatch between a state and its transformed partner.

    ``reflect_p2``: ``P_chi(p1, p2) = P_{sx chi}(p1, -p2)``.
    ``reflect_p1``: ``P_chi(p1, p2) = P_{sy chi}(-p1, p2)``.
    ``rotation``: ``P_chi(p) = P_{R chi}(R p)`` for a rotation by ``theta``
    about z, which needs rotationally invariant detectors.
    Densities are evaluated off-grid at random probe momenta.
    """
    rng = np.random.default_rng(seed)
    extent = 0.5 * min(table.config.momentum_extents())
    p = rng.uniform(-extent, extent, size=(n_probe, 2))
    x, y, z = chi.r
    if symmetry == "reflect_p2":
        partner = BlochState((x, -y, -z))
        q = p * [1, -1]
    elif symmetry == "reflect_p1":
        partner = BlochState((-x, y, -z))
        q = p * [-1, 1]
    elif symmetry == "rotation":
        if not table.symmetric:
            raise PreconditionError("rotation symmetry needs equal detector widths")
        partner = chi.rotated_z(theta)
        c, s = np.cos(theta), np.sin(theta)
        q = p @ np.array([[c, s], [-s, c]])
    else:
        raise PreconditionError(f"unknown symmetry {symmetry!r}")
    lhs = table.density(chi.r, p[:, 0], p[:, 1])
    rhs = table.density(partner.r, q[:, 0], q[:, 1])
    return float(np.max(np.abs(lhs - rhs)))
