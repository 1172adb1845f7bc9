"""Closed-form qubit effect algebra.

A qubit effect is stored as ``(gamma, v)`` and stands for the operator
``(gamma * I + v . sigma) / 2``.  Its eigenvalues are ``(gamma +- |v|) / 2``,
so it is a valid effect iff ``|v| <= gamma <= 2 - |v|``.

Two-outcome observables, the four-outcome joint observables of a pair and the
eight-outcome joint observables of a triple are built from these.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

# Analytically saturated cases (projectors, orthogonal boundary) must pass.
TOL = 1e-12

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

SIGNS2 = ("++", "+-", "-+", "--")
SIGNS3 = tuple("".join(s) for s in itertools.product("+-", repeat=3))


def _vec3(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(3)
    arr.setflags(write=False)
    return arr


def _sign(ch: str) -> int:
    return 1 if ch == "+" else -1


@dataclass(frozen=True, eq=False)
class Effect:
    """The operator ``(gamma * I + v . sigma) / 2``."""

    gamma: float
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "v", _vec3(self.v))

    def __add__(self, other: "Effect") -> "Effect":
        return Effect(self.gamma + other.gamma, self.v + other.v)

    def __sub__(self, other: "Effect") -> "Effect":
        return Effect(self.gamma - other.gamma, self.v - other.v)

    def __neg__(self) -> "Effect":
        return Effect(-self.gamma, -self.v)

    def scaled(self, c: float) -> "Effect":
        return Effect(c * self.gamma, c * self.v)

    def matrix(self) -> np.ndarray:
        return 0.5 * (self.gamma * np.eye(2) + np.einsum("i,ijk->jk", self.v, PAULI))

    def eigenvalues(self) -> tuple[float, float]:
        r = float(np.linalg.norm(self.v))
        return 0.5 * (self.gamma - r), 0.5 * (self.gamma + r)

    def margin(self) -> float:
        """Signed distance to the boundary of the effect set (>= 0 iff valid)."""
        r = float(np.linalg.norm(self.v))
        return min(self.gamma - r, 2.0 - self.gamma - r)

    def probability(self, bloch) -> float:
        """``tr(rho E)`` for the state with Bloch vector ``bloch``."""
        return 0.5 * (self.gamma + float(np.dot(self.v, bloch)))

    def isclose(self, other: "Effect", atol: float = 1e-12) -> bool:
        return abs(self.gamma - other.gamma) <= atol and bool(
            np.all(np.abs(self.v - other.v) <= atol)
        )

    def __repr__(self) -> str:
        v = ", ".join(f"{c:.6g}" for c in self.v)
        return f"Effect(gamma={self.gamma:.6g}, v=({v}))"


IDENTITY = Effect(2.0, np.zeros(3))


def is_valid_effect(e: Effect, tol: float = TOL) -> bool:
    r = float(np.linalg.norm(e.v))
    return r <= e.gamma + tol and e.gamma <= 2.0 - r + tol


def observable_distance(A: Effect, B: Effect) -> float:
    """Worst-case difference of outcome probabilities between two observables.

    ``A`` and ``B`` are the '+' effects ``(alpha I + a.sigma)/2`` and
    ``(beta I + b.sigma)/2``; the '-' effects are their complements.  The
    supremum over states is attained on an eigenstate of ``(a - b).sigma``.
    """
    return 0.5 * float(np.linalg.norm(A.v - B.v)) + 0.5 * abs(A.gamma - B.gamma)


def d0_bound(theta: float) -> float:
    """Minimal summed distance ``D0`` to two sharp spin observables at angle ``theta``."""
    return (np.cos(theta / 2) + np.sin(theta / 2) - 1.0) / np.sqrt(2.0)


def jm_unbiased_ok(a, b, tol: float = TOL) -> bool:
    """Joint measurability of the unbiased pair ``(I +- a.sigma)/2``, ``(I +- b.sigma)/2``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a + b) + np.linalg.norm(a - b)) <= 2.0 + tol


@dataclass(frozen=True, eq=False)
class UnsharpObservable:
    """Two-outcome observable with effects ``(I +- (x I + m.sigma)) / 2``."""

    x: float = 0.0
    m: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "m", _vec3(self.m))

    @property
    def plus(self) -> Effect:
        return Effect(1.0 + self.x, self.m)

    @property
    def minus(self) -> Effect:
        return Effect(1.0 - self.x, -self.m)

    def effect(self, sign: str) -> Effect:
        return self.plus if sign == "+" else self.minus

    def is_valid(self, tol: float = TOL) -> bool:
        return abs(self.x) + float(np.linalg.norm(self.m)) <= 1.0 + tol


@dataclass(frozen=True, eq=False)
class JointObservable2:
    """Joint observable for a pair, parametrized by the free pair ``(Z, z)``."""

    obs1: UnsharpObservable
    obs2: UnsharpObservable
    Z: float = 0.0
    z: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "Z", float(self.Z))
        object.__setattr__(self, "z", _vec3(self.z))


def build_joint2(j: JointObservable2) -> dict[str, Effect]:
    """The four effects ``G_ab = [1 + ax + by + abZ + (ab z + a m + b n).sigma] / 4``."""
    x, m = j.obs1.x, j.obs1.m
    y, n = j.obs2.x, j.obs2.m
    out = {}
    for key in SIGNS2:
        a, b = _sign(key[0]), _sign(key[1])
        scalar = 1.0 + a * x + b * y + a * b * j.Z
        vec = a * b * j.z + a * m + b * n
        # (scalar + vec.sigma)/4 == (gamma I + v.sigma)/2 with gamma = scalar/2
        out[key] = Effect(scalar / 2.0, vec / 2.0)
    return out


def joint2_marginals(effects: dict[str, Effect]) -> tuple[dict[str, Effect], dict[str, Effect]]:
    first = {s: effects[s + "+"] + effects[s + "-"] for s in "+-"}
    second = {s: effects["+" + s] + effects["-" + s] for s in "+-"}
    return first, second


def joint2_is_valid(j: JointObservable2, tol: float = TOL) -> bool:
    return all(is_valid_effect(e, tol) for e in build_joint2(j).values())


def joint2_margin(j: JointObservable2) -> float:
    return min(e.margin() for e in build_joint2(j).values())


@dataclass(frozen=True)
class CompletionSearch:
    feasible: bool
    margin: float
    Z: float
    z: np.ndarray


def find_joint2_completion(
    obs1: UnsharpObservable,
    obs2: UnsharpObservable,
    grid: int = 9,
    accept: float = -1e-8,
) -> CompletionSearch:
    """Brute-force search for ``(Z, z)`` making all four joint effects valid.

    This is an oracle, not an optimal algorithm: a regular grid over
    ``Z in [-1, 1]`` and ``z in [-1, 1]^3`` picks a start, then Nelder-Mead
    maximizes the smallest effect margin.  ``feasible`` is true when the best
    margin found is at least ``accept``.
    """
    ticks = np.linspace(-1.0, 1.0, grid)
    best, best_margin = None, -np.inf
    for Z, z1, z2, z3 in itertools.product(ticks, repeat=4):
        mg = joint2_margin(JointObservable2(obs1, obs2, Z, (z1, z2, z3)))
        if mg > best_margin:
            best, best_margin = np.array([Z, z1, z2, z3]), mg

    def neg_margin(params):
        return -joint2_margin(JointObservable2(obs1, obs2, params[0], params[1:]))

    res = minimize(
        neg_margin,
        best,
        method="Nelder-Mead",
        options={"xatol": 1e-13, "fatol": 1e-15, "maxiter": 20000, "maxfev": 40000},
    )
    if -res.fun > best_margin:
        best, best_margin = res.x, -res.fun
    return CompletionSearch(best_margin >= accept, float(best_margin), float(best[0]), _vec3(best[1:]))


def unbiased_completion(m, n) -> tuple[float, np.ndarray]:
    """Closed-form ``(Z, z)`` for an unbiased pair: ``z = 0``, ``Z = (|m+n| - |m-n|)/2``.

    Valid exactly when ``jm_unbiased_ok(m, n)``.
    """
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    Z = 0.5 * (np.linalg.norm(m + n) - np.linalg.norm(m - n))
    return float(Z), np.zeros(3)


@dataclass(frozen=True, eq=False)
class JointObservable3:
    """Joint observable for a triple of two-outcome observables.

    ``Z[k]`` and ``zs[k]`` (k = 0..3) are the coefficients of ``ab``, ``bc``,
    ``ca`` and ``abc`` respectively.
    """

    obs1: UnsharpObservable
    obs2: UnsharpObservable
    obs3: UnsharpObservable
    Z: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    zs: np.ndarray = field(default_factory=lambda: np.zeros((4, 3)))

    def __post_init__(self):
        Z = tuple(float(v) for v in self.Z)
        if len(Z) != 4:
            raise ValueError("Z must have four entries")
        zs = np.asarray(self.zs, dtype=float).reshape(4, 3).copy()
        zs.setflags(write=False)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "zs", zs)

    @classmethod
    def from_vectors(cls, l, m, n, x=0.0, y=0.0, z=0.0, Z=(0, 0, 0, 0), zs=None):
        return cls(
            UnsharpObservable(x, l),
            UnsharpObservable(y, m),
            UnsharpObservable(z, n),
            Z,
            np.zeros((4, 3)) if zs is None else zs,
        )


def build_joint3(j: JointObservable3) -> dict[str, Effect]:
    x, l = j.obs1.x, j.obs1.m
    y, m = j.obs2.x, j.obs2.m
    z, n = j.obs3.x, j.obs3.m
    Z1, Z2, Z3, Z4 = j.Z
    z1, z2, z3, z4 = j.zs
    out = {}
    for key in SIGNS3:
        a, b, c = (_sign(ch) for ch in key)
        scalar = 1 + a * x + b * y + c * z + a * b * Z1 + b * c * Z2 + c * a * Z3 + a * b * c * Z4
        vec = a * b * z1 + b * c * z2 + c * a * z3 + a * b * c * z4 + a * l + b * m + c * n
        out[key] = Effect(scalar / 4.0, vec / 4.0)
    return out


def joint3_single_marginals(effects: dict[str, Effect]) -> list[dict[str, Effect]]:
    margs = []
    for pos in range(3):
        margs.append(
            {
                s: _sum(e for k, e in effects.items() if k[pos] == s)
                for s in "+-"
            }
        )
    return margs


def joint3_pair_marginals(effects: dict[str, Effect]) -> dict[str, dict[str, Effect]]:
    """Pairwise marginals keyed '12', '23', '13'; inner keys are the two signs in that order."""
    pairs = {"12": (0, 1), "23": (1, 2), "13": (0, 2)}
    out = {}
    for name, (i, k) in pairs.items():
        out[name] = {
            s: _sum(e for key, e in effects.items() if key[i] == s[0] and key[k] == s[1])
            for s in SIGNS2
        }
    return out


def _sum(effects) -> Effect:
    total = Effect(0.0, np.zeros(3))
    for e in effects:
        total = total + e
    return total


def joint3_is_valid(j: JointObservable3, tol: float = TOL) -> bool:
    return all(is_valid_effect(e, tol) for e in build_joint3(j).values())


def sphere_constraints(l, m, n, Z1: float, Z2: float, Z3: float) -> tuple[np.ndarray, np.ndarray]:
    """Centres and radii of the four spheres that must contain ``z4``.

    Rows are ``-l-m-n``, ``l+m-n``, ``l-m+n``, ``-l+m+n``, each with the
    constraint ``|c_k - z4| <= r_k``; the radii always sum to 4.
    """
    l, m, n = (np.asarray(v, dtype=float) for v in (l, m, n))
    centres = np.array([-l - m - n, l + m - n, l - m + n, -l + m + n])
    radii = np.array([1 + Z1 + Z2 + Z3, 1 + Z1 - Z2 - Z3, 1 - Z1 - Z2 + Z3, 1 - Z1 + Z2 - Z3])
    return centres, radii


@dataclass(frozen=True)
class NecessaryCondition3:
    individual: tuple[bool, bool, bool, bool]
    summed: bool
    total: float

    @property
    def holds(self) -> bool:
        return all(self.individual) and self.summed


def necessary_condition_3(l, m, n, Z1: float, Z2: float, Z3: float, z4, tol: float = TOL) -> NecessaryCondition3:
    """The four sphere inequalities implied by positivity of complementary effect pairs."""
    centres, radii = sphere_constraints(l, m, n, Z1, Z2, Z3)
    dists = np.linalg.norm(centres - np.asarray(z4, dtype=float), axis=1)
    individual = tuple(bool(d <= r + tol) for d, r in zip(dists, radii))
    total = float(dists.sum())
    return NecessaryCondition3(individual, total <= 4.0 + tol, total)
