"""Fermat-Toricelli point (geometric median) of four points in 3-space.

The minimiser of ``sum_i |a_i - z|`` is either one of the points, which
happens exactly when the unit vectors from that point to the others sum to
a vector of length at most its multiplicity, or the unique interior point
where the unit vectors from ``z`` to all points cancel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, PreconditionError

VERTEX_TOL = 1e-9
SNAP = 1e-10
MAX_ITER = 10_000
STEP_TOL = 1e-12


@dataclass(frozen=True)
class FTResult:
    point: np.ndarray
    is_vertex: bool
    vertex_index: int | None
    total_distance: float
    iterations: int
    non_unique: bool = False


def total_distance(points, z) -> float:
    return float(np.linalg.norm(np.asarray(points) - np.asarray(z), axis=-1).sum())


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.shape != (4, 3):
        raise PreconditionError(f"expected four 3-vectors, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise PreconditionError("points must be finite")
    return pts


def _scale(pts: np.ndarray) -> float:
    return max(float(np.ptp(pts, axis=0).max()), 1.0)


def vertex_resultant(pts: np.ndarray, j: int, tol: float = 0.0) -> tuple[float, int]:
    """Length of the summed unit vectors from point ``j`` and the multiplicity of ``j``."""
    d = pts - pts[j]
    r = np.linalg.norm(d, axis=1)
    same = r <= tol
    u = d[~same] / r[~same, None]
    return float(np.linalg.norm(u.sum(0))), int(same.sum())


def _collinear_median(pts: np.ndarray, scale: float):
    """For points on one line the medians form a segment; None if not collinear."""
    c = pts.mean(0)
    _, s, vt = np.linalg.svd(pts - c)
    if s[1] > 1e-12 * scale:
        return None
    t = np.sort((pts - c) @ vt[0])
    mid = 0.5 * (t[1] + t[2])
    return c + mid * vt[0], bool(t[2] - t[1] > 1e-9 * scale)


def ft_point(points, max_iter: int = MAX_ITER, tol: float = STEP_TOL) -> FTResult:
    """Geometric median by a vertex test followed by Weiszfeld iteration.

    Iterates that come within ``1e-10`` of a data point are moved off it by
    the modified step of Vardi and Zhang, which uses the resultant of the
    remaining unit vectors as the descent direction.  Elsewhere a Newton step
    is tried alongside each Weiszfeld step and kept when it lowers the
    distance sum, which turns the linear Weiszfeld rate quadratic.
    """
    pts = _as_points(points)
    scale = _scale(pts)
    snap = SNAP * scale

    best = None
    for j in range(4):
        res, mult = vertex_resultant(pts, j, snap)
        if res <= mult + VERTEX_TOL:
            tot = total_distance(pts, pts[j])
            if best is None or tot < best[1] - 1e-15 * scale:
                best = (j, tot)
    line = _collinear_median(pts, scale)
    if best is not None:
        j, tot = best
        non_unique = line is not None and line[1]
        return FTResult(pts[j].copy(), True, j, tot, 0, non_unique)
    if line is not None:
        z, flat = line
        return FTResult(z, False, None, total_distance(pts, z), 0, flat)

    z = pts.mean(0)
    f = total_distance(pts, z)
    for it in range(1, max_iter + 1):
        d = pts - z
        r = np.linalg.norm(d, axis=1)
        near = r < snap
        w = 1.0 / r[~near]
        t = (pts[~near] * w[:, None]).sum(0) / w.sum()
        if near.any():
            # Vardi-Zhang: blend the Weiszfeld target with the occupied vertex
            R = np.linalg.norm((d[~near] * w[:, None]).sum(0))
            eta = near.sum()
            beta = min(1.0, eta / R) if R > 0 else 1.0
            t = (1 - beta) * t + beta * z
        else:
            # Newton on the smooth objective; kept only if it does better
            u = d * w[:, None]
            grad = -u.sum(0)
            hess = sum(wi * (np.eye(3) - np.outer(ui, ui)) for wi, ui in zip(w, u))
            try:
                cand = z - np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                cand = t
            if total_distance(pts, cand) < total_distance(pts, t):
                t = cand
        ft = total_distance(pts, t)
        step = float(np.linalg.norm(t - z))
        # Weiszfeld steps strictly descend away from the minimiser, so no
        # decrease means rounding dominates the distance sum
        done = ft >= f or step <= tol * scale
        if ft < f:
            z, f = t, ft
        if done:
            z = _polish(pts, z, snap)
            return FTResult(z, False, None, total_distance(pts, z), it)
    raise ConvergenceError(f"Weiszfeld iteration did not converge in {max_iter} steps", last_iterate=z)


def unit_resultant(pts: np.ndarray, z) -> np.ndarray:
    d = np.asarray(pts) - z
    return (d / np.linalg.norm(d, axis=1)[:, None]).sum(0)


def _polish(pts: np.ndarray, z: np.ndarray, snap: float, steps: int = 8) -> np.ndarray:
    """Newton steps judged by the gradient, which stays accurate after the distance sum has rounded flat."""
    g = unit_resultant(pts, z)
    for _ in range(steps):
        d = pts - z
        r = np.linalg.norm(d, axis=1)
        if r.min() < snap:
            break
        u = d / r[:, None]
        hess = sum((np.eye(3) - np.outer(ui, ui)) / ri for ui, ri in zip(u, r))
        try:
            cand = z + np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            break
        gc = unit_resultant(pts, cand)
        if not np.linalg.norm(gc) < np.linalg.norm(g):
            break
        z, g = cand, gc
    return z


def ft_oracle(points, n: int = 31, levels: int = 10, keep: int = 6) -> np.ndarray:
    """Coarse-to-fine grid minimisation of the distance sum over the bounding box.

    Each refinement re-grids ``keep`` cells either side of the current best
    node.  The window is wide because in a long shallow valley the grid
    minimum can sit several cells from the true one; with the defaults the
    final spacing is about ``4e-6`` of the box diagonal.
    """
    pts = _as_points(points)
    lo, hi = pts.min(0), pts.max(0)
    diag = float(np.linalg.norm(hi - lo))
    if diag == 0.0:
        return pts[0].copy()
    # degenerate (flat) boxes still get a cube of the diagonal's size
    centre = 0.5 * (lo + hi)
    half = np.maximum(0.5 * (hi - lo), 0.5 * diag / (n - 1))
    best = centre
    for _ in range(levels + 1):
        axes = [np.linspace(c - h, c + h, n) for c, h in zip(centre, half)]
        G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        vals = np.linalg.norm(G[:, None, :] - pts[None], axis=-1).sum(1)
        best = G[np.argmin(vals)]
        cell = 2 * half / (n - 1)
        centre, half = best, keep * cell
    return best


class FTCondition(NamedTuple):
    min_total: float
    holds: bool


def ft_vertices(l, m, n) -> np.ndarray:
    """Sphere centres ``A = -l-m-n``, ``B = l+m-n``, ``C = -l+m+n``, ``D = l-m+n``."""
    l, m, n = (np.asarray(v, dtype=float) for v in (l, m, n))
    return np.array([-l - m - n, l + m - n, -l + m + n, l - m + n])


def ft_condition(l, m, n) -> FTCondition:
    """Smallest possible total distance from a common point to the four sphere centres.

    Joint measurability of three unbiased observables requires this to be at most 4.
    """
    res = ft_point(ft_vertices(l, m, n))
    return FTCondition(res.total_distance, bool(res.total_distance <= 4.0 + VERTEX_TOL))


def max_common_scale(l_hat, m_hat, n_hat) -> float:
    """Largest ``a`` such that ``(a l, a m, a n)`` passes :func:`ft_condition`.

    The distance sum at the Fermat-Toricelli point is homogeneous of degree
    one, so the threshold is ``4`` divided by the sum for the unit triple.
    """
    total = ft_point(ft_vertices(l_hat, m_hat, n_hat)).total_distance
    if total == 0.0:
        return float("inf")
    return 4.0 / total


def directions_from_angles(theta: float, phi: float, phi1: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``l = x``, ``m`` at azimuth ``phi`` in the xy-plane, ``n`` at polar ``theta`` and azimuth ``phi1``."""
    l = np.array([1.0, 0.0, 0.0])
    m = np.array([np.cos(phi), np.sin(phi), 0.0])
    n = np.array([np.sin(theta) * np.cos(phi1), np.sin(theta) * np.sin(phi1), np.cos(theta)])
    return l, m, n
