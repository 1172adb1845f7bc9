"""Static PNG figures for the report path.

Uses the object-oriented matplotlib API with the Agg canvas, so nothing
touches pyplot's global state or needs a display.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

# fixed metadata keeps repeated runs byte-identical
_META = {"Software": None}


def _figure(xlabel: str, ylabel: str):
    fig = Figure(figsize=(6.0, 4.0), dpi=120)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    return path


def plot_sweep(x, a_prime, b_prime, path, xlabel: str = "detector width") -> Path:
    x, a, b = (np.asarray(v, dtype=float) for v in (x, a_prime, b_prime))
    fig, ax = _figure(xlabel, "marginal unsharpness")
    ax.plot(x, a, "o-", ms=3, label="a'")
    if not np.allclose(a, b):
        ax.plot(x, b, "s-", ms=3, label="b'")
    ax.plot(x, a**2 + b**2, "--", color="grey", label="a'^2 + b'^2")
    ax.axhline(2 / np.pi, color="k", lw=0.8, ls=":", label="2/pi")
    ax.legend()
    return _save(fig, path)


def plot_post_state(sigma, product, magnitude, path) -> Path:
    fig, ax = _figure("detector width", "post-measurement value")
    ax.plot(sigma, product, "o-", ms=3, label="dsx * dsy")
    ax.plot(sigma, magnitude, "s-", ms=3, label="|r'|")
    ax.set_ylim(0, 1.05)
    ax.legend()
    return _save(fig, path)


def plot_fidelities(sigma, eta_i, eta_f, eta_d, closed, path) -> Path:
    fig, ax = _figure("detector width", "fidelity")
    ax.plot(sigma, eta_i, "o", ms=4, label="eta_i (quadrature)")
    ax.plot(sigma, closed, "-", label="pi a'/4")
    ax.plot(sigma, eta_f, "x", ms=4, label="eta_f")
    ax.plot(sigma, eta_d, "-", label="eta_d")
    ax.axhline(0.5, color="k", lw=0.8, ls=":")
    ax.legend()
    return _save(fig, path)


def plot_oblique(theta, probs: dict, path) -> Path:
    fig, ax = _figure("angle between readout directions (rad)", "probability")
    for label, vals in probs.items():
        ax.plot(theta, vals, label=label)
    ax.legend()
    return _save(fig, path)


def plot_three_sweep(sigma, value, stderr, path) -> Path:
    fig, ax = _figure("detector width", "a'")
    ax.errorbar(sigma, value, yerr=3 * np.asarray(stderr), fmt="o-", ms=3, capsize=2, label="a' (3 s.e.)")
    ax.axhline(1 / np.sqrt(3), color="k", lw=0.8, ls=":", label="1/sqrt(3)")
    ax.legend()
    return _save(fig, path)
