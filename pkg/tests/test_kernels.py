from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from akjoint.errors import ConfigError, PreconditionError
from akjoint.kernels import (
    DetectorConfig,
    Region,
    build_kernel_table2,
    build_kernel_table3,
    build_radial_table,
    gaussian_psi,
    integrate_region2,
    sinc_r,
    unitary_kernels2,
)
from akjoint.two_detector import compute_marginals


@pytest.fixture(scope="module")
def table07():
    return build_kernel_table2(DetectorConfig((0.7, 0.7)))


@pytest.fixture(scope="module")
def table_asym():
    return build_kernel_table2(DetectorConfig((0.4, 1.3)))


def _e0_oracle(p1, p2, s1, s2):
    """Direct 2D quadrature of the cosine transform over the positive quadrant."""

    def integrand(q2, q1):
        R = np.hypot(q1, q2)
        return np.cos(p1 * q1) * np.cos(p2 * q2) * np.cos(R) * gaussian_psi(q1, s1) * gaussian_psi(q2, s2)

    val, _ = integrate.dblquad(integrand, 0, 12 * s1, 0, 12 * s2, epsabs=1e-12, epsrel=1e-10)
    return 4 * val / (2 * np.pi)


def _f0_oracle(p1, p2, s1, s2):
    def integrand(q2, q1):
        R = np.hypot(q1, q2)
        return np.sin(p1 * q1) * np.cos(p2 * q2) * q1 * np.sinc(R / np.pi) * gaussian_psi(q1, s1) * gaussian_psi(q2, s2)

    val, _ = integrate.dblquad(integrand, 0, 12 * s1, 0, 12 * s2, epsabs=1e-12, epsrel=1e-10)
    return 4 * val / (2 * np.pi)


def test_sinc_series_branch_is_continuous():
    R = np.array([0.0, 1e-6, 9.99e-5, 1.0001e-4, 0.3])
    np.testing.assert_allclose(sinc_r(R), np.sinc(R / np.pi), rtol=1e-15, atol=1e-16)


def test_unitary_kernels_are_unitary():
    q = np.random.default_rng(1).normal(scale=3, size=(2, 500))
    e, f, g = unitary_kernels2(*q)
    np.testing.assert_allclose(e**2 + f**2 + g**2, 1.0, atol=1e-14)


@pytest.mark.parametrize("sigmas", [(0.7, 0.7), (0.4, 1.3)])
def test_kernels_match_direct_quadrature(sigmas):
    tab = build_kernel_table2(DetectorConfig(sigmas))
    pts = [(0.3, -0.8), (1.1, 0.4), (-2.0, 1.7)]
    e, f, _ = tab.evaluate([p[0] for p in pts], [p[1] for p in pts])
    for k, (p1, p2) in enumerate(pts):
        assert e[k] == pytest.approx(_e0_oracle(p1, p2, *sigmas), abs=1e-9)
        assert f[k] == pytest.approx(_f0_oracle(p1, p2, *sigmas), abs=1e-9)


def test_evaluate_reproduces_grid(table07):
    i, j = np.meshgrid([3, 100, 400], [7, 256, 500], indexing="ij")
    e, f, g = table07.evaluate(table07.p1[i], table07.p2[j])
    np.testing.assert_allclose(e, table07.e0[i, j], atol=1e-14)
    np.testing.assert_allclose(f, table07.f0[i, j], atol=1e-14)
    np.testing.assert_allclose(g, table07.g0[i, j], atol=1e-14)


@pytest.mark.parametrize("fixture", ["table07", "table_asym"])
def test_parity_and_quadrant_normalization(fixture, request):
    tab = request.getfixturevalue(fixture)
    assert tab.parity_defect() < 1e-12
    assert tab.quadrant_norm() == pytest.approx(0.25, abs=1e-9)
    assert integrate_region2(tab, "norm") == pytest.approx(1.0, abs=1e-9)
    for q in ("++", "+-", "-+", "--"):
        assert integrate_region2(tab, "norm", Region.quadrant(q)) == pytest.approx(0.25, abs=1e-9)


@pytest.mark.parametrize("sigma", [0.3, 0.7, 1.5])
def test_grid_doubling_changes_a_prime_below_1e5(sigma):
    coarse = compute_marginals(build_kernel_table2(DetectorConfig((sigma, sigma), grid_points=256))).a_prime
    fine = compute_marginals(build_kernel_table2(DetectorConfig((sigma, sigma), grid_points=512))).a_prime
    assert abs(fine - coarse) < 1e-5


@pytest.mark.parametrize("sigma", [0.3, 0.7, 1.5])
def test_radial_and_cartesian_agree(sigma):
    radial = build_radial_table(sigma)
    cart = compute_marginals(build_kernel_table2(DetectorConfig((sigma, sigma)))).a_prime
    assert radial.normalization() == pytest.approx(1.0, abs=1e-9)
    assert radial.a_prime == pytest.approx(cart, abs=1e-5)


def test_radial_profiles_match_cartesian_kernels(table07):
    radial = build_radial_table(0.7)
    r, th = np.array([0.2, 0.9, 1.7]), np.array([0.3, 2.0, 4.0])
    e, f, g = table07.evaluate(r * np.cos(th), r * np.sin(th))
    e1, f1 = radial.evaluate(r)
    np.testing.assert_allclose(e, e1, atol=1e-10)
    np.testing.assert_allclose(f, f1 * np.cos(th), atol=1e-10)
    np.testing.assert_allclose(g, f1 * np.sin(th), atol=1e-10)


@pytest.mark.parametrize("sigmas", [(0.7, 0.7), (0.4, 1.3)])
def test_plancherel_quadrant_coefficients(sigmas):
    """Quadrant integrals of squared kernels equal a quarter of the position-space integrals."""
    tab = build_kernel_table2(DetectorConfig(sigmas))
    s1, s2 = sigmas

    def pos(fn):
        val, _ = integrate.dblquad(
            lambda q2, q1: fn(q1, q2) * gaussian_psi(q1, s1) ** 2 * gaussian_psi(q2, s2) ** 2,
            -12 * s1, 12 * s1, -12 * s2, 12 * s2, epsabs=1e-12, epsrel=1e-10,
        )
        return val

    c_ff = integrate_region2(tab, "ff", Region.quadrant("++"))
    c_gg = integrate_region2(tab, "gg", Region.quadrant("++"))
    c_ee = integrate_region2(tab, "ee", Region.quadrant("++"))
    assert c_ff == pytest.approx(0.25 * pos(lambda a, b: (a * np.sinc(np.hypot(a, b) / np.pi)) ** 2), abs=1e-9)
    assert c_gg == pytest.approx(0.25 * pos(lambda a, b: (b * np.sinc(np.hypot(a, b) / np.pi)) ** 2), abs=1e-9)
    assert c_ee == pytest.approx(0.25 * pos(lambda a, b: np.cos(np.hypot(a, b)) ** 2), abs=1e-9)


def test_sector_regions_agree_with_tensor_grid(table_asym):
    for selector in ("norm", "ef", "eg", "ff"):
        grid = integrate_region2(table_asym, selector, Region(1, 1))
        polar = integrate_region2(table_asym, selector, Region(sector=(0.0, np.pi / 2)))
        assert polar == pytest.approx(grid, abs=1e-8)
    assert integrate_region2(table_asym, "norm", Region(1, 1, sector=(np.pi, 1.5 * np.pi))) == 0.0


@given(
    st.floats(-4, 4), st.floats(-4, 4),
    st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
)
def test_density_is_nonnegative(p1, p2, x, y, z):
    tab = _shared_table()
    r = np.array([x, y, z])
    r = r / max(1.0, np.linalg.norm(r))
    assert tab.density(r, p1, p2) >= -1e-15


_CACHE = {}


def _shared_table():
    if "t" not in _CACHE:
        _CACHE["t"] = build_kernel_table2(DetectorConfig((0.5, 0.9)))
    return _CACHE["t"]


def test_unknown_selector():
    with pytest.raises(PreconditionError):
        integrate_region2(_shared_table(), "hh")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"sigmas": (0.7,)},
        {"sigmas": (0.7, -1.0)},
        {"sigmas": (0.7, 0.7), "grid_points": 250},
        {"sigmas": (0.7, 0.7), "grid_points": 264},
        {"sigmas": (0.7, 0.7), "grid_extent": 5.0},
        {"sigmas": (0.7, 0.7, 0.7), "mc_samples": 100},
        {"sigmas": (0.7, 0.7), "seed": -1},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        DetectorConfig(**kwargs)


def test_explicit_grid_extent_accepted():
    tab = build_kernel_table2(DetectorConfig((0.7, 0.7), grid_extent=12.0))
    assert compute_marginals(tab).a_prime == pytest.approx(0.6298189632, abs=1e-8)


def test_kernel_table3():
    tab = build_kernel_table3(DetectorConfig((0.7, 0.7, 0.7)))
    assert tab.normalization() == pytest.approx(1.0, abs=1e-6)
    assert tab.parity_defect() < 1e-10
    vals = [tab.marginal(k) for k in range(3)]
    assert np.ptp(vals) < 1e-12
    assert vals[0] == pytest.approx(0.4591066, abs=1e-6)


def test_kernel_table3_resolution():
    cfg = DetectorConfig((0.5, 0.9, 0.7))
    coarse = build_kernel_table3(cfg, n=64)
    fine = build_kernel_table3(cfg, n=96)
    for k in range(3):
        assert fine.marginal(k) == pytest.approx(coarse.marginal(k), abs=1e-6)
