from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from akjoint.effects import IDENTITY, SIGNS3, is_valid_effect
from akjoint.errors import PreconditionError
from akjoint.kernels import DetectorConfig
from akjoint.montecarlo import MCEstimate
from akjoint.three_detector import (
    ORTHOGONAL_BOUND,
    TripleMarginals,
    check_necessary,
    compute_triple,
    compute_triple_grid,
    povm_total,
    sweep_triple,
    triple_povm,
)

frac = st.floats(0, 1, allow_nan=False)


@given(frac, frac, frac)
def test_triple_povm_complete_and_valid_inside_ball(a, b, c):
    if a * a + b * b + c * c > 1:
        with pytest.raises(PreconditionError, match="outcome"):
            triple_povm((a, b, c))
        return
    effects = triple_povm((a, b, c))
    assert set(effects) == set(SIGNS3)
    assert povm_total(effects).isclose(IDENTITY)
    assert all(is_valid_effect(e) for e in effects.values())


def test_triple_povm_operator_form():
    a, b, c = 0.4, 0.5, 0.3
    effects = triple_povm((a, b, c))
    e = effects["+-+"]
    sx, sy, sz = np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])
    expect = (np.eye(2) + a * sx - b * sy + c * sz) / 8
    np.testing.assert_allclose(e.matrix(), expect, atol=1e-15)


@given(frac, frac, frac)
def test_orthogonal_necessary_condition_is_sphere_of_radius_one(a, b, c):
    s = a * a + b * b + c * c
    rep = check_necessary((a, b, c))
    assert rep.orthogonal
    assert rep.sum_of_squares == pytest.approx(s)
    if abs(s - 1) > 1e-9:
        assert rep.holds == (s <= 1)


def test_necessary_report_for_general_vectors():
    rep = check_necessary((0.5, 0, 0), (0.3, 0.3, 0), (0, 0, 0.2))
    assert not rep.orthogonal
    assert rep.pairwise_ok
    assert rep.min_total <= 4


def test_necessary_condition_implies_pairwise():
    rng = np.random.default_rng(5)
    for _ in range(200):
        l, m, n = rng.normal(size=(3, 3)) * rng.uniform(0.1, 0.6)
        rep = check_necessary(l, m, n)
        if rep.holds:
            assert rep.pairwise_ok


def test_compute_triple_matches_grid():
    cfg = DetectorConfig((0.6, 0.8, 1.0), mc_samples=2**18, seed=3)
    tm = compute_triple(cfg)
    grid = compute_triple_grid(cfg)
    for est, ref in zip((tm.a_prime, tm.b_prime, tm.c_prime), grid):
        assert est.within(ref, k=4)
    assert tm.sigmas == (0.6, 0.8, 1.0)


def test_equal_widths_stay_below_orthogonal_bound():
    vals = compute_triple_grid(DetectorConfig((0.7, 0.7, 0.7)))
    assert max(vals) < ORTHOGONAL_BOUND
    assert check_necessary(vals).holds


def test_sweep_triple_broadcasts_scalars_and_keeps_order():
    base = DetectorConfig((1.0, 1.0, 1.0), mc_samples=2**12, seed=1)
    out = sweep_triple([0.5, (0.5, 0.6, 0.7)], base)
    assert [t.sigmas for t in out] == [(0.5, 0.5, 0.5), (0.5, 0.6, 0.7)]
    assert out[0] == compute_triple(base.with_sigmas(0.5, 0.5, 0.5))


def test_triple_marginals_accessors():
    tm = TripleMarginals(MCEstimate(0.4, 0.01, 1), MCEstimate(0.3, 0.02, 1), MCEstimate(0.2, 0.03, 1), (1, 1, 1))
    np.testing.assert_allclose(tm.values, [0.4, 0.3, 0.2])
    np.testing.assert_allclose(tm.stderrs, [0.01, 0.02, 0.03])
    assert len(triple_povm(tm)) == 8


def test_compute_triple_needs_three_widths():
    with pytest.raises(PreconditionError):
        compute_triple(DetectorConfig((0.7, 0.7)))
