from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from akjoint.effects import (
    IDENTITY,
    SIGNS2,
    SIGNS3,
    TOL,
    Effect,
    JointObservable2,
    JointObservable3,
    UnsharpObservable,
    build_joint2,
    build_joint3,
    d0_bound,
    find_joint2_completion,
    is_valid_effect,
    jm_unbiased_ok,
    joint2_is_valid,
    joint2_marginals,
    joint3_is_valid,
    joint3_pair_marginals,
    joint3_single_marginals,
    necessary_condition_3,
    observable_distance,
    sphere_constraints,
    unbiased_completion,
)

real = st.floats(-1.5, 1.5, allow_nan=False)
vec3 = st.tuples(real, real, real).map(np.array)
small = st.floats(-0.4, 0.4, allow_nan=False)
small_vec = st.tuples(small, small, small).map(np.array)


def _sum(effects):
    total = Effect(0.0)
    for e in effects:
        total = total + e
    return total


@given(st.floats(-1, 3, allow_nan=False), vec3)
def test_validity_matches_matrix_spectrum(gamma, v):
    e = Effect(gamma, v)
    lo, hi = np.linalg.eigvalsh(e.matrix())
    assert is_valid_effect(e) == (lo >= -1e-12 and hi <= 1 + 1e-12) or abs(e.margin()) < 1e-9
    np.testing.assert_allclose(e.eigenvalues(), (lo, hi), atol=1e-12)


def _paulis():
    return np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])


@given(st.floats(0, 2, allow_nan=False), vec3, vec3)
def test_probability_is_trace(gamma, v, r):
    r = r / max(1.0, np.linalg.norm(r))
    rho = 0.5 * (np.eye(2) + np.einsum("i,ijk->jk", r, _paulis()))
    e = Effect(gamma, v)
    assert e.probability(r) == pytest.approx(np.trace(rho @ e.matrix()).real, abs=1e-12)


@given(vec3, vec3, st.floats(-1, 1), st.floats(-1, 1))
def test_observable_distance_is_a_metric(a, b, alpha, beta):
    A, B, C = Effect(1 + alpha, a), Effect(1 + beta, b), Effect(1.0, (a + b) / 2)
    assert observable_distance(A, A) == 0
    assert observable_distance(A, B) == pytest.approx(observable_distance(B, A))
    assert observable_distance(A, B) <= observable_distance(A, C) + observable_distance(C, B) + 1e-12


@given(vec3, vec3, st.floats(-1, 1), st.floats(-1, 1))
def test_observable_distance_is_worst_case_probability_gap(a, b, alpha, beta):
    A, B = Effect(1 + alpha, a), Effect(1 + beta, b)
    # eigenvalues of A - B bound the probability gap; the larger modulus is attained
    w = np.linalg.eigvalsh(A.matrix() - B.matrix())
    assert observable_distance(A, B) == pytest.approx(np.max(np.abs(w)), abs=1e-12)


def test_d0_bound_endpoints():
    assert d0_bound(0.0) == 0.0
    assert d0_bound(np.pi / 2) == pytest.approx((np.sqrt(2) - 1) / np.sqrt(2))


@given(small_vec, small_vec, st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-1, 1), small_vec)
def test_joint2_marginals_and_completeness(m, n, x, y, Z, z):
    o1, o2 = UnsharpObservable(x, m), UnsharpObservable(y, n)
    effects = build_joint2(JointObservable2(o1, o2, Z, z))
    first, second = joint2_marginals(effects)
    assert _sum(effects.values()).isclose(IDENTITY)
    assert first["+"].isclose(o1.plus) and first["-"].isclose(o1.minus)
    assert second["+"].isclose(o2.plus) and second["-"].isclose(o2.minus)


def test_joint2_effect_formula_against_operators():
    m, n, x, y, Z, z = np.array([0.3, 0.1, 0]), np.array([0, 0.4, 0.2]), 0.1, -0.2, 0.05, np.array([0.1, 0, -0.1])
    effects = build_joint2(JointObservable2(UnsharpObservable(x, m), UnsharpObservable(y, n), Z, z))
    P = _paulis()
    for key in SIGNS2:
        a, b = (1 if c == "+" else -1 for c in key)
        vec = a * b * z + a * m + b * n
        op = ((1 + a * x + b * y + a * b * Z) * np.eye(2) + np.einsum("i,ijk->jk", vec, P)) / 4
        np.testing.assert_allclose(effects[key].matrix(), op, atol=1e-15)


@given(st.floats(0, np.pi), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_unbiased_completion_iff_condition(phi, ra, rb):
    m = ra * np.array([1.0, 0, 0])
    n = rb * np.array([np.cos(phi), np.sin(phi), 0])
    Z, z = unbiased_completion(m, n)
    j = JointObservable2(UnsharpObservable(0, m), UnsharpObservable(0, n), Z, z)
    assert joint2_is_valid(j, 1e-9) == jm_unbiased_ok(m, n, 1e-9) or abs(
        np.linalg.norm(m + n) + np.linalg.norm(m - n) - 2
    ) < 1e-8


def test_saturated_orthogonal_pair_is_jointly_measurable():
    a = 1 / np.sqrt(2)
    assert jm_unbiased_ok((a, 0, 0), (0, a, 0))
    assert not jm_unbiased_ok((a + 1e-6, 0, 0), (0, a, 0))


@pytest.mark.slow
def test_completion_search_agrees_with_closed_condition_near_boundary():
    """Brute-force search recovers the analytic criterion on pairs 3% inside or outside the boundary."""
    rng = np.random.default_rng(11)
    disagreements = []
    for k in range(100):
        u, v = rng.normal(size=(2, 3))
        u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
        w = rng.uniform(0.2, 1.0)
        scale = 2.0 / (np.linalg.norm(u + w * v) + np.linalg.norm(u - w * v))
        factor = 0.97 if k % 2 else 1.03
        m, n = factor * scale * u, factor * scale * w * v
        if np.linalg.norm(m) > 1 or np.linalg.norm(n) > 1:
            continue
        search = find_joint2_completion(UnsharpObservable(0, m), UnsharpObservable(0, n))
        if search.feasible != jm_unbiased_ok(m, n):
            disagreements.append((m, n, search.margin))
    assert not disagreements


def test_completion_search_handles_biased_pair():
    o1, o2 = UnsharpObservable(0.1, (0.6, 0, 0)), UnsharpObservable(0, (0, 0.7, 0))
    found = find_joint2_completion(o1, o2)
    assert found.feasible
    assert joint2_is_valid(JointObservable2(o1, o2, found.Z, found.z), 1e-8)


@given(
    small_vec, small_vec, small_vec,
    st.tuples(*[st.floats(-0.3, 0.3)] * 3),
    st.tuples(*[st.floats(-0.5, 0.5)] * 4),
    st.lists(small_vec, min_size=4, max_size=4),
)
def test_joint3_seven_identities(l, m, n, xyz, Z, zs):
    obs = [UnsharpObservable(b, v) for b, v in zip(xyz, (l, m, n))]
    j = JointObservable3(*obs, Z, np.array(zs))
    effects = build_joint3(j)
    assert set(effects) == set(SIGNS3)
    # completeness
    assert _sum(effects.values()).isclose(IDENTITY)
    # single marginals
    for marg, o in zip(joint3_single_marginals(effects), obs):
        assert marg["+"].isclose(o.plus) and marg["-"].isclose(o.minus)
    # pair marginals are the pair joint observables with the matching (Z_k, z_k)
    pairs = joint3_pair_marginals(effects)
    for name, (i, k), idx in (("12", (0, 1), 0), ("23", (1, 2), 1), ("13", (0, 2), 2)):
        expect = build_joint2(JointObservable2(obs[i], obs[k], Z[idx], zs[idx]))
        for key in SIGNS2:
            assert pairs[name][key].isclose(expect[key])


@given(small_vec, small_vec, small_vec, st.tuples(*[st.floats(-0.4, 0.4)] * 3), small_vec)
def test_sphere_inequalities_are_odd_parity_effect_positivity(l, m, n, Zs, z4):
    """Each sphere inequality is the lower-eigenvalue condition of one effect with abc = -1."""
    j = JointObservable3.from_vectors(l, m, n, Z=(*Zs, 0.0), zs=np.vstack([np.zeros((3, 3)), z4]))
    effects = build_joint3(j)
    centres, radii = sphere_constraints(l, m, n, *Zs)
    nc = necessary_condition_3(l, m, n, *Zs, z4)
    assert radii.sum() == pytest.approx(4.0)
    for key, c, r, ok in zip(("---", "++-", "+-+", "-++"), centres, radii, nc.individual):
        e = effects[key]
        # 4 gamma is the scalar coefficient, 4 v the Bloch part: lower eigenvalue >= 0 <=> |v| <= gamma
        assert 4 * e.gamma == pytest.approx(r, abs=1e-12)
        np.testing.assert_allclose(4 * e.v, c - z4, atol=1e-12)
        assert ok == (np.linalg.norm(4 * e.v) <= 4 * e.gamma + TOL)


@given(small_vec, small_vec, small_vec, st.tuples(*[st.floats(-0.4, 0.4)] * 3), small_vec)
def test_valid_triple_implies_necessary_condition(l, m, n, Zs, z4):
    j = JointObservable3.from_vectors(l, m, n, Z=(*Zs, 0.0), zs=np.vstack([np.zeros((3, 3)), z4]))
    if joint3_is_valid(j):
        assert necessary_condition_3(l, m, n, *Zs, z4).holds


def test_orthogonal_triple_at_bound():
    a = 1 / np.sqrt(3)
    j = JointObservable3.from_vectors((a, 0, 0), (0, a, 0), (0, 0, a))
    assert joint3_is_valid(j)
    j_out = JointObservable3.from_vectors((a + 1e-6, 0, 0), (0, a, 0), (0, 0, a))
    assert not joint3_is_valid(j_out)


def test_joint3_rejects_bad_shapes():
    with pytest.raises(ValueError):
        JointObservable3(UnsharpObservable(), UnsharpObservable(), UnsharpObservable(), (0, 0, 0))
