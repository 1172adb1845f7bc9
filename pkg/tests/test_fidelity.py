from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from akjoint.effects import IDENTITY, Effect
from akjoint.errors import PreconditionError
from akjoint.fidelity import (
    SPIN_SQ,
    angle_povm,
    error_measures,
    eta_d_direct,
    eta_d_form,
    eta_f_direct,
    eta_f_form,
    eta_i_closed,
    eta_i_direct,
    eta_i_form,
    fidelity_report,
)
from akjoint.kernels import DetectorConfig, build_kernel_table2, build_radial_table
from akjoint.two_detector import compute_marginals

_TABLES: dict = {}


def table(sigmas=(0.7, 0.7)):
    if sigmas not in _TABLES:
        _TABLES[sigmas] = build_kernel_table2(DetectorConfig(sigmas))
    return _TABLES[sigmas]


@pytest.mark.parametrize("sigma", [0.3, 0.7, 1.5])
def test_eta_i_against_radial_oracle(sigma):
    """With isotropic kernels the pointer-angle integral is 2 pi int e1 f1 p dp."""
    radial = build_radial_table(sigma)
    assert eta_i_direct(table((sigma, sigma))) == pytest.approx(2 * np.pi * radial.e1f1_moment(), abs=1e-6)


@pytest.mark.parametrize("sigma", [0.3, 0.7, 1.5])
def test_eta_i_proportional_to_a_prime(sigma):
    tab = table((sigma, sigma))
    a = compute_marginals(tab).a_prime
    assert abs(eta_i_direct(tab) - eta_i_closed(a)) <= 1e-6
    assert eta_f_direct(tab) == pytest.approx(eta_i_direct(tab), abs=1e-9)


@pytest.mark.parametrize("sigmas", [(0.7, 0.7), (0.3, 0.3), (0.4, 1.2), (2.0, 0.1), (1.0, 1.0)])
def test_eta_d_is_three_quarters(sigmas):
    assert eta_d_direct(table(sigmas)) == pytest.approx(0.75, abs=1e-6)


@pytest.mark.parametrize("form", [eta_i_form, eta_f_form, eta_d_form])
def test_state_dependent_parts_vanish(form):
    sf = form(table())
    assert np.linalg.norm(sf.vector) < 1e-10
    rng = np.random.default_rng(2)
    for _ in range(10):
        r = rng.normal(size=3)
        r /= np.linalg.norm(r)
        assert abs(sf.at(r) - sf.const) <= 1e-8


def test_eta_d_state_terms_vanish_for_unequal_widths():
    assert np.linalg.norm(eta_d_form(table((0.4, 1.2))).vector) < 1e-10


def test_angle_povm_totals():
    tab = table()
    a = compute_marginals(tab).a_prime
    full = angle_povm(tab).total()
    assert full.isclose(IDENTITY, atol=1e-8)
    half = angle_povm(tab, (-np.pi / 2, np.pi / 2)).total()
    assert half.isclose(Effect(1.0, (a, 0.0, 0.0)), atol=1e-8)


def test_angle_povm_elements_are_positive():
    pov = angle_povm(table(), n_theta=64)
    assert np.all(pov.a >= np.hypot(pov.b, pov.c) - 1e-12)


def test_angle_povm_needs_symmetric_detectors():
    with pytest.raises(PreconditionError):
        angle_povm(table((0.4, 1.2)))


@given(st.floats(-math.sqrt(SPIN_SQ), math.sqrt(SPIN_SQ)), st.floats(0, 0.75))
def test_error_measures(eta, eta_d):
    dei, def_, dd = error_measures(eta, eta, eta_d)
    assert dei == pytest.approx(math.sqrt(max(0.0, 0.75 - eta * eta)))
    assert dei == def_
    assert dd == pytest.approx(math.sqrt(2) * math.sqrt(0.75 - eta_d**2))


def test_error_measures_reject_out_of_range():
    with pytest.raises(PreconditionError):
        error_measures(0.9, 0.5, 0.75)


def test_eta_i_closed_domain():
    assert eta_i_closed(0.628) == pytest.approx(0.4932, abs=1e-4)
    with pytest.raises(PreconditionError):
        eta_i_closed(0.7)


def test_report_symmetric_and_asymmetric():
    rep = fidelity_report(table())
    assert rep.closed_form_gap < 1e-6
    assert rep.eta_d == pytest.approx(0.75, abs=1e-9)
    assert rep.delta_ei == pytest.approx(math.sqrt(0.75 - rep.eta_i**2))
    asym = fidelity_report(table((0.4, 1.2)))
    assert math.isnan(asym.eta_f) and math.isnan(asym.eta_i_closed) and math.isnan(asym.delta_ef)
    assert 0 < asym.eta_i < 0.5
    with pytest.raises(PreconditionError):
        eta_f_direct(table((0.4, 1.2)))


def test_eta_i_respects_spin_bound():
    """The retrodictive fidelity never exceeds 1/2 for spin one-half."""
    for s in (0.2, 0.5, 0.7, 1.0, 2.0):
        assert eta_i_direct(table((s, s))) <= 0.5
