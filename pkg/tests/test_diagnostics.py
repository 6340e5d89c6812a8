import math

import numpy as np
import pytest

from hbo2d import diagnostics as dg
from hbo2d import groundstate as gs
from hbo2d import scenarios as sc
from hbo2d.biortho import Field2D, get_discretization
from hbo2d.errors import InvalidArgumentError, NumericDomainError, UnsupportedError
from hbo2d.model import ModelParams

from conftest import random_field


def gaussian(d, A=1.0):
    X, Y = d.meshgrid()
    return Field2D.from_physical(d, A * np.exp(-(X ** 2 + Y ** 2)))


def test_integrals_of_gaussian(disc256, hbo):
    f = gaussian(disc256)
    assert abs(dg.mass(f) - math.pi / 2) < 1e-10
    assert abs(dg.integrate_power(f, 3) - math.pi / 3) < 1e-10
    assert abs(dg.l1_integral(f) - math.pi) < 1e-10
    # ||(-Delta)^{1/2} e^{-r^2}||^2 = int |k| |ghat|^2 = pi^{3/2} / (2 sqrt 2)
    assert abs(dg.hs_seminorm(f, 0.5) - math.pi ** 1.5 / (2 * math.sqrt(2))) < 1e-6
    # s = 1 gives the Dirichlet integral 2 pi * int r^3 4 e^{-2r^2} dr = pi
    assert abs(dg.hs_seminorm(f, 1.0) - math.pi) < 1e-8


@pytest.mark.parametrize("A", [4.5, 5.5, 6.0])
def test_energy_of_gaussian_closed_form(A, disc256, hbo):
    exact = A ** 2 * math.pi ** 1.5 / (4 * math.sqrt(2)) - A ** 3 * math.pi / 18
    assert abs(dg.energy(gaussian(disc256, A), hbo) - exact) < 1e-5


def test_energy_of_rational_closed_form(disc256, hbo):
    # (1/2) ||(-Delta)^{1/4} u||^2 = 9 pi^3 / 32 and (1/6) int u^3 = 9 pi / 4 for u = 3/(1+r^2)
    u = sc.build_initial_condition(sc.InitialConditionSpec("rational2", 3.0), disc=disc256)
    exact = 9 * math.pi ** 3 / 32 - 9 * math.pi / 4
    assert abs(dg.energy(u, hbo) - exact) < 2e-3


def test_energy_of_multiple_of_Q(ground_state, hbo):
    Q = ground_state.Q
    M = dg.mass(Q)
    for A in (0.9, 1.2):
        E = dg.energy(Q.scaled(A), hbo)
        assert abs(E - A ** 2 * (1 - A) * M) <= 0.02 * abs(A ** 2 * (1 - A) * M)
    assert abs(dg.energy(Q.scaled(0.9), hbo) - 3.45) < 0.02 * 3.45


def test_inner_and_mass_consistent(disc32, rng):
    f = random_field(disc32, rng)
    assert abs(dg.inner(f, f) - dg.mass(f)) < 1e-12 * dg.mass(f)
    quad = dg.integrate_power(f, 2)
    assert abs(quad - dg.mass(f)) < 1e-10 * dg.mass(f)


def test_conserved_quantities_record(disc256, hbo):
    f = gaussian(disc256, 2.0)
    r = dg.conserved_quantities(f, hbo, t=0.5)
    assert r.t == 0.5 and abs(r.linf - np.abs(f.U).max()) == 0
    assert math.isnan(r.x_c) and len(r.as_row()) == len(dg.SERIES_COLUMNS)
    assert dg.reality_residue(f) < 1e-10
    with pytest.raises(NumericDomainError):
        dg.integrate_power(Field2D.from_physical(disc256, np.full((256, 256), np.inf)), 2)


def test_peak_tracking_identity(ground_state, hbo):
    pk = dg.peak_tracking(ground_state.Q, ground_state, hbo)
    h = ground_state.Q.disc.grid.x[129] - ground_state.Q.disc.grid.x[128]
    assert abs(pk.x_c) < h and abs(pk.y_c) < h
    assert abs(pk.c_estimate - 1) < 1e-12
    assert pk.profile_mismatch < 1e-3


def test_peak_tracking_of_shifted_Q(ground_state, hbo):
    spec = sc.InitialConditionSpec("ground_state_multiple", 1.0, shift=(-1.0, 0.0))
    f = sc.build_initial_condition(spec, ground_state)
    pk = dg.peak_tracking(f, ground_state, hbo)
    assert abs(pk.x_c - 1.0) < 0.12 and abs(pk.y_c) < 0.12
    assert pk.profile_mismatch < 0.05


def test_speed_estimate_general_power():
    p = ModelParams(0.75, 3)
    assert abs(dg.speed_estimate(2.0, 1.0, p) - 4.0) < 1e-15
    assert dg.speed_estimate(3.0, 3.0, ModelParams.hbo()) == 1.0


def test_wedge_predictions():
    assert abs(dg.predicted_wedge_tan(0.5) - 2 * math.sqrt(2)) < 1e-15
    assert abs(dg.predicted_half_angle_deg(0.5) - 19.4712206) < 1e-6
    # s = 1: edge at 30 degrees from the axis, a 60 degree wedge in total
    assert abs(2 * dg.predicted_half_angle_deg(1.0) - 60.0) < 1e-12


def test_wedge_contour_on_synthetic_sector(disc256, hbo):
    # a sector of half-opening 15 degrees behind a peak at the origin
    X, Y = disc256.meshgrid()
    r = np.hypot(X, Y)
    ang = np.degrees(np.arctan2(np.abs(Y), -X))
    U = np.exp(-r ** 2) * 10 + np.where((X < 0) & (ang < 15), 1.0, 0.0) * np.exp(-r / 20)
    f = Field2D.from_physical(disc256, U)
    w = dg.wedge_angle(f, (0.0, 0.0), hbo, level=0.05, core_radius=3.0, x_range=20.0)
    assert w.applicable and w.n_points > 0
    assert abs(w.half_angle_deg - 15.0) < 2.0
    assert w.contained
    # default: far half of the contour, no core radius needed
    w = dg.wedge_angle(f, (0.0, 0.0), hbo, level=0.05, x_range=20.0)
    assert abs(w.half_angle_deg - 15.0) < 2.0


def test_criticality_and_admissibility():
    rep = dg.criticality_admissibility(ModelParams.hbo(), 1.0)
    assert rep.r_c == 0.0 and rep.criticality_class == "critical"
    assert rep.admissible and rep.case == "(i)"
    assert dg.criticality_class(1.0, 2) == "subcritical"
    assert ModelParams(1.0, 2).r_c == -1.0
    assert not dg.criticality_admissibility(ModelParams(0.5, 4), 1.0).admissible
    assert dg.criticality_class(0.5, 4) == "supercritical"
    assert dg.criticality_class(1 / 3, 2) == "energy_critical"
    assert dg.admissibility_case(ModelParams(0.5, 2, nu1=1.0), -1.0) == "(ii)"
    assert dg.admissibility_case(ModelParams(0.5, 4, nu1=1.0), 1.0) == "(iii)"
    assert dg.admissibility_case(ModelParams(0.5, 4), -1.0) == "(iv)"


def test_admissibility_odd_and_modified():
    # m = 3 odd: below m* = 3 fails for s=1/2, so take s=0.75 (m* = 7)
    assert dg.admissibility_case(ModelParams(0.75, 3, -1.0, 1.0), 1.0) == "(v)(i)"
    assert dg.admissibility_case(ModelParams(0.75, 3, -1.0, -1.0), 1.0) is None
    assert dg.admissibility_case(ModelParams(0.5, 3, -1.0, 1.0), 0.0) == "(vii)" or \
        dg.admissibility_case(ModelParams(0.5, 3, -1.0, 1.0), 0.0) is None
    assert dg.admissibility_case(ModelParams(0.5, 3, 1.0, -1.0), 0.0) == "(vii)"
    assert dg.admissibility_case(ModelParams(0.75, 2), 1.0, modified=True) == "(a)"
    assert dg.admissibility_case(ModelParams(0.5, 3, 1.0, -1.0), 0.0, modified=True) == "(e)"


def test_gn_constant():
    assert dg.gn_prefactor(0.5, 2) == 3.0
    assert abs(dg.gn_sharp_constant(42.6381, ModelParams.hbo()) - 0.459) < 1e-3
    with pytest.raises(NumericDomainError):
        dg.gn_prefactor(0.5, 3)
    with pytest.raises(InvalidArgumentError):
        dg.gn_sharp_constant(0.0, ModelParams.hbo())


def test_existence_certificate(ground_state, hbo):
    Q = ground_state.Q
    assert dg.existence_certificate(Q.scaled(0.9), ground_state, hbo).label == "C2"
    assert dg.existence_certificate(Q.scaled(1.2), ground_state, hbo).label is None
    assert dg.existence_certificate(Q.scaled(5.0), ground_state, ModelParams(0.75, 2)).label == "C1"


def test_threshold_amplitudes(ground_state):
    assert abs(dg.threshold_amplitude("rational2", 42.6381) - 3.684) < 1e-3
    assert abs(dg.family_unit_norm("rational4_aniso") - math.pi / math.sqrt(2)) < 1e-15
    with pytest.raises(UnsupportedError):
        dg.family_unit_norm("two_soliton")


@pytest.mark.parametrize("family", ["rational2", "gaussian", "rational4_aniso", "rational2_aniso", "rational4"])
def test_family_norms_match_quadrature(family, disc256):
    u = sc.build_initial_condition(sc.InitialConditionSpec(family, 1.0), disc=disc256)
    assert abs(math.sqrt(dg.mass(u)) - dg.family_unit_norm(family)) < 2e-3
