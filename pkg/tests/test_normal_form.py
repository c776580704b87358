import pytest
from mpmath import mp, mpf

from src.lab.billiard import PhasePoint
from src.lab.errors import NormalFormError
from src.lab.normal_form import (
    apply_psi, birkhoff_map, compute_normal_form, conjugacy_residuals, extend_and_glue,
    fixed_point_energies, gluing_involution_residual
)
from src.lab.numerics import Jet
from src.lab.orbits import homoclinic_orbit


@pytest.fixture
def normal_form(reference_table):
    return compute_normal_form(reference_table, 5)


def test_lambda_of_unit_circles(normal_form):
    assert abs(normal_form.lam - (3 - 2 * mp.sqrt(2))) < mpf(10) ** -30
    assert len(normal_form.delta) == 2


def test_conjugacy_equations_hold(normal_form):
    residuals = conjugacy_residuals(normal_form)
    for name, value in residuals.items():
        assert value < mpf(10) ** -25, name


def test_renormalization_keeps_birkhoff_invariants(normal_form):
    delta = apply_psi(normal_form, [mpf(2), mpf('0.3')])
    for got, want in zip(delta, normal_form.delta):
        assert abs(got - want) < mpf(10) ** -25


def test_birkhoff_map_preserves_energy():
    mu = Jet.univariate(2, [mpf('0.2'), mpf('0.1'), mpf('-0.05')])
    xi, eta = Jet.variable(2, 4, 0), Jet.variable(2, 4, 1)
    image = birkhoff_map(mu, 3, xi, eta)
    product = image[0] * image[1] - xi * eta
    assert product.max_abs() < mpf(10) ** -40


def test_order_below_three_is_rejected(reference_table):
    with pytest.raises(NormalFormError):
        compute_normal_form(reference_table, 2)


def test_birkhoff_coordinates_only_on_first_pair(normal_form):
    with pytest.raises(NormalFormError):
        normal_form.birkhoff_coordinates(PhasePoint(3, mpf(0), mpf(0)))


@pytest.mark.slow
def test_gluing_on_reference_table(reference_table):
    nf = compute_normal_form(reference_table, 7)
    homoclinic = homoclinic_orbit(reference_table, 6)
    glue, nf = extend_and_glue(reference_table, nf, homoclinic)
    assert glue.xi_inf > 0
    assert glue.errors['a_asymmetry'] < mpf(10) ** -15
    assert gluing_involution_residual(glue) < mpf(10) ** -15
    h_a, h_b, *_ = fixed_point_energies(nf, glue, 6, 6)
    assert abs(h_a - h_b) < mpf(10) ** -15
