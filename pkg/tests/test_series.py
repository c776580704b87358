import random
from fractions import Fraction

import pytest

from src.lab.errors import GradingError
from src.lab.series import (
    Grading, TriangularSeries, length_series, series_add, series_compose_analytic,
    series_divide_za, series_dump, series_load, series_mul, series_swap, series_times_za,
    sigma_evaluate, sigma_from_mu, solve_energy_series, u_from_gluing
)

DELTA = [Fraction(1, 5), Fraction(-2, 7)]
A = {(2, 0): Fraction(1, 3), (0, 2): Fraction(1, 3), (1, 1): Fraction(-1, 2)}


def test_strict_grading_rejects_high_powers_of_index():
    series = TriangularSeries(3, grading=Grading.STRICT)
    series[(2, 0, 1, 0)] = Fraction(1)
    with pytest.raises(GradingError):
        series[(1, 0, 1, 0)] = Fraction(1)
    with pytest.raises(GradingError):
        series[(0, 2, 0, 2)] = Fraction(1)


def test_triangular_grading_allows_index_up_to_power():
    series = TriangularSeries(3)
    series[(1, 0, 1, 0)] = Fraction(2)
    assert series[(1, 0, 1, 0)] == 2


def test_terms_above_order_are_dropped():
    series = TriangularSeries(2, {(2, 1, 0, 0): Fraction(5)})
    assert series.coeffs == {}


def test_swap_exchanges_both_pairs():
    series = TriangularSeries(3, {(2, 1, 1, 0): Fraction(3)}, Grading.STRICT_A)
    swapped = series_swap(series)
    assert swapped[(1, 2, 0, 1)] == 3
    assert swapped.grading == Grading.STRICT_B


def test_u_linear_coefficient():
    u = u_from_gluing(A, 1)
    assert u[(0, 0)] == 0
    assert u[(1, 0)] == -4 * A[(2, 0)]


def test_energy_series_leading_terms():
    u = u_from_gluing(A, 2)
    h_a, h_b = solve_energy_series(DELTA, u, 3)
    assert h_a[(1, 0, 0, 0)] == 1
    assert h_a[(2, 0, 1, 0)] == 2 * DELTA[0]
    assert h_b == series_swap(h_a)


def test_sigma_first_coefficient_is_half_of_delta():
    sigma = sigma_from_mu(DELTA, 2)
    assert sigma.delta_hat[0] == DELTA[0] / 2
    half = Fraction(1, 2)
    assert sigma_evaluate(sigma, half) == sigma.delta_hat[0] / 4 + sigma.delta_hat[1] / 8


def test_length_series_low_order_coefficients():
    L_inf = Fraction(3, 2)
    series = length_series(DELTA, A, L_inf, 3)
    assert series.grading == Grading.STRICT
    assert series[(0, 0, 0, 0)] == 2 * L_inf
    assert series[(1, 0, 0, 0)] == -1
    assert series[(0, 1, 0, 0)] == -1
    assert series[(2, 0, 1, 0)] == -DELTA[0]
    assert series[(2, 0, 0, 0)] == 2 * A[(2, 0)]
    assert series[(2, 0, 0, 0)] == series[(0, 2, 0, 0)]


def test_length_series_is_symmetric():
    series = length_series(DELTA, A, Fraction(0), 3)
    assert series_swap(series) == series


def test_length_series_accepts_decimal_strings():
    series = length_series(['0.2'], {(2, 0): '0.25', (0, 2): '0.25'}, '0', 2)
    assert not series.exact
    assert abs(series[(2, 0, 0, 0)] - 0.5) < 1e-30


def test_dump_and_load_preserve_series():
    series = length_series(DELTA, A, Fraction(1, 3), 3)
    text = series_dump(series)
    assert text.startswith('# order 3 grading STRICT')
    assert series_load(text) == series


GRADINGS = (Grading.TRIANGULAR, Grading.STRICT_A, Grading.STRICT_B, Grading.STRICT)


def random_series(rng, grading, order=4, constant=True):
    series = TriangularSeries(order, grading=grading)
    for _ in range(rng.randint(1, 6)):
        p = rng.randint(0, order)
        q = rng.randint(0, order - p)
        if not constant and p + q == 0:
            continue
        i = rng.randint(0, max(0, p - 1) if grading & Grading.STRICT_A else p)
        j = rng.randint(0, max(0, q - 1) if grading & Grading.STRICT_B else q)
        series[(p, q, i, j)] = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
    return series


def respects_grading(series):
    strict_a = series.grading & Grading.STRICT_A
    strict_b = series.grading & Grading.STRICT_B
    for p, q, i, j in series.coeffs:
        if i > (max(0, p - 1) if strict_a else p) or j > (max(0, q - 1) if strict_b else q):
            return False
    return True


def test_operations_stay_inside_the_grading():
    rng = random.Random(2024)
    for _ in range(1000):
        left = random_series(rng, rng.choice(GRADINGS))
        right = random_series(rng, rng.choice(GRADINGS))
        total = series_add(left, right)
        product = series_mul(left, right)
        assert total.grading == left.grading & right.grading
        assert product.grading == left.grading & right.grading
        assert respects_grading(total) and respects_grading(product)

        inner = random_series(rng, rng.choice(GRADINGS), constant=False)
        composed = series_compose_analytic([Fraction(c, 3) for c in range(5)], inner)
        assert composed.grading == inner.grading
        assert respects_grading(composed)

        strict_a = random_series(rng, rng.choice((Grading.STRICT_A, Grading.STRICT)))
        quotient = series_divide_za(series_times_za(strict_a))
        assert quotient.grading == strict_a.grading & Grading.STRICT_B
        assert respects_grading(quotient)
        for key, value in strict_a.items():
            if sum(key[:2]) < strict_a.max_order:
                assert quotient[key] == value
