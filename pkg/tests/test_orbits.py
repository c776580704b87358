import pytest
from mpmath import mp, mpf

from src.lab import orbits
from src.lab.errors import GeometryError, NewtonDivergenceError
from src.lab.geometry import normalize_frame
from src.lab.orbits import (
    Coding, cyclicity1_orbit, cyclicity2_orbit, homoclinic_orbit, normal_form_start,
    perimeter_offsets, shifted_seed, solve_cyclic_tridiagonal, solve_periodic, spectrum_grid,
    verify_coding
)
from tests.conftest import reference_circles


def close(a, b, digits=30):
    return abs(a - b) < mpf(10) ** -digits


def test_coding_families():
    assert Coding.cyclicity1(2).word == (3, 1, 2, 1)
    assert Coding.cyclicity2(2, 1).word == (3, 1, 2, 1, 3, 1)
    assert len(Coding.cyclicity2(3, 4)) == 2 * 3 + 2 * 4
    assert str(Coding.parse('3121')) == '3121'


def test_coding_rejects_repeated_neighbours():
    with pytest.raises(GeometryError):
        Coding.parse('3113')
    # a primeira e a última letra também são vizinhas
    with pytest.raises(GeometryError):
        Coding.parse('121')
    with pytest.raises(GeometryError):
        Coding.parse('3141')


def test_cyclic_tridiagonal_solver():
    lower = [mpf(1)] * 4
    upper = [mpf(1)] * 4
    diag = [mpf(4)] * 4
    x = [mpf(1), mpf(-2), mpf(3), mpf('0.5')]
    rhs = [lower[k] * x[k - 1] + diag[k] * x[k] + upper[k] * x[(k + 1) % 4] for k in range(4)]
    solved = solve_cyclic_tridiagonal(lower, diag, upper, rhs)
    assert all(close(a, b, 40) for a, b in zip(solved, x))


def test_two_periodic_orbit_between_first_pair(reference_table):
    orbit = solve_periodic(reference_table, Coding.parse('12'))
    assert close(orbit.perimeter, 4)
    assert all(close(p.s, 0) and close(p.r, 0) for p in orbit.points)


def test_bounce_between_d3_and_d1(reference_table):
    # a corda 3 -> 1 liga os centros (6, 0) e (0, 2)
    orbit = cyclicity2_orbit(reference_table, 1, 1)
    assert close(orbit.perimeter, 4 * (mp.sqrt(40) - 2))


def test_double_excursion_doubles_perimeter(reference_table):
    for n in (2, 3):
        single = cyclicity1_orbit(reference_table, n)
        double = cyclicity2_orbit(reference_table, n, n)
        assert close(double.perimeter, 2 * single.perimeter)


def test_short_cells_pass_the_collision_check_at_fifty_digits(reference_table):
    assert mp.dps == 50
    for m, n in ((1, 2), (2, 1), (2, 2)):
        orbit = cyclicity2_orbit(reference_table, m, n)
        assert orbit.residual <= mpf(10) ** -30
        assert verify_coding(reference_table, orbit)


def test_newton_tail_must_be_quadratic(reference_table, monkeypatch):
    newton = orbits._newton_direction

    def damped(chords, gradient):
        return [d * mpf('0.9') for d in newton(chords, gradient)]

    monkeypatch.setattr(orbits, '_newton_direction', damped)
    with pytest.raises(NewtonDivergenceError, match='quadrática'):
        cyclicity2_orbit(reference_table, 2, 2)


def test_shifted_seed_continues_the_previous_row(reference_table):
    previous = cyclicity2_orbit(reference_table, 4, 6)
    seed = shifted_seed(previous)
    assert len(seed) == len(Coding.cyclicity2(5, 6))
    continued = solve_periodic(reference_table, Coding.cyclicity2(5, 6), seed=seed)
    fresh = cyclicity2_orbit(reference_table, 5, 6)
    assert close(continued.perimeter, fresh.perimeter)
    assert continued.history[0] < fresh.history[0]
    assert len(continued.history) <= len(fresh.history)


def test_seed_size_must_match_coding(reference_table):
    with pytest.raises(GeometryError):
        solve_periodic(reference_table, Coding.cyclicity2(2, 2), seed=[mpf(0)] * 3)


def test_continued_grid_matches_independent_solves(reference_table):
    grid = spectrum_grid(reference_table, [3, 4], [5], mirror=False)
    assert close(grid[(4, 5)].perimeter, cyclicity2_orbit(reference_table, 4, 5).perimeter)


def test_perimeters_are_symmetric(reference_table):
    grid = spectrum_grid(reference_table, [2, 3], [2, 3], mirror=False)
    assert close(grid[(2, 3)].perimeter, grid[(3, 2)].perimeter)


def test_mirrored_cells_hold_the_transposed_orbit(reference_table):
    grid = spectrum_grid(reference_table, [2, 3], [2, 3])
    assert set(grid) == {(2, 2), (2, 3), (3, 2), (3, 3)}
    mirrored = grid[(3, 2)]
    assert mirrored.coding == Coding.cyclicity2(3, 2)
    assert [p.i for p in mirrored.points] == list(mirrored.coding.word)
    assert mirrored.perimeter == grid[(2, 3)].perimeter
    assert verify_coding(reference_table, mirrored)


def test_mirrored_failures_are_recorded(reference_table, monkeypatch):
    solve = orbits.cyclicity2_orbit

    def failing(table, m, n, seed=None, run_id=None):
        if (m, n) == (2, 3):
            raise NewtonDivergenceError("Newton não convergiu", m=m, n=n)
        return solve(table, m, n, seed=seed, run_id=run_id)

    monkeypatch.setattr(orbits, 'cyclicity2_orbit', failing)
    failures = {}
    grid = spectrum_grid(reference_table, [2, 3], [2, 3], failures=failures)
    assert set(failures) == {(2, 3), (3, 2)}
    assert set(grid) == {(2, 2), (3, 3)}


def test_cell_filter_and_cyclicity1_keys(reference_table):
    grid = spectrum_grid(reference_table, None, [2, 3, 4], family='cyclicity1', cells=[(3,)])
    assert list(grid) == [(3,)]
    assert len(grid[(3,)].points) == 6


def test_perimeters_approach_multiples_of_ell0(reference_table):
    grid = spectrum_grid(reference_table, [4], [4, 5])
    offset = perimeter_offsets(grid, reference_table.ell0)
    # duas excursões a D₃: quatro cordas longas no lugar de quatro cordas de comprimento ℓ₀
    assert 4 * (mp.sqrt(40) - 2) - 8 < offset < 4 * (mp.sqrt(40) - 2)


def test_grid_start_depends_on_radius(reference_table):
    grid = spectrum_grid(reference_table, None, [3, 4, 5], family='cyclicity1')
    assert normal_form_start(grid, mpf(10)) == 3
    assert normal_form_start(grid, mpf(0)) is None


@pytest.mark.slow
def test_homoclinic_orbit_converges(reference_table):
    homoclinic = homoclinic_orbit(reference_table, 3)
    assert homoclinic.points[0].i == 3
    assert homoclinic.error < mpf(10) ** -20


@pytest.mark.slow
def test_perimeters_are_stable_under_more_precision(reference_table):
    low = cyclicity2_orbit(reference_table, 2, 3).perimeter
    with mp.workdps(70):
        table = normalize_frame(reference_circles())
        high = cyclicity2_orbit(table, 2, 3).perimeter
        assert abs(high - low) < mpf(10) ** -45
