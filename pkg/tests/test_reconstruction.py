import io

import pytest
from mpmath import mp, mpf

from src.lab.errors import GeometryError, ReconstructionError
from src.lab.orbits import spectrum_grid
from src.lab.reconstruction import (
    ReconstructedPoint, fit_boundary_arc, reconstruct_d3_points, reconstruct_point,
    write_plot_data, write_points_csv
)


def arc(center, radius, angles):
    return [(center[0] + radius * mp.cos(t), center[1] + radius * mp.sin(t)) for t in angles]


@pytest.fixture
def interior_data(reference_table):
    orbits = spectrum_grid(reference_table, None, range(3, 9), family='cyclicity1')
    interiors = {key[0]: o.points[1:] for key, o in orbits.items()}
    perimeters = {key[0]: o.perimeter for key, o in orbits.items()}
    return interiors, perimeters


def test_reconstructed_points_lie_on_third_circle(reference_table, interior_data):
    interiors, perimeters = interior_data
    points = reconstruct_d3_points(reference_table.without(3), interiors, perimeters)
    assert [p.n for p in points] == list(range(3, 9))
    for p in points:
        distance = mp.sqrt((p.point[0] - 6) ** 2 + p.point[1] ** 2)
        assert abs(distance - 1) < mpf(10) ** -10
        assert p.error < mpf(10) ** -10
        assert p.closure < mpf(10) ** -20


def test_reconstruction_refuses_third_scatterer(reference_table, interior_data):
    interiors, perimeters = interior_data
    with pytest.raises(GeometryError):
        reconstruct_point(reference_table, 3, interiors[3], perimeters[3])


def test_interior_points_must_follow_coding(reference_table, interior_data):
    interiors, perimeters = interior_data
    with pytest.raises(GeometryError):
        reconstruct_point(reference_table.without(3), 4, interiors[3], perimeters[3])


def test_short_perimeter_is_inconsistent(reference_table, interior_data):
    interiors, _ = interior_data
    with pytest.raises(ReconstructionError):
        reconstruct_point(reference_table.without(3), 3, interiors[3], mpf(1))


def test_missing_perimeter_is_reported(reference_table, interior_data):
    interiors, perimeters = interior_data
    del perimeters[5]
    with pytest.raises(ReconstructionError):
        reconstruct_d3_points(reference_table.without(3), interiors, perimeters)


def test_points_csv_layout():
    stream = io.StringIO()
    write_points_csv(stream, [ReconstructedPoint(4, (mpf(5), mpf('0.5')), mpf(0), mpf(3))])
    lines = stream.getvalue().splitlines()
    assert lines[0] == 'x,y,error,n'
    assert lines[1].endswith(',4')


def test_plot_data_includes_boundary(reference_table):
    stream = io.StringIO()
    points = [ReconstructedPoint(4, (mpf(5), mpf(0)), mpf(0), mpf(3))]
    write_plot_data(stream, points, boundary=reference_table[3], samples=12)
    rows = stream.getvalue().splitlines()
    assert rows[0] == 'kind,x,y'
    assert sum(1 for r in rows if r.startswith('boundary')) == 12


def test_circle_fit_recovers_center_and_radius():
    points = arc((mpf(6), mpf(0)), mpf(1), [mp.pi * (mpf(9) / 10 + mpf(k) / 40) for k in range(8)])
    fit = fit_boundary_arc(points, model='circle')
    assert abs(fit.params['cx'] - 6) < mpf(10) ** -30
    assert abs(fit.params['radius'] - 1) < mpf(10) ** -30
    assert fit.flagged == []


def test_conic_fit_on_ellipse_arc():
    angles = [mpf(k) / 10 for k in range(8)]
    points = [(2 * mp.cos(t) + 1, mp.sin(t) - 3) for t in angles]
    fit = fit_boundary_arc(points, model='conic')
    assert fit.max_residual < mpf(10) ** -30
    assert fit.flagged == []


def test_corrupted_point_is_flagged():
    points = arc((mpf(0), mpf(0)), mpf(1), [mpf(k) / 5 for k in range(8)])
    x, y = points[3]
    points[3] = (x + mpf('1e-6'), y)
    fit = fit_boundary_arc(points, errors=[mpf(10) ** -20] * 8, model='circle')
    assert 3 in fit.flagged
    with pytest.raises(ReconstructionError):
        fit_boundary_arc(points, errors=[mpf(10) ** -20] * 8, model='circle', strict=True)


def test_arc_fit_needs_six_points():
    with pytest.raises(GeometryError):
        fit_boundary_arc(arc((0, 0), 1, [mpf(k) / 5 for k in range(5)]))


def test_collinear_points_are_degenerate():
    with pytest.raises(GeometryError):
        fit_boundary_arc([(mpf(k), 2 * mpf(k)) for k in range(7)])
