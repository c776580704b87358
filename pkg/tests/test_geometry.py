import pytest
from mpmath import mp, mpf

from src.lab.errors import GeometryError, NonEclipseError
from src.lab.geometry import (
    Circle, Ellipse, FourierScatterer, build_scatterer, check_non_eclipse, chord_derivatives,
    chord_length, normalize_frame
)
from tests.conftest import reference_circles


def close(a, b, digits=35):
    return abs(a - b) < mpf(10) ** -digits


def test_reference_frame_puts_closest_points_on_the_axis(reference_table):
    assert close(reference_table.ell0, 2)
    p1, _, n1, k1 = reference_table[1].eval(0)
    p2, _, n2, _ = reference_table[2].eval(0)
    assert close(p1[0], 0) and close(p1[1], 1)
    assert close(p2[0], 0) and close(p2[1], -1)
    # normal aponta para a mesa
    assert close(n1[1], -1) and close(n2[1], 1)
    assert close(k1, 1)


def test_third_scatterer_lies_on_the_right(reference_table):
    third = reference_table[3]
    assert -third.support_value(mp.pi) > 0
    assert close(third.center[0], 6) and close(third.center[1], 0)


def test_left_third_scatterer_is_mirrored():
    bodies = reference_circles()
    bodies[3] = Circle(('-6', '0'), '1')
    table = normalize_frame(bodies)
    assert table.isometry['reflected'] is True
    assert close(table[3].center[0], 6)


def test_collinear_circles_violate_non_eclipse():
    bodies = {1: Circle(('0', '3'), '1'), 2: Circle(('0', '-3'), '1'), 3: Circle(('0', '9'), '1')}
    assert not check_non_eclipse(bodies).ok
    with pytest.raises(NonEclipseError):
        normalize_frame(bodies)


def test_reference_circles_satisfy_non_eclipse():
    assert check_non_eclipse(reference_circles()).ok


def test_overlapping_scatterers_are_rejected():
    bodies = reference_circles()
    bodies[2] = Circle(('0', '0.5'), '1')
    bodies[1] = Circle(('0', '-0.5'), '1')
    with pytest.raises(GeometryError):
        normalize_frame(bodies)


def test_non_convex_fourier_body_is_rejected():
    body = FourierScatterer(('0', '0'), '1', cos={2: '0.5'})
    with pytest.raises(GeometryError):
        body.check_convex()


def test_fourier_modes_start_at_two():
    with pytest.raises(GeometryError):
        FourierScatterer(('0', '0'), '1', cos={1: '0.1'})


def test_ellipse_support_function():
    ellipse = Ellipse(('0', '0'), ('2', '1'))
    assert close(ellipse.support_value(mpf(0)), 2)
    assert close(ellipse.support_value(mp.pi / 2), 1)


def test_arc_length_parametrization_has_unit_speed():
    ellipse = Ellipse(('0', '0'), ('2', '1'), anchors=512)
    x, y = ellipse.arc_jet(mpf('0.3'), 3)
    assert close(x[(1,)] ** 2 + y[(1,)] ** 2, 1, 30)


def test_chord_derivative_matches_finite_difference(reference_table):
    first, second = reference_table[1], reference_table[3]
    s, s2 = mpf('0.2'), mpf('2.9')
    h = mpf(10) ** -15
    data = chord_derivatives(first, s, second, s2)
    numeric = (chord_length(first, s + h, second, s2) - chord_length(first, s - h, second, s2)) / (2 * h)
    assert close(data.d1, numeric, 20)
    assert close(data.length, chord_length(first, s, second, s2), 40)


def test_build_scatterer_from_config_dict():
    body = build_scatterer({'kind': 'ellipse', 'center': ['1', '0'], 'semi_axes': ['2', '1']})
    assert isinstance(body, Ellipse)
    with pytest.raises(GeometryError):
        build_scatterer({'kind': 'triangle', 'center': ['0', '0']})


def test_normal_points_out_of_every_body(reference_table):
    ellipse = Ellipse(('1', '-1'), ('2', '1'), angle=mpf('0.3'), anchors=512)
    bodies = [reference_table[k] for k in (1, 2, 3)] + [ellipse]
    for body in bodies:
        for k in range(8):
            s = body.perimeter * k / 8
            point, tangent, normal, _ = body.eval(s)
            dx, dy = point[0] - body.center[0], point[1] - body.center[1]
            assert dx * normal[0] + dy * normal[1] > 0
            assert close(tangent[0] * normal[0] + tangent[1] * normal[1], 0, 30)
