"""Pontos de ∂D₃ a partir de D₁, D₂, dos pontos interiores e dos perímetros ℓ_n.

A mesa recebida contém apenas D₁ e D₂; D₃ só entra através de ℓ_n.
"""

import csv
import logging
from dataclasses import dataclass, field

from mpmath import mp, mpf

from src.lab.billiard import involution, outgoing_direction
from src.lab.errors import GeometryError, ReconstructionError
from src.lab.numerics import bigfloat, format_number, tolerance
from src.run_guards import RunLogger


@dataclass
class ReconstructedPoint:
    n: int
    point: tuple
    error: object
    chord: object
    closure: object = None

    def to_dict(self):
        return {
            'n': self.n,
            'x': format_number(self.point[0]),
            'y': format_number(self.point[1]),
            'error': format_number(self.error, 5),
            'chord': format_number(self.chord),
        }


def _distance(p, q):
    return mp.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2)


def interior_chord_sum(table, interior):
    """Σ L(x_{k−1}, x_k) ao longo de x₁ … x_{2n−1}"""
    return mp.fsum(table.chord_length(a.i, a.s, b.i, b.s) for a, b in zip(interior, interior[1:]))


def _check_interior(table, n, interior):
    if 3 in table.scatterers:
        raise GeometryError("A reconstrução não recebe D₃")
    expected = (1, 2) * (n - 1) + (1,)
    if tuple(p.i for p in interior) != expected:
        raise GeometryError("Pontos interiores não seguem a codificação 3(12)^{n−1}1", n=n)


def reconstruct_point(table, n, interior, perimeter):
    """γ₃(s₀ⁿ) = γ₁(s₁ⁿ) + L₃₁·u, com u a direção de x₁ de volta a D₃"""
    _check_interior(table, n, interior)
    first, last = interior[0], interior[-1]
    for x in (first, last):
        if not abs(x.r) < 1:
            raise ReconstructionError("Ângulo de colisão exige |r| < 1", n=n, r=x.r)

    chord = (perimeter - interior_chord_sum(table, interior)) / 2
    if chord <= 0:
        raise ReconstructionError("Distância L₃₁ negativa: dados inconsistentes",
                                  n=n, chord=chord)

    base, backwards = outgoing_direction(table, involution(first))
    point = (base[0] + chord * backwards[0], base[1] + chord * backwards[1])
    # a corda x_{2n−1} → x₀ tem o mesmo comprimento pela reversibilidade da órbita
    end, forwards = outgoing_direction(table, last)
    mirror = (end[0] + chord * forwards[0], end[1] + chord * forwards[1])
    return ReconstructedPoint(n, point, _distance(point, mirror), chord)


def closure_residual(table, reconstructed, interior, perimeter):
    """|ℓ_n − (L(x₀, x₁) + Σ interior + L(x_{2n−1}, x₀))| com x₀ reconstruído"""
    first, last = interior[0], interior[-1]
    start = table[first.i].eval(first.s)[0]
    end = table[last.i].eval(last.s)[0]
    total = (_distance(reconstructed.point, start) + interior_chord_sum(table, interior)
             + _distance(end, reconstructed.point))
    return abs(total - perimeter)


def reconstruct_d3_points(table, interiors, perimeters, run_id=None):
    """Um ponto de ∂D₃ por n.

    Args:
        table: mesa com D₁ e D₂ apenas
        interiors: n -> pontos de fase x₁ⁿ … x_{2n−1}ⁿ
        perimeters: n -> ℓ_n
    """
    points = []
    for n in sorted(interiors):
        if n not in perimeters:
            raise ReconstructionError("Perímetro ausente para n", n=n)
        result = reconstruct_point(table, n, interiors[n], perimeters[n])
        result.closure = closure_residual(table, result, interiors[n], perimeters[n])
        points.append(result)
        RunLogger.log_event('point_reconstructed', {
            'n': n, 'error': format_number(result.error, 5),
            'closure': format_number(result.closure, 5),
        }, run_id=run_id, level=logging.DEBUG)
    return points


def write_points_csv(stream, points):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(['x', 'y', 'error', 'n'])
    for p in points:
        writer.writerow([format_number(p.point[0]), format_number(p.point[1]),
                         format_number(p.error, 5), p.n])


def write_plot_data(stream, points, boundary=None, samples=360):
    """Pontos reconstruídos e, se dado, o contorno verdadeiro em float"""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(['kind', 'x', 'y'])
    for p in points:
        writer.writerow(['reconstructed', float(p.point[0]), float(p.point[1])])
    if boundary is not None:
        _, outline = boundary.float_outline(samples)
        for x, y in outline:
            writer.writerow(['boundary', x, y])


# ---------------------------------------------------------------------------
# Ajuste local do arco
# ---------------------------------------------------------------------------

@dataclass
class ArcFit:
    model: str
    params: dict
    residuals: list
    flagged: list = field(default_factory=list)

    @property
    def max_residual(self):
        return max(self.residuals)

    def to_dict(self):
        return {
            'model': self.model,
            'params': {k: format_number(v) for k, v in self.params.items()},
            'max_residual': format_number(self.max_residual, 5),
            'flagged': list(self.flagged),
        }


def _normalized(points):
    cx = mp.fsum(p[0] for p in points) / len(points)
    cy = mp.fsum(p[1] for p in points) / len(points)
    scale = max(max(abs(p[0] - cx), abs(p[1] - cy)) for p in points)
    if scale == 0:
        raise GeometryError("Pontos coincidentes")
    return [((p[0] - cx) / scale, (p[1] - cy) / scale) for p in points], (cx, cy), scale


def _fit_circle(points):
    local, (cx, cy), scale = _normalized(points)
    rows = mp.matrix([[x, y, 1] for x, y in local])
    rhs = mp.matrix([-(x * x + y * y) for x, y in local])
    try:
        solution, _ = mp.qr_solve(rows, rhs)
    except ZeroDivisionError as exc:
        raise GeometryError("Configuração degenerada para o ajuste de círculo") from exc
    d, e, f = solution[0], solution[1], solution[2]
    radius_sq = d * d / 4 + e * e / 4 - f
    if radius_sq <= 0:
        raise GeometryError("Configuração degenerada para o ajuste de círculo")
    center = (cx - scale * d / 2, cy - scale * e / 2)
    radius = scale * mp.sqrt(radius_sq)
    residuals = [abs(_distance(p, center) - radius) for p in points]
    return {'cx': center[0], 'cy': center[1], 'radius': radius}, residuals


def _fit_conic(points):
    local, (cx, cy), scale = _normalized(points)
    rows = mp.matrix([[x * x, x * y, y * y, x, y, 1] for x, y in local])
    _, singular, v = mp.svd_r(rows)
    ranked = sorted(range(6), key=lambda k: singular[k])
    if singular[ranked[1]] <= tolerance(10) * singular[ranked[-1]]:
        raise GeometryError("Configuração degenerada para o ajuste de cônica")
    coeffs = [v[ranked[0], k] for k in range(6)]
    a, b, c, d, e, f = coeffs
    residuals = []
    for x, y in local:
        value = a * x * x + b * x * y + c * y * y + d * x + e * y + f
        grad = mp.sqrt((2 * a * x + b * y + d) ** 2 + (b * x + 2 * c * y + e) ** 2)
        residuals.append(scale * abs(value) / grad)
    params = dict(zip(('a', 'b', 'c', 'd', 'e', 'f'), coeffs))
    params.update({'cx': cx, 'cy': cy, 'scale': scale})
    return params, residuals


def fit_boundary_arc(points, errors=None, model='conic', strict=False, floor=None):
    """Arco analítico local (círculo ou cônica) por mínimos quadrados.

    Resíduos acima de 10 × a estimativa de erro do ponto (ou do piso numérico)
    são sinalizados; com ``strict`` isso vira ReconstructionError.
    """
    points = [(bigfloat(p[0]), bigfloat(p[1])) for p in points]
    if len(points) < 6:
        raise GeometryError("Ajuste do arco exige pelo menos 6 pontos", points=len(points))
    local, _, _ = _normalized(points)
    spread = max(abs(x1 * y2 - x2 * y1) for (x1, y1), (x2, y2) in zip(local, local[1:]))
    if spread <= tolerance(10):
        raise GeometryError("Pontos colineares: arco degenerado")
    if model == 'circle':
        params, residuals = _fit_circle(points)
    elif model == 'conic':
        params, residuals = _fit_conic(points)
    else:
        raise GeometryError("Modelo de arco desconhecido", model=model)

    floor = tolerance(mp.dps // 3) if floor is None else floor
    errors = errors or [mpf(0)] * len(points)
    flagged = [k for k, (res, err) in enumerate(zip(residuals, errors))
               if res > max(10 * err, floor)]
    fit = ArcFit(model, params, residuals, flagged)
    if flagged:
        RunLogger.log_event('arc_residual_flagged', {'model': model, 'points': flagged,
                                                     'max_residual': format_number(fit.max_residual, 5)},
                            level=logging.WARNING)
        if strict:
            raise ReconstructionError("Resíduo do arco acima da estimativa de erro",
                                      points=flagged, max_residual=fit.max_residual)
    return fit
