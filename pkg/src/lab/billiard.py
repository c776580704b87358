"""Aplicação de colisão F, sua inversa, a involução de reversão e os jatos de F.

Um ponto de fase é (i, s, r): espalhador, comprimento de arco e r = sen φ,
com φ o ângulo entre a direção de saída e a normal (para a mesa) em γ_i(s).
"""

from dataclasses import dataclass

import numpy as np
from mpmath import mp

from src.lab.errors import EscapeError, SolverError, TangencyError
from src.lab.geometry import Circle
from src.lab.numerics import Jet, JetMap, format_number, jet_solve_implicit, tolerance


@dataclass(frozen=True)
class PhasePoint:
    i: int
    s: object
    r: object

    def __post_init__(self):
        if not -1 < self.r < 1:
            raise SolverError("Ponto de fase exige |r| < 1", i=self.i, r=self.r)

    def to_dict(self):
        return {'i': self.i, 's': format_number(self.s), 'r': format_number(self.r)}


def involution(x):
    """I₀(i, s, r) = (i, s, −r)"""
    return PhasePoint(x.i, x.s, -x.r)


def outgoing_direction(table, x):
    point, tangent, normal, _ = table[x.i].eval(x.s)
    cos_phi = mp.sqrt(1 - x.r ** 2)
    direction = (cos_phi * normal[0] + x.r * tangent[0], cos_phi * normal[1] + x.r * tangent[1])
    return point, direction


def _circle_hit(circle, point, direction):
    px, py = point[0] - circle.center[0], point[1] - circle.center[1]
    b = direction[0] * px + direction[1] * py
    disc = b * b - (px * px + py * py - circle.radius ** 2)
    if disc <= 0:
        return None
    distance = -b - mp.sqrt(disc)
    if distance <= 0:
        return None
    hit = (px + distance * direction[0], py + distance * direction[1])
    return distance, circle.reduce(circle.radius * (mp.atan2(hit[1], hit[0]) - circle.origin))


def _curve_hit(body, point, direction, samples=512):
    ts, outline = body.float_outline(samples)
    e = np.array([float(direction[0]), float(direction[1])])
    rel = outline - np.array([float(point[0]), float(point[1])])
    side = e[0] * rel[:, 1] - e[1] * rel[:, 0]
    crossings = np.nonzero(np.sign(side) != np.sign(np.roll(side, -1)))[0]

    def offset(t):
        q = body.point_at_param(t)[0]
        return direction[0] * (q[1] - point[1]) - direction[1] * (q[0] - point[0])

    best = None
    for k in crossings:
        lo = mp.mpf(ts[k])
        hi = mp.mpf(ts[k + 1]) if k + 1 < len(ts) else 2 * mp.pi
        try:
            t = mp.findroot(offset, (lo, hi), solver='anderson')
        except (ValueError, ZeroDivisionError) as exc:
            raise SolverError("Interseção raio-curva não convergiu", kind=body.kind) from exc
        q, normal = body.point_at_param(t)
        distance = direction[0] * (q[0] - point[0]) + direction[1] * (q[1] - point[1])
        entering = direction[0] * normal[0] + direction[1] * normal[1] < 0
        if distance > 0 and entering and (best is None or distance < best[0]):
            best = (distance, body.s_of_t(t))
    return best


def ray_hit(body, point, direction):
    """(distância, s') da primeira entrada do raio no espalhador, ou None"""
    if isinstance(body, Circle):
        return _circle_hit(body, point, direction)
    return _curve_hit(body, point, direction)


def collide(table, x, tangency_guard=30):
    """F(x): próxima colisão, ou None se a trajetória escapa"""
    point, direction = outgoing_direction(table, x)
    hits = []
    for j in sorted(table.scatterers):
        if j == x.i:
            continue
        hit = ray_hit(table[j], point, direction)
        if hit is not None:
            hits.append((hit[0], j, hit[1]))
    if not hits:
        return None
    _, j, s2 = min(hits, key=lambda item: item[0])
    _, tangent, normal, _ = table[j].eval(s2)
    cos_in = -(normal[0] * direction[0] + normal[1] * direction[1])
    if cos_in < tolerance(tangency_guard):
        raise TangencyError("Colisão tangente", i=x.i, s=x.s, r=x.r, target=j)
    return PhasePoint(j, s2, tangent[0] * direction[0] + tangent[1] * direction[1])


def collide_inverse(table, x):
    """F⁻¹ = I₀∘F∘I₀"""
    y = collide(table, involution(x))
    return None if y is None else involution(y)


def _require(table, x):
    y = collide(table, x)
    if y is None:
        raise EscapeError("Trajetória escapa da mesa", i=x.i, s=x.s, r=x.r)
    return y


def jacobian(table, x):
    """DF(x) nas coordenadas (s, r); determinante 1"""
    y = _require(table, x)
    data = table.chord_derivatives(x.i, x.s, y.i, y.s)
    inv = 1 / data.d12
    return mp.matrix([
        [-data.d11 * inv, -inv],
        [data.d12 - data.d22 * data.d11 * inv, -data.d22 * inv],
    ])


def collision_jet(table, x, order):
    """Jato de F em torno de x nas variáveis de deslocamento (σ, ρ).

    O termo constante é o ponto absoluto F(x) = (s', r').
    """
    y = _require(table, x)
    xi, yi = table[x.i].arc_jet(x.s, order + 1)
    xj, yj = table[y.i].arc_jet(y.s, order + 1)
    dx = xj.lift(2, (1,)) - xi.lift(2, (0,))
    dy = yj.lift(2, (1,)) - yi.lift(2, (0,))
    length = (dx * dx + dy * dy).sqrt()
    d1, d2 = length.deriv(0), length.deriv(1)
    # F(σ, ρ, σ') = ∂₁L(σ, σ') + r + ρ se anula ao longo da colisão
    F = d1.lift(3, (0, 2)) + Jet.variable(3, order, 1) + x.r
    shift = jet_solve_implicit(F, (0, 0))
    r_out = d2.compose([Jet.variable(2, order, 0), shift], recenter=True)
    return JetMap([shift + y.s, r_out])


def inverse_collision_jet(table, x, order):
    """Jato de F⁻¹ em torno de x, pela conjugação com I₀"""
    jet = collision_jet(table, involution(x), order)
    flip = [Jet.variable(2, order, 0), -Jet.variable(2, order, 1)]
    s_part, r_part = (c.compose(flip) for c in jet)
    return JetMap([s_part, -r_part])
