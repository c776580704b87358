"""Espalhadores convexos analíticos, referencial normalizado e cordas L_ij.

Convenções:
  - cada espalhador é percorrido no sentido anti-horário;
  - ``s`` é o comprimento de arco medido a partir da origem do espalhador;
  - a normal devolvida por ``eval`` aponta para fora do corpo, isto é, para
    dentro da mesa de bilhar.
"""

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp, mpf

from src.lab.errors import GeometryError, NonEclipseError
from src.lab.numerics import Jet, bigfloat, format_number, jet_revert, tolerance


def _trig_jet(phase, freq, order, kind):
    """Jato em τ de cos(phase + freq·τ) ou sin(phase + freq·τ)"""
    c, s = mp.cos(phase), mp.sin(phase)
    cycle = [c, -s, -c, s] if kind == 'cos' else [s, c, -s, -c]
    coefficients = []
    scale = mpf(1)
    for n in range(order + 1):
        coefficients.append(cycle[n % 4] * scale)
        scale = scale * freq / (n + 1)
    return Jet.univariate(order, coefficients)


def _rotate(point, angle):
    c, s = mp.cos(angle), mp.sin(angle)
    return (c * point[0] - s * point[1], s * point[0] + c * point[1])


class Scatterer:
    """Curva fechada convexa analítica com parametrização por comprimento de arco.

    Subclasses fornecem a parametrização bruta ``t`` (um ângulo) e as suas
    expansões de Taylor; esta classe faz a reparametrização por arco.
    """

    kind = None

    def __init__(self, center, origin=0, anchors=4096):
        self.center = (bigfloat(center[0]), bigfloat(center[1]))
        self.origin = bigfloat(origin)
        self.anchor_count = anchors
        self._anchors = None
        self._float_outline = None

    # interface das subclasses ---------------------------------------------------

    def param_jet(self, t0, order):
        raise NotImplementedError

    def raw_arclength(self, t):
        raise NotImplementedError

    def support_value(self, angle):
        raise NotImplementedError

    def param_for_normal(self, angle):
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    def check_convex(self):
        raise NotImplementedError

    def _moved(self, angle, shift):
        raise NotImplementedError

    def _mirrored(self):
        raise NotImplementedError

    # transformações -----------------------------------------------------------------

    def moved(self, angle, shift):
        """Imagem por x ↦ R_angle(x + shift), com a origem de arco transportada"""
        new, param_map = self._moved(angle, shift)
        new.origin = param_map(self.origin)
        return new

    def mirrored(self):
        """Imagem por (x, y) ↦ (−x, y), reorientada no sentido anti-horário"""
        new, param_map = self._mirrored()
        new.origin = param_map(self.origin)
        return new

    def with_origin(self, t):
        new = self._copy()
        new.origin = bigfloat(t)
        return new

    def _copy(self):
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new._anchors = self._anchors
        return new

    # comprimento de arco ----------------------------------------------------------

    @property
    def perimeter(self):
        return self.raw_arclength(2 * mp.pi)

    def reduce(self, s):
        """Representante de s módulo o perímetro em (−π_i/2, π_i/2]"""
        perimeter = self.perimeter
        s = s - perimeter * mp.floor(s / perimeter)
        if s > perimeter / 2:
            s -= perimeter
        return s

    def s_of_t(self, t):
        return self.reduce(self.raw_arclength(t) - self.raw_arclength(self.origin))

    def speed(self, t):
        x, y = self.param_jet(t, 1)
        return mp.sqrt(x[1] ** 2 + y[1] ** 2)

    def _anchor_table(self):
        if self._anchors is None:
            ts = [2 * mp.pi * k / self.anchor_count for k in range(self.anchor_count + 1)]
            self._anchors = (ts, [self.raw_arclength(t) for t in ts])
        return self._anchors

    def t_of_s(self, s):
        """Parâmetro bruto do ponto de arco s (Newton semeado pela tabela de âncoras)"""
        perimeter = self.perimeter
        target = s + self.raw_arclength(self.origin)
        turns = mp.floor(target / perimeter)
        target -= turns * perimeter
        ts, arcs = self._anchor_table()
        k = min(max(bisect_right(arcs, target) - 1, 0), len(ts) - 2)
        t = ts[k] + (ts[k + 1] - ts[k]) * (target - arcs[k]) / (arcs[k + 1] - arcs[k])
        for _ in range(100):
            step = (self.raw_arclength(t) - target) / self.speed(t)
            t -= step
            if abs(step) <= tolerance(5):
                break
        else:
            raise GeometryError("Inversão do comprimento de arco não convergiu", s=s)
        return t + 2 * mp.pi * turns

    # avaliação ------------------------------------------------------------------------

    def eval(self, s):
        """(ponto, tangente unitária, normal unitária, curvatura) em s.

        A fronteira é percorrida no sentido anti-horário e a normal é a
        tangente girada de −π/2: aponta para fora do espalhador, para dentro
        da mesa (o domínio onde a partícula se move). Em γ₁(0) = (0, ℓ₀/2) ela
        vale (0, −1). O sinal de r, e com ele o sinal −(3 ± 2√2) dos autovalores
        do jacobiano no ponto 2-periódico, segue esta convenção.
        """
        x, y = self.param_jet(self.t_of_s(s), 2)
        d1 = (x[1], y[1])
        speed = mp.sqrt(d1[0] ** 2 + d1[1] ** 2)
        tangent = (d1[0] / speed, d1[1] / speed)
        curvature = 2 * (d1[0] * y[2] - d1[1] * x[2]) / speed ** 3
        normal = (tangent[1], -tangent[0])
        return (x[0], y[0]), tangent, normal, curvature

    def point_at_param(self, t):
        x, y = self.param_jet(t, 1)
        speed = mp.sqrt(x[1] ** 2 + y[1] ** 2)
        return (x[0], y[0]), (y[1] / speed, -x[1] / speed)

    def arc_jet(self, s, order):
        """(X(σ), Y(σ)): expansão de γ(s + σ) até a ordem dada"""
        x, y = self.param_jet(self.t_of_s(s), order)
        speed = (x.deriv(0) ** 2 + y.deriv(0) ** 2).sqrt()
        tau = jet_revert(speed.integ(0).truncate(order))
        return x.compose([tau]), y.compose([tau])

    def float_outline(self, samples=512):
        """Contorno em float (numpy) usado apenas para sementes grosseiras"""
        if self._float_outline is None or self._float_outline[0].shape[0] != samples:
            ts = [2 * mp.pi * k / samples for k in range(samples)]
            points = [self.point_at_param(t)[0] for t in ts]
            self._float_outline = (
                np.array([float(t) for t in ts]),
                np.array([[float(p[0]), float(p[1])] for p in points]),
            )
        return self._float_outline

    def to_dict(self):
        return {'kind': self.kind, **self.params(), 'origin': format_number(self.origin)}


class Circle(Scatterer):
    kind = 'circle'

    def __init__(self, center, radius, origin=0, anchors=4096):
        super().__init__(center, origin, anchors)
        self.radius = bigfloat(radius)
        if self.radius <= 0:
            raise GeometryError("Raio deve ser positivo", radius=radius)

    def param_jet(self, t0, order):
        x = _trig_jet(t0, 1, order, 'cos') * self.radius + self.center[0]
        y = _trig_jet(t0, 1, order, 'sin') * self.radius + self.center[1]
        return x, y

    def raw_arclength(self, t):
        return self.radius * t

    def t_of_s(self, s):
        return self.origin + s / self.radius

    def speed(self, t):
        return self.radius

    def arc_jet(self, s, order):
        t0 = self.t_of_s(s)
        freq = 1 / self.radius
        x = _trig_jet(t0, freq, order, 'cos') * self.radius + self.center[0]
        y = _trig_jet(t0, freq, order, 'sin') * self.radius + self.center[1]
        return x, y

    def support_value(self, angle):
        return self.center[0] * mp.cos(angle) + self.center[1] * mp.sin(angle) + self.radius

    def param_for_normal(self, angle):
        return angle

    def params(self):
        return {'center': [format_number(c) for c in self.center],
                'radius': format_number(self.radius)}

    def check_convex(self):
        return True

    def _moved(self, angle, shift):
        center = _rotate((self.center[0] + shift[0], self.center[1] + shift[1]), angle)
        return Circle(center, self.radius, anchors=self.anchor_count), lambda t: t + angle

    def _mirrored(self):
        return (Circle((-self.center[0], self.center[1]), self.radius, anchors=self.anchor_count),
                lambda t: mp.pi - t)


class Ellipse(Scatterer):
    kind = 'ellipse'

    def __init__(self, center, semi_axes, angle=0, origin=0, anchors=4096):
        super().__init__(center, origin, anchors)
        self.a, self.b = bigfloat(semi_axes[0]), bigfloat(semi_axes[1])
        self.angle = bigfloat(angle)
        if self.a <= 0 or self.b <= 0:
            raise GeometryError("Semieixos devem ser positivos", a=self.a, b=self.b)

    def param_jet(self, t0, order):
        ca, sa = mp.cos(self.angle), mp.sin(self.angle)
        c = _trig_jet(t0, 1, order, 'cos') * self.a
        s = _trig_jet(t0, 1, order, 'sin') * self.b
        return c * ca - s * sa + self.center[0], c * sa + s * ca + self.center[1]

    def raw_arclength(self, t):
        return self.b * mp.ellipe(t, 1 - self.a ** 2 / self.b ** 2)

    def support_value(self, angle):
        local = angle - self.angle
        return (self.center[0] * mp.cos(angle) + self.center[1] * mp.sin(angle)
                + mp.sqrt((self.a * mp.cos(local)) ** 2 + (self.b * mp.sin(local)) ** 2))

    def param_for_normal(self, angle):
        local = angle - self.angle
        return mp.atan2(self.b * mp.sin(local), self.a * mp.cos(local))

    def params(self):
        return {'center': [format_number(c) for c in self.center],
                'semi_axes': [format_number(self.a), format_number(self.b)],
                'angle': format_number(self.angle)}

    def check_convex(self):
        return True

    def _moved(self, angle, shift):
        center = _rotate((self.center[0] + shift[0], self.center[1] + shift[1]), angle)
        return (Ellipse(center, (self.a, self.b), self.angle + angle, anchors=self.anchor_count),
                lambda t: t)

    def _mirrored(self):
        return (Ellipse((-self.center[0], self.center[1]), (self.a, self.b), -self.angle,
                        anchors=self.anchor_count),
                lambda t: mp.pi - t)


class FourierScatterer(Scatterer):
    """Corpo dado pela função suporte h(θ) = R + Σ_{k≥2} (c_k cos kθ + d_k sin kθ).

    O parâmetro bruto é o ângulo θ da normal exterior.
    """

    kind = 'fourier'

    def __init__(self, center, radius, cos=None, sin=None, origin=0, anchors=4096):
        super().__init__(center, origin, anchors)
        self.radius = bigfloat(radius)
        self.cos = {int(k): bigfloat(v) for k, v in (cos or {}).items()}
        self.sin = {int(k): bigfloat(v) for k, v in (sin or {}).items()}
        if any(k < 2 for k in list(self.cos) + list(self.sin)):
            raise GeometryError("Modos de Fourier começam em k = 2")

    def _modes(self):
        for k in sorted(set(self.cos) | set(self.sin)):
            yield k, self.cos.get(k, mpf(0)), self.sin.get(k, mpf(0))

    def support(self, theta):
        return self.radius + sum((c * mp.cos(k * theta) + d * mp.sin(k * theta)
                                  for k, c, d in self._modes()), mpf(0))

    def radius_of_curvature(self, theta):
        return self.radius + sum(((1 - k * k) * (c * mp.cos(k * theta) + d * mp.sin(k * theta))
                                  for k, c, d in self._modes()), mpf(0))

    def param_jet(self, t0, order):
        h = Jet.constant(1, order, self.radius)
        dh = Jet.constant(1, order, 0)
        for k, c, d in self._modes():
            ck = _trig_jet(k * t0, k, order, 'cos')
            sk = _trig_jet(k * t0, k, order, 'sin')
            h = h + ck * c + sk * d
            dh = dh + (sk * (-c) + ck * d) * k
        cos_t = _trig_jet(t0, 1, order, 'cos')
        sin_t = _trig_jet(t0, 1, order, 'sin')
        x = h * cos_t - dh * sin_t + self.center[0]
        y = h * sin_t + dh * cos_t + self.center[1]
        return x, y

    def raw_arclength(self, t):
        total = self.radius * t
        for k, c, d in self._modes():
            total += (1 - k * k) * (c * mp.sin(k * t) - d * (mp.cos(k * t) - 1)) / k
        return total

    def speed(self, t):
        return self.radius_of_curvature(t)

    def support_value(self, angle):
        return self.center[0] * mp.cos(angle) + self.center[1] * mp.sin(angle) + self.support(angle)

    def param_for_normal(self, angle):
        return angle

    def params(self):
        return {'center': [format_number(c) for c in self.center],
                'radius': format_number(self.radius),
                'cos': {k: format_number(v) for k, v in sorted(self.cos.items())},
                'sin': {k: format_number(v) for k, v in sorted(self.sin.items())}}

    def check_convex(self, samples=4096):
        for n in range(samples):
            theta = 2 * mp.pi * n / samples
            if self.radius_of_curvature(theta) <= 0:
                raise GeometryError("Espalhador de Fourier não é estritamente convexo",
                                    theta=theta)
        return True

    def _moved(self, angle, shift):
        center = _rotate((self.center[0] + shift[0], self.center[1] + shift[1]), angle)
        cos_new, sin_new = {}, {}
        for k, c, d in self._modes():
            ca, sa = mp.cos(k * angle), mp.sin(k * angle)
            cos_new[k] = c * ca - d * sa
            sin_new[k] = c * sa + d * ca
        return (FourierScatterer(center, self.radius, cos_new, sin_new, anchors=self.anchor_count),
                lambda t: t + angle)

    def _mirrored(self):
        cos_new = {k: (-1) ** k * c for k, c, _ in self._modes()}
        sin_new = {k: -(-1) ** k * d for k, _, d in self._modes()}
        return (FourierScatterer((-self.center[0], self.center[1]), self.radius, cos_new, sin_new,
                                 anchors=self.anchor_count),
                lambda t: mp.pi - t)


SCATTERER_KINDS = {'circle': Circle, 'ellipse': Ellipse, 'fourier': FourierScatterer}


def build_scatterer(entry, anchors=4096):
    """Cria um espalhador a partir do dicionário da configuração"""
    kind = entry.get('kind')
    if kind == 'circle':
        return Circle(entry['center'], entry['radius'], anchors=anchors)
    if kind == 'ellipse':
        return Ellipse(entry['center'], entry['semi_axes'], entry.get('angle', '0'), anchors=anchors)
    if kind == 'fourier':
        return FourierScatterer(entry['center'], entry['radius'], entry.get('cos'), entry.get('sin'),
                                anchors=anchors)
    raise GeometryError("Tipo de espalhador desconhecido", kind=kind)


# ---------------------------------------------------------------------------
# Cordas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChordData:
    """L_ij(s, s') e as suas derivadas até a segunda ordem"""

    length: object
    d1: object
    d2: object
    d11: object
    d12: object
    d22: object
    cos_out: object
    cos_in: object


def chord_derivatives(first, s, second, s2):
    p, t1, n1, k1 = first.eval(s)
    q, t2, n2, k2 = second.eval(s2)
    dx, dy = q[0] - p[0], q[1] - p[1]
    length = mp.sqrt(dx * dx + dy * dy)
    e = (dx / length, dy / length)
    r_out = t1[0] * e[0] + t1[1] * e[1]
    r_in = t2[0] * e[0] + t2[1] * e[1]
    cos_out = n1[0] * e[0] + n1[1] * e[1]
    cos_in = -(n2[0] * e[0] + n2[1] * e[1])
    tt = t1[0] * t2[0] + t1[1] * t2[1]
    return ChordData(
        length=length,
        d1=-r_out,
        d2=r_in,
        d11=k1 * cos_out + cos_out ** 2 / length,
        d12=-(tt - r_out * r_in) / length,
        d22=k2 * cos_in + cos_in ** 2 / length,
        cos_out=cos_out,
        cos_in=cos_in,
    )


def chord_length(first, s, second, s2):
    p = first.eval(s)[0]
    q = second.eval(s2)[0]
    return mp.sqrt((q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2)


# ---------------------------------------------------------------------------
# Mesa e referencial
# ---------------------------------------------------------------------------

@dataclass
class NonEclipseResult:
    ok: bool
    witness: dict = field(default_factory=dict)


@dataclass
class BilliardTable:
    """Os três espalhadores no referencial normalizado"""

    scatterers: dict
    ell0: object
    isometry: dict = field(default_factory=dict)

    def __getitem__(self, index):
        return self.scatterers[index]

    def chord_length(self, i, s, j, s2):
        if i == j:
            raise GeometryError("Corda exige espalhadores distintos", i=i)
        return chord_length(self.scatterers[i], s, self.scatterers[j], s2)

    def chord_derivatives(self, i, s, j, s2):
        if i == j:
            raise GeometryError("Corda exige espalhadores distintos", i=i)
        return chord_derivatives(self.scatterers[i], s, self.scatterers[j], s2)

    def without(self, index):
        """Cópia sem um dos espalhadores (a reconstrução não vê D₃)"""
        return BilliardTable({k: v for k, v in self.scatterers.items() if k != index},
                             self.ell0, dict(self.isometry))

    def to_dict(self):
        return {
            'ell0': format_number(self.ell0),
            'isometry': {k: format_number(v) if not isinstance(v, bool) else v
                         for k, v in self.isometry.items()},
            'scatterers': {k: v.to_dict() for k, v in sorted(self.scatterers.items())},
        }


def _directions(samples, center=None, width=None):
    if center is None:
        return [2 * mp.pi * k / samples for k in range(samples)]
    return [center + width * (mpf(2 * k) / (samples - 1) - 1) for k in range(samples)]


def separation_margin(body_a, body_b, samples=1024):
    """max_u [−h_A(−u) − h_B(u)]: positivo se e só se os corpos são disjuntos"""
    return _best_margin(lambda u: -body_a.support_value(u + mp.pi) - body_b.support_value(u),
                        samples)[1]


def _best_margin(margin, samples):
    angles = _directions(samples)
    best_angle, best = max(((u, margin(u)) for u in angles), key=lambda item: item[1])
    refined = _directions(samples // 4 or 2, best_angle, 4 * mp.pi / samples)
    return max(((u, margin(u)) for u in refined), key=lambda item: item[1])


def check_non_eclipse(table, samples=4096):
    """Verifica que nenhum fecho convexo D_i ∪ D_j encontra o terceiro espalhador"""
    bodies = table.scatterers if isinstance(table, BilliardTable) else table
    for i, j, k in ((1, 2, 3), (1, 3, 2), (2, 3, 1)):
        di, dj, dk = bodies[i], bodies[j], bodies[k]

        def margin(u):
            return -max(di.support_value(u + mp.pi), dj.support_value(u + mp.pi)) - dk.support_value(u)

        angle, value = _best_margin(margin, samples)
        if value <= 0:
            return NonEclipseResult(False, {
                'pair': (i, j), 'third': k,
                'direction': format_number(angle, 20), 'margin': format_number(value, 20),
            })
    return NonEclipseResult(True)


def _closest_pair(first, second, grid, tie_digits):
    _, pts1 = first.float_outline(grid)
    _, pts2 = second.float_outline(grid)
    dist = np.linalg.norm(pts1[:, None, :] - pts2[None, :, :], axis=2)
    local = np.ones_like(dist, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                local &= dist <= np.roll(np.roll(dist, di, axis=0), dj, axis=1)
    best = dist.min()
    candidates = np.argwhere(local & (dist <= best * (1 + 1e-3) + 1e-9))

    refined = []
    for row, col in candidates:
        t1 = 2 * mp.pi * int(row) / grid
        t2 = 2 * mp.pi * int(col) / grid
        s0, u0 = first.s_of_t(t1), second.s_of_t(t2)

        def gradient(s, u):
            data = chord_derivatives(first, s, second, u)
            return [data.d1, data.d2]

        def hessian(s, u):
            data = chord_derivatives(first, s, second, u)
            return [[data.d11, data.d12], [data.d12, data.d22]]

        try:
            root = mp.findroot(gradient, (s0, u0), J=hessian)
        except (ValueError, ZeroDivisionError) as exc:
            raise GeometryError("Refinamento do par mais próximo não convergiu") from exc
        s, u = first.reduce(root[0]), second.reduce(root[1])
        refined.append((chord_length(first, s, second, u), s, u))

    refined.sort(key=lambda item: item[0])
    length, s, u = refined[0]
    tie = mpf(10) ** (-(mp.dps - tie_digits))
    for other, s_other, u_other in refined[1:]:
        distinct = abs(first.reduce(s_other - s)) > tolerance(tie_digits) ** mpf('0.5')
        if distinct and other - length <= tie:
            raise GeometryError("Par de distância mínima entre D1 e D2 não é único",
                                first=s, second=s_other)
    return length, s, u


def normalize_frame(scatterers, grid=1024, tie_digits=20):
    """Leva o sistema ao referencial normalizado.

    γ₁(0) = (0, ℓ₀/2), γ₂(0) = (0, −ℓ₀/2) realizam a distância mínima entre
    ∂D₁ e ∂D₂, e D₃ fica no semiplano x > 0.
    """
    bodies = dict(scatterers)
    if sorted(bodies) != [1, 2, 3]:
        raise GeometryError("São necessários exatamente três espalhadores")
    for body in bodies.values():
        body.check_convex()
    for i, j in ((1, 2), (1, 3), (2, 3)):
        if separation_margin(bodies[i], bodies[j]) <= 0:
            raise GeometryError("Espalhadores não são disjuntos", pair=(i, j))
    verdict = check_non_eclipse(bodies)
    if not verdict.ok:
        raise NonEclipseError("Condição de não-eclipse violada", **verdict.witness)

    ell0, s1, s2 = _closest_pair(bodies[1], bodies[2], grid, tie_digits)
    p1 = bodies[1].eval(s1)[0]
    p2 = bodies[2].eval(s2)[0]
    shift = (-(p1[0] + p2[0]) / 2, -(p1[1] + p2[1]) / 2)
    angle = mp.pi / 2 - mp.atan2(p1[1] - p2[1], p1[0] - p2[0])
    # ângulos quase nulos viram zero exato para que a normalização seja idempotente
    if abs(angle) <= tolerance(tie_digits):
        angle = mpf(0)

    t1 = bodies[1].t_of_s(s1)
    t2 = bodies[2].t_of_s(s2)
    moved = {1: bodies[1].with_origin(t1), 2: bodies[2].with_origin(t2), 3: bodies[3]}
    moved = {k: v.moved(angle, shift) for k, v in moved.items()}

    third = moved[3]
    left, right = -third.support_value(mp.pi), third.support_value(mpf(0))
    reflected = False
    if right < 0:
        moved = {k: v.mirrored() for k, v in moved.items()}
        reflected = True
    elif left <= 0:
        raise NonEclipseError("D3 cruza a reta que passa pelos pontos mais próximos")

    return BilliardTable(moved, ell0, {'angle': angle, 'shift_x': shift[0],
                                       'shift_y': shift[1], 'reflected': reflected})
