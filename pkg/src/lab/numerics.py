"""Núcleo numérico: escalares de precisão estendida e jatos.

Os escalares são ``mpmath.mpf`` na precisão do contexto corrente
(``mp.workdps``) ou racionais exatos (``fractions.Fraction``). Um ``Jet`` é
uma série de potências em n variáveis truncada no grau total K; todas as
operações são truncamentos exatos das operações formais.
"""

from collections import defaultdict
from fractions import Fraction
from math import factorial

from mpmath import mp, mpf

from src.lab.errors import ConvergenceError, JetError, SingularJetError


# ---------------------------------------------------------------------------
# Escalares
# ---------------------------------------------------------------------------

def is_exact(value):
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def bigfloat(value):
    """Converte string decimal, racional 'p/q', int ou Fraction em mpf.

    Floats binários são recusados: a entrada tem de ser exata em qualquer
    precisão.
    """
    if isinstance(value, mpf):
        return +value
    if isinstance(value, Fraction):
        return mpf(value.numerator) / value.denominator
    if isinstance(value, int) and not isinstance(value, bool):
        return mpf(value)
    if isinstance(value, str):
        text = value.strip()
        if '/' in text:
            numerator, denominator = text.split('/', 1)
            return mpf(numerator.strip()) / mpf(denominator.strip())
        return mpf(text)
    raise TypeError(f"Valor numérico não suportado: {value!r}")


def rational(value):
    """Converte string 'p/q', decimal, int ou Fraction em Fraction"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"Valor racional não suportado: {value!r}")


def format_number(value, digits=None):
    """Representação decimal (ou racional) determinística de um escalar"""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return str(value)
    return mp.nstr(value, digits or mp.dps)


def tolerance(guard=10):
    """10^-(P - guard) na precisão corrente"""
    return mpf(10) ** (-(mp.dps - guard))


def negligible(value, scale=1, guard=10):
    if is_exact(value):
        return value == 0
    return abs(value) <= tolerance(guard) * max(mpf(1), abs(scale))


def accelerate(sequence):
    """Limite de uma sequência de convergência geométrica por Shanks (Wynn-ε).

    Retorna (estimativa, erro estimado). O erro compara as duas últimas
    estimativas da última linha da tabela.
    """
    values = [bigfloat(v) for v in sequence]
    if len(values) < 5:
        raise ConvergenceError("Sequência curta demais para extrapolação",
                               length=len(values))
    try:
        table = mp.shanks(values)
    except ZeroDivisionError:
        # sequência estacionária na precisão corrente
        return values[-1], abs(values[-1] - values[-2])
    row = table[-1]
    estimate = row[-1]
    previous = row[-3] if len(row) >= 3 else values[-1]
    return estimate, abs(estimate - previous)


def limit_of(sequence):
    """Shanks ou o último termo, o que tiver menor erro estimado"""
    values = [bigfloat(v) for v in sequence]
    if len(values) < 2:
        raise ConvergenceError("Sequência curta demais para estimar o limite",
                               length=len(values))
    raw = (values[-1], abs(values[-1] - values[-2]))
    if len(values) < 5:
        return raw
    return min(accelerate(values), raw, key=lambda item: item[1])


# ---------------------------------------------------------------------------
# Jatos
# ---------------------------------------------------------------------------

def _degree(exps):
    return sum(exps)


class Jet:
    """Série de potências em ``nvars`` variáveis truncada no grau total ``order``.

    Coeficientes ficam num dicionário expoente -> valor; ausência significa
    zero. Os valores podem ser mpf, Fraction ou int.
    """

    __slots__ = ('nvars', 'order', 'coeffs')

    def __init__(self, nvars, order, coeffs=None):
        if order < 0:
            raise JetError("Ordem do jato não pode ser negativa", order=order)
        self.nvars = nvars
        self.order = order
        self.coeffs = {}
        for exps, value in (coeffs or {}).items():
            exps = tuple(exps)
            if len(exps) != nvars:
                raise JetError("Expoente com número errado de variáveis", exps=exps)
            if _degree(exps) <= order and not (is_exact(value) and value == 0):
                self.coeffs[exps] = value

    # construtores -----------------------------------------------------------

    @classmethod
    def constant(cls, nvars, order, value):
        return cls(nvars, order, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars, order, index, value=0):
        exps = [0] * nvars
        exps[index] = 1
        coeffs = {tuple(exps): 1}
        if not (is_exact(value) and value == 0):
            coeffs[(0,) * nvars] = value
        return cls(nvars, order, coeffs)

    @classmethod
    def univariate(cls, order, coefficients):
        return cls(1, order, {(k,): c for k, c in enumerate(coefficients)})

    def _like(self, coeffs, order=None):
        return Jet(self.nvars, self.order if order is None else order, coeffs)

    # acesso -------------------------------------------------------------------

    def __getitem__(self, exps):
        if isinstance(exps, int):
            exps = (exps,)
        return self.coeffs.get(tuple(exps), 0)

    def items(self):
        return self.coeffs.items()

    @property
    def constant_term(self):
        return self.coeffs.get((0,) * self.nvars, 0)

    def without_constant(self):
        coeffs = dict(self.coeffs)
        coeffs.pop((0,) * self.nvars, None)
        return self._like(coeffs)

    def homogeneous(self, degree):
        return self._like({e: c for e, c in self.coeffs.items() if _degree(e) == degree})

    def truncate(self, order):
        return self._like(self.coeffs, order=min(order, self.order))

    def max_abs(self, upto=None):
        upto = self.order if upto is None else upto
        values = [abs(c) for e, c in self.coeffs.items() if _degree(e) <= upto]
        return max(values, default=0)

    def univariate_coefficients(self):
        if self.nvars != 1:
            raise JetError("Jato não é univariado", nvars=self.nvars)
        return [self[(k,)] for k in range(self.order + 1)]

    # aritmética -------------------------------------------------------------

    def _check(self, other):
        if other.nvars != self.nvars:
            raise JetError("Jatos com números de variáveis diferentes",
                           left=self.nvars, right=other.nvars)

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            coeffs = dict(self.coeffs)
            for e, c in other.coeffs.items():
                coeffs[e] = coeffs.get(e, 0) + c
            return Jet(self.nvars, min(self.order, other.order), coeffs)
        coeffs = dict(self.coeffs)
        zero = (0,) * self.nvars
        coeffs[zero] = coeffs.get(zero, 0) + other
        return self._like(coeffs)

    __radd__ = __add__

    def __neg__(self):
        return self._like({e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self._like({e: c * other for e, c in self.coeffs.items()})
        self._check(other)
        order = min(self.order, other.order)
        coeffs = defaultdict(int)
        right = [(e, _degree(e), c) for e, c in other.coeffs.items()]
        for e1, c1 in self.coeffs.items():
            d1 = _degree(e1)
            if d1 > order:
                continue
            for e2, d2, c2 in right:
                if d1 + d2 <= order:
                    coeffs[tuple(a + b for a, b in zip(e1, e2))] += c1 * c2
        return Jet(self.nvars, order, coeffs)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        if is_exact(other) and all(is_exact(c) for c in self.coeffs.values()):
            other = Fraction(other)
        return self._like({e: c / other for e, c in self.coeffs.items()})

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, power):
        if not isinstance(power, int) or power < 0:
            raise JetError("Potência de jato deve ser inteiro não negativo", power=power)
        result = Jet.constant(self.nvars, self.order, 1)
        base = self
        while power:
            if power & 1:
                result = result * base
            power >>= 1
            if power:
                base = base * base
        return result

    # cálculo ----------------------------------------------------------------

    def deriv(self, index):
        coeffs = {}
        for e, c in self.coeffs.items():
            if e[index]:
                lowered = list(e)
                lowered[index] -= 1
                coeffs[tuple(lowered)] = c * e[index]
        return self._like(coeffs, order=max(self.order - 1, 0))

    def integ(self, index):
        """Primitiva em x_index nula em x_index = 0; a ordem sobe um"""
        exact = all(is_exact(c) for c in self.coeffs.values())
        coeffs = {}
        for e, c in self.coeffs.items():
            raised = list(e)
            raised[index] += 1
            coeffs[tuple(raised)] = Fraction(c) / raised[index] if exact else c / raised[index]
        return self._like(coeffs, order=self.order + 1)

    def apply_series(self, coefficients):
        """Σ_k coefficients[k]·(self − c0)^k por Horner"""
        t = self.without_constant()
        result = Jet.constant(self.nvars, self.order, 0)
        for c in reversed(list(coefficients)[:self.order + 1]):
            result = result * t + c
        return result

    def reciprocal(self):
        c0 = self.constant_term
        if negligible(c0):
            raise SingularJetError("Inversão de jato com termo constante nulo")
        inv = Fraction(1) / c0 if is_exact(c0) else 1 / c0
        coefficients = [(-1) ** k * inv ** (k + 1) for k in range(self.order + 1)]
        return self.apply_series(coefficients)

    def sqrt(self):
        c0 = self.constant_term
        if c0 <= 0:
            raise JetError("Raiz de jato com termo constante não positivo", constant=c0)
        root = mp.sqrt(bigfloat(c0))
        half = mpf(1) / 2
        coefficients = [root * mp.binomial(half, k) / bigfloat(c0) ** k
                        for k in range(self.order + 1)]
        return self.apply_series(coefficients)

    def log(self):
        c0 = self.constant_term
        exact = is_exact(c0) and c0 == 1
        if exact:
            coefficients = [0] + [Fraction((-1) ** (k + 1), k) for k in range(1, self.order + 1)]
        else:
            c0 = bigfloat(c0)
            coefficients = [mp.log(c0)] + [(-1) ** (k + 1) / (k * c0 ** k)
                                           for k in range(1, self.order + 1)]
        return self.apply_series(coefficients)

    def exp(self):
        c0 = self.constant_term
        if is_exact(c0) and c0 == 0:
            coefficients = [Fraction(1, factorial(k)) for k in range(self.order + 1)]
        else:
            scale = mp.exp(bigfloat(c0))
            coefficients = [scale / factorial(k) for k in range(self.order + 1)]
        return self.apply_series(coefficients)

    # composição e avaliação ---------------------------------------------------

    def compose(self, maps, recenter=False):
        """self∘maps, onde maps[k] substitui a variável k.

        Os jatos internos precisam de termo constante nulo, a não ser que
        ``recenter`` seja verdadeiro: nesse caso self é tratado como polinômio
        e o resultado é o seu deslocamento de Taylor exato.
        """
        maps = list(maps)
        if len(maps) != self.nvars:
            raise JetError("Número de componentes incompatível na composição",
                           expected=self.nvars, got=len(maps))
        nvars = maps[0].nvars
        for g in maps:
            if g.nvars != nvars:
                raise JetError("Componentes da composição com variáveis diferentes")
            if not recenter and not negligible(g.constant_term, guard=0):
                raise JetError("Composição exige termo constante nulo",
                               constant=g.constant_term)
        order = min([self.order] + [g.order for g in maps])
        maps = [g.truncate(order) for g in maps]
        return _horner(self.coeffs, maps, nvars, order)

    def __call__(self, *point):
        if len(point) != self.nvars:
            raise JetError("Ponto com dimensão errada", expected=self.nvars, got=len(point))
        powers = [[1] for _ in point]
        for k, x in enumerate(point):
            for _ in range(self.order):
                powers[k].append(powers[k][-1] * x)
        total = 0
        for e, c in self.coeffs.items():
            term = c
            for k, p in enumerate(e):
                if p:
                    term = term * powers[k][p]
            total = total + term
        return total

    def recenter(self, point):
        """Deslocamento de Taylor: jato de d ↦ self(point + d)"""
        shifts = [Jet.variable(self.nvars, self.order, k, value=point[k])
                  for k in range(self.nvars)]
        return self.compose(shifts, recenter=True)

    def lift(self, nvars, indices):
        """Mergulha o jato em ``nvars`` variáveis; a variável k vira indices[k]"""
        coeffs = {}
        for e, c in self.coeffs.items():
            new = [0] * nvars
            for k, p in enumerate(e):
                new[indices[k]] += p
            coeffs[tuple(new)] = c
        return Jet(nvars, self.order, coeffs)

    def slices(self, index):
        """Decompõe self = Σ_k S_k·x_index^k; devolve [S_0, …, S_K] sem x_index"""
        parts = defaultdict(dict)
        for e, c in self.coeffs.items():
            rest = e[:index] + e[index + 1:]
            parts[e[index]][rest] = c
        return [Jet(self.nvars - 1, self.order - k, parts.get(k, {}))
                for k in range(self.order + 1)]

    def to_float(self):
        return self._like({e: bigfloat(c) for e, c in self.coeffs.items()})

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, order={self.order}, terms={len(self.coeffs)})"


def _horner(coeffs, maps, nvars, order):
    if not maps:
        return Jet.constant(nvars, order, coeffs.get((), 0))
    head, rest = maps[0], maps[1:]
    groups = defaultdict(dict)
    for e, c in coeffs.items():
        groups[e[0]][e[1:]] = c
    result = Jet.constant(nvars, order, 0)
    if not groups:
        return result
    for power in range(max(groups), -1, -1):
        result = result * head
        if power in groups:
            result = result + _horner(groups[power], rest, nvars, order)
    return result


class JetMap:
    """Aplicação ℝⁿ→ℝᵐ dada por m jatos nas mesmas n variáveis"""

    def __init__(self, components):
        self.components = tuple(components)
        if not self.components:
            raise JetError("Aplicação sem componentes")
        nvars = {c.nvars for c in self.components}
        if len(nvars) != 1:
            raise JetError("Componentes com números de variáveis diferentes")
        self.nvars = nvars.pop()

    @classmethod
    def identity(cls, nvars, order):
        return cls([Jet.variable(nvars, order, k) for k in range(nvars)])

    @property
    def order(self):
        return min(c.order for c in self.components)

    def __getitem__(self, index):
        return self.components[index]

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def constant(self):
        return tuple(c.constant_term for c in self.components)

    def centered(self):
        return JetMap([c.without_constant() for c in self.components])

    def shifted(self, offsets):
        return JetMap([c + o for c, o in zip(self.components, offsets)])

    def linear_part(self):
        unit = [tuple(1 if i == k else 0 for i in range(self.nvars)) for k in range(self.nvars)]
        return [[c[u] for u in unit] for c in self.components]

    def truncate(self, order):
        return JetMap([c.truncate(order) for c in self.components])

    def compose(self, inner, recenter=False):
        """self∘inner"""
        return JetMap([c.compose(inner.components, recenter=recenter) for c in self.components])

    def recenter(self, point):
        return JetMap([c.recenter(point) for c in self.components])

    def __call__(self, *point):
        return tuple(c(*point) for c in self.components)

    def __add__(self, other):
        return JetMap([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        return JetMap([a - b for a, b in zip(self.components, other.components)])

    def jacobian_det(self):
        if len(self.components) != 2 or self.nvars != 2:
            raise JetError("Determinante jacobiano só para aplicações planas")
        f, g = self.components
        return f.deriv(0) * g.deriv(1) - f.deriv(1) * g.deriv(0)

    def max_abs(self, upto=None):
        return max(c.max_abs(upto) for c in self.components)

    def to_float(self):
        return JetMap([c.to_float() for c in self.components])

    def __repr__(self):
        return f"JetMap(dim={len(self.components)}, nvars={self.nvars}, order={self.order})"


def jet_compose(f, g, recenter=False):
    """f∘g truncado na ordem comum"""
    if isinstance(f, JetMap):
        return f.compose(g, recenter=recenter)
    return f.compose(g.components, recenter=recenter)


def _invert_linear(matrix):
    if len(matrix) == 1:
        a = matrix[0][0]
        if negligible(a):
            raise SingularJetError("Parte linear singular")
        return [[Fraction(1) / a if is_exact(a) else 1 / a]]
    if len(matrix) == 2:
        (a, b), (c, d) = matrix
        det = a * d - b * c
        if negligible(det, scale=max(abs(a), abs(b), abs(c), abs(d)) ** 2):
            raise SingularJetError("Parte linear singular", det=det)
        inv = Fraction(1) / det if is_exact(det) else 1 / det
        return [[d * inv, -b * inv], [-c * inv, a * inv]]
    raise JetError("Inversão implementada apenas em dimensão 1 e 2", dim=len(matrix))


def _apply_linear(matrix, jets):
    return [sum((jets[k] * row[k] for k in range(len(jets))),
                Jet.constant(jets[0].nvars, jets[0].order, 0)) for row in matrix]


def jet_invert_map(g):
    """Inversa formal h com g∘h = id até a ordem de g.

    Iteração de ponto fixo h = A⁻¹(y − N(h)), com A a parte linear e N o
    resto; cada passo fixa mais um grau.
    """
    if len(g) != g.nvars:
        raise JetError("Aplicação não é quadrada", dim=len(g), nvars=g.nvars)
    for c in g.constant():
        if not negligible(c, guard=0):
            raise JetError("Inversão exige g(0) = 0", constant=c)
    g = g.centered()
    order = g.order
    linear = g.linear_part()
    inverse = _invert_linear(linear)
    ident = JetMap.identity(g.nvars, order)
    nonlinear = [c - sum((ident[k] * linear[i][k] for k in range(g.nvars)),
                         Jet.constant(g.nvars, order, 0))
                 for i, c in enumerate(g.components)]
    nonlinear = JetMap(nonlinear)
    h = JetMap(_apply_linear(inverse, list(ident)))
    for _ in range(order):
        remainder = nonlinear.compose(h)
        h = JetMap(_apply_linear(inverse, [y - r for y, r in zip(ident, remainder)]))
    return h


def jet_revert(f):
    """Reversão de série univariada com f(0) = 0"""
    return jet_invert_map(JetMap([f]))[0]


def jet_solve_implicit(F, base, z0=0, max_refinements=200):
    """Resolve F(x, y, z) = 0 para z(x, y) perto de (base, z0).

    F é um polinômio (jato de 3 variáveis em coordenadas absolutas). O ponto
    z0 é refinado por Newton em z ↦ F(x0, y0, z); depois F é recentrado e a
    solução é obtida por Newton sobre jatos. O resultado é um jato nas
    variáveis de deslocamento (x − x0, y − y0) com termo constante z0.
    """
    if F.nvars != 3:
        raise JetError("F precisa de três variáveis", nvars=F.nvars)
    x0, y0 = base
    dF = F.deriv(2)
    if not (is_exact(F(x0, y0, z0)) and F(x0, y0, z0) == 0):
        z0 = bigfloat(z0)
        for _ in range(max_refinements):
            slope = dF(x0, y0, z0)
            if negligible(slope):
                raise SingularJetError("∂F/∂z nulo no ponto base (tangência)")
            step = F(x0, y0, z0) / slope
            z0 = z0 - step
            if negligible(step, scale=z0, guard=3):
                break
    G = F.recenter((x0, y0, z0))
    parts = G.slices(2)
    order = F.order
    lifted = [Jet(2, order, p.coeffs) for p in parts]
    slope0 = lifted[1].constant_term if len(lifted) > 1 else 0
    if negligible(slope0):
        raise SingularJetError("∂F/∂z nulo no ponto base (tangência)")
    w = Jet.constant(2, order, 0)
    steps = max(1, order).bit_length() + 2
    for _ in range(steps):
        value = Jet.constant(2, order, 0)
        slope = Jet.constant(2, order, 0)
        for k in range(len(lifted) - 1, -1, -1):
            value = value * w + lifted[k]
            if k:
                slope = slope * w + lifted[k] * k
        w = w - value / slope
    return w + z0


def binomial_polynomial(power_scale, i):
    """Coeficientes em m do polinômio C(power_scale·m, i)"""
    poly = [Fraction(1)]
    for t in range(i):
        # multiplica por (power_scale·m − t)
        nxt = [Fraction(0)] * (len(poly) + 1)
        for k, c in enumerate(poly):
            nxt[k] += -t * c
            nxt[k + 1] += power_scale * c
        poly = nxt
    denominator = factorial(i)
    return [c / denominator for c in poly]
