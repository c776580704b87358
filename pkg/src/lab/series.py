"""Séries triangulares em (m, n, z_A, z_B) e o modelo direto do espectro.

Uma série guarda coeficientes c[p, q, i, j] de m^i n^j z_A^p z_B^q com
p + q ≤ max_order. A graduação (triangular ou estrita em z_A e/ou z_B)
limita os graus em m e n e é verificada em toda escrita.
"""

from dataclasses import dataclass
from enum import Flag
from fractions import Fraction

from mpmath import mpf

from src.lab.errors import ConvergenceError, GradingError
from src.lab.numerics import (
    Jet, JetMap, bigfloat, binomial_polynomial, format_number, is_exact, jet_invert_map,
    negligible, rational
)


class Grading(Flag):
    TRIANGULAR = 0
    STRICT_A = 1
    STRICT_B = 2
    STRICT = 3

    def swapped(self):
        result = Grading.TRIANGULAR
        if self & Grading.STRICT_A:
            result |= Grading.STRICT_B
        if self & Grading.STRICT_B:
            result |= Grading.STRICT_A
        return result


def _bound(power, strict):
    return max(0, power - 1) if strict else power


def _is_zero(value):
    return is_exact(value) and value == 0


class TriangularSeries:
    """Série formal truncada no grau total ``max_order`` em (z_A, z_B)"""

    __slots__ = ('max_order', 'grading', 'coeffs')

    def __init__(self, max_order, coeffs=None, grading=Grading.TRIANGULAR):
        self.max_order = max_order
        self.grading = grading
        self.coeffs = {}
        for key, value in (coeffs or {}).items():
            self[key] = value

    @classmethod
    def constant(cls, max_order, value):
        return cls(max_order, {(0, 0, 0, 0): value}, Grading.STRICT)

    @classmethod
    def z_a(cls, max_order):
        return cls(max_order, {(1, 0, 0, 0): 1}, Grading.STRICT)

    @classmethod
    def z_b(cls, max_order):
        return cls(max_order, {(0, 1, 0, 0): 1}, Grading.STRICT)

    # acesso -------------------------------------------------------------------

    def __setitem__(self, key, value):
        p, q, i, j = key
        if p + q > self.max_order or _is_zero(value):
            self.coeffs.pop(tuple(key), None)
            return
        if i > _bound(p, self.grading & Grading.STRICT_A) or \
                j > _bound(q, self.grading & Grading.STRICT_B):
            raise GradingError("Coeficiente viola a graduação da série",
                               key=key, grading=self.grading.name)
        self.coeffs[tuple(key)] = value

    def __getitem__(self, key):
        return self.coeffs.get(tuple(key), 0)

    def items(self):
        return self.coeffs.items()

    @property
    def valuation(self):
        """Menor grau total em (z_A, z_B) presente"""
        return min((p + q for p, q, _, _ in self.coeffs), default=self.max_order + 1)

    @property
    def exact(self):
        return all(is_exact(c) for c in self.coeffs.values())

    def polynomial(self, p, q):
        """Coeficiente de z_A^p z_B^q como dicionário (i, j) -> valor"""
        return {(i, j): c for (pp, qq, i, j), c in self.coeffs.items() if (pp, qq) == (p, q)}

    def truncate(self, max_order):
        return TriangularSeries(min(max_order, self.max_order), self.coeffs, self.grading)

    def with_grading(self, grading):
        return TriangularSeries(self.max_order, self.coeffs, grading)

    def is_multiple_of_za(self):
        return all(p >= 1 for p, _, _, _ in self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, TriangularSeries):
            return NotImplemented
        keys = set(self.coeffs) | set(other.coeffs)
        return self.max_order == other.max_order and all(self[k] == other[k] for k in keys)

    def __repr__(self):
        return (f"TriangularSeries(order={self.max_order}, grading={self.grading.name}, "
                f"terms={len(self.coeffs)})")

    # aritmética -------------------------------------------------------------

    def __add__(self, other):
        return series_add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return TriangularSeries(self.max_order, {k: -c for k, c in self.coeffs.items()},
                                self.grading)

    def __sub__(self, other):
        return series_add(self, -other if isinstance(other, TriangularSeries) else -other)

    def __mul__(self, other):
        return series_mul(self, other)

    __rmul__ = __mul__

    def evaluate(self, m, n, z_a, z_b):
        return series_evaluate(self, m, n, z_a, z_b)


# ---------------------------------------------------------------------------
# Operações
# ---------------------------------------------------------------------------

def series_add(left, right):
    if not isinstance(right, TriangularSeries):
        right = TriangularSeries.constant(left.max_order, right)
    coeffs = dict(left.coeffs)
    for key, value in right.items():
        coeffs[key] = coeffs.get(key, 0) + value
    return TriangularSeries(min(left.max_order, right.max_order), coeffs,
                            left.grading & right.grading)


def series_mul(left, right):
    if not isinstance(right, TriangularSeries):
        return TriangularSeries(left.max_order, {k: c * right for k, c in left.items()},
                                left.grading)
    # ordem confiável de um produto: cada fator contribui com a valoração do outro
    order = min(left.max_order + right.valuation, right.max_order + left.valuation)
    coeffs = {}
    for (p1, q1, i1, j1), c1 in left.items():
        for (p2, q2, i2, j2), c2 in right.items():
            if p1 + p2 + q1 + q2 > order:
                continue
            key = (p1 + p2, q1 + q2, i1 + i2, j1 + j2)
            coeffs[key] = coeffs.get(key, 0) + c1 * c2
    return TriangularSeries(order, coeffs, left.grading & right.grading)


def series_compose_analytic(coefficients, series):
    """Σ_k f_k·S^k por Horner; S precisa de termo constante nulo"""
    if series[(0, 0, 0, 0)] != 0:
        raise GradingError("Composição exige série sem termo constante")
    coefficients = list(coefficients)[:series.max_order + 1]
    result = TriangularSeries.constant(series.max_order, 0)
    for c in reversed(coefficients):
        result = result * series + c
    return result.truncate(series.max_order)


def series_compose_bivariate(jet, first, second):
    """f(S₁, S₂) para f dado como jato de duas variáveis"""
    order = min(first.max_order, second.max_order)
    powers_a = [TriangularSeries.constant(order, 1)]
    powers_b = [TriangularSeries.constant(order, 1)]
    for _ in range(order):
        powers_a.append(powers_a[-1] * first)
        powers_b.append(powers_b[-1] * second)
    result = TriangularSeries(order, {}, first.grading & second.grading)
    for (i, j), c in jet.items():
        if i + j > order:
            continue
        result = result + powers_a[i] * powers_b[j] * c
    return result.truncate(order)


def series_divide_za(series):
    """S/z_A de uma série estrita em z_A e múltipla de z_A"""
    if not series.grading & Grading.STRICT_A:
        raise GradingError("Divisão por z_A exige série estrita em z_A",
                           grading=series.grading.name)
    if not series.is_multiple_of_za():
        raise GradingError("Série não é múltipla de z_A")
    coeffs = {(p - 1, q, i, j): c for (p, q, i, j), c in series.items()}
    return TriangularSeries(series.max_order - 1, coeffs, series.grading & Grading.STRICT_B)


def series_times_za(series, power=1):
    """z_A^power·S; uma série triangular em z_A passa a estrita em z_A"""
    coeffs = {(p + power, q, i, j): c for (p, q, i, j), c in series.items()}
    return TriangularSeries(series.max_order + power, coeffs,
                            series.grading | Grading.STRICT_A)


def series_times_index(series, variable, factor, grading):
    """factor·m·S ou factor·n·S, com a graduação do resultado declarada"""
    shift = (0, 0, 1, 0) if variable == 'm' else (0, 0, 0, 1)
    coeffs = {tuple(a + b for a, b in zip(key, shift)): c * factor
              for key, c in series.items()}
    return TriangularSeries(series.max_order, coeffs, grading)


def series_swap(series):
    """(m, n, z_A, z_B) -> (n, m, z_B, z_A)"""
    coeffs = {(q, p, j, i): c for (p, q, i, j), c in series.items()}
    return TriangularSeries(series.max_order, coeffs, series.grading.swapped())


def series_evaluate(series, m, n, z_a, z_b):
    exact = all(is_exact(x) for x in (z_a, z_b)) and series.exact
    total = Fraction(0) if exact else mpf(0)
    for (p, q, i, j), c in series.items():
        if not exact:
            c = bigfloat(c)
        total += c * m ** i * n ** j * z_a ** p * z_b ** q
    return total


def series_dump(series):
    """Uma linha 'p q i j valor' por coeficiente, em ordem determinística"""
    lines = [f"# order {series.max_order} grading {series.grading.name}"]
    for key in sorted(series.coeffs):
        lines.append(' '.join(str(k) for k in key) + ' ' + format_number(series.coeffs[key]))
    return '\n'.join(lines) + '\n'


def series_load(text):
    header, *rows = [line for line in text.strip().splitlines() if line.strip()]
    _, _, order, _, grading = header.split()
    coeffs = {}
    for row in rows:
        p, q, i, j, value = row.split()
        is_rational = all(ch.isdigit() or ch in '+-/' for ch in value)
        coeffs[(int(p), int(q), int(i), int(j))] = rational(value) if is_rational else bigfloat(value)
    return TriangularSeries(int(order), coeffs, Grading[grading])


# ---------------------------------------------------------------------------
# Escalares de entrada
# ---------------------------------------------------------------------------

def _uniform(values):
    """Tudo racional quando possível; senão tudo mpf"""
    values = list(values)
    if all(is_exact(v) or (isinstance(v, str) and '.' not in v and 'e' not in v.lower())
           for v in values):
        return [rational(v) for v in values], True
    return [bigfloat(v) for v in values], False


def normalize_inputs(delta, a, *extra):
    """δ, tabela a e escalares extras no mesmo domínio (racional ou mpf)"""
    keys = sorted(a)
    values, exact = _uniform(list(delta) + [a[k] for k in keys] + list(extra))
    k = len(delta)
    table = dict(zip(keys, values[k:k + len(keys)]))
    table.setdefault((1, 0), Fraction(1) if exact else mpf(1))
    table.setdefault((0, 1), Fraction(1) if exact else mpf(1))
    return values[:k], table, values[k + len(keys):], exact


def _one(exact):
    return Fraction(1) if exact else mpf(1)


# ---------------------------------------------------------------------------
# Colagem: M̃ -> M -> Ψ -> v -> u
# ---------------------------------------------------------------------------

def mtilde_from_a(a, order):
    """M̃(h_A, h_B) = Σ a_ij h_A^i h_B^j como jato"""
    return Jet(2, order, {tuple(k): v for k, v in a.items()})


def _energy_chart(m_jet, order):
    """Ψ(η) = (η_A ∂_A M, η_B ∂_B M) na ordem dada"""
    partials = [Jet(2, order, m_jet.deriv(k).coeffs) for k in (0, 1)]
    return JetMap([Jet.variable(2, order, k) * partials[k] for k in (0, 1)])


def generating_from_mtilde(a, order):
    """M normalizada (coeficientes lineares 1) com M = M̃∘Ψ[M], grau a grau"""
    mtilde = mtilde_from_a(a, order)
    exact = all(is_exact(v) for v in a.values())
    m_jet = Jet(2, order, {(1, 0): _one(exact), (0, 1): _one(exact)})
    for degree in range(2, order + 1):
        chart = _energy_chart(m_jet, order)
        remainder = mtilde.compose(chart.components).homogeneous(degree)
        # a parte linear de M̃ devolve degree·M_d (Euler)
        m_jet = m_jet - remainder / (degree - 1)
    return m_jet


def u_from_gluing(a, order, xi_inf=None):
    """u(h_A, h_B) = v²/ξ∞² − 1 até a ordem dada.

    Depende só de a: com η reescalado por ξ∞, ξ∞ sai de v/ξ∞.
    """
    m_jet = generating_from_mtilde(a, order + 1)
    chart = _energy_chart(m_jet, order + 1)
    inverse = jet_invert_map(chart)
    v = m_jet.deriv(0).compose([c.truncate(order) for c in inverse.components])
    return v * v - 1


# ---------------------------------------------------------------------------
# Energias e Σ
# ---------------------------------------------------------------------------

def _binomial_series(order, power, exact):
    """C(2m, power)·z_A^power como série triangular"""
    coeffs = {}
    for k, c in enumerate(binomial_polynomial(2, power)):
        coeffs[(power, 0, k, 0)] = c if exact else bigfloat(c)
    return TriangularSeries(order, coeffs, Grading.STRICT_B)


def _energy_sweep(delta, u_jet, h_a, h_b, order, exact):
    delta_h = series_compose_analytic([0] + list(delta), h_a)
    ratio = series_divide_za(delta_h)
    power = TriangularSeries.constant(order, _one(exact))
    term = TriangularSeries.constant(order, _one(exact))
    for i in range(1, order + 1):
        term = (term * ratio).truncate(order)
        power = power + (_binomial_series(order, i, exact) * term).truncate(order)
    scale = series_compose_bivariate(u_jet, h_a, h_b) + _one(exact)
    product = (scale * power).truncate(order)
    return series_times_za(product).truncate(order)


def solve_energy_series(delta, u, order):
    """h_A e h_B resolvendo h_A = (1 + u(h_A, h_B))(1 + δ(h_A))^{2m} z_A.

    Cada varredura fixa mais um grau; depois de ``order`` varreduras a
    iteração é estacionária.
    """
    exact = all(is_exact(d) for d in delta) and all(is_exact(c) for _, c in u.items())
    h_a = TriangularSeries.z_a(order)
    h_b = TriangularSeries.z_b(order)
    for _ in range(order):
        h_a = _energy_sweep(delta, u, h_a, h_b, order, exact)
        h_b = series_swap(h_a)
    check = _energy_sweep(delta, u, h_a, h_b, order, exact)
    gap = max((abs(check[k] - h_a[k]) for k in set(check.coeffs) | set(h_a.coeffs)),
              default=0)
    if not (gap == 0 or (not exact and negligible(gap, guard=20))):
        raise ConvergenceError("Iteração das energias não estacionou", gap=gap)
    return h_a, h_b


@dataclass
class SigmaSeries:
    delta_hat: list

    def coefficients(self):
        """Coeficientes de Σ(h) = Σ_k δ̂_k h^{k+1}, a partir de h⁰"""
        return [0, 0] + list(self.delta_hat)

    def to_dict(self):
        return {'delta_hat': [format_number(d) for d in self.delta_hat]}


def sigma_from_mu(delta, order):
    """Σ(h) = h log μ(h) − ∫₀^h log μ; só depende de δ (log λ cancela)"""
    exact = all(is_exact(d) for d in delta)
    coeffs = [_one(exact)] + list(delta[:order])
    coeffs += [0] * (order + 1 - len(coeffs))
    log_jet = Jet.univariate(order, coeffs).log()
    delta_hat = []
    for k in range(1, order + 1):
        g = log_jet[(k,)]
        delta_hat.append(g * Fraction(k, k + 1) if exact else g * k / (k + 1))
    return SigmaSeries(delta_hat)


def sigma_evaluate(sigma, h):
    return sum((c * h ** k for k, c in enumerate(sigma.coefficients())), 0 * h)


# ---------------------------------------------------------------------------
# Perímetros
# ---------------------------------------------------------------------------

def length_series(delta, a, L_inf, order):
    """Série estrita de ℓ_{m,n} − (2m + 2n)ℓ₀.

    ℓ₀ e ξ∞ não entram nos coeficientes: aparecem só em z_A, z_B e no
    deslocamento (2m + 2n)ℓ₀.
    """
    delta, a, (L_inf,), exact = normalize_inputs(delta, a, L_inf)
    u_jet = u_from_gluing(a, max(order - 1, 0))
    h_a, h_b = solve_energy_series(delta, u_jet, order)
    sigma = sigma_from_mu(delta, max(order - 1, 1))
    sigma_a = series_compose_analytic(sigma.coefficients(), h_a)
    sigma_b = series_swap(sigma_a)
    two = 2 * _one(exact)
    action = (series_times_index(sigma_a, 'm', two, Grading.STRICT)
              + series_times_index(sigma_b, 'n', two, Grading.STRICT))
    gluing = series_compose_bivariate(mtilde_from_a(a, order), h_a, h_b)
    total = TriangularSeries.constant(order, two * L_inf) + action + h_a + h_b - gluing * two
    return total.with_grading(Grading.STRICT)
