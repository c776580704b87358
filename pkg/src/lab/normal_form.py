"""Forma normal de Birkhoff na órbita 2-periódica e a aplicação de colagem.

Coordenadas de Birkhoff (ξ, η): N(ξ, η) = (μ(h)ξ, η/μ(h)), h = ξη, e a
involução é I(ξ, η) = (η, ξ). As conjugações Φ₁, Φ₂ levam deslocamentos
(ξ, η) em deslocamentos (σ, ρ) a partir de (1,0,0) e (2,0,0).
"""

from dataclasses import dataclass, field, replace

from mpmath import mp, mpf

from src.lab.billiard import (
    PhasePoint, collide_inverse, collision_jet, inverse_collision_jet, jacobian
)
from src.lab.errors import NormalFormError, SolverError, TransversalityError
from src.lab.numerics import (
    Jet, JetMap, format_number, jet_invert_map, jet_revert, limit_of, negligible, tolerance
)
from src.run_guards import RunLogger


def _linear_map(matrix, order):
    x, y = Jet.variable(2, order, 0), Jet.variable(2, order, 1)
    return JetMap([x * matrix[0][0] + y * matrix[0][1], x * matrix[1][0] + y * matrix[1][1]])


def _swap(order):
    return [Jet.variable(2, order, 1), Jet.variable(2, order, 0)]


def _reverse_r(jets):
    """I₀ aplicado a um par (s, r) de jatos"""
    return JetMap([jets[0], -jets[1]])


def energy_jet(xi, eta):
    return xi * eta


def birkhoff_map(mu, power, xi, eta):
    """N^power em (ξ, η) dados como jatos; h = ξη é invariante"""
    h = energy_jet(xi, eta)
    factor = h.apply_series(mu.univariate_coefficients())
    if power >= 0:
        up, down = factor ** power, factor.reciprocal() ** power
    else:
        up, down = factor.reciprocal() ** (-power), factor ** (-power)
    return JetMap([xi * up, eta * down])


@dataclass
class NormalFormData:
    lam: object
    delta: list
    order: int
    mu: Jet
    phi1: JetMap
    phi2: JetMap
    f12: JetMap
    f21: JetMap
    frame: list
    squared: JetMap
    _inverses: dict = field(default_factory=dict, repr=False)

    def n_map(self, power=1, order=None):
        order = self.order if order is None else order
        return birkhoff_map(self.mu, power, Jet.variable(2, order, 0), Jet.variable(2, order, 1))

    def mu_value(self, h):
        return self.mu(h)

    def flipped(self):
        """Troca Φ₁, Φ₂ por Φ₁∘(−id), Φ₂∘(−id)"""
        minus = JetMap([-Jet.variable(2, self.order, 0), -Jet.variable(2, self.order, 1)])
        return replace(self, phi1=self.phi1.compose(minus), phi2=self.phi2.compose(minus),
                       _inverses={})

    def inverse(self, which):
        if which not in self._inverses:
            phi = self.phi1 if which == 1 else self.phi2
            self._inverses[which] = jet_invert_map(phi.centered())
        return self._inverses[which]

    def birkhoff_coordinates(self, point):
        """Coordenadas de Birkhoff de um ponto de fase perto de (1,0,0) ou (2,0,0)"""
        if point.i not in (1, 2):
            raise NormalFormError("Coordenadas de Birkhoff só existem em D1 e D2", i=point.i)
        phi = self.phi1 if point.i == 1 else self.phi2
        offset = phi.constant()
        return self.inverse(point.i)(point.s - offset[0], point.r - offset[1])

    def to_dict(self):
        return {
            'lambda': format_number(self.lam),
            'delta': [format_number(d) for d in self.delta],
            'order': self.order,
        }


def _eigen_frame(linear):
    (t00, t01), (t10, t11) = linear
    trace = t00 + t11
    if trace <= 2:
        raise NormalFormError("Ponto 2-periódico não é hiperbólico com autovalores positivos",
                              trace=trace)
    lam2 = (trace - mp.sqrt(trace * trace - 4)) / 2
    first = (t01, lam2 - t00)
    second = (lam2 - t11, t10)
    a, b = max(first, second, key=lambda v: v[0] ** 2 + v[1] ** 2)
    if a * b >= 0:
        raise NormalFormError("Direção estável com orientação degenerada", a=a, b=b)
    scale = mp.sqrt(-2 * a * b)
    a, b = a / scale, b / scale
    return lam2, [[a, a], [b, -b]]


def _resonant(component, a, b):
    return (component == 0 and a - b == 1) or (component == 1 and b - a == 1)


def _canonical_normal_form(T, lam2, order):
    """Φ̃ sem termos ressonantes e N² ressonante com T∘Φ̃ = Φ̃∘N²"""
    rates = [lam2, 1 / lam2]
    ident = JetMap.identity(2, order)
    phi = [ident[0], ident[1]]
    squared = [ident[0] * rates[0], ident[1] * rates[1]]
    for degree in range(2, order + 1):
        error = JetMap(phi).compose(JetMap(squared))
        error = T.compose(JetMap(phi)) - error
        for c in (0, 1):
            for (a, b), coeff in error[c].homogeneous(degree).items():
                monomial = Jet(2, order, {(a, b): 1})
                if _resonant(c, a, b):
                    squared[c] = squared[c] + monomial * coeff
                    continue
                gap = rates[c] - lam2 ** (a - b)
                if negligible(gap, guard=20):
                    raise NormalFormError("Ressonância inesperada", degree=degree, monomial=(a, b))
                phi[c] = phi[c] - monomial * (coeff / gap)
    return JetMap(phi), JetMap(squared)


def _radial_part(jet, order):
    """Coeficientes de (ξη)^k de um jato que só depende de h"""
    return [jet[(k, k)] for k in range(order + 1)]


def compute_normal_form(table, order, run_id=None):
    """Forma normal de 𝓕² em (1,0,0), sua raiz N e as conjugações Φ₁, Φ₂"""
    if order < 3:
        raise NormalFormError("Ordem da forma normal deve ser pelo menos 3", order=order)
    origin1 = PhasePoint(1, mpf(0), mpf(0))
    origin2 = PhasePoint(2, mpf(0), mpf(0))
    f12 = collision_jet(table, origin1, order)
    f21 = collision_jet(table, origin2, order)
    T = f21.compose(f12, recenter=True).centered()

    lam2, frame = _eigen_frame(T.linear_part())
    (a, b), (c, d) = frame
    A = _linear_map(frame, order)
    A_inv = _linear_map([[d, -b], [-c, a]], order)
    T_frame = A_inv.compose(T.compose(A))

    phi_tilde, squared = _canonical_normal_form(T_frame, lam2, order)

    # Φ̃ não preserva área: o jacobiano só depende de h e é absorvido por
    # P(ξ, η) = (ξα(h), ηα(h)) com α² = H(h)/h, H a inversa de ∫j.
    half = (order - 1) // 2
    j = _radial_part(phi_tilde.jacobian_det(), half)
    area = Jet(1, half + 1, {(k + 1,): j[k] / (k + 1) for k in range(half + 1)})
    energy = jet_revert(area)
    alpha = Jet(1, half, {(k - 1,): energy[(k,)] for k in range(1, half + 2)}).sqrt()
    xi, eta = Jet.variable(2, order, 0), Jet.variable(2, order, 1)
    alpha_h = energy_jet(xi, eta).apply_series(alpha.univariate_coefficients())
    P = JetMap([xi * alpha_h, eta * alpha_h])

    f = Jet(1, half, {(k,): squared[0][(k + 1, k)] for k in range(half + 1)})
    nu = f.compose([energy.truncate(half)])
    mu = nu.sqrt()
    lam = mu[(0,)]
    delta = [mu[(k,)] / lam for k in range(1, half + 1)]

    phi1 = A.compose(phi_tilde.compose(P))
    n_inverse = birkhoff_map(mu, -1, xi, eta)
    phi2 = f12.compose(phi1.compose(n_inverse), recenter=True)

    expected = jacobian(table, origin1)
    RunLogger.log_event('normal_form_done', {
        'order': order,
        'lambda': format_number(lam, 20),
        'delta': [format_number(x, 20) for x in delta],
        'jacobian_trace': format_number(expected[0, 0] + expected[1, 1], 20),
    }, run_id=run_id)
    return NormalFormData(lam, delta, order, mu, phi1, phi2, f12, f21, frame, squared)


def conjugacy_residuals(nf):
    """Resíduos das equações de conjugação, reversibilidade e área como jatos"""
    N = nf.n_map()
    swap = JetMap(_swap(nf.order))
    return {
        'phi2_n_minus_f12_phi1': (nf.phi2.compose(N)
                                  - nf.f12.compose(nf.phi1, recenter=True)).max_abs(),
        'phi1_n_minus_f21_phi2': (nf.phi1.compose(N)
                                  - nf.f21.compose(nf.phi2, recenter=True)).max_abs(),
        'phi1_involution': (nf.phi1.compose(swap) - _reverse_r(nf.phi1)).max_abs(),
        'phi2_involution': (nf.phi2.compose(swap) - _reverse_r(nf.phi2)).max_abs(),
        'phi1_area': (nf.phi1.jacobian_det() - 1).max_abs(),
    }


def apply_psi(nf, tau):
    """Renormaliza Φ₁ por Ψ(ξ, η) = (τ(h)ξ, η/τ(h)) e recalcula μ.

    ``tau`` são os coeficientes de τ(h) com τ(0) ≠ 0. Devolve os novos δ.
    """
    order = nf.order
    xi, eta = Jet.variable(2, order, 0), Jet.variable(2, order, 1)
    t = energy_jet(xi, eta).apply_series(list(tau))
    psi = JetMap([xi * t, eta * t.reciprocal()])
    phi = nf.phi1.compose(psi)
    T = nf.f21.compose(nf.f12, recenter=True).centered()
    squared = jet_invert_map(phi).compose(T.compose(phi))
    half = (order - 1) // 2
    nu = Jet(1, half, {(k,): squared[0][(k + 1, k)] for k in range(half + 1)})
    mu = nu.sqrt()
    return [mu[(k,)] / mu[(0,)] for k in range(1, half + 1)]


# ---------------------------------------------------------------------------
# Colagem
# ---------------------------------------------------------------------------

@dataclass
class GluingData:
    xi_inf: object
    a_hat: dict
    a: dict
    L_inf: object
    G: JetMap
    M: Jet
    mtilde: Jet
    psi: JetMap
    steps: int
    closure_residual: object
    homoclinic_gap: object
    errors: dict = field(default_factory=dict)

    @property
    def order(self):
        return self.G.order

    def to_dict(self):
        return {
            'xi_inf': format_number(self.xi_inf),
            'L_inf': format_number(self.L_inf),
            'a_hat': {f"{i},{j}": format_number(v) for (i, j), v in sorted(self.a_hat.items())},
            'a': {f"{i},{j}": format_number(v) for (i, j), v in sorted(self.a.items())},
            'steps': self.steps,
            'closure_residual': format_number(self.closure_residual, 5),
            'homoclinic_gap': format_number(self.homoclinic_gap, 5),
            'errors': {k: format_number(v, 5) for k, v in self.errors.items()},
        }


def homoclinic_coordinate(nf, homoclinic):
    """ξ_∞ a partir das coordenadas de Birkhoff de x_k^∞ (k ímpar, em D₁)"""
    estimates = []
    for k in sorted(k for k in homoclinic.points if k > 0 and k % 2 == 1):
        xi, _ = nf.birkhoff_coordinates(homoclinic.points[k])
        estimates.append((k, xi / nf.lam ** k))
    if len(estimates) < 2:
        raise SolverError("Poucos pontos homoclínicos para estimar ξ∞")
    gaps = [(abs(e2 - e1), e1) for (_, e1), (_, e2) in zip(estimates, estimates[1:])]
    gap, value = min(gaps, key=lambda item: item[0])
    return value, gap


def _choose_steps(nf, xi_inf, order):
    target = tolerance(mp.dps // 2)
    exponent = nf.order + 1 - order
    for k in range(3, 23, 2):
        if (nf.lam ** k * abs(xi_inf)) ** exponent <= target:
            return k
    return 21


def _phi_minus(table, nf, xi_inf, steps, order):
    """Φ₋ = F^{−k}∘Φ₁∘N^k em torno de (ξ∞, 0), k ímpar"""
    xi = Jet.variable(2, order, 0, value=xi_inf)
    eta = Jet.variable(2, order, 1)
    current = nf.phi1.compose(birkhoff_map(nf.mu, steps, xi, eta), recenter=True)
    index = 1
    for _ in range(steps):
        s, r = current.constant()
        point = PhasePoint(index, s, r)
        previous = collide_inverse(table, point)
        if previous is None:
            raise SolverError("Órbita homoclínica escapa na iteração inversa", i=index)
        step = inverse_collision_jet(table, point, order)
        current = step.compose(current.centered())
        index = previous.i
    if index != 3:
        raise SolverError("Iteração inversa não chegou a D3", i=index)
    return current


def extend_and_glue(table, nf, homoclinic, order=None, run_id=None):
    """ξ∞, G, M e M̃ a partir da forma normal e da órbita homoclínica.

    Devolve (GluingData, NormalFormData), este último com o sinal de Φ
    ajustado para ξ∞ > 0.
    """
    order = (nf.order - 1) // 2 if order is None else order
    xi_inf, xi_error = homoclinic_coordinate(nf, homoclinic)
    if xi_inf < 0:
        nf = nf.flipped()
        xi_inf = -xi_inf
    steps = _choose_steps(nf, xi_inf, order)
    extra = int(mp.ceil(steps * (order + 1) * mp.log10(1 / nf.lam))) + 10

    with mp.workdps(mp.dps + extra):
        phi_minus = _phi_minus(table, nf, xi_inf, steps, order)
        c_minus = phi_minus.constant()
        homoclinic_gap = max(abs(c_minus[0] - homoclinic.points[0].s),
                             abs(c_minus[1] - homoclinic.points[0].r))
        inverse = jet_invert_map(phi_minus.centered())

        swap = _swap(order)
        phi_plus = JetMap([phi_minus[0].compose(swap), -phi_minus[1].compose(swap)])
        offset = phi_plus.constant()
        # Φ₊ parte de (s₀, −r₀); Φ₋⁻¹ está centrado em (s₀, r₀)
        relative = phi_plus.centered().shifted((offset[0] - c_minus[0], offset[1] - c_minus[1]))
        G = inverse.compose(relative, recenter=True).shifted((xi_inf, 0))

        slope = G[1][(0, 1)]
        if negligible(slope, guard=mp.dps // 2):
            raise TransversalityError("Cartas (ηA, ηB) degeneradas", slope=slope)
        alpha = Jet.variable(2, order, 0)
        chart = JetMap([alpha, G[1].without_constant()])
        chart_inverse = jet_invert_map(chart)
        psi_a = chart_inverse[1] + xi_inf
        psi_b = G[0].compose(chart_inverse.components)
        closure = (psi_a.deriv(1) - psi_b.deriv(0)).max_abs()

        axis = Jet(2, order, {e: c for e, c in psi_a.items() if e[1] == 0})
        M = axis.integ(0) + psi_b.integ(1)
        lifted = [Jet(2, order + 1, p.coeffs) for p in (psi_a, psi_b)]
        Psi = JetMap([Jet.variable(2, order + 1, 0) * lifted[0],
                      Jet.variable(2, order + 1, 1) * lifted[1]])
        mtilde = M.compose(jet_invert_map(Psi).components)

    a_hat = {e: +c for e, c in M.items()}
    a = {e: +c for e, c in mtilde.items()}
    asymmetry = max((abs(a.get((i, j), 0) - a.get((j, i), 0)) for i, j in a), default=mpf(0))

    L_inf, L_error = limit_of([p - 2 * n * table.ell0
                                 for n, p in sorted(homoclinic.perimeters.items())])
    glue = GluingData(xi_inf, a_hat, a, L_inf, G, M, mtilde, Psi, steps, closure,
                      homoclinic_gap, {'xi_inf': xi_error, 'L_inf': L_error,
                                       'a_asymmetry': asymmetry})
    RunLogger.log_event('gluing_done', {
        'xi_inf': format_number(xi_inf, 20), 'L_inf': format_number(L_inf, 20),
        'steps': steps, 'closure_residual': format_number(closure, 5),
    }, run_id=run_id)
    return glue, nf


def gluing_involution_residual(glue):
    """max |(G∘I)∘(G∘I) − id| como jato, em torno de (ξ∞, 0)"""
    order = glue.G.order
    swapped = JetMap([c.compose(_swap(order)) for c in glue.G])
    local = swapped.shifted((-glue.xi_inf, 0))
    twice = local.compose(local, recenter=True)
    return (twice - JetMap.identity(2, order)).max_abs()


def fixed_point_energies(nf, glue, m, n):
    """Ponto fixo de G∘N^{2n}∘G∘N^{2m}: (h_A, h_B, ξ_A, η_A, ξ_B, η_B).

    As incógnitas são reescaladas para O(1): ξ_A = ξ∞ + λ^{2min(m,n)}x e
    η_A = λ^{2m}y.
    """
    lam = nf.lam
    ratio = [c / lam for c in nf.mu.univariate_coefficients()]
    xi_inf = glue.xi_inf
    scale_a, scale_b = lam ** (2 * m), lam ** (2 * n)
    scale_x = lam ** (2 * min(m, n))

    def growth(h):
        return sum((c * h ** k for k, c in enumerate(ratio)), mpf(0))

    def unpack(x, y):
        xi_a = xi_inf + scale_x * x
        eta_a = scale_a * y
        xi_b, eta_b = glue.G(eta_a, xi_a - xi_inf)
        return xi_a, eta_a, xi_b, eta_b

    def equations(x, y):
        xi_a, eta_a, xi_b, eta_b = unpack(x, y)
        # ξμ(h)^{2m} = η, dividido por λ^{2m}
        first = growth(xi_a * eta_a) ** (2 * m) * xi_a - y
        second = growth(xi_b * eta_b) ** (2 * n) * xi_b - eta_b / scale_b
        return [first, second]

    c_alpha, c_beta = glue.G[1][(1, 0)], glue.G[1][(0, 1)]
    y0 = xi_inf
    x0 = (xi_inf * scale_b - c_alpha * y0 * scale_a) / (c_beta * scale_x)
    try:
        root = mp.findroot(equations, (x0, y0))
    except (ValueError, ZeroDivisionError) as exc:
        raise SolverError("Ponto fixo da dinâmica colada não convergiu", m=m, n=n) from exc
    xi_a, eta_a, xi_b, eta_b = unpack(root[0], root[1])
    return xi_a * eta_a, xi_b * eta_b, xi_a, eta_a, xi_b, eta_b
