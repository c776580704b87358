"""Do espectro numérico aos invariantes: ℓ₀, L∞, λ, ξ∞², ℓ^{ij}_{pq}, δ e a.

Os ajustes usam aritmética racional exata (sympy DomainMatrix sobre QQ)
quando a tabela é exata e mpmath na precisão corrente caso contrário.
"""

import csv
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from mpmath import mp, mpf
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from src.lab.errors import (
    ConvergenceError, IllConditionedFitError, InconsistentSpectrumError, RoundTripError,
    ToleranceError
)
from src.lab.numerics import bigfloat, format_number, is_exact, limit_of, rational, tolerance
from src.lab.series import length_series
from src.run_guards import RunLogger


# ---------------------------------------------------------------------------
# Tabela de perímetros
# ---------------------------------------------------------------------------

@dataclass
class SpectrumTable:
    values: dict
    precision: int
    family: str = 'cyclicity2'

    @property
    def grid(self):
        return sorted(self.values)

    @property
    def exact(self):
        return all(is_exact(v) for v in self.values.values())

    def m_values(self):
        return sorted({m for m, _ in self.values})

    def n_values(self):
        return sorted({n for _, n in self.values})

    def __getitem__(self, key):
        return self.values[key]

    def symmetry_defect(self):
        """max |ℓ_{m,n} − ℓ_{n,m}| sobre os pares presentes"""
        return max((abs(v - self.values[(n, m)]) for (m, n), v in self.values.items()
                    if (n, m) in self.values), default=0)

    def to_csv(self, stream):
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(['m', 'n', 'perimeter'])
        for (m, n) in self.grid:
            writer.writerow([m, n, format_number(self.values[(m, n)])])

    @classmethod
    def from_csv(cls, stream, precision=None):
        reader = csv.DictReader(stream)
        values = {}
        for row in reader:
            text = row['perimeter'].strip()
            value = rational(text) if '/' in text or text.lstrip('-').isdigit() else bigfloat(text)
            values[(int(row['m']), int(row['n']))] = value
        if not values:
            raise ConvergenceError("Tabela de espectro vazia")
        return cls(values, precision or mp.dps)

    @classmethod
    def from_orbits(cls, orbits, precision=None):
        return cls({key: orbit.perimeter for key, orbit in orbits.items()}, precision or mp.dps)

    def to_dict(self):
        return {
            'precision': self.precision,
            'family': self.family,
            'cells': len(self.values),
            'symmetry_defect': format_number(self.symmetry_defect(), 5),
        }


@dataclass
class Frame:
    ell0: object
    L_inf: object
    lam: object
    xi_sq: object
    errors: dict = field(default_factory=dict)

    @property
    def exact(self):
        return all(is_exact(v) for v in (self.ell0, self.L_inf, self.lam, self.xi_sq))

    def z(self, k):
        return self.xi_sq * self.lam ** (2 * k)

    def to_dict(self):
        return {
            'ell0': format_number(self.ell0),
            'L_inf': format_number(self.L_inf),
            'lambda': format_number(self.lam),
            'xi_inf_sq': format_number(self.xi_sq),
            'errors': {k: format_number(v, 5) for k, v in self.errors.items()},
        }


def synthetic_table(series, ell0, lam, xi_sq, m_range, n_range):
    """ℓ_{m,n} avaliado a partir de uma série de perímetros truncada"""
    values = {}
    for m in m_range:
        for n in n_range:
            z_a, z_b = xi_sq * lam ** (2 * m), xi_sq * lam ** (2 * n)
            values[(m, n)] = (2 * m + 2 * n) * ell0 + series.evaluate(m, n, z_a, z_b)
    return SpectrumTable(values, mp.dps)


# ---------------------------------------------------------------------------
# Referencial
# ---------------------------------------------------------------------------

def _split_limit(sequence):
    """Limite e erro: o maior entre a estimativa de Shanks e a discordância
    entre as subsequências pares e ímpares"""
    value, error = limit_of(sequence)
    if len(sequence) >= 6:
        even, _ = limit_of(sequence[::2])
        odd, _ = limit_of(sequence[1::2])
        error = max(error, abs(even - odd))
    return value, error


def extract_frame(table):
    """ℓ₀, L∞, λ e ξ∞² como limites ao longo da grade"""
    ms = table.m_values()
    n_top = max(table.n_values())
    table = SpectrumTable({k: bigfloat(v) for k, v in table.values.items()},
                          table.precision, table.family)
    column = [m for m in ms if (m, n_top) in table.values and (m + 1, n_top) in table.values]
    diagonal = [m for m in ms if (m, m) in table.values]
    if len(column) < 3 or len(diagonal) < 4:
        raise ConvergenceError("Grade pequena demais para extrair o referencial",
                               column=len(column), diagonal=len(diagonal))

    steps = [(table[(m + 1, n_top)] - table[(m, n_top)]) / 2 for m in column]
    ell0, ell0_error = _split_limit(steps)

    offsets = [table[(m, m)] - 4 * m * ell0 for m in diagonal]
    two_l, l_error = _split_limit(offsets)

    # R_{m,m} = −2ξ∞²λ^{2m} + ...
    residuals = [o - two_l for o in offsets]
    # o fim da diagonal fica abaixo do ruído de L∞; razões e ξ∞² usam a primeira metade
    head = max(4, len(diagonal) // 2 + 1)
    ratios = [residuals[k + 1] / residuals[k] for k in range(min(head, len(diagonal) - 1))
              if diagonal[k + 1] == diagonal[k] + 1]
    lam2, lam_error = _split_limit(ratios)
    if not 0 < lam2 < 1:
        raise ConvergenceError("Razões do espectro não indicam 0 < λ < 1", lam2=lam2)
    lam = mp.sqrt(lam2)
    scaled = [-r / (2 * lam2 ** m) for r, m in zip(residuals, diagonal)]
    xi_sq, xi_error = _split_limit(scaled[:head])

    frame = Frame(ell0, two_l / 2, lam, xi_sq, {
        'ell0': ell0_error, 'L_inf': l_error / 2, 'lambda': lam_error / (2 * lam),
        'xi_inf_sq': xi_error,
    })
    details = frame.to_dict()
    details.pop('errors')
    RunLogger.log_event('frame_extracted', details)
    return frame


# ---------------------------------------------------------------------------
# Coeficientes ℓ^{ij}_{pq}
# ---------------------------------------------------------------------------

@dataclass
class CoefficientTable:
    values: dict
    errors: dict
    order: int
    points: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values.get(tuple(key), 0)

    def items(self):
        return self.values.items()

    def to_csv(self, stream):
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(['p', 'q', 'i', 'j', 'value', 'error'])
        for key in sorted(self.values):
            writer.writerow(list(key) + [format_number(self.values[key]),
                                         format_number(self.errors.get(key) or 0, 5)])

    def to_dict(self):
        return {','.join(str(k) for k in key): format_number(v)
                for key, v in sorted(self.values.items())}


def lc_columns(low, high, strict=True):
    """Monômios m^i n^j z_A^p z_B^q com low ≤ p + q ≤ high"""
    columns = []
    for total in range(low, high + 1):
        for p in range(total, -1, -1):
            q = total - p
            top_i = max(0, p - 1) if strict else p
            top_j = max(0, q - 1) if strict else q
            columns += [(p, q, i, j) for i in range(top_i + 1) for j in range(top_j + 1)]
    return columns


def _monomial(key, m, n, z_a, z_b):
    p, q, i, j = key
    return m ** i * n ** j * z_a ** p * z_b ** q


def _proxy_rank(rows):
    if not rows:
        return 0
    matrix = DomainMatrix([[QQ(v.numerator, v.denominator) for v in row] for row in rows],
                          (len(rows), len(rows[0])), QQ)
    return matrix.rank()


def _select_points(columns, candidates, skip=()):
    """Escolhe pontos da grade que tornam o ajuste quadrado não singular.

    O posto é testado num modelo racional genérico (λ = 1/3, ξ∞² = 1), com o
    mesmo padrão de monômios da tabela.
    """
    proxy = Fraction(1, 9)
    chosen, rows = [], []
    for m, n in candidates:
        if (m, n) in skip:
            continue
        row = [_monomial(c, m, n, proxy ** m, proxy ** n) for c in columns]
        if _proxy_rank(rows + [row]) > len(rows):
            chosen.append((m, n))
            rows.append(row)
            if len(chosen) == len(columns):
                return chosen
    return None


def _to_fraction(value):
    return Fraction(int(value.numerator), int(value.denominator))


def solve_linear(rows, rhs, exact):
    """Sistema quadrado: exato em QQ ou mpmath com escala de colunas"""
    size = len(rows)
    if exact:
        matrix = DomainMatrix([[QQ(v.numerator, v.denominator) for v in map(Fraction, row)]
                               for row in rows], (size, size), QQ)
        vector = DomainMatrix([[QQ(Fraction(v).numerator, Fraction(v).denominator)]
                               for v in rhs], (size, 1), QQ)
        try:
            solution = matrix.lu_solve(vector)
        except Exception as exc:  # sympy sinaliza singularidade com tipos variados
            raise IllConditionedFitError("Sistema de ajuste singular", size=size) from exc
        return [_to_fraction(entry[0]) for entry in solution.to_list()]

    scales = [max(abs(bigfloat(row[k])) for row in rows) or mpf(1) for k in range(size)]
    matrix = mp.matrix([[bigfloat(row[k]) / scales[k] for k in range(size)] for row in rows])
    try:
        solution = mp.lu_solve(matrix, mp.matrix([bigfloat(v) for v in rhs]))
        condition = mp.mnorm(matrix, 1) * mp.mnorm(mp.inverse(matrix), 1)
    except ZeroDivisionError as exc:
        raise IllConditionedFitError("Sistema de ajuste singular", size=size) from exc
    if condition > tolerance(10) ** -1:
        raise IllConditionedFitError("Ajuste mal condicionado", condition=condition)
    return [solution[k] / scales[k] for k in range(size)]


def _predicted_error(points, frame, total, order, precision):
    sizes = [frame.z(m) + frame.z(n) for m, n in points]
    smallest = [min(frame.z(m), frame.z(n)) for m, n in points]
    truncation = max(sizes) ** (order + 1) / min(sizes) ** total
    noise = mpf(10) ** (-precision + 5) / min(smallest) ** total
    return truncation + noise


def _candidates(table, frame, columns, total, order, exact):
    grid = sorted(table.values, key=lambda k: (k[0] + k[1], k[0], k[1]))
    if _select_points(columns, grid) is None:
        raise IllConditionedFitError("Grade sem pontos suficientes para o ajuste",
                                     unknowns=len(columns), cells=len(grid))
    if exact:
        return grid
    # menor erro previsto entre as janelas que começam mais acima na grade
    best, best_error = grid, None
    for shift in range(0, min(12, len(grid) - len(columns))):
        window = grid[shift:]
        chosen = _select_points(columns, window)
        if chosen is None:
            break
        error = _predicted_error(chosen, frame, total, order, table.precision)
        if best_error is None or error < best_error:
            best, best_error = window, error
    return best


def extract_lc(table, frame, order, strict=True, run_id=None):
    """ℓ^{ij}_{pq} para p + q ≤ order, por ordem total crescente.

    Em cada ordem os termos já extraídos são subtraídos e as ordens
    superiores até ``order`` entram como incógnitas auxiliares; um segundo
    subconjunto disjunto da grade estima o erro.
    """
    exact = table.exact and frame.exact
    if not exact:
        table = SpectrumTable({k: bigfloat(v) for k, v in table.values.items()},
                              table.precision, table.family)
        frame = Frame(*(bigfloat(v) for v in (frame.ell0, frame.L_inf, frame.lam, frame.xi_sq)),
                      frame.errors)
    values, errors, points = {}, {}, {}
    residual = {(m, n): v - (2 * m + 2 * n) * frame.ell0 for (m, n), v in table.values.items()}

    for total in range(order + 1):
        columns = lc_columns(total, order, strict)
        grid = _candidates(table, frame, columns, total, order, exact)
        first = _select_points(columns, grid)

        def fit(cells):
            rows = [[_monomial(c, m, n, frame.z(m), frame.z(n)) for c in columns]
                    for m, n in cells]
            return solve_linear(rows, [residual[cell] for cell in cells], exact)

        solution = fit(first)
        second = _select_points(columns, grid, skip=set(first))
        check = fit(second) if second is not None else None

        current = [c for c in columns if c[0] + c[1] == total]
        for k, key in enumerate(columns):
            if key not in current:
                continue
            values[key] = solution[k]
            errors[key] = abs(solution[k] - check[k]) if check is not None else None
        points[total] = first
        for (m, n) in residual:
            residual[(m, n)] -= sum((values[key] * _monomial(key, m, n, frame.z(m), frame.z(n))
                                     for key in current), 0 * residual[(m, n)])
        RunLogger.log_event('extraction_order_done', {
            'order': total, 'unknowns': len(columns),
            'max_error': format_number(max((e for k, e in errors.items()
                                            if k in current and e is not None), default=0), 5),
        }, run_id=run_id, level=logging.DEBUG)

    return CoefficientTable(values, errors, order, points)


def grading_violation(lc):
    """max |ℓ^{ij}_{pq}| dos coeficientes fora da graduação estrita"""
    return max((abs(v) for (p, q, i, j), v in lc.items()
                if i > max(0, p - 1) or j > max(0, q - 1)), default=0)


def truncation_slope(table, frame, lc, r=1, s=1, n=None):
    """Inclinação de log|resto| em m após subtrair os termos p ≤ r, q ≤ s"""
    n = max(table.n_values()) if n is None else n
    ms = [m for m in table.m_values() if (m, n) in table.values and m <= n - 3]
    keep = [key for key, _ in lc.items() if key[0] <= r and key[1] <= s]
    logs = []
    for m in ms:
        rest = bigfloat(table[(m, n)]) - (2 * m + 2 * n) * bigfloat(frame.ell0)
        z_a, z_b = bigfloat(frame.z(m)), bigfloat(frame.z(n))
        rest -= sum((bigfloat(lc[key]) * _monomial(key, m, n, z_a, z_b) for key in keep),
                    0 * rest)
        logs.append(float(mp.log(abs(bigfloat(rest)))))
    if len(logs) < 3:
        raise ConvergenceError("Pontos insuficientes para a inclinação", points=len(logs))
    slope, _ = np.polyfit(np.array(ms, dtype=float), np.array(logs), 1)
    return slope


# ---------------------------------------------------------------------------
# Inversão ordem a ordem
# ---------------------------------------------------------------------------

@dataclass
class RecoveryReport:
    frame: Frame
    lc: CoefficientTable
    delta: list
    a: dict
    diagnostics: dict

    def to_dict(self):
        return {
            'frame': self.frame.to_dict(),
            'delta': [format_number(d) for d in self.delta],
            'a': {f"{p},{q}": format_number(v) for (p, q), v in sorted(self.a.items())},
            'diagnostics': {str(k): format_number(v, 5) for k, v in self.diagnostics.items()},
        }


def _order_unknowns(total):
    return [('a', (p, total - p)) for p in range(total, (total - 1) // 2, -1)] + \
           [('delta', total - 1)]


def _forward(delta, a, unknowns, trial, L_inf, total):
    delta = list(delta) + [0]
    a = dict(a)
    for (kind, key), value in zip(unknowns, trial):
        if kind == 'delta':
            delta[key - 1] = value
        else:
            a[key] = value
            a[key[::-1]] = value
    return length_series(delta, a, L_inf, total)


def invert_to_invariants(lc, frame, order, run_id=None):
    """δ_j (j ≤ order − 1) e a_pq (p + q ≤ order) a partir de ℓ^{ij}_{pq}.

    Em cada ordem o modelo direto é afim nas incógnitas novas; a
    linearização vem de secantes exatas do próprio modelo.
    """
    exact = frame.exact and all(is_exact(v) for _, v in lc.items())
    one = Fraction(1) if exact else mpf(1)
    L_inf = lc[(0, 0, 0, 0)] / 2
    delta, a = [], {(1, 0): one, (0, 1): one}
    diagnostics = {}

    for total in range(2, order + 1):
        unknowns = _order_unknowns(total)
        observed = [(p, q, 0, 0) for _, (p, q) in unknowns[:-1]] + [(total, 0, 1, 0)]
        target = [lc[key] for key in observed]

        def sample(trial):
            series = _forward(delta, a, unknowns, trial, L_inf, total)
            return [series[key] for key in observed]

        zero = [0 * one] * len(unknowns)
        base = sample(zero)
        columns = []
        for k in range(len(unknowns)):
            unit = list(zero)
            unit[k] = one
            columns.append([v - b for v, b in zip(sample(unit), base)])
        rows = [[columns[c][r] for c in range(len(unknowns))] for r in range(len(observed))]
        solution = solve_linear(rows, [t - b for t, b in zip(target, base)], exact)

        for (kind, key), value in zip(unknowns, solution):
            if kind == 'delta':
                delta.append(value)
            else:
                a[key] = value
                a[key[::-1]] = value

        _check_symmetry(lc, total, exact)
        series = length_series(delta, a, L_inf, total)
        diagnostics[total] = max(abs(series[key] - v) for key, v in lc.items()
                                 if key[0] + key[1] == total)
        RunLogger.log_event('inversion_order_done', {
            'order': total, 'residual': format_number(diagnostics[total], 5),
        }, run_id=run_id, level=logging.DEBUG)

    return delta, a, diagnostics


def _check_symmetry(lc, total, exact):
    for p in range(total + 1):
        q = total - p
        left, right = lc[(p, q, 0, 0)], lc[(q, p, 0, 0)]
        bound = 0 if exact else max(tolerance(mp.dps // 2),
                                    10 * max(lc.errors.get((p, q, 0, 0)) or 0,
                                             lc.errors.get((q, p, 0, 0)) or 0))
        if abs(left - right) > bound:
            raise InconsistentSpectrumError("ℓ^{00}_{pq} e ℓ^{00}_{qp} divergem",
                                            p=p, q=q, gap=abs(left - right))


def recover(table, order, frame=None, max_error=None, run_id=None):
    """Pipeline completo: referencial, coeficientes e invariantes"""
    try:
        frame = frame or extract_frame(table)
        lc = extract_lc(table, frame, order, run_id=run_id)
        delta, a, diagnostics = invert_to_invariants(lc, frame, order, run_id=run_id)
    except ToleranceError as e:
        RunLogger.log_event('recovery_failed', e.to_dict(), run_id=run_id, level=logging.ERROR)
        raise
    if max_error is not None:
        worst = max((e for e in lc.errors.values() if e is not None), default=0)
        if worst > max_error:
            raise ToleranceError("Erro estimado da extração acima da tolerância",
                                 error=worst, tolerance=max_error)
    return RecoveryReport(frame, lc, delta, a, diagnostics)


def round_trip(seed, order, m_range, n_range, run_id=None):
    """Sementes (δ, a) -> série -> tabela sintética -> invariantes recuperados.

    Em modo exato a comparação é igualdade racional; em mpf usa metade dos
    dígitos de trabalho. Divergências levantam RoundTripError.
    """
    frame = Frame(seed['ell0'], seed['L_inf'], seed['lam'], seed['xi_sq'])
    series = length_series(seed['delta'], seed['a'], frame.L_inf, order)
    table = synthetic_table(series, frame.ell0, frame.lam, frame.xi_sq, m_range, n_range)
    lc = extract_lc(table, frame, order, run_id=run_id)
    delta, a, diagnostics = invert_to_invariants(lc, frame, order, run_id=run_id)

    bound = 0 if seed['exact'] else tolerance(mp.dps // 2)
    expected_delta = list(seed['delta'][:order - 1])
    expected_delta += [0] * (order - 1 - len(expected_delta))
    gaps = {f"delta{k + 1}": abs(got - want)
            for k, (got, want) in enumerate(zip(delta, expected_delta))}
    for (p, q), value in a.items():
        if p + q >= 2:
            gaps[f"a{p}{q}"] = abs(value - seed['a'].get((p, q), seed['a'].get((q, p), 0)))
    worst = max(gaps.values(), default=0)
    RunLogger.log_event('round_trip_done', {
        'seed': seed.get('name'), 'order': order, 'worst_gap': format_number(worst, 5),
    }, run_id=run_id)
    if worst > bound:
        failed = sorted(k for k, v in gaps.items() if v > bound)
        raise RoundTripError("Invariantes recuperados diferem das sementes",
                             seed=seed.get('name'), coefficients=failed, gap=worst)
    return {'seed': seed.get('name'), 'order': order, 'worst_gap': format_number(worst, 5),
            'diagnostics': {str(k): format_number(v, 5) for k, v in diagnostics.items()}}
