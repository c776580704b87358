"""Órbitas periódicas com codificação prescrita e a órbita homoclínica.

As órbitas são pontos críticos do funcional de comprimento
W(s_0, …, s_{n−1}) = Σ_k L_{i_k i_{k+1}}(s_k, s_{k+1}); o Newton usa a
Hessiana tridiagonal cíclica.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from mpmath import mp, mpf

from src.lab.billiard import PhasePoint, collide, jacobian
from src.lab.errors import (
    CodingMismatchError, ConvergenceError, GeometryError, NewtonDivergenceError, SolverError
)
from src.lab.numerics import format_number, limit_of, tolerance
from src.run_guards import RunLogger

# Newton para em 10^−(P−20); a verificação por collide aceita 10^−(P−25)
NEWTON_GUARD = 20
CHECK_GUARD = 25


@dataclass(frozen=True)
class Coding:
    word: tuple

    def __post_init__(self):
        word = tuple(int(c) for c in self.word)
        object.__setattr__(self, 'word', word)
        if len(word) < 2:
            raise GeometryError("Codificação precisa de pelo menos duas letras")
        if any(c not in (1, 2, 3) for c in word):
            raise GeometryError("Codificação usa apenas as letras 1, 2, 3", word=word)
        if any(word[k] == word[(k + 1) % len(word)] for k in range(len(word))):
            raise GeometryError("Letras vizinhas da codificação devem diferir", word=word)

    @classmethod
    def parse(cls, text):
        letters = [c for c in str(text) if c.isdigit()]
        return cls(tuple(letters))

    @classmethod
    def cyclicity2(cls, m, n):
        """3(12)^{m−1}1 3(12)^{n−1}1"""
        if m < 1 or n < 1:
            raise GeometryError("m e n devem ser positivos", m=m, n=n)
        return cls((3,) + (1, 2) * (m - 1) + (1, 3) + (1, 2) * (n - 1) + (1,))

    @classmethod
    def cyclicity1(cls, n):
        """3(12)^{n−1}1, período 2n"""
        if n < 1:
            raise GeometryError("n deve ser positivo", n=n)
        return cls((3,) + (1, 2) * (n - 1) + (1,))

    def reversed(self):
        return Coding(self.word[::-1])

    def swapped(self):
        swap = {1: 2, 2: 1, 3: 3}
        return Coding(tuple(swap[c] for c in self.word))

    def __len__(self):
        return len(self.word)

    def __str__(self):
        return ''.join(str(c) for c in self.word)


@dataclass
class PeriodicOrbit:
    coding: Coding
    points: list
    perimeter: object
    residual: object
    history: list = field(default_factory=list)

    def transposed(self):
        """A mesma órbita lida a partir da segunda visita a D₃: (m, n) -> (n, m)"""
        word = self.coding.word
        try:
            shift = word.index(3, 1)
        except ValueError:
            raise GeometryError("Órbita sem segunda visita a D₃",
                                coding=str(self.coding)) from None
        return PeriodicOrbit(Coding(word[shift:] + word[:shift]),
                             self.points[shift:] + self.points[:shift],
                             self.perimeter, self.residual, list(self.history))

    def to_dict(self):
        return {
            'coding': str(self.coding),
            'perimeter': format_number(self.perimeter),
            'residual': format_number(self.residual, 5),
            'iterations': len(self.history),
            'points': [p.to_dict() for p in self.points],
        }


@dataclass
class HomoclinicOrbit:
    points: dict
    errors: dict
    sizes: list
    perimeters: dict = field(default_factory=dict)

    @property
    def error(self):
        return max(self.errors.values())

    def to_dict(self):
        return {
            'points': {k: p.to_dict() for k, p in sorted(self.points.items())},
            'error': format_number(self.error, 5),
            'sizes': list(self.sizes),
        }


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------

def _chords(table, word, s):
    n = len(word)
    return [table.chord_derivatives(word[k], s[k], word[(k + 1) % n], s[(k + 1) % n])
            for k in range(n)]


def _gradient(chords):
    n = len(chords)
    return [chords[k - 1].d2 + chords[k].d1 for k in range(n)]


def _thomas(lower, diag, upper, rhs):
    n = len(diag)
    cp, dp = [mpf(0)] * n, [mpf(0)] * n
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / m
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m
    x = [mpf(0)] * n
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def solve_cyclic_tridiagonal(lower, diag, upper, rhs):
    """Resolve a_k x_{k−1} + b_k x_k + c_k x_{k+1} = d_k com índices cíclicos (n ≥ 3).

    Thomas mais a correção de Sherman-Morrison para os dois cantos.
    """
    n = len(diag)
    top_right, bottom_left = lower[0], upper[-1]
    gamma = -diag[0]
    modified = list(diag)
    modified[0] = diag[0] - gamma
    modified[-1] = diag[-1] - bottom_left * top_right / gamma
    x = _thomas(lower, modified, upper, rhs)
    u = [mpf(0)] * n
    u[0], u[-1] = gamma, bottom_left
    z = _thomas(lower, modified, upper, u)
    factor = (x[0] + top_right * x[-1] / gamma) / (1 + z[0] + top_right * z[-1] / gamma)
    return [xi - factor * zi for xi, zi in zip(x, z)]


def _newton_direction(chords, gradient):
    n = len(chords)
    rhs = [-g for g in gradient]
    if n == 2:
        h00 = chords[1].d22 + chords[0].d11
        h11 = chords[0].d22 + chords[1].d11
        h01 = chords[0].d12 + chords[1].d12
        step = mp.lu_solve(mp.matrix([[h00, h01], [h01, h11]]), mp.matrix(rhs))
        return [step[0], step[1]]
    diag = [chords[k - 1].d22 + chords[k].d11 for k in range(n)]
    lower = [chords[k - 1].d12 for k in range(n)]
    upper = [chords[k].d12 for k in range(n)]
    return solve_cyclic_tridiagonal(lower, diag, upper, rhs)


def _seed(table, coding):
    """Em cada letra, o ponto cuja normal aponta para o meio dos vizinhos"""
    word = coding.word
    n = len(word)
    seed = []
    for k, i in enumerate(word):
        prev, nxt = table[word[k - 1]].center, table[word[(k + 1) % n]].center
        target = ((prev[0] + nxt[0]) / 2, (prev[1] + nxt[1]) / 2)
        here = table[i].center
        angle = mp.atan2(target[1] - here[1], target[0] - here[0])
        seed.append(table[i].s_of_t(table[i].param_for_normal(angle)))
    return seed


def shifted_seed(previous):
    """Semente de continuação para (m + 1, n) a partir da órbita (m, n).

    Um par 1 2 extra entra no meio da primeira sequência 1 2 … 1, sobre a
    órbita 2-periódica (s = 0 em D₁ e em D₂ no referencial normalizado).
    """
    word = previous.coding.word
    run = word.index(3, 1) - 1
    offset = 1 + 2 * (run // 4)
    s = [p.s for p in previous.points]
    return s[:offset] + [mpf(0), mpf(0)] + s[offset:]


def solve_periodic(table, coding, seed=None, max_iter=80, verify=True, run_id=None):
    """A órbita periódica com a codificação dada (Newton amortecido)"""
    word = coding.word
    n = len(word)
    s = list(seed) if seed is not None else _seed(table, coding)
    if len(s) != n:
        raise GeometryError("Semente com tamanho diferente da codificação",
                            coding=str(coding), size=len(s))
    target = tolerance(NEWTON_GUARD)
    history = []
    chords = _chords(table, word, s)
    gradient = _gradient(chords)
    for _ in range(max_iter):
        residual = max(abs(g) for g in gradient)
        history.append(residual)
        RunLogger.log_event('newton_step', {'coding': str(coding), 'residual': format_number(residual, 5)},
                            run_id=run_id, level=logging.DEBUG)
        if residual <= target:
            break
        direction = _newton_direction(chords, gradient)
        slope = sum(g * d for g, d in zip(gradient, direction))
        if slope >= 0:
            direction = [-g for g in gradient]
            slope = -sum(g * g for g in gradient)
        length = sum(c.length for c in chords)
        step = mpf(1)
        while True:
            trial = [sk + step * dk for sk, dk in zip(s, direction)]
            trial_chords = _chords(table, word, trial)
            trial_gradient = _gradient(trial_chords)
            trial_length = sum(c.length for c in trial_chords)
            if (max(abs(g) for g in trial_gradient) < residual
                    or trial_length <= length + mpf('1e-4') * step * slope):
                break
            step /= 2
            if step < mpf(2) ** -40:
                raise NewtonDivergenceError("Busca linear falhou", coding=str(coding),
                                            residual=residual)
        s, chords, gradient = trial, trial_chords, trial_gradient
    else:
        raise NewtonDivergenceError("Newton não convergiu", coding=str(coding),
                                    residual=history[-1])

    if not _quadratic_tail(history):
        RunLogger.log_event('newton_not_quadratic', {'coding': str(coding)},
                            run_id=run_id, level=logging.WARNING)
        raise NewtonDivergenceError("Convergência de Newton não é quadrática",
                                    coding=str(coding),
                                    tail=[format_number(r, 5) for r in history[-4:]])

    s = [table[i].reduce(sk) for i, sk in zip(word, s)]
    points = [PhasePoint(word[k], s[k], -chords[k].d1) for k in range(n)]
    orbit = PeriodicOrbit(coding, points, sum(c.length for c in chords), history[-1], history)
    if verify:
        verify_coding(table, orbit)
    return orbit


def _quadratic_tail(history, window=3):
    tail = [r for r in history if r < mpf('1e-8')]
    pairs = list(zip(tail, tail[1:]))[-window:]
    floor = tolerance(NEWTON_GUARD)
    return all(b <= max(10 ** 6 * a * a, floor) for a, b in pairs)


def verify_coding(table, orbit, guard=CHECK_GUARD):
    """Itera collide ponto a ponto e compara com a órbita resolvida"""
    points = orbit.points
    n = len(points)
    tol = tolerance(guard)
    for k, x in enumerate(points):
        expected = points[(k + 1) % n]
        y = collide(table, x)
        if y is None or y.i != expected.i:
            raise CodingMismatchError("Órbita calculada viola a codificação pedida",
                                      coding=str(orbit.coding), index=k,
                                      got=None if y is None else y.i)
        gap = max(abs(table[y.i].reduce(y.s - expected.s)), abs(y.r - expected.r))
        if gap > tol:
            raise CodingMismatchError("Colisão não reproduz o ponto seguinte da órbita",
                                      coding=str(orbit.coding), index=k, gap=gap)
    return True


def cyclicity2_orbit(table, m, n, seed=None, run_id=None):
    orbit = solve_periodic(table, Coding.cyclicity2(m, n), seed=seed, run_id=run_id)
    RunLogger.log_event('orbit_solved', {'family': 'cyclicity2', 'm': m, 'n': n,
                                         'perimeter': format_number(orbit.perimeter, 20)},
                        run_id=run_id, level=logging.DEBUG)
    return orbit


def cyclicity1_orbit(table, n, seed=None, run_id=None):
    orbit = solve_periodic(table, Coding.cyclicity1(n), seed=seed, run_id=run_id)
    RunLogger.log_event('orbit_solved', {'family': 'cyclicity1', 'n': n,
                                         'perimeter': format_number(orbit.perimeter, 20)},
                        run_id=run_id, level=logging.DEBUG)
    return orbit


# ---------------------------------------------------------------------------
# Órbita homoclínica
# ---------------------------------------------------------------------------

def _default_sizes(table, k_range, count=6):
    """Tamanhos com λ^{2(n−k)} abaixo da precisão de trabalho"""
    origin1, origin2 = PhasePoint(1, mpf(0), mpf(0)), PhasePoint(2, mpf(0), mpf(0))
    matrix = jacobian(table, origin2) * jacobian(table, origin1)
    trace = matrix[0, 0] + matrix[1, 1]
    if trace <= 2:
        raise GeometryError("Órbita 2-periódica não é hiperbólica", trace=trace)
    rate = (trace - mp.sqrt(trace * trace - 4)) / 2
    start = k_range + 2 + int(mp.ceil((mp.dps - 10) / -mp.log10(rate)))
    return list(range(start, start + count))


def homoclinic_orbit(table, k_range, family='cyclicity1', sizes=None, max_error=None):
    """x_k^∞ para |k| ≤ k_range como limite acelerado das órbitas da família.

    Em cyclicity1 usa x_k^n (índices negativos contam a partir de 2n); em
    cyclicity2 usa x_k^{m,m} (a partir de 4m). Os perímetros por órbita
    homoclínica ficam em ``perimeters`` para a extrapolação de L∞.
    """
    if sizes is None:
        sizes = _default_sizes(table, k_range)
    orbits = {}
    for size in sizes:
        if family == 'cyclicity1':
            orbits[size] = cyclicity1_orbit(table, size)
        else:
            orbits[size] = cyclicity2_orbit(table, size, size)
    max_error = tolerance(mp.dps // 2) if max_error is None else max_error

    points, errors = {}, {}
    for k in range(-k_range, k_range + 1):
        series = []
        for size, orbit in orbits.items():
            period = len(orbit.points)
            series.append(orbit.points[k % period])
        index = series[0].i
        s, err_s = limit_of([p.s for p in series])
        r, err_r = limit_of([p.r for p in series])
        points[k] = PhasePoint(index, s, r)
        errors[k] = max(err_s, err_r)
    # ℓ_{m,m} tem duas excursões; ℓ_n só uma
    halves = 1 if family == 'cyclicity1' else 2
    perimeters = {size: o.perimeter / halves for size, o in orbits.items()}
    result = HomoclinicOrbit(points, errors, list(sizes), perimeters)
    if result.error > max_error:
        raise ConvergenceError("Órbita homoclínica sem convergência suficiente",
                               error=result.error, tolerance=max_error)
    RunLogger.log_event('homoclinic_orbit', {'k_range': k_range, 'sizes': list(sizes),
                                             'error': format_number(result.error, 5)})
    return result


# ---------------------------------------------------------------------------
# Grade de perímetros
# ---------------------------------------------------------------------------

def _solve_cell(payload):
    table, family, m, n, dps, keep_going, seed = payload
    key = (n,) if family == 'cyclicity1' else (m, n)
    with mp.workdps(dps):
        try:
            if family == 'cyclicity1':
                return key, cyclicity1_orbit(table, n)
            if seed is not None:
                try:
                    return key, cyclicity2_orbit(table, m, n, seed=seed)
                except SolverError as e:
                    RunLogger.log_event('continuation_failed', {'m': m, 'n': n, **e.to_dict()},
                                        level=logging.DEBUG)
            return key, cyclicity2_orbit(table, m, n)
        except SolverError as e:
            if not keep_going:
                raise
            return key, e


def _row_seed(solved, family, m, n):
    # continuação só quando a linha anterior já tem uma sequência 1 2 longa
    if family != 'cyclicity2' or m < 3:
        return None
    previous = solved.get((m - 1, n))
    return shifted_seed(previous) if isinstance(previous, PeriodicOrbit) else None


def spectrum_grid(table, m_range, n_range, family='cyclicity2', jobs=1, mirror=True,
                  cells=None, failures=None):
    """Órbitas da família sobre a grade; chaves (m, n) ou (n,) em cyclicity1.

    As linhas são resolvidas em ordem crescente de m; a partir de m = 3 cada
    célula parte da órbita (m − 1, n) por ``shifted_seed``. Com ``mirror`` só
    as células m ≤ n são resolvidas e (n, m) recebe a órbita transposta.

    ``cells`` restringe as células resolvidas. Se ``failures`` é um dict, as
    falhas do solver por célula ficam nele em vez de interromper a grade.
    """
    if family == 'cyclicity1':
        grid = [(None, n) for n in n_range]
    else:
        grid = [(m, n) for m in sorted(m_range) for n in n_range if not mirror or m <= n]
    if cells is not None:
        wanted = set(cells)
        grid = [(m, n) for m, n in grid
                if ((n,) if family == 'cyclicity1' else (m, n)) in wanted
                or (family == 'cyclicity2' and (n, m) in wanted)]
    rows = {}
    for m, n in grid:
        rows.setdefault(m, []).append(n)

    keep_going = failures is not None
    solved = {}
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for m, row in rows.items():
            payloads = [(table, family, m, n, mp.dps, keep_going,
                         _row_seed(solved, family, m, n)) for n in row]
            results = pool.map(_solve_cell, payloads) if pool else map(_solve_cell, payloads)
            solved.update(results)
    finally:
        if pool:
            pool.shutdown()

    for key in [k for k, v in solved.items() if isinstance(v, SolverError)]:
        failures[key] = solved.pop(key)
    if family == 'cyclicity2' and mirror:
        for m in m_range:
            for n in n_range:
                if (m, n) in solved:
                    continue
                if (n, m) in solved:
                    solved[(m, n)] = solved[(n, m)].transposed()
                elif failures is not None and (n, m) in failures:
                    failures[(m, n)] = failures[(n, m)]
    return solved


def perimeter_offsets(orbits, ell0):
    """max |ℓ − (período)·ℓ₀| sobre a grade"""
    return max(abs(o.perimeter - len(o.points) * ell0) for o in orbits.values())


def normal_form_start(orbits, radius):
    """Menor início de grade a partir do qual os pontos afastados de D₃ ficam
    a distância ≤ radius dos pontos 2-periódicos"""
    def inside(orbit):
        points = orbit.points
        n = len(points)
        for k, p in enumerate(points):
            if p.i == 3 or points[k - 1].i == 3 or points[(k + 1) % n].i == 3:
                continue
            if max(abs(p.s), abs(p.r)) > radius:
                return False
        return True

    sizes = sorted({min(key) for key in orbits})
    for start in sizes:
        if all(inside(o) for key, o in orbits.items() if min(key) >= start):
            return start
    return None
