import logging

import click
from flask import Blueprint
from mpmath import mp

from src.commands.common import build_table, emit_csv, emit_json, read_experiment, setting
from src.lab.errors import ToleranceError
from src.lab.numerics import bigfloat, format_number, tolerance
from src.lab.orbits import Coding, normal_form_start, solve_periodic, spectrum_grid
from src.lab.recovery import SpectrumTable
from src.models.lab_models import SpectrumCell, db
from src.run_guards import RunLogger, record_run, validate_options

spectrum_bp = Blueprint('spectrum', __name__, cli_group=None)

DEFAULT_GRID = range(3, 11)
# raio da vizinhança dos pontos 2-periódicos usado para estimar o início da grade
GRID_START_RADIUS = '1/10'


def _cached_cells(digest, family, precision):
    """Células já calculadas com a mesma geometria e a mesma precisão"""
    cells = SpectrumCell.query.filter_by(config_digest=digest, family=family,
                                         precision=precision).all()
    return {(c.m, c.n): bigfloat(c.perimeter) for c in cells}


def _store_cells(digest, family, precision, orbits):
    for key, solved in orbits.items():
        # cyclicity1 guarda ℓ_n na linha m = 0
        m, n = (0, key[0]) if family == 'cyclicity1' else key
        exists = SpectrumCell.query.filter_by(config_digest=digest, family=family, m=m, n=n,
                                              precision=precision).first()
        if exists:
            continue
        db.session.add(SpectrumCell(config_digest=digest, family=family, m=m, n=n,
                                    precision=precision,
                                    perimeter=format_number(solved.perimeter),
                                    residual=format_number(solved.residual, 5)))
    db.session.commit()


def _assemble(family, m_range, n_range, solved, cached):
    values = {}
    rows = [0] if family == 'cyclicity1' else m_range
    for m in rows:
        for n in n_range:
            key = (n,) if family == 'cyclicity1' else (m, n)
            if key in solved:
                values[(m, n)] = solved[key].perimeter
            elif (m, n) in cached:
                values[(m, n)] = cached[(m, n)]
            elif family == 'cyclicity2' and (n, m) in cached:
                values[(m, n)] = cached[(n, m)]
    return values


@spectrum_bp.cli.command('spectrum')
@click.option('--config', 'config_path', required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option('--precision', type=int, help='Dígitos decimais de trabalho')
@click.option('--m-range', help="Intervalo 'a:b' de m")
@click.option('--n-range', help="Intervalo 'a:b' de n")
@click.option('--family', type=click.Choice(['cyclicity2', 'cyclicity1']), default='cyclicity2')
@click.option('--jobs', type=int, help='Processos para a grade')
@click.option('--out', type=click.Path(dir_okay=False), help='CSV de saída')
@click.option('--strict/--no-strict', default=False,
              help='Falha de qualquer célula interrompe o comando')
@validate_options(ranges=('m_range', 'n_range'))
@record_run('spectrum')
def spectrum(config_path, precision, m_range, n_range, family, jobs, out, strict, run_id=None):
    """Tabela de perímetros ℓ_{m,n} (ou ℓ_n em cyclicity1) em CSV"""
    experiment = read_experiment(config_path)
    precision = setting(precision, experiment, 'precision', 'LAB_PRECISION')
    jobs = setting(jobs, experiment, 'jobs', 'LAB_JOBS')
    m_range = m_range or experiment.run_range('m_range') or DEFAULT_GRID
    n_range = n_range or experiment.run_range('n_range') or DEFAULT_GRID

    with mp.workdps(precision):
        table = build_table(experiment)
        cached = _cached_cells(experiment.digest, family, precision)
        if family == 'cyclicity1':
            wanted = [(n,) for n in n_range if (0, n) not in cached]
        else:
            wanted = [(m, n) for m in m_range for n in n_range
                      if (m, n) not in cached and (n, m) not in cached]

        failures = None if strict else {}
        solved = {}
        if wanted:
            solved = spectrum_grid(table, m_range, n_range, family=family, jobs=jobs,
                                   cells=wanted, failures=failures)
        _store_cells(experiment.digest, family, precision, solved)

        for key, error in (failures or {}).items():
            RunLogger.log_event('cell_failed', {'cell': list(key), **error.to_dict()},
                                run_id=run_id, level=logging.WARNING)

        result = SpectrumTable(_assemble(family, m_range, n_range, solved, cached),
                               precision, family)
        if strict and family == 'cyclicity2':
            defect = result.symmetry_defect()
            if defect > tolerance(15):
                raise ToleranceError("Tabela de perímetros não é simétrica", defect=defect)
        emit_csv(result.to_csv, out)

    with mp.workdps(precision):
        start = normal_form_start(solved, bigfloat(GRID_START_RADIUS)) if solved else None
    RunLogger.log_event('spectrum_done', {
        'cells': len(result.values), 'cached': len(cached), 'failed': len(failures or {}),
        'grid_start': start,
    }, run_id=run_id)


@spectrum_bp.cli.command('orbit')
@click.option('--config', 'config_path', required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option('--coding', required=True, help="Palavra periódica, p.ex. '3121'")
@click.option('--precision', type=int)
@click.option('--out', type=click.Path(dir_okay=False))
@validate_options()
@record_run('orbit')
def orbit(config_path, coding, precision, out, run_id=None):
    """Órbita periódica com a codificação pedida"""
    experiment = read_experiment(config_path)
    with mp.workdps(setting(precision, experiment, 'precision', 'LAB_PRECISION')):
        table = build_table(experiment)
        solved = solve_periodic(table, Coding.parse(coding), run_id=run_id)
        emit_json(solved.to_dict(), out)
