import click
from flask import Blueprint
from mpmath import mp

from src.commands.common import emit_json, setting
from src.lab.recovery import round_trip
from src.lab_config import load_seeds
from src.run_guards import record_run, validate_options

roundtrip_bp = Blueprint('roundtrip', __name__, cli_group=None)


@roundtrip_bp.cli.command('roundtrip')
@click.option('--seeds', 'seeds_path', required=True,
              type=click.Path(exists=True, dir_okay=False), help='YAML com as sementes (δ, a)')
@click.option('--order', type=int, help='Ordem ν; por padrão a de cada semente')
@click.option('--precision', type=int)
@click.option('--m-range', default='1:12', show_default=True)
@click.option('--n-range', default='1:12', show_default=True)
@click.option('--out', type=click.Path(dir_okay=False))
@validate_options(ranges=('m_range', 'n_range'), orders=('order',))
@record_run('roundtrip')
def roundtrip(seeds_path, order, precision, m_range, n_range, out, run_id=None):
    """Série -> tabela sintética -> invariantes, para cada semente"""
    with mp.workdps(setting(precision, None, 'precision', 'LAB_PRECISION')):
        seeds = load_seeds(seeds_path)
        results = [round_trip(seed, order or seed['order'], m_range, n_range, run_id=run_id)
                   for seed in seeds]
    emit_json({'passed': len(results), 'results': results}, out)
