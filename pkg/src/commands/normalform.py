import click
from flask import Blueprint
from mpmath import mp

from src.commands.common import (
    build_table, emit_json, read_experiment, setting, store_invariants
)
from src.lab.normal_form import (
    compute_normal_form, conjugacy_residuals, extend_and_glue, gluing_involution_residual
)
from src.lab.numerics import format_number
from src.lab.orbits import homoclinic_orbit
from src.run_guards import record_run, validate_options

normalform_bp = Blueprint('normalform', __name__, cli_group=None)


@normalform_bp.cli.command('normalform')
@click.option('--config', 'config_path', required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option('--order', type=int, help='Ordem K dos jatos')
@click.option('--precision', type=int)
@click.option('--k-range', type=int, default=6, show_default=True,
              help='Índices |k| da órbita homoclínica')
@click.option('--glue/--no-glue', default=True, help='Calcula também G, M e M̃')
@click.option('--out', type=click.Path(dir_okay=False), help='Relatório JSON')
@validate_options(orders=('order',))
@record_run('normalform')
def normalform(config_path, order, precision, k_range, glue, out, run_id=None):
    """Forma normal de Birkhoff, conjugações e aplicação de colagem"""
    experiment = read_experiment(config_path)
    order = setting(order, experiment, 'order', 'LAB_JET_ORDER')

    with mp.workdps(setting(precision, experiment, 'precision', 'LAB_PRECISION')):
        table = build_table(experiment)
        nf = compute_normal_form(table, order, run_id=run_id)
        report = {
            'table': table.to_dict(),
            'residuals': {k: format_number(v, 5) for k, v in conjugacy_residuals(nf).items()},
        }
        invariants = {'lambda': nf.lam}

        if glue:
            homoclinic = homoclinic_orbit(table, k_range)
            gluing, nf = extend_and_glue(table, nf, homoclinic, run_id=run_id)
            report['gluing'] = gluing.to_dict()
            report['gluing']['involution_residual'] = format_number(
                gluing_involution_residual(gluing), 5)
            report['homoclinic'] = homoclinic.to_dict()
            invariants.update({'xi_inf': gluing.xi_inf, 'L_inf': gluing.L_inf})
            store_invariants(run_id, 'a', gluing.a)

        report['normal_form'] = nf.to_dict()
        store_invariants(run_id, 'frame', invariants)
        store_invariants(run_id, 'delta', {k + 1: d for k, d in enumerate(nf.delta)})
        emit_json(report, out)
