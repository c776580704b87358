import click
from flask import Blueprint
from mpmath import mp

from src.commands.common import (
    build_table, emit_csv, emit_json, read_experiment, setting
)
from src.lab.errors import ReconstructionError
from src.lab.numerics import format_number, tolerance
from src.lab.orbits import spectrum_grid
from src.lab.reconstruction import (
    fit_boundary_arc, reconstruct_d3_points, write_plot_data, write_points_csv
)
from src.run_guards import RunLogger, record_run, validate_options

reconstruct_bp = Blueprint('reconstruct', __name__, cli_group=None)


@reconstruct_bp.cli.command('reconstruct')
@click.option('--config', 'config_path', required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option('--n-range', help="Intervalo 'a:b' de n (órbitas 3(12)^{n−1}1)")
@click.option('--precision', type=int)
@click.option('--jobs', type=int)
@click.option('--fit', 'model', type=click.Choice(['conic', 'circle']), default='conic')
@click.option('--out', type=click.Path(dir_okay=False), help='CSV dos pontos (x, y, erro, n)')
@click.option('--plot-out', type=click.Path(dir_okay=False),
              help='CSV com pontos e contorno verdadeiro de D₃')
@click.option('--report', type=click.Path(dir_okay=False), help='Relatório JSON do ajuste')
@click.option('--strict/--no-strict', default=False,
              help='Resíduos acima das estimativas de erro viram falha')
@validate_options(ranges=('n_range',))
@record_run('reconstruct')
def reconstruct(config_path, n_range, precision, jobs, model, out, plot_out, report, strict,
                run_id=None):
    """Pontos de ∂D₃ a partir de D₁, D₂, das órbitas interiores e de ℓ_n"""
    experiment = read_experiment(config_path)
    n_range = n_range or experiment.run_range('n_range') or range(4, 13)
    jobs = setting(jobs, experiment, 'jobs', 'LAB_JOBS')

    with mp.workdps(setting(precision, experiment, 'precision', 'LAB_PRECISION')):
        table = build_table(experiment)
        # o solver de órbitas faz o papel da recuperação espectral dos pontos interiores
        orbits = spectrum_grid(table, None, n_range, family='cyclicity1', jobs=jobs)
        interiors = {key[0]: o.points[1:] for key, o in orbits.items()}
        perimeters = {key[0]: o.perimeter for key, o in orbits.items()}

        points = reconstruct_d3_points(table.without(3), interiors, perimeters, run_id=run_id)
        closure = max(p.closure for p in points)
        if strict and closure > tolerance(20):
            raise ReconstructionError("Re-soma do perímetro não fecha", closure=closure)

        summary = {
            'points': [p.to_dict() for p in points],
            'max_closure': format_number(closure, 5),
        }
        if len(points) >= 6:
            fit = fit_boundary_arc([p.point for p in points], [p.error for p in points],
                                   model=model, strict=strict)
            summary['fit'] = fit.to_dict()

        emit_csv(lambda stream: write_points_csv(stream, points), out)
        if plot_out:
            emit_csv(lambda stream: write_plot_data(stream, points, table[3]), plot_out)
        if report:
            emit_json(summary, report)

    RunLogger.log_event('reconstruction_done', {
        'points': len(points), 'max_closure': format_number(closure, 5),
    }, run_id=run_id)
