import click
from flask import Blueprint
from mpmath import mp

from src.commands.common import emit_csv, emit_json, setting, store_invariants
from src.lab.errors import GradingError
from src.lab.numerics import bigfloat, format_number, tolerance
from src.lab.recovery import SpectrumTable, extract_lc, grading_violation, recover
from src.run_guards import RunLogger, record_run, validate_options

recover_bp = Blueprint('recover', __name__, cli_group=None)


@recover_bp.cli.command('recover')
@click.option('--spectrum', 'spectrum_path', required=True,
              type=click.Path(exists=True, dir_okay=False), help='CSV gerado por spectrum')
@click.option('--order', type=int, help='Ordem ν da série')
@click.option('--precision', type=int)
@click.option('--max-error', help='Erro máximo aceito nos coeficientes (string decimal)')
@click.option('--out', type=click.Path(dir_okay=False), help='Relatório JSON')
@click.option('--lc-out', type=click.Path(dir_okay=False), help='CSV dos coeficientes ℓ^{ij}_{pq}')
@click.option('--strict/--no-strict', default=False,
              help='Refaz o ajuste com graduação triangular e exige os termos extras nulos')
@validate_options(orders=('order',))
@record_run('recover')
def recover_command(spectrum_path, order, precision, max_error, out, lc_out, strict,
                    run_id=None):
    """Referencial, coeficientes ℓ^{ij}_{pq} e invariantes (δ, a) a partir do espectro"""
    order = setting(order, None, 'series_order', 'LAB_SERIES_ORDER')
    with mp.workdps(setting(precision, None, 'precision', 'LAB_PRECISION')):
        with open(spectrum_path, encoding='utf-8') as stream:
            table = SpectrumTable.from_csv(stream)
        limit = bigfloat(max_error) if max_error else None
        report = recover(table, order, max_error=limit, run_id=run_id)

        if strict:
            triangular = extract_lc(table, report.frame, order, strict=False, run_id=run_id)
            violation = grading_violation(triangular)
            bound = max([e for e in triangular.errors.values() if e is not None]
                        + [tolerance(mp.dps // 2)])
            if violation > 10 * bound:
                raise GradingError("Coeficientes fora da graduação estrita não são nulos",
                                   violation=violation, bound=bound)

        store_invariants(run_id, 'frame', {
            'ell0': report.frame.ell0, 'L_inf': report.frame.L_inf,
            'lambda': report.frame.lam, 'xi_inf_sq': report.frame.xi_sq,
        }, {'ell0': report.frame.errors.get('ell0'),
            'L_inf': report.frame.errors.get('L_inf'),
            'lambda': report.frame.errors.get('lambda'),
            'xi_inf_sq': report.frame.errors.get('xi_inf_sq')})
        store_invariants(run_id, 'delta', {k + 1: d for k, d in enumerate(report.delta)})
        store_invariants(run_id, 'a', {k: v for k, v in report.a.items() if sum(k) >= 2})
        store_invariants(run_id, 'lc', report.lc.values, report.lc.errors)

        if lc_out:
            emit_csv(report.lc.to_csv, lc_out)
        emit_json(report.to_dict(), out)

    RunLogger.log_event('recovery_done', {
        'order': order,
        'delta': [format_number(d, 20) for d in report.delta],
    }, run_id=run_id)
