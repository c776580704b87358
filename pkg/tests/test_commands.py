import csv
import json
from fractions import Fraction

import pytest

from src.lab.recovery import synthetic_table
from src.lab.series import length_series
from src.models.lab_models import InvariantRecord, LabRun, SpectrumCell
from tests.conftest import REFERENCE_CONFIG, SEEDS_FILE

QUICK_SEEDS = """
seeds:
  - name: quick
    order: 2
    delta: ["1/5"]
    a: {"2,0": "1/7", "1,1": "-2/3"}
"""


def runs(app):
    with app.app_context():
        return [run.to_dict() for run in LabRun.query.order_by(LabRun.id).all()]


def test_roundtrip_command_passes(app, runner, tmp_path):
    seeds = tmp_path / 'seeds.yaml'
    seeds.write_text(QUICK_SEEDS, encoding='utf-8')
    out = tmp_path / 'roundtrip.json'
    result = runner.invoke(args=['roundtrip', '--seeds', str(seeds), '--m-range', '1:7',
                                 '--n-range', '1:7', '--out', str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['passed'] == 1
    assert report['results'][0]['worst_gap'] == '0'
    [run] = runs(app)
    assert run['command'] == 'roundtrip'
    assert run['status'] == 'ok' and run['exit_code'] == 0


def test_invalid_precision_exits_with_three(app, runner):
    result = runner.invoke(args=['roundtrip', '--seeds', SEEDS_FILE, '--precision', '10'])
    assert result.exit_code == 3
    assert 'Precisão' in result.output
    assert runs(app) == []


def test_invalid_range_exits_with_three(runner):
    result = runner.invoke(args=['roundtrip', '--seeds', SEEDS_FILE, '--m-range', '5:2'])
    assert result.exit_code == 3


def test_orbit_command_reports_perimeter(runner, tmp_path):
    out = tmp_path / 'orbit.json'
    result = runner.invoke(args=['orbit', '--config', REFERENCE_CONFIG, '--coding', '12',
                                 '--precision', '40', '--out', str(out)])
    assert result.exit_code == 0, result.output
    orbit = json.loads(out.read_text(encoding='utf-8'))
    assert orbit['coding'] == '12'
    assert float(orbit['perimeter']) == pytest.approx(4)


def test_orbit_command_rejects_bad_coding(app, runner):
    result = runner.invoke(args=['orbit', '--config', REFERENCE_CONFIG, '--coding', '3113',
                                 '--precision', '40'])
    assert result.exit_code == 3
    [run] = runs(app)
    assert run['status'] == 'failed'
    assert json.loads(run['error'])['error'] == 'GeometryError'


def test_spectrum_command_writes_and_caches_cells(app, runner, tmp_path):
    out = tmp_path / 'spectrum.csv'
    args = ['spectrum', '--config', REFERENCE_CONFIG, '--precision', '40',
            '--m-range', '3:4', '--n-range', '3:4', '--out', str(out)]
    result = runner.invoke(args=args)
    assert result.exit_code == 0, result.output
    with open(out, encoding='utf-8') as stream:
        rows = list(csv.DictReader(stream))
    assert [(row['m'], row['n']) for row in rows] == [('3', '3'), ('3', '4'), ('4', '3'), ('4', '4')]
    assert rows[1]['perimeter'] == rows[2]['perimeter']

    with app.app_context():
        assert SpectrumCell.query.count() == 4
    again = runner.invoke(args=args)
    assert again.exit_code == 0, again.output
    with app.app_context():
        assert SpectrumCell.query.count() == 4
    with open(out, encoding='utf-8') as stream:
        assert list(csv.DictReader(stream)) == rows


def test_recover_command_on_tiny_grid_fails_with_two(app, runner, tmp_path):
    spectrum = tmp_path / 'tiny.csv'
    spectrum.write_text('m,n,perimeter\n1,5,20\n2,5,24\n', encoding='utf-8')
    result = runner.invoke(args=['recover', '--spectrum', str(spectrum), '--order', '2'])
    assert result.exit_code == 2
    [run] = runs(app)
    assert run['exit_code'] == 2
    assert json.loads(run['error'])['error'] == 'ConvergenceError'


def test_normalform_command_without_gluing(app, runner, tmp_path):
    out = tmp_path / 'nf.json'
    result = runner.invoke(args=['normalform', '--config', REFERENCE_CONFIG, '--order', '3',
                                 '--precision', '40', '--no-glue', '--out', str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text(encoding='utf-8'))
    assert float(report['normal_form']['lambda']) == pytest.approx(0.171572875, rel=1e-8)
    with app.app_context():
        kinds = {record.kind for record in InvariantRecord.query.all()}
    assert kinds == {'frame', 'delta'}


@pytest.mark.slow
def test_recover_command_on_synthetic_spectrum(app, runner, tmp_path):
    a = {(2, 0): Fraction(1, 3), (0, 2): Fraction(1, 3), (1, 1): Fraction(-1, 2)}
    series = length_series([Fraction(1, 5)], a, Fraction(3, 2), 2)
    table = synthetic_table(series, Fraction(2), Fraction(1, 3), Fraction(1),
                            range(1, 21), range(1, 21))
    spectrum = tmp_path / 'spectrum.csv'
    with open(spectrum, 'w', encoding='utf-8', newline='') as stream:
        table.to_csv(stream)
    out, lc_out = tmp_path / 'report.json', tmp_path / 'lc.csv'
    result = runner.invoke(args=['recover', '--spectrum', str(spectrum), '--order', '2',
                                 '--precision', '60', '--out', str(out),
                                 '--lc-out', str(lc_out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text(encoding='utf-8'))
    assert float(report['delta'][0]) == pytest.approx(0.2, rel=1e-4)
    assert float(report['a']['2,0']) == pytest.approx(1 / 3, rel=1e-4)
    assert lc_out.read_text(encoding='utf-8').startswith('p,q,i,j,value,error')


@pytest.mark.slow
def test_roundtrip_command_with_bundled_seeds(runner, tmp_path):
    out = tmp_path / 'roundtrip.json'
    result = runner.invoke(args=['roundtrip', '--seeds', SEEDS_FILE, '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text(encoding='utf-8'))['passed'] == 3


@pytest.mark.slow
def test_reconstruct_command_on_reference_circles(runner, tmp_path):
    out, report = tmp_path / 'points.csv', tmp_path / 'fit.json'
    result = runner.invoke(args=['reconstruct', '--config', REFERENCE_CONFIG, '--n-range', '4:12',
                                 '--precision', '60', '--fit', 'circle', '--out', str(out),
                                 '--report', str(report)])
    assert result.exit_code == 0, result.output
    with open(out, encoding='utf-8') as stream:
        points = list(csv.DictReader(stream))
    assert len(points) == 9
    for row in points:
        assert ((float(row['x']) - 6) ** 2 + float(row['y']) ** 2) ** 0.5 == pytest.approx(1, abs=1e-10)
    fit = json.loads(report.read_text(encoding='utf-8'))['fit']
    assert float(fit['params']['radius']) == pytest.approx(1, abs=1e-10)
