from fractions import Fraction

import pytest
import yaml
from mpmath import mpf

from src.lab.errors import GeometryError
from src.lab_config import ExperimentConfig, config_from_env, load_seeds, parse_seed
from tests.conftest import REFERENCE_CONFIG, SEEDS_FILE


def reference_document():
    with open(REFERENCE_CONFIG, encoding='utf-8') as stream:
        return yaml.safe_load(stream)


def test_env_overrides_defaults(monkeypatch):
    monkeypatch.setenv('LAB_PRECISION', '120')
    monkeypatch.setenv('LAB_JOBS', 'varios')
    monkeypatch.setenv('LAB_DATABASE_URL', 'sqlite:///:memory:')
    config = config_from_env()
    assert config['LAB_PRECISION'] == 120
    assert config['LAB_JOBS'] == 1
    assert config['SQLALCHEMY_DATABASE_URI'] == 'sqlite:///:memory:'


def test_reference_config_loads():
    experiment = ExperimentConfig.load(REFERENCE_CONFIG)
    assert sorted(experiment.scatterers) == [1, 2, 3]
    assert experiment.run_range('m_range') == range(4, 17)
    assert experiment.run_range('missing') is None
    assert len(experiment.digest) == 64


def test_digest_ignores_run_section_but_not_geometry():
    document = reference_document()
    base = ExperimentConfig(document).digest
    document['run']['precision'] = 120
    assert ExperimentConfig(document).digest == base
    document['scatterer'][3]['radius'] = '1.5'
    assert ExperimentConfig(document).digest != base


def test_binary_floats_are_rejected():
    document = reference_document()
    document['scatterer'][1]['radius'] = 1.0
    with pytest.raises(GeometryError):
        ExperimentConfig(document)


def test_malformed_numbers_are_rejected():
    document = reference_document()
    document['scatterer'][2]['center'] = ['0', 'menos dois']
    with pytest.raises(GeometryError):
        ExperimentConfig(document)


def test_all_three_scatterers_are_required():
    document = reference_document()
    del document['scatterer'][3]
    with pytest.raises(GeometryError):
        ExperimentConfig(document)


def test_missing_field_becomes_geometry_error():
    document = reference_document()
    del document['scatterer'][1]['radius']
    with pytest.raises(GeometryError):
        ExperimentConfig(document).build_table(anchors=256)


def test_missing_file():
    with pytest.raises(GeometryError):
        ExperimentConfig.load('/nao/existe.yaml')


def test_seed_is_mirrored_and_framed():
    seed = parse_seed({'order': 2, 'delta': ['1/5'], 'a': {'2,0': '1/7', '1,1': '-2/3'}})
    assert seed['exact'] is True
    assert seed['a'][(0, 2)] == Fraction(1, 7)
    assert seed['lam'] == Fraction(1, 3)
    assert seed['ell0'] == 2


def test_inexact_seed_uses_bigfloats():
    seed = parse_seed({'order': 2, 'exact': False, 'delta': ['0.2']})
    assert seed['delta'] == [mpf('0.2')]


def test_seed_rejects_floats_and_asymmetry():
    with pytest.raises(GeometryError):
        parse_seed({'order': 2, 'delta': [0.2]})
    with pytest.raises(GeometryError):
        parse_seed({'order': 2, 'a': {'2,1': '1/3', '1,2': '1/4'}})
    with pytest.raises(GeometryError):
        parse_seed({'order': 1})


def test_bundled_seeds():
    seeds = load_seeds(SEEDS_FILE)
    assert [seed['name'] for seed in seeds] == ['zero', 'quadratic', 'cubic']
