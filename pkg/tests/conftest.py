import os
from fractions import Fraction

import pytest
from mpmath import mp

from src.lab.geometry import Circle, normalize_frame
from src.main import create_app
from src.models.lab_models import db

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config')
REFERENCE_CONFIG = os.path.join(CONFIG_DIR, 'reference_circles.yaml')
SEEDS_FILE = os.path.join(CONFIG_DIR, 'roundtrip_seeds.yaml')


@pytest.fixture(autouse=True)
def working_precision():
    """Cada teste começa em 50 dígitos e restaura a precisão ao final"""
    saved = mp.dps
    mp.dps = 50
    yield 50
    mp.dps = saved


@pytest.fixture
def app():
    app = create_app({
        'TESTING': True,
        'SQLALCHEMY_DATABASE_URI': 'sqlite:///:memory:',
        'LAB_PRECISION': 40,
        'LAB_ARC_ANCHORS': 512,
    })
    yield app
    with app.app_context():
        db.drop_all()


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


def reference_circles():
    return {
        1: Circle(('0', '2'), '1'),
        2: Circle(('0', '-2'), '1'),
        3: Circle(('6', '0'), '1'),
    }


_TABLES = {}


@pytest.fixture
def reference_table():
    """Três círculos unitários em (0, 2), (0, −2), (6, 0), normalizados a 50 dígitos"""
    if 50 not in _TABLES:
        with mp.workdps(50):
            _TABLES[50] = normalize_frame(reference_circles())
    return _TABLES[50]


@pytest.fixture
def exact_seed():
    return {
        'name': 'fixture',
        'order': 3,
        'exact': True,
        'delta': [Fraction(1, 5), Fraction(-2, 7)],
        'a': {(2, 0): Fraction(1, 3), (0, 2): Fraction(1, 3), (1, 1): Fraction(-1, 2),
              (3, 0): Fraction(1, 4), (0, 3): Fraction(1, 4),
              (2, 1): Fraction(2, 9), (1, 2): Fraction(2, 9)},
        'ell0': Fraction(2), 'lam': Fraction(1, 3), 'xi_sq': Fraction(1),
        'L_inf': Fraction(3, 2),
    }
