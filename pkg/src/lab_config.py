# Configuração do laboratório
# Valores padrão do app, leitura dos YAML de experimento e de sementes

import hashlib
import json
import os

import yaml

from src.lab.errors import GeometryError
from src.lab.geometry import build_scatterer, normalize_frame
from src.lab.numerics import bigfloat, rational
from src.run_guards import LabValidator

DEFAULTS = {
    'LAB_PRECISION': 80,
    'LAB_JET_ORDER': 8,
    'LAB_SERIES_ORDER': 3,
    'LAB_ARC_ANCHORS': 4096,
    'LAB_JOBS': 1,
    'LAB_TIE_TOLERANCE_DIGITS': 20,
}

def config_from_env():
    """Padrões do app, sobrescritos por variáveis de ambiente LAB_*"""
    config = {}
    for key, default in DEFAULTS.items():
        value = LabValidator.sanitize_int(os.getenv(key, default))
        config[key] = default if value is None else value
    config['SQLALCHEMY_DATABASE_URI'] = os.getenv('LAB_DATABASE_URL', 'sqlite:///billiards_lab.db')
    config['SQLALCHEMY_TRACK_MODIFICATIONS'] = False
    return config


def _check_numbers(node, path):
    """Recusa floats binários em qualquer ponto do documento"""
    if isinstance(node, dict):
        for key, value in node.items():
            _check_numbers(value, f"{path}.{key}")
    elif isinstance(node, (list, tuple)):
        for k, value in enumerate(node):
            _check_numbers(value, f"{path}[{k}]")
    elif isinstance(node, float):
        raise GeometryError("Parâmetros numéricos devem ser strings decimais, não floats",
                            path=path, value=node)
    elif isinstance(node, str) and path.startswith('.scatterer') and not path.endswith('kind'):
        if not LabValidator.validate_decimal_string(node):
            raise GeometryError("Valor numérico inválido", path=path, value=node)


class ExperimentConfig:
    """Documento YAML de experimento já validado"""

    def __init__(self, document):
        if not isinstance(document, dict) or 'scatterer' not in document:
            raise GeometryError("Configuração precisa da seção 'scatterer'")
        _check_numbers(document, '')
        self.document = document
        self.scatterers = {int(k): v for k, v in document['scatterer'].items()}
        self.run = dict(document.get('run') or {})
        if sorted(self.scatterers) != [1, 2, 3]:
            raise GeometryError("São necessários os espalhadores 1, 2 e 3",
                                found=sorted(self.scatterers))

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding='utf-8') as stream:
                return cls(yaml.safe_load(stream))
        except yaml.YAMLError as exc:
            raise GeometryError("YAML de configuração inválido", path=path) from exc
        except OSError as exc:
            raise GeometryError("Arquivo de configuração não encontrado", path=path) from exc

    def run_range(self, key):
        if key not in self.run:
            return None
        valid, parsed = LabValidator.parse_range(self.run[key])
        if not valid:
            raise GeometryError(parsed, key=key)
        return parsed

    @property
    def digest(self):
        """sha256 da geometria: chave do cache de células"""
        canonical = json.dumps({'scatterer': {str(k): v for k, v in self.scatterers.items()},
                                'anchors': self.run.get('arc_anchors')},
                               sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def build_table(self, anchors=4096, tie_digits=20):
        bodies = {}
        for k, entry in self.scatterers.items():
            try:
                bodies[k] = build_scatterer({'kind': 'circle', **entry}, anchors)
            except KeyError as exc:
                raise GeometryError("Campo obrigatório ausente no espalhador", scatterer=k,
                                    field=exc.args[0]) from exc
        return normalize_frame(bodies, tie_digits=tie_digits)


# ---------------------------------------------------------------------------
# Sementes do teste de ida e volta
# ---------------------------------------------------------------------------

SEED_FRAME = {'ell0': '2', 'lam': '1/3', 'xi_sq': '1', 'L_inf': '0'}


def _seed_value(value, exact):
    if isinstance(value, float):
        raise GeometryError("Sementes devem ser strings decimais ou racionais", value=value)
    return rational(value) if exact else bigfloat(value)


def parse_seed(entry):
    exact = bool(entry.get('exact', True))
    order = LabValidator.sanitize_int(entry.get('order'))
    if order is None or order < 2:
        raise GeometryError("Semente precisa de 'order' ≥ 2", order=entry.get('order'))
    delta = [_seed_value(v, exact) for v in entry.get('delta') or []]
    a = {}
    for key, value in (entry.get('a') or {}).items():
        p, q = (int(part) for part in str(key).split(','))
        a[(p, q)] = _seed_value(value, exact)
    for (p, q), value in list(a.items()):
        if a.setdefault((q, p), value) != value:
            raise GeometryError("Tabela a deve ser simétrica", p=p, q=q)
    seed = {'name': entry.get('name', 'seed'), 'order': order, 'exact': exact,
            'delta': delta, 'a': a}
    # referencial sintético: λ racional mantém a tabela exata
    for key, default in SEED_FRAME.items():
        seed[key] = _seed_value(entry.get(key, default), exact)
    return seed


def load_seeds(path):
    """Lista de sementes; aceita um documento único ou a chave 'seeds'"""
    try:
        with open(path, encoding='utf-8') as stream:
            document = yaml.safe_load(stream)
    except (yaml.YAMLError, OSError) as exc:
        raise GeometryError("Arquivo de sementes inválido", path=path) from exc
    entries = document.get('seeds', [document]) if isinstance(document, dict) else None
    if not entries:
        raise GeometryError("Arquivo de sementes vazio", path=path)
    return [parse_seed(entry) for entry in entries]
