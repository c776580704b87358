import logging
import os
import sys

import click
from flask import Flask
from flask.cli import FlaskGroup

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.commands.normalform import normalform_bp  # noqa: E402
from src.commands.reconstruct import reconstruct_bp  # noqa: E402
from src.commands.recover import recover_bp  # noqa: E402
from src.commands.roundtrip import roundtrip_bp  # noqa: E402
from src.commands.spectrum import spectrum_bp  # noqa: E402
from src.lab_config import config_from_env  # noqa: E402
from src.models.lab_models import db  # noqa: E402


def create_app(overrides=None):
    """Fábrica do app: configuração, banco de registros e comandos"""
    app = Flask(__name__)

    # Configurações
    app.config.update(config_from_env())
    app.config.update(overrides or {})

    logging.basicConfig(level=os.getenv('LAB_LOG_LEVEL', 'INFO'),
                        format='%(asctime)s %(levelname)s %(name)s %(message)s')

    # Registrar blueprints (apenas comandos de linha de comando)
    app.register_blueprint(spectrum_bp)
    app.register_blueprint(normalform_bp)
    app.register_blueprint(recover_bp)
    app.register_blueprint(reconstruct_bp)
    app.register_blueprint(roundtrip_bp)

    # Banco de dados
    db.init_app(app)
    with app.app_context():
        db.create_all()

    return app


@click.group(cls=FlaskGroup, create_app=create_app, add_default_commands=False)
def cli():
    """Laboratório do espectro de comprimentos marcado de bilhares dispersivos"""


if __name__ == '__main__':
    cli()
