# Utilidades compartilhadas pelos comandos do laboratório

import json

import click
from flask import current_app

from src.lab.numerics import format_number
from src.lab_config import ExperimentConfig
from src.models.lab_models import InvariantRecord, db


def setting(option, experiment, run_key, config_key):
    """Opção da linha de comando > seção run do YAML > config do app"""
    if option is not None:
        return option
    if experiment is not None and run_key in experiment.run:
        return int(experiment.run[run_key])
    return current_app.config[config_key]


def read_experiment(config_path):
    return ExperimentConfig.load(config_path)


def build_table(experiment):
    """Mesa normalizada na precisão corrente do mpmath"""
    anchors = setting(None, experiment, 'arc_anchors', 'LAB_ARC_ANCHORS')
    return experiment.build_table(anchors=anchors,
                                  tie_digits=current_app.config['LAB_TIE_TOLERANCE_DIGITS'])


def emit_json(document, out=None):
    text = json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False, default=str)
    if out:
        with open(out, 'w', encoding='utf-8') as stream:
            stream.write(text + '\n')
    else:
        click.echo(text)


def emit_csv(write, out=None):
    """Chama ``write(stream)`` num arquivo ou na saída padrão"""
    if out:
        with open(out, 'w', encoding='utf-8', newline='') as stream:
            write(stream)
    else:
        write(click.get_text_stream('stdout'))


def store_invariants(run_id, kind, values, errors=None):
    """Registra invariantes da execução; chaves tuple viram 'p,q'"""
    errors = errors or {}
    for key, value in values.items():
        text_key = ','.join(str(k) for k in key) if isinstance(key, tuple) else str(key)
        error = errors.get(key)
        db.session.add(InvariantRecord(
            run_id=run_id, kind=kind, key=text_key, value=format_number(value),
            error=format_number(error, 5) if error is not None else None,
        ))
    db.session.commit()
