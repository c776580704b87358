# Guardas dos comandos do laboratório
# Validação das opções, registro das execuções e log estruturado de eventos

import json
import logging
import re
from datetime import datetime
from functools import wraps

import click

from src.lab.errors import LabError, exit_code_for

logger = logging.getLogger('billiards_lab')

DECIMAL_PATTERN = re.compile(r'^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$')
RATIONAL_PATTERN = re.compile(r'^[+-]?\d+\s*/\s*\d+$')
RANGE_PATTERN = re.compile(r'^\s*(\d+)\s*:\s*(\d+)\s*$')


class LabValidator:
    """Validação e sanitização das entradas da linha de comando e da configuração"""

    @staticmethod
    def validate_decimal_string(value):
        """Aceita strings decimais ou racionais 'p/q'; floats binários são recusados"""
        if isinstance(value, bool):
            return False
        if isinstance(value, int):
            return True
        if not isinstance(value, str):
            return False
        text = value.strip()
        if RATIONAL_PATTERN.match(text):
            return int(text.split('/')[1]) != 0
        return DECIMAL_PATTERN.match(text) is not None

    @staticmethod
    def validate_precision(value):
        """Valida a precisão de trabalho em dígitos decimais"""
        precision = LabValidator.sanitize_int(value)
        if precision is None:
            return False, "Precisão deve ser um número inteiro"
        if precision < 30:
            return False, "Precisão deve ter pelo menos 30 dígitos"
        if precision > 2000:
            return False, "Precisão acima de 2000 dígitos não é suportada"
        return True, "Precisão válida"

    @staticmethod
    def validate_order(value, min_val=1, max_val=16):
        order = LabValidator.sanitize_int(value)
        if order is None:
            return False, "Ordem deve ser um número inteiro"
        if not LabValidator.validate_numeric_range(order, min_val, max_val):
            return False, f"Ordem deve estar entre {min_val} e {max_val}"
        return True, "Ordem válida"

    @staticmethod
    def parse_range(text):
        """'a:b' -> range(a, b + 1); devolve (ok, range ou mensagem)"""
        if isinstance(text, range):
            return True, text
        match = RANGE_PATTERN.match(str(text or ''))
        if not match:
            return False, "Intervalo deve ter a forma 'a:b'"
        start, stop = int(match.group(1)), int(match.group(2))
        if start < 1 or stop < start:
            return False, "Intervalo deve satisfazer 1 ≤ a ≤ b"
        return True, range(start, stop + 1)

    @staticmethod
    def sanitize_int(value):
        if isinstance(value, bool):
            return None
        try:
            return int(str(value).strip())
        except (ValueError, TypeError):
            return None

    @staticmethod
    def validate_numeric_range(value, min_val=None, max_val=None):
        if min_val is not None and value < min_val:
            return False
        if max_val is not None and value > max_val:
            return False
        return True


class RunLogger:
    """Log estruturado dos eventos do laboratório"""

    @staticmethod
    def log_event(event_type, details, run_id=None, level=logging.INFO):
        """
        Registra um evento

        Args:
            event_type: Tipo do evento (orbit_solved, newton_step, recovery_failed, ...)
            details: Dicionário com os detalhes
            run_id: ID da execução (se houver)
            level: Nível do logging
        """
        log_entry = {
            'timestamp': datetime.utcnow().isoformat(),
            'event_type': event_type,
            'details': details,
            'run_id': run_id,
        }
        if logger.isEnabledFor(level):
            logger.log(level, f"LAB_EVENT: {json.dumps(log_entry, default=str)}")
        return log_entry


def _fail(message, code):
    click.echo(f"Erro: {message}", err=True)
    click.get_current_context().exit(code)


def validate_options(ranges=(), orders=()):
    """
    Decorator para validar as opções comuns dos comandos

    Args:
        ranges: nomes das opções no formato 'a:b', convertidas em range
        orders: nomes das opções de ordem inteira
    """
    def decorator(f):
        @wraps(f)
        def decorated_function(*args, **kwargs):
            precision = kwargs.get('precision')
            if precision is not None:
                valid, message = LabValidator.validate_precision(precision)
                if not valid:
                    RunLogger.log_event('invalid_option', {'precision': precision})
                    _fail(message, 3)

            for name in orders:
                if kwargs.get(name) is None:
                    continue
                valid, message = LabValidator.validate_order(kwargs[name])
                if not valid:
                    RunLogger.log_event('invalid_option', {name: kwargs[name]})
                    _fail(f"{name}: {message}", 3)

            for name in ranges:
                if kwargs.get(name) is None:
                    continue
                valid, parsed = LabValidator.parse_range(kwargs[name])
                if not valid:
                    RunLogger.log_event('invalid_option', {name: kwargs[name]})
                    _fail(f"{name}: {parsed}", 3)
                kwargs[name] = parsed

            return f(*args, **kwargs)
        return decorated_function
    return decorator


def record_run(command):
    """
    Decorator que registra a execução em LabRun e converte erros em códigos de saída

    O comando decorado recebe ``run_id`` como argumento nomeado.
    """
    def decorator(f):
        @wraps(f)
        def decorated_function(*args, **kwargs):
            # Importar aqui para evitar importação circular
            from src.models.lab_models import LabRun, db

            parameters = {k: str(v) for k, v in kwargs.items()}
            run = LabRun(command=command, parameters=json.dumps(parameters))
            db.session.add(run)
            db.session.commit()
            RunLogger.log_event('run_started', {'command': command, **parameters}, run_id=run.id)

            try:
                result = f(*args, run_id=run.id, **kwargs)
            except LabError as e:
                code = exit_code_for(e)
                db.session.rollback()
                run.finish(code, json.dumps(e.to_dict()))
                db.session.commit()
                RunLogger.log_event('run_failed', e.to_dict(), run_id=run.id, level=logging.ERROR)
                _fail(f"{e} ({type(e).__name__})", code)
                return None

            run.finish(0)
            db.session.commit()
            RunLogger.log_event('run_finished', {'command': command}, run_id=run.id)
            return result
        return decorated_function
    return decorator
