"""Hierarquia de erros do laboratório.

Os comandos convertem as duas famílias principais em códigos de saída:
ToleranceError -> 2, SolverError -> 3.
"""


class LabError(Exception):
    """Erro base do laboratório"""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def to_dict(self):
        return {
            'error': type(self).__name__,
            'message': str(self),
            'context': {key: str(value) for key, value in self.context.items()},
        }


class ToleranceError(LabError):
    """Resultado calculado, mas fora da tolerância pedida"""


class SolverError(LabError):
    """Um solver numérico não produziu resultado"""


class GeometryError(LabError):
    """Configuração geométrica inválida"""


class GradingError(LabError):
    """Série triangular violou a graduação declarada"""


class JetError(LabError):
    """Operação de jato mal-posta (ordem, constante, parte linear)"""


class SingularJetError(JetError):
    pass


class NonEclipseError(GeometryError):
    pass


class TangencyError(SolverError):
    pass


class EscapeError(SolverError):
    pass


class NewtonDivergenceError(SolverError):
    pass


class CodingMismatchError(SolverError):
    pass


class NormalFormError(SolverError):
    pass


class TransversalityError(SolverError):
    pass


class ConvergenceError(ToleranceError):
    """Aceleração de sequência sem convergência suficiente"""


class IllConditionedFitError(ToleranceError):
    pass


class InconsistentSpectrumError(ToleranceError):
    pass


class ReconstructionError(ToleranceError):
    pass


class RoundTripError(ToleranceError):
    """Invariantes recuperados diferem dos sorteados"""


def exit_code_for(error):
    """Mapeia exceções para códigos de saída da linha de comando"""
    if isinstance(error, ToleranceError):
        return 2
    return 3
