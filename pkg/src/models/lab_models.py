from flask_sqlalchemy import SQLAlchemy
from datetime import datetime
import json

db = SQLAlchemy()

class LabRun(db.Model):
    __tablename__ = 'lab_runs'

    id = db.Column(db.Integer, primary_key=True)
    command = db.Column(db.String(50), nullable=False)  # 'spectrum', 'recover', ...
    parameters = db.Column(db.Text, nullable=True)  # JSON com as opções da linha de comando
    status = db.Column(db.String(20), default='running')  # 'running', 'ok', 'failed'
    exit_code = db.Column(db.Integer, nullable=True)
    error = db.Column(db.Text, nullable=True)
    started_at = db.Column(db.DateTime, default=datetime.utcnow)
    finished_at = db.Column(db.DateTime, nullable=True)

    # Relacionamentos
    invariants = db.relationship('InvariantRecord', backref='run', lazy=True,
                                 cascade='all, delete-orphan')

    def finish(self, exit_code, error=None):
        self.exit_code = exit_code
        self.status = 'ok' if exit_code == 0 else 'failed'
        self.error = error
        self.finished_at = datetime.utcnow()

    def to_dict(self):
        return {
            'id': self.id,
            'command': self.command,
            'parameters': json.loads(self.parameters) if self.parameters else {},
            'status': self.status,
            'exit_code': self.exit_code,
            'error': self.error,
            'started_at': self.started_at.isoformat() if self.started_at else None,
            'finished_at': self.finished_at.isoformat() if self.finished_at else None
        }

class SpectrumCell(db.Model):
    __tablename__ = 'spectrum_cells'
    __table_args__ = (
        db.UniqueConstraint('config_digest', 'family', 'm', 'n', 'precision',
                            name='uq_spectrum_cell'),
    )

    id = db.Column(db.Integer, primary_key=True)
    config_digest = db.Column(db.String(64), nullable=False, index=True)  # sha256 da geometria
    family = db.Column(db.String(20), nullable=False, default='cyclicity2')
    m = db.Column(db.Integer, nullable=False)
    n = db.Column(db.Integer, nullable=False)
    precision = db.Column(db.Integer, nullable=False)  # dígitos decimais
    perimeter = db.Column(db.Text, nullable=False)  # string decimal em precisão total
    residual = db.Column(db.Text, nullable=True)
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def to_dict(self):
        return {
            'id': self.id,
            'config_digest': self.config_digest,
            'family': self.family,
            'm': self.m,
            'n': self.n,
            'precision': self.precision,
            'perimeter': self.perimeter,
            'residual': self.residual,
            'created_at': self.created_at.isoformat() if self.created_at else None
        }

class InvariantRecord(db.Model):
    __tablename__ = 'invariant_records'

    id = db.Column(db.Integer, primary_key=True)
    run_id = db.Column(db.Integer, db.ForeignKey('lab_runs.id'), nullable=False)
    kind = db.Column(db.String(20), nullable=False)  # 'lambda', 'delta', 'a', 'xi_inf', 'L_inf', 'lc'
    key = db.Column(db.String(40), nullable=True)  # índice, p.ex. '2,0'
    value = db.Column(db.Text, nullable=False)
    error = db.Column(db.Text, nullable=True)
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def to_dict(self):
        return {
            'id': self.id,
            'run_id': self.run_id,
            'kind': self.kind,
            'key': self.key,
            'value': self.value,
            'error': self.error,
            'created_at': self.created_at.isoformat() if self.created_at else None
        }
