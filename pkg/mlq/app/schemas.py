# mlq/app/schemas.py
import json
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from mlq.services.diagnostics import Diagnostic


def _compact(data: Dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class DiagnosticRecord(BaseModel):
    code: str
    severity: str
    message: str
    path: Optional[str] = None
    line: int
    column: int
    offset: int
    length: int

    @classmethod
    def from_diagnostic(cls, diagnostic: Diagnostic, default_path: Optional[str] = None) -> "DiagnosticRecord":
        span = diagnostic.span
        return cls(
            code=diagnostic.code,
            severity=diagnostic.severity.value,
            message=diagnostic.message,
            path=diagnostic.path or default_path,
            line=span.line,
            column=span.column,
            offset=span.offset,
            length=span.length,
        )

    def to_line(self) -> str:
        return _compact(self.model_dump())


class TraceRecord(BaseModel):
    seq: int = Field(..., description="Position of the event in the whole trace")
    step: int = Field(..., description="Delivery step that produced the event; 0 during instantiation")
    kind: str
    instance: str
    payload: Dict[str, Any] = Field(default_factory=dict)

    def to_line(self) -> str:
        return _compact(self.model_dump())


class Metrics(BaseModel):
    task: str
    support: int = 0
    accuracy: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    purity: Optional[float] = None
    mae: Optional[float] = None
    mse: Optional[float] = None
    zero_division: List[str] = Field(default_factory=list, description="Metrics whose denominator was zero")

    def populated(self) -> Dict[str, float]:
        names = ("accuracy", "precision", "recall", "f1", "purity", "mae", "mse")
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}


class TrainingReport(BaseModel):
    family: str
    task: str
    hyperparameters: Dict[str, Any]
    wall_time: float
    train_size: int
    test_size: int
    excluded_rows: int = 0
    metrics: Optional[Metrics] = None
    loss_history: List[float] = Field(default_factory=list)
    error_threshold: Optional[float] = None
    threshold_passed: Optional[bool] = None
    notes: List[str] = Field(default_factory=list)

    def log_line(self, timestamp: str) -> str:
        """One line of the training log: timestamp, family, hyperparameters, metrics."""
        metrics = self.metrics.populated() if self.metrics else {}
        if self.threshold_passed is not None:
            metrics["threshold_passed"] = self.threshold_passed
        return "\t".join([timestamp, self.family, _compact(self.hyperparameters), _compact(metrics)])


class ManifestEntry(BaseModel):
    path: str
    sha256: str
    bytes: int


class Manifest(BaseModel):
    format: str = "MLQPLAN/1"
    backend: str
    artifacts: List[ManifestEntry] = Field(default_factory=list)
