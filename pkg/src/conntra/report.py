"""Training reports: error curves, timing, memory accounting, JSON emission.

Both trainers return a TrainReport.  The coordinate-search trainer guarantees
a non-increasing ``optimal_loss`` along the curve (enforced here); the
gradient-descent baseline records its running full-data loss, which may
wiggle, so the monotonicity check applies only to ``algorithm="conntra"``.

Every JSON document the package emits validates against one of the schemas
in ``conntra/schemas`` before it is written.
"""

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from .domain import MemoryAccount
from .errors import InvalidArgumentError
from .models import ParamVector


@dataclass(frozen=True)
class CurvePoint:
    epoch: int
    training_error_pct: float
    validation_error_pct: float | None
    optimal_loss: float

    def as_dict(self):
        return {
            "epoch": self.epoch,
            "training_error_pct": self.training_error_pct,
            "validation_error_pct": self.validation_error_pct,
            "optimal_loss": self.optimal_loss,
        }


@dataclass(frozen=True)
class TrainReport:
    algorithm: str  # "conntra" | "sgd"
    seed: int
    curve: tuple
    final_params: ParamVector
    final_loss: float
    wall_seconds: float
    memory: MemoryAccount
    loss_evaluations: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        epochs = [p.epoch for p in self.curve]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise InvalidArgumentError("curve epochs must be strictly increasing")
        if self.algorithm == "conntra":
            losses = [p.optimal_loss for p in self.curve]
            if any(b > a for a, b in zip(losses, losses[1:])):
                raise InvalidArgumentError("optimal_loss must be non-increasing")

    def to_dict(self) -> dict:
        return {
            "kind": "train_report",
            "algorithm": self.algorithm,
            "seed": self.seed,
            "wall_seconds": self.wall_seconds,
            "final_loss": self.final_loss,
            "loss_evaluations": self.loss_evaluations,
            "memory": self.memory.as_dict(),
            "config": self.config,
            "curve": [p.as_dict() for p in self.curve],
        }


def _schema(kind: str) -> dict:
    name = {
        "train_report": "report.schema.json",
        "metrics": "metrics.schema.json",
        "qubo_reduction": "qubo_reduction.schema.json",
    }.get(kind)
    if name is None:
        raise InvalidArgumentError(f"no schema for document kind {kind!r}")
    text = resources.files("conntra").joinpath("schemas", name).read_text()
    return json.loads(text)


def validate_document(doc: dict) -> None:
    """Check a JSON document against its checked-in schema (by ``kind``)."""
    jsonschema.validate(doc, _schema(doc.get("kind", "")))


def dump_json(doc: dict) -> str:
    """Canonical serialization: validated, sorted keys, trailing newline."""
    validate_document(doc)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_json(path, doc: dict) -> None:
    with open(path, "w") as fh:
        fh.write(dump_json(doc))


def curve_csv(report_doc: dict) -> str:
    """Error curves as CSV with a percent-of-training-completed axis."""
    rows = ["percent_training_complete,training_error_pct,validation_error_pct"]
    curve = report_doc["curve"]
    last = max(p["epoch"] for p in curve) or 1
    for p in curve:
        val = "" if p["validation_error_pct"] is None else repr(float(p["validation_error_pct"]))
        rows.append(f"{100.0 * p['epoch'] / last!r},{float(p['training_error_pct'])!r},{val}")
    return "\n".join(rows) + "\n"
