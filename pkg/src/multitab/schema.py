"""Column and task typing shared by the generator, model and trainer."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ContractError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

BINARY = "binary"
MULTICLASS = "multiclass"
REGRESSION = "regression"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = NUMERIC
    cardinality: int = 0

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ContractError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL and self.cardinality < 2:
            raise ContractError(f"column {self.name!r}: categorical cardinality must be >= 2")


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple

    @classmethod
    def numeric(cls, d, prefix="x"):
        return cls(tuple(Column(f"{prefix}{j}") for j in range(d)))

    @property
    def d(self):
        return len(self.columns)

    @property
    def numeric_index(self):
        return [j for j, c in enumerate(self.columns) if c.kind == NUMERIC]

    @property
    def categorical_index(self):
        return [j for j, c in enumerate(self.columns) if c.kind == CATEGORICAL]

    def to_json(self):
        return [
            {"name": c.name, "kind": c.kind, **({"cardinality": c.cardinality} if c.kind == CATEGORICAL else {})}
            for c in self.columns
        ]

    @classmethod
    def from_json(cls, items):
        return cls(tuple(Column(i["name"], i.get("kind", NUMERIC), int(i.get("cardinality", 0))) for i in items))


@dataclass(frozen=True)
class TaskSpec:
    name: str
    kind: str = REGRESSION
    num_classes: int = 0
    lower_is_better: bool = field(default=False)

    def __post_init__(self):
        if self.kind not in (BINARY, MULTICLASS, REGRESSION):
            raise ContractError(f"task {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == MULTICLASS and self.num_classes < 2:
            raise ContractError(f"task {self.name!r}: multiclass needs num_classes >= 2")

    @property
    def output_dim(self):
        return self.num_classes if self.kind == MULTICLASS else 1

    @property
    def metric(self):
        return "EV" if self.kind == REGRESSION else "AUC"

    def to_json(self):
        out = {"name": self.name, "kind": self.kind}
        if self.kind == MULTICLASS:
            out["num_classes"] = self.num_classes
        if self.lower_is_better:
            out["lower_is_better"] = True
        return out

    @classmethod
    def from_json(cls, item):
        return cls(item["name"], item.get("kind", REGRESSION), int(item.get("num_classes", 0)),
                   bool(item.get("lower_is_better", False)))


def regression_tasks(t, prefix="y"):
    return [TaskSpec(f"{prefix}{i}") for i in range(t)]
