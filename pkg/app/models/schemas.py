from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


class SequenceKind(str, Enum):
    BASIS = "basis"
    GEOMETRIC = "geometric"
    ALTERNATING_GEOMETRIC = "alternating_geometric"
    FACTORIAL = "factorial"
    TABLE = "table"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"


class GroupSpec(BaseModel):
    """⊕_i Z/m(i): explicit moduli for the leading coordinates, one modulus for the rest. 0 means Z."""

    model_config = ConfigDict(frozen=True)

    moduli_head: Tuple[int, ...] = ()
    moduli_tail: int = 0

    @field_validator("moduli_head")
    @classmethod
    def _check_head(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        for m in value:
            if m != 0 and m < 2:
                raise ValueError(f"modulus {m} is invalid (use 0 for Z or an integer >= 2)")
        return value

    @field_validator("moduli_tail")
    @classmethod
    def _check_tail(cls, value: int) -> int:
        if value != 0 and value < 2:
            raise ValueError(f"modulus {value} is invalid (use 0 for Z or an integer >= 2)")
        return value

    def modulus(self, index: int) -> int:
        if index < len(self.moduli_head):
            return self.moduli_head[index]
        return self.moduli_tail

    def describe(self) -> str:
        head = ",".join(str(m) for m in self.moduli_head)
        return f"head=[{head}] tail={self.moduli_tail}"


class SequenceSpec(BaseModel):
    """
    A sequence family. geometric: c*r^n, alternating_geometric: c*(-r)^n,
    factorial: c*n!, all on `coordinate`; basis: e_n; table: explicit elements.
    """

    model_config = ConfigDict(frozen=True)

    kind: SequenceKind
    coefficient: int = 1
    ratio: int = 2
    coordinate: int = Field(default=0, ge=0)
    table: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_params(self) -> "SequenceSpec":
        if self.kind == SequenceKind.TABLE and not self.table:
            raise ValueError("table sequences need at least one term")
        if self.kind != SequenceKind.TABLE and self.table:
            raise ValueError(f"'table' is only meaningful for kind=table, not {self.kind.value}")
        return self

    def describe(self) -> str:
        if self.kind == SequenceKind.TABLE:
            return f"table[{'|'.join(self.table)}]"
        if self.kind == SequenceKind.BASIS:
            return "basis"
        return f"{self.kind.value}(c={self.coefficient},r={self.ratio},i={self.coordinate})"


class Window(BaseModel):
    """Finite truncation: generators a_0..a_{generators-1}, sumset depth 0..nmax"""

    model_config = ConfigDict(frozen=True)

    generators: int = Field(ge=1)
    nmax: int = Field(ge=0)

    def describe(self) -> str:
        return f"N={self.generators} nmax={self.nmax}"


# --- Experiment configuration ---

class GroupSection(BaseModel):
    moduli_head: List[int] = []
    moduli_tail: int = 0


class SequenceSection(BaseModel):
    kind: SequenceKind
    coefficient: int = 1
    ratio: int = 2
    coordinate: int = 0
    table: List[str] = []


class WindowSection(BaseModel):
    generators: int = Field(ge=1)
    nmax: int = Field(ge=0)
    support: Optional[int] = Field(default=None, ge=0)  # Support bound s for embedding checks
    budget: Optional[int] = Field(default=None, ge=1)  # Tail-search budget override
    cover_depth: Optional[int] = Field(default=None, ge=0)


class PrefixSection(BaseModel):
    indices: List[int] = []


class ExperimentConfig(BaseModel):
    group: GroupSection
    sequence: SequenceSection
    window: WindowSection
    prefix: Optional[PrefixSection] = None

    def group_spec(self) -> GroupSpec:
        return GroupSpec(moduli_head=tuple(self.group.moduli_head), moduli_tail=self.group.moduli_tail)

    def sequence_spec(self) -> SequenceSpec:
        return SequenceSpec(
            kind=self.sequence.kind,
            coefficient=self.sequence.coefficient,
            ratio=self.sequence.ratio,
            coordinate=self.sequence.coordinate,
            table=tuple(self.sequence.table),
        )

    def window_spec(self) -> Window:
        return Window(generators=self.window.generators, nmax=self.window.nmax)

    @model_validator(mode="after")
    def _check_sections(self) -> "ExperimentConfig":
        # Building the frozen specs runs their validators before any computation
        try:
            self.group_spec()
            self.sequence_spec()
        except ValidationError as e:
            raise ValueError(str(e))
        return self
