"""
Exact arithmetic in ⊕_i Z/m(i) and generation of the sequence families.

Every function here is pure; Elements and specs are immutable, so results can be
shared freely between workers.
"""
from math import factorial
from typing import Dict, List, Mapping, Optional

from pydantic import BaseModel

from app.models.element import Element, ZERO
from app.models.errors import InvalidInputError, TableExhaustedError
from app.models.schemas import GroupSpec, SequenceKind, SequenceSpec


def canonicalize(spec: GroupSpec, raw: Mapping[int, int]) -> Element:
    """Unique canonical Element for a finite-support integer vector (idempotent)"""
    support = []
    for i in sorted(raw):
        c = raw[i]
        m = spec.modulus(i)
        if m:
            c %= m
        if c:
            support.append((i, c))
    return Element(tuple(support))


def is_canonical(spec: GroupSpec, x: Element) -> bool:
    return canonicalize(spec, dict(x.support)) == x


def add(spec: GroupSpec, x: Element, y: Element) -> Element:
    if not y.support:
        return x
    if not x.support:
        return y
    acc: Dict[int, int] = dict(x.support)
    for i, c in y.support:
        acc[i] = acc.get(i, 0) + c
    return canonicalize(spec, acc)


def neg(spec: GroupSpec, x: Element) -> Element:
    support = []
    for i, c in x.support:
        m = spec.modulus(i)
        support.append((i, m - c if m else -c))
    return Element(tuple(support))


def sub(spec: GroupSpec, x: Element, y: Element) -> Element:
    return add(spec, x, neg(spec, y))


def total(spec: GroupSpec, terms) -> Element:
    acc: Dict[int, int] = {}
    for t in terms:
        for i, c in t.support:
            acc[i] = acc.get(i, 0) + c
    return canonicalize(spec, acc)


def parse_element(spec: GroupSpec, text: str) -> Element:
    """Read the canonical text form (or any raw `index:coefficient` list) and canonicalize it"""
    return canonicalize(spec, Element.parse(text))


def serialize_element(x: Element) -> str:
    return x.serialize()


def from_int(spec: GroupSpec, value: int, coordinate: int = 0) -> Element:
    return canonicalize(spec, {coordinate: value})


# --- Sequences ---

def seq_term(spec: GroupSpec, seq: SequenceSpec, n: int) -> Element:
    """The n-th term a_n of the sequence inside the group described by `spec`"""
    if n < 0:
        raise InvalidInputError(f"sequence index must be non-negative, got {n}")

    if seq.kind == SequenceKind.BASIS:
        return canonicalize(spec, {n: 1})
    if seq.kind == SequenceKind.GEOMETRIC:
        return canonicalize(spec, {seq.coordinate: seq.coefficient * seq.ratio ** n})
    if seq.kind == SequenceKind.ALTERNATING_GEOMETRIC:
        return canonicalize(spec, {seq.coordinate: seq.coefficient * (-seq.ratio) ** n})
    if seq.kind == SequenceKind.FACTORIAL:
        return canonicalize(spec, {seq.coordinate: seq.coefficient * factorial(n)})
    if seq.kind == SequenceKind.TABLE:
        if n >= len(seq.table):
            raise TableExhaustedError(n, len(seq.table))
        return parse_element(spec, seq.table[n])

    raise InvalidInputError(f"unknown sequence kind {seq.kind}")


def sequence_terms(spec: GroupSpec, seq: SequenceSpec, count: int) -> List[Element]:
    return [seq_term(spec, seq, n) for n in range(count)]


class NontrivialityReport(BaseModel):
    window: int
    zero_terms: int
    zero_indices: List[int]
    last_nonzero: Optional[int] = None
    nontrivial_on_window: bool


def check_nontrivial(spec: GroupSpec, seq: SequenceSpec, window: int) -> NontrivialityReport:
    """
    Count zero terms among a_0..a_{window-1}. The window counts as nontrivial when
    every suffix start s < window still sees a nonzero term at some index >= s.
    """
    if window < 1:
        raise InvalidInputError("window must be at least 1")

    terms = sequence_terms(spec, seq, window)
    zero_indices = [n for n, t in enumerate(terms) if t == ZERO]

    nonzero_ahead = False
    every_suffix = True
    last_nonzero = None
    for n in range(window - 1, -1, -1):
        if terms[n] != ZERO:
            nonzero_ahead = True
            if last_nonzero is None:
                last_nonzero = n
        if not nonzero_ahead:
            every_suffix = False

    return NontrivialityReport(
        window=window,
        zero_terms=len(zero_indices),
        zero_indices=zero_indices,
        last_nonzero=last_nonzero,
        nontrivial_on_window=every_suffix,
    )
