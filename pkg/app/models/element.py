from dataclasses import dataclass
from typing import Any, Dict, Tuple

from pydantic_core import core_schema

from app.models.errors import InvalidInputError

Support = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True, order=True)
class Element:
    """
    A group element as a finite sorted support of (coordinate, coefficient) pairs.

    Instances are only canonical relative to a GroupSpec; build them through
    `app.services.group.canonicalize`. The empty support is the identity.
    Ordering compares supports as tuples and is the canonical element order
    used for every tie-break in the library.
    """

    support: Support = ()

    @property
    def is_zero(self) -> bool:
        return not self.support

    @property
    def weight(self) -> int:
        return len(self.support)

    def serialize(self) -> str:
        """Canonical text: sorted space-separated `index:coefficient`, empty for 0"""
        return " ".join(f"{i}:{c}" for i, c in self.support)

    def __str__(self) -> str:
        return self.serialize() or "0"

    @staticmethod
    def parse(text: str) -> Dict[int, int]:
        """
        Read the `index:coefficient` form into a raw sparse vector.
        The result still has to be canonicalized against a GroupSpec.
        A bare `0` is accepted as the identity.
        """
        raw: Dict[int, int] = {}
        stripped = text.strip()
        if stripped in ("", "0"):
            return raw
        for token in stripped.split():
            index_text, sep, coeff_text = token.partition(":")
            if not sep:
                raise InvalidInputError(f"malformed element token '{token}' (expected index:coefficient)")
            try:
                index = int(index_text)
                coeff = int(coeff_text)
            except ValueError:
                raise InvalidInputError(f"malformed element token '{token}'")
            if index < 0:
                raise InvalidInputError(f"negative coordinate index in '{token}'")
            raw[index] = raw.get(index, 0) + coeff
        return raw

    @classmethod
    def _from_any(cls, value: Any) -> "Element":
        if isinstance(value, Element):
            return value
        if isinstance(value, str):
            raw = cls.parse(value)
            return cls(tuple((i, c) for i, c in sorted(raw.items()) if c != 0))
        raise InvalidInputError(f"cannot read an element from {type(value).__name__}")

    @classmethod
    def __get_pydantic_core_schema__(cls, source: Any, handler: Any) -> core_schema.CoreSchema:
        return core_schema.no_info_plain_validator_function(
            cls._from_any,
            serialization=core_schema.plain_serializer_function_ser_schema(lambda e: e.serialize()),
        )


ZERO = Element()
