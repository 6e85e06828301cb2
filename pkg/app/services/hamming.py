from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config import settings
from app.logger import logger
from app.models.element import Element
from app.models.errors import (
    InvalidInputError,
    LayersTooShallowError,
    PreconditionError,
    ResourceCapError,
)
from app.models.schemas import Verdict, Window
from app.services.balls import SumsetLayers
from app.services.fs import Counterexample, FSPrefix, fs_sum, scan_pairs, subset_sums
from app.services.group import sub

CUBE_FORMAT = "tseq-cube/1"


class HammingPoint(BaseModel):
    """
    A point of H(order): finitely many nonzero coordinates with values in
    1..order-1. order=2 is the binary space of finite subsets.
    """

    model_config = ConfigDict(frozen=True)

    order: int = Field(default=2, ge=2)
    coords: Tuple[Tuple[int, int], ...] = ()

    @model_validator(mode="after")
    def _check_coords(self) -> "HammingPoint":
        last = -1
        for i, v in self.coords:
            if i <= last:
                raise ValueError("coordinates must be strictly increasing")
            if not 1 <= v < self.order:
                raise ValueError(f"coordinate value {v} outside 1..{self.order - 1}")
            last = i
        return self

    @classmethod
    def subset(cls, indices: Iterable[int]) -> "HammingPoint":
        chosen = sorted(set(indices))
        if chosen and chosen[0] < 0:
            raise InvalidInputError("subset indices must be non-negative")
        return cls(order=2, coords=tuple((i, 1) for i in chosen))

    @classmethod
    def vector(cls, order: int, values: Mapping[int, int]) -> "HammingPoint":
        if any(i < 0 for i in values):
            raise InvalidInputError("coordinates must be non-negative")
        try:
            return cls(order=order, coords=tuple((i, values[i]) for i in sorted(values) if values[i]))
        except ValueError as e:
            raise InvalidInputError(str(e))

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(i for i, _ in self.coords)


def hamming_dist(p: HammingPoint, q: HammingPoint) -> int:
    """Number of coordinates where p and q differ"""
    if p.order != q.order:
        raise InvalidInputError(f"points live in H({p.order}) and H({q.order})")
    left: Dict[int, int] = dict(p.coords)
    right: Dict[int, int] = dict(q.coords)
    return sum(1 for i in set(left) | set(right) if left.get(i) != right.get(i))


def canonical_map(prefix: FSPrefix, F: Iterable[int]) -> Element:
    """f(F) = sum of b_i over i in F"""
    return fs_sum(prefix, F)


class EmbedReport(BaseModel):
    verdict: Verdict
    support: int
    nmax: int
    window: Optional[Window] = None
    pairs: int = 0
    forward_violations: int = 0
    counterexample: Optional[Counterexample] = None
    statement: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS


def verify_embedding(prefix: FSPrefix, layers: SumsetLayers, s: int, nmax: int) -> EmbedReport:
    """
    Two-sided window check of f on subsets of {0..s}: the forward bound
    word_length(f(F) - f(H)) <= |F △ H| and, for every n <= nmax,
    f(F) - f(H) in L_n implies |F △ H| <= n.
    """
    if prefix.spec != layers.spec:
        raise InvalidInputError("prefix and layers live in different groups")
    if nmax > layers.nmax:
        raise LayersTooShallowError(nmax, layers.nmax, "verify_embedding")
    if nmax < 0 or s < 0:
        raise InvalidInputError("support bound and depth must be non-negative")

    if len(prefix) <= 1:
        return EmbedReport(
            verdict=Verdict.PASS,
            support=s,
            nmax=nmax,
            window=layers.window,
            statement="vacuous: at most two points",
        )
    if s >= len(prefix):
        raise InvalidInputError(f"support bound {s} needs a prefix of length {s + 1}, got {len(prefix)}")

    restricted = prefix.model_copy(update={"terms": prefix.terms[: s + 1], "sources": prefix.sources[: s + 1]})
    scan = scan_pairs(restricted, layers, nmax, "embed")
    if scan.forward_violations:
        logger.warning(f"[Embed] {scan.forward_violations} pairs break the forward bound on the window")

    if scan.witness is not None:
        logger.info(f"[Embed] Counterexample: {scan.witness.to_text()}")
        return EmbedReport(
            verdict=Verdict.FAIL,
            support=s,
            nmax=nmax,
            window=layers.window,
            pairs=scan.pairs,
            forward_violations=scan.forward_violations,
            counterexample=scan.witness,
        )

    statement = (
        f"for all F, H with support in {{0..{s}}}: word_length(f(F) - f(H)) <= |F △ H| "
        f"and word_length(f(F) - f(H)) = n <= {nmax} implies |F △ H| <= n"
    )
    return EmbedReport(
        verdict=Verdict.PASS if not scan.forward_violations else Verdict.FAIL,
        support=s,
        nmax=nmax,
        window=layers.window,
        pairs=scan.pairs,
        forward_violations=scan.forward_violations,
        statement=statement if not scan.forward_violations else None,
    )


class CubeCertificate(BaseModel):
    """
    Images of the 2^d subsets of {0..d-1} with their pairwise word lengths.
    Rows and columns are indexed by subset bitmask; -1 marks UNKNOWN.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dimension: int
    window: Window
    images: List[Element]
    distances: np.ndarray
    hamming: np.ndarray
    min_dist_by_hamming: List[Optional[int]]
    injective: bool
    forward_ok: bool
    exact_within: bool

    def to_text(self) -> str:
        lines = [
            CUBE_FORMAT,
            f"dimension\t{self.dimension}",
            f"window\t{self.window.generators}\t{self.window.nmax}",
            "flags\t" + " ".join(
                f"{name}={str(value).lower()}"
                for name, value in (
                    ("injective", self.injective),
                    ("forward_ok", self.forward_ok),
                    ("exact_within", self.exact_within),
                )
            ),
            "min_by_hamming\t" + " ".join("?" if v is None else str(v) for v in self.min_dist_by_hamming),
        ]
        for mask, image in enumerate(self.images):
            row = " ".join("?" if v < 0 else str(v) for v in self.distances[mask])
            lines.append(f"row\t{mask}\t{image.serialize()}\t{row}")
        return "\n".join(lines) + "\n"


def embed_cube(prefix: FSPrefix, layers: SumsetLayers, d: int) -> CubeCertificate:
    if prefix.spec != layers.spec:
        raise InvalidInputError("prefix and layers live in different groups")
    if d < 0:
        raise InvalidInputError("cube dimension must be non-negative")
    if d > settings.CUBE_MAX_DIMENSION:
        raise ResourceCapError(f"cube dimension {d} above the cap {settings.CUBE_MAX_DIMENSION}")
    if d > len(prefix):
        raise PreconditionError(f"a {d}-cube needs a prefix of length {d}, got {len(prefix)}")

    images = subset_sums(prefix.spec, prefix.terms[:d])
    size = len(images)
    logger.info(f"[Embed] Building {d}-cube certificate ({size} images)")

    masks = np.arange(size, dtype=np.int64)
    xor = masks[:, None] ^ masks[None, :]
    hamming = np.zeros((size, size), dtype=np.int64)
    for bit in range(d):
        hamming += (xor >> bit) & 1

    distances = np.zeros((size, size), dtype=np.int64)
    for i in range(size):
        for j in range(i + 1, size):
            w = layers.word_length(sub(prefix.spec, images[j], images[i]))
            distances[i, j] = distances[j, i] = -1 if w is None else w

    known = distances >= 0
    min_by: List[Optional[int]] = []
    for k in range(d + 1):
        selected = distances[(hamming == k) & known]
        min_by.append(int(selected.min()) if selected.size else None)

    within = hamming <= layers.nmax
    forward_ok = bool(np.all(known[within] & (distances[within] <= hamming[within])))
    exact_within = bool(np.all(distances[within] == hamming[within]))
    injective = len(set(images)) == size

    if not injective:
        logger.warning(f"[Embed] f is not injective on the {d}-cube")

    return CubeCertificate(
        dimension=d,
        window=layers.window,
        images=images,
        distances=distances,
        hamming=hamming,
        min_dist_by_hamming=min_by,
        injective=injective,
        forward_ok=forward_ok,
        exact_within=exact_within,
    )
