import asyncio
import sys
from collections import deque
from concurrent.futures import Executor, ProcessPoolExecutor
from math import ceil
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from pydantic import BaseModel
from tqdm import tqdm

from app.config import settings
from app.logger import logger
from app.models.element import Element, ZERO
from app.models.errors import (
    InvalidInputError,
    LayerBudgetExceededError,
    LayersTooShallowError,
    OutsideWindowError,
)
from app.models.schemas import GroupSpec, SequenceSpec, Window
from app.services.group import add, neg, parse_element, sequence_terms, sub

LAYERS_FORMAT = "tseq-layers/1"

Candidate = Tuple[Element, Element, Element]  # (new element, predecessor, generator used)


class CoveringBounds(BaseModel):
    n: int
    lower: int
    upper: int
    packing: int
    volume_bound: int


class SumsetLayers:
    """
    The chain L_0 ⊆ L_1 ⊆ ... ⊆ L_nmax of iterated sumsets of A = {0, ±a_i : i < N}.

    `depth` maps every element of L_nmax to its word length; `parent` stores one
    shortest decomposition step per nonzero element. Immutable after build.
    """

    def __init__(
        self,
        spec: GroupSpec,
        sequence: SequenceSpec,
        window: Window,
        generators: Sequence[Element],
        depth: Dict[Element, int],
        parent: Dict[Element, Tuple[Element, Element]],
    ):
        self.spec = spec
        self.sequence = sequence
        self.window = window
        self.generators: Tuple[Element, ...] = tuple(generators)
        alphabet = {ZERO}
        for g in self.generators:
            alphabet.add(g)
            alphabet.add(neg(spec, g))
        self.alphabet: Tuple[Element, ...] = tuple(sorted(alphabet))
        self._alphabet_set = frozenset(alphabet)
        self.depth = depth
        self.parent = parent

        counts = [0] * (window.nmax + 1)
        for d in depth.values():
            counts[d] += 1
        sizes, running = [], 0
        for c in counts:
            running += c
            sizes.append(running)
        self.sizes: Tuple[int, ...] = tuple(sizes)

    @property
    def nmax(self) -> int:
        return self.window.nmax

    def __len__(self) -> int:
        return len(self.depth)

    def __contains__(self, x: Element) -> bool:
        return x in self.depth

    # --- Queries ---

    def word_length(self, x: Element) -> Optional[int]:
        """Least n <= nmax with x in L_n; None is UNKNOWN (beyond the window), not infinity"""
        return self.depth.get(x)

    def contains(self, x: Element, n: int) -> bool:
        d = self.depth.get(x)
        return d is not None and d <= n

    def in_alphabet(self, x: Element) -> bool:
        return x in self._alphabet_set

    def dist(self, x: Element, y: Element) -> Optional[int]:
        return self.depth.get(sub(self.spec, x, y))

    def in_entourage(self, x: Element, y: Element, n: int) -> Optional[bool]:
        """x - y in L_n; None when n > nmax and the pair is outside the window"""
        d = self.dist(x, y)
        if d is not None:
            return d <= n
        if n <= self.nmax:
            return False
        return None

    def decompose(self, x: Element) -> List[Element]:
        """word_length(x) elements of A summing to x, read off the back-pointers"""
        if x not in self.depth:
            raise OutsideWindowError(f"element '{x}' lies outside the window ({self.window.describe()})")
        steps: List[Element] = []
        current = x
        while current != ZERO:
            pred, gen = self.parent[current]
            steps.append(gen)
            current = pred
        steps.reverse()
        return steps

    def growth_profile(self) -> List[int]:
        return list(self.sizes)

    def layer(self, n: int) -> List[Element]:
        """Elements of L_n in canonical order"""
        self._require_depth(n, "layer")
        return sorted(x for x, d in self.depth.items() if d <= n)

    def sphere(self, n: int) -> List[Element]:
        self._require_depth(n, "sphere")
        return sorted(x for x, d in self.depth.items() if d == n)

    def ball(self, center: Element, n: int) -> Set[Element]:
        """center + L_n, the ball of radius n around `center`"""
        return {add(self.spec, center, y) for y in self.layer(n)}

    def ideal_member(self, translates: Iterable[Element], n: int) -> Set[Element]:
        """F + L_n for a finite set F: a member of the base of the ideal"""
        layer = self.layer(n)
        return {add(self.spec, f, y) for f in translates for y in layer}

    def elements(self) -> List[Element]:
        """All of L_nmax ordered by (depth, canonical order)"""
        return sorted(self.depth, key=lambda x: (self.depth[x], x))

    def covering_number(self, n: int) -> CoveringBounds:
        """
        Bracket the least |K| with L_n ⊆ L_1 + K.

        upper: greedy cover in canonical order (centers taken from L_n).
        lower: the better of a greedy packing of points pairwise outside L_2 of
        each other (one translate of L_1 holds at most one of them) and the
        volume bound ceil(|L_n| / |L_1|).
        """
        self._require_depth(n, "covering_number")
        points = self.layer(n)

        covered: Set[Element] = set()
        centers = 0
        for x in points:
            if x in covered:
                continue
            centers += 1
            for a in self.alphabet:
                covered.add(add(self.spec, x, a))

        two_step = {add(self.spec, a, b) for a in self.alphabet for b in self.alphabet}
        blocked: Set[Element] = set()
        packing = 0
        for x in points:
            if x in blocked:
                continue
            packing += 1
            for d in two_step:
                blocked.add(add(self.spec, x, d))

        volume = ceil(len(points) / len(self.alphabet))
        return CoveringBounds(n=n, lower=max(packing, volume), upper=centers, packing=packing, volume_bound=volume)

    def _require_depth(self, n: int, what: str):
        if n < 0:
            raise InvalidInputError(f"{what}: depth must be non-negative")
        if n > self.nmax:
            raise LayersTooShallowError(n, self.nmax, what)

    # --- Serialization (cache format) ---

    def to_text(self) -> str:
        lines = [
            LAYERS_FORMAT,
            f"window\t{self.window.generators}\t{self.window.nmax}",
            "sizes\t" + " ".join(str(s) for s in self.sizes),
        ]
        for g in self.generators:
            lines.append(f"g\t{g.serialize()}")
        for x in self.elements():
            if x == ZERO:
                continue
            pred, gen = self.parent[x]
            lines.append(f"e\t{self.depth[x]}\t{x.serialize()}\t{pred.serialize()}\t{gen.serialize()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, spec: GroupSpec, sequence: SequenceSpec, window: Window) -> "SumsetLayers":
        lines = text.split("\n")
        if not lines or lines[0] != LAYERS_FORMAT:
            raise InvalidInputError("not a layers file")
        generators: List[Element] = []
        depth: Dict[Element, int] = {ZERO: 0}
        parent: Dict[Element, Tuple[Element, Element]] = {}
        for line in lines[1:]:
            if not line:
                continue
            fields = line.split("\t")
            tag = fields[0]
            if tag == "window":
                if (int(fields[1]), int(fields[2])) != (window.generators, window.nmax):
                    raise InvalidInputError("layers file was built for a different window")
            elif tag == "g":
                generators.append(parse_element(spec, fields[1]))
            elif tag == "e":
                x = parse_element(spec, fields[2])
                depth[x] = int(fields[1])
                parent[x] = (parse_element(spec, fields[3]), parse_element(spec, fields[4]))
            elif tag != "sizes":
                raise InvalidInputError(f"unknown layers record '{tag}'")
        return cls(spec, sequence, window, generators, depth, parent)


def _expand_chunk(spec: GroupSpec, chunk: Sequence[Element], steps: Sequence[Element]) -> List[Candidate]:
    """Neighbours of one frontier chunk, first occurrence only, in (frontier, step) order"""
    seen: Set[Element] = set()
    out: List[Candidate] = []
    for pred in chunk:
        for gen in steps:
            x = add(spec, pred, gen)
            if x not in seen:
                seen.add(x)
                out.append((x, pred, gen))
    return out


class BallService:
    """Builds sumset layers; frontier expansion may fan out over a process pool"""

    def __init__(self):
        self.cap = settings.LAYER_CARDINALITY_CAP
        self.workers = settings.EXPANSION_WORKERS
        self.chunk_size = settings.EXPANSION_CHUNK_SIZE

    def build_layers(
        self,
        spec: GroupSpec,
        sequence: SequenceSpec,
        window: Window,
        cap: Optional[int] = None,
        workers: Optional[int] = None,
    ) -> SumsetLayers:
        cap = self.cap if cap is None else cap
        workers = self.workers if workers is None else workers
        if cap < 1 or workers < 1:
            raise InvalidInputError(f"cardinality cap and worker count must be positive, got cap={cap}, workers={workers}")
        generators = sequence_terms(spec, sequence, window.generators)

        logger.info(f"[Balls] Building layers: group {spec.describe()}, seq {sequence.describe()}, {window.describe()}, workers={workers}")

        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                def expand(chunks, steps):
                    return asyncio.run(self._gather_chunks(pool, spec, chunks, steps))
                return self._build(spec, sequence, window, generators, cap, expand)

        def expand_inline(chunks, steps):
            return [_expand_chunk(spec, chunk, steps) for chunk in chunks]
        return self._build(spec, sequence, window, generators, cap, expand_inline)

    async def _gather_chunks(self, pool: Executor, spec: GroupSpec, chunks, steps) -> List[List[Candidate]]:
        loop = asyncio.get_running_loop()
        tasks = [loop.run_in_executor(pool, _expand_chunk, spec, chunk, steps) for chunk in chunks]
        # gather keeps task order, which keeps the merge schedule-independent
        return await asyncio.gather(*tasks)

    def _build(
        self,
        spec: GroupSpec,
        sequence: SequenceSpec,
        window: Window,
        generators: List[Element],
        cap: int,
        expand: Callable[[List[List[Element]], Tuple[Element, ...]], List[List[Candidate]]],
    ) -> SumsetLayers:
        alphabet = {ZERO}
        for g in generators:
            alphabet.add(g)
            alphabet.add(neg(spec, g))
        steps = tuple(sorted(a for a in alphabet if a != ZERO))

        depth: Dict[Element, int] = {ZERO: 0}
        parent: Dict[Element, Tuple[Element, Element]] = {}
        frontier: List[Element] = [ZERO]

        depths = tqdm(range(1, window.nmax + 1), desc="layers", file=sys.stderr, disable=not settings.SHOW_PROGRESS)
        for n in depths:
            if not frontier:
                logger.debug(f"[Balls] Layers saturated at depth {n - 1}")
                break
            chunks = [frontier[i:i + self.chunk_size] for i in range(0, len(frontier), self.chunk_size)]
            fresh: List[Element] = []
            for candidates in expand(chunks, steps):
                for x, pred, gen in candidates:
                    if x in depth:
                        continue
                    depth[x] = n
                    parent[x] = (pred, gen)
                    fresh.append(x)
                if len(depth) > cap:
                    logger.error(f"[Balls] Cardinality cap {cap} exceeded at depth {n}")
                    raise LayerBudgetExceededError(n - 1, len(depth) - len(fresh), cap)
            frontier = sorted(fresh)
            logger.debug(f"[Balls] Depth {n}: {len(fresh)} new, {len(depth)} total")

        layers = SumsetLayers(spec, sequence, window, generators, depth, parent)
        logger.info(f"[Balls] Growth profile: {layers.sizes}")
        return layers


def cayley_distance(spec: GroupSpec, generators: Iterable[Element], x: Element, limit: int) -> Optional[int]:
    """
    Breadth-first distance from 0 to x in Cay(G, {a_i}) (edges u -> u ± a_i),
    searching up to `limit` steps. Independent of the layer builder.
    """
    moves = []
    for g in generators:
        if g != ZERO:
            moves.append(g)
            moves.append(neg(spec, g))

    if x == ZERO:
        return 0
    seen = {ZERO}
    queue = deque([(ZERO, 0)])
    while queue:
        u, d = queue.popleft()
        if d == limit:
            continue
        for step in moves:
            v = add(spec, u, step)
            if v in seen:
                continue
            if v == x:
                return d + 1
            seen.add(v)
            queue.append((v, d + 1))
    return None


ball_service = BallService()
