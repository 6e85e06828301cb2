"""
FS sums and the conditions used to pick an FS-strict subsequence whose subset-sum
map is a two-sided coarse embedding of the Hamming space.

Condition names used in reports:
  fs-strict  - b_{n+1} is never a difference of two FS sums of b_0..b_n
  collision  - the direct oracle: all FS sums are pairwise distinct
  sign       - a signed sum of j distinct terms never lies in L_{j-1}
  swap       - b + a = f(H) with b = f(F), a in L_n forces |F △ H| <= n

All verdicts are relative to the window the layers were built on.
"""
from itertools import combinations, product
from typing import Dict, Iterable, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from app.config import settings
from app.logger import logger
from app.models.element import Element, ZERO
from app.models.errors import (
    ExtractionExhaustedError,
    InvalidInputError,
    LayersTooShallowError,
    PreconditionError,
)
from app.models.schemas import GroupSpec, SequenceSpec, Verdict, Window
from app.services.balls import SumsetLayers
from app.services.group import add, neg, seq_term, sub, total


class FSPrefix(BaseModel):
    model_config = ConfigDict(frozen=True)

    spec: GroupSpec
    terms: Tuple[Element, ...]
    sources: Tuple[int, ...]  # Index of each term in the source sequence
    checked_window: Optional[Window] = None
    fs_strict_verified: bool = False
    sign_verified: bool = False

    def __len__(self) -> int:
        return len(self.terms)


class Counterexample(BaseModel):
    condition: str
    F: Tuple[int, ...] = ()
    H: Tuple[int, ...] = ()
    indices: Tuple[int, ...] = ()
    signs: Tuple[int, ...] = ()
    element: Element = ZERO
    depth: Optional[int] = None
    symmetric_difference: Optional[int] = None

    def to_text(self) -> str:
        parts = [f"condition={self.condition}"]
        if self.F or self.H or self.condition in ("fs-strict", "collision", "swap", "embed"):
            parts.append("F={" + ",".join(map(str, self.F)) + "}")
            parts.append("H={" + ",".join(map(str, self.H)) + "}")
        if self.indices:
            parts.append("indices=" + ",".join(map(str, self.indices)))
            parts.append("signs=" + ",".join("+" if s > 0 else "-" for s in self.signs))
        parts.append(f"element={self.element}")
        if self.depth is not None:
            parts.append(f"depth={self.depth}")
        if self.symmetric_difference is not None:
            parts.append(f"sym_diff={self.symmetric_difference}")
        return " ".join(parts)


class ConditionReport(BaseModel):
    condition: str
    verdict: Verdict
    window: Optional[Window] = None
    cases: int = 0
    counterexample: Optional[Counterexample] = None

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS


# --- Helpers ---

def mask_indices(mask: int) -> Tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def subset_sums(spec: GroupSpec, terms: Tuple[Element, ...]) -> List[Element]:
    """sums[mask] = sum of terms[i] over the bits i of mask"""
    sums = [ZERO] * (1 << len(terms))
    for mask in range(1, len(sums)):
        low = mask & -mask
        sums[mask] = add(spec, sums[mask ^ low], terms[low.bit_length() - 1])
    return sums


def _check_indices(prefix: FSPrefix, F: Iterable[int]) -> Tuple[int, ...]:
    chosen = tuple(sorted(set(F)))
    for i in chosen:
        if i < 0 or i >= len(prefix.terms):
            raise InvalidInputError(f"index {i} out of range for a prefix of length {len(prefix.terms)}")
    return chosen


def _same_group(prefix: FSPrefix, layers: SumsetLayers):
    if prefix.spec != layers.spec:
        raise InvalidInputError("prefix and layers live in different groups")


# --- Operations ---

def prefix_from_indices(spec: GroupSpec, seq: SequenceSpec, indices: Iterable[int]) -> FSPrefix:
    sources = tuple(indices)
    if list(sources) != sorted(set(sources)):
        raise InvalidInputError("prefix source indices must be strictly increasing")
    return FSPrefix(spec=spec, terms=tuple(seq_term(spec, seq, i) for i in sources), sources=sources)


def fs_sum(prefix: FSPrefix, F: Iterable[int]) -> Element:
    """sum of b_i over i in F; the empty sum is 0"""
    chosen = _check_indices(prefix, F)
    return total(prefix.spec, (prefix.terms[i] for i in chosen))


def check_fs_strict(prefix: FSPrefix) -> ConditionReport:
    """b_{n+1} ∉ {f(F) - f(H) : F, H ⊆ {0..n}} for every n, plus b_0 != 0"""
    spec, terms = prefix.spec, prefix.terms
    if not terms:
        return ConditionReport(condition="fs-strict", verdict=Verdict.PASS)
    if terms[0] == ZERO:
        return ConditionReport(
            condition="fs-strict",
            verdict=Verdict.FAIL,
            cases=1,
            counterexample=Counterexample(condition="fs-strict", F=(0,), H=(), element=ZERO),
        )

    sums: List[Element] = [ZERO, terms[0]]
    first_mask: Dict[Element, int] = {ZERO: 0, terms[0]: 1}
    cases = 1
    for n in range(len(terms) - 1):
        target = terms[n + 1]
        for h_mask in range(len(sums)):
            cases += 1
            hit = first_mask.get(add(spec, target, sums[h_mask]))
            if hit is not None:
                logger.debug(f"[FS] b_{n + 1} = f({mask_indices(hit)}) - f({mask_indices(h_mask)})")
                return ConditionReport(
                    condition="fs-strict",
                    verdict=Verdict.FAIL,
                    cases=cases,
                    counterexample=Counterexample(
                        condition="fs-strict", F=mask_indices(hit), H=mask_indices(h_mask), element=target
                    ),
                )
        width = len(sums)
        for mask in range(width):
            s = add(spec, sums[mask], target)
            sums.append(s)
            first_mask.setdefault(s, mask | width)
    return ConditionReport(condition="fs-strict", verdict=Verdict.PASS, cases=cases)


def fs_collision_oracle(prefix: FSPrefix) -> ConditionReport:
    """Hash all 2^len FS sums; strict iff they are pairwise distinct"""
    seen: Dict[Element, int] = {}
    sums = subset_sums(prefix.spec, prefix.terms)
    for mask, s in enumerate(sums):
        if s in seen:
            return ConditionReport(
                condition="collision",
                verdict=Verdict.FAIL,
                cases=mask + 1,
                counterexample=Counterexample(
                    condition="collision", F=mask_indices(seen[s]), H=mask_indices(mask), element=s
                ),
            )
        seen[s] = mask
    return ConditionReport(condition="collision", verdict=Verdict.PASS, cases=len(sums))


def check_sign_condition(prefix: FSPrefix, layers: SumsetLayers) -> ConditionReport:
    """
    Every signed sum t_0 b_{i_0} + ... of j distinct terms lies outside L_{j-1}.
    The first sign is fixed to + because L_n = -L_n.
    """
    _same_group(prefix, layers)
    k = len(prefix.terms)
    if k == 0:
        return ConditionReport(condition="sign", verdict=Verdict.PASS, window=layers.window)
    if layers.nmax < k - 1:
        raise LayersTooShallowError(k - 1, layers.nmax, "check_sign_condition")

    spec = prefix.spec
    negated = [neg(spec, t) for t in prefix.terms]
    cases = 0
    for j in range(1, k + 1):
        for chosen in combinations(range(k), j):
            for tail in product((1, -1), repeat=j - 1):
                signs = (1,) + tail
                cases += 1
                s = total(spec, (prefix.terms[i] if t > 0 else negated[i] for i, t in zip(chosen, signs)))
                if layers.contains(s, j - 1):
                    return ConditionReport(
                        condition="sign",
                        verdict=Verdict.FAIL,
                        window=layers.window,
                        cases=cases,
                        counterexample=Counterexample(
                            condition="sign",
                            indices=chosen,
                            signs=signs,
                            element=s,
                            depth=layers.word_length(s),
                        ),
                    )
    return ConditionReport(condition="sign", verdict=Verdict.PASS, window=layers.window, cases=cases)


class PairScan(BaseModel):
    """Result of one exhaustive pass over all pairs of FS sums of a prefix"""

    pairs: int = 0
    forward_violations: int = 0
    witness: Optional[Counterexample] = None


def scan_pairs(prefix: FSPrefix, layers: SumsetLayers, n: int, condition: str, at_depth: bool = False) -> PairScan:
    """
    Walk every unordered pair F != H of subsets of the prefix indices.

    With `at_depth` a pair violates the bound when f(H) - f(F) lies in L_n
    while |F △ H| > n. Without it the bound is checked at every depth up to n:
    word_length(f(H) - f(F)) = w <= n while |F △ H| > w. Each pair is read
    with F the lexicographically smaller index tuple, and the reported witness
    is the lexicographically first (F, H). Pairs whose difference should sit in
    the window by the forward bound but does not are counted separately.
    """
    spec = prefix.spec
    sums = subset_sums(spec, prefix.terms)
    result = PairScan()
    best_key = None
    for f_mask in range(len(sums)):
        for h_mask in range(f_mask + 1, len(sums)):
            result.pairs += 1
            delta = bin(f_mask ^ h_mask).count("1")
            diff = sub(spec, sums[h_mask], sums[f_mask])
            w = layers.word_length(diff)
            if delta <= layers.nmax and (w is None or w > delta):
                result.forward_violations += 1
            if w is None or w > n or delta <= (n if at_depth else w):
                continue
            key = (mask_indices(f_mask), mask_indices(h_mask))
            if key[1] < key[0]:
                key, diff = (key[1], key[0]), neg(spec, diff)
            if best_key is None or key < best_key:
                best_key = key
                result.witness = Counterexample(
                    condition=condition,
                    F=key[0],
                    H=key[1],
                    element=diff,
                    depth=w,
                    symmetric_difference=delta,
                )
    if result.witness is not None:
        logger.debug(f"[FS] First {condition} pair: {result.witness.to_text()}")
    return result


def check_swap_condition(prefix: FSPrefix, layers: SumsetLayers, n: int) -> ConditionReport:
    """b = f(F), a in L_n and b + a = f(H) imply |F △ H| <= n (FS-strictness assumed)"""
    _same_group(prefix, layers)
    if n > layers.nmax:
        raise LayersTooShallowError(n, layers.nmax, "check_swap_condition")
    if not prefix.fs_strict_verified:
        strict = check_fs_strict(prefix)
        if not strict.passed:
            raise PreconditionError(
                f"check_swap_condition needs an FS-strict prefix ({strict.counterexample.to_text()})"
            )

    scan = scan_pairs(prefix, layers, n, "swap", at_depth=True)
    verdict = Verdict.FAIL if scan.witness else Verdict.PASS
    return ConditionReport(
        condition="swap", verdict=verdict, window=layers.window, cases=scan.pairs, counterexample=scan.witness
    )


def verify_prefix(prefix: FSPrefix, layers: SumsetLayers) -> FSPrefix:
    """Re-run conditions (1) and (3) exhaustively and record the flags"""
    strict = check_fs_strict(prefix)
    sign = check_sign_condition(prefix, layers)
    return prefix.model_copy(
        update={
            "checked_window": layers.window,
            "fs_strict_verified": strict.passed,
            "sign_verified": sign.passed,
        }
    )


class FSExtractor:
    """Greedy choice of b_0, b_1, ... from the sequence, first-fit in source order"""

    def __init__(self):
        self.budget = settings.FS_TAIL_BUDGET

    def greedy_extract(
        self,
        spec: GroupSpec,
        seq: SequenceSpec,
        layers: SumsetLayers,
        length: int,
        budget: Optional[int] = None,
    ) -> FSPrefix:
        if length < 1:
            raise InvalidInputError("target length must be at least 1")
        if layers.spec != spec or layers.sequence != seq:
            raise InvalidInputError("layers were built for a different group or sequence")
        if layers.nmax < length - 1:
            raise LayersTooShallowError(length - 1, layers.nmax, "greedy_extract")
        budget = self.budget if budget is None else budget
        if budget < 0:
            raise InvalidInputError("tail budget must be non-negative")

        candidates = layers.generators
        start = next((i for i, a in enumerate(candidates) if a != ZERO), None)
        if start is None:
            raise ExtractionExhaustedError(
                "every term in the window is 0",
                FSPrefix(spec=spec, terms=(), sources=()),
                0,
            )

        terms = [candidates[start]]
        sources = [start]
        # (j, s): s is a signed sum of j distinct chosen terms; closed under s -> -s
        signed: List[Tuple[int, Element]] = [(0, ZERO), (1, terms[0]), (1, neg(spec, terms[0]))]
        differences = {s for _, s in signed}
        logger.info(f"[FS] b_0 = a_{start} = {terms[0]}")

        while len(terms) < length:
            accepted = None
            examined = 0
            for idx in range(sources[-1] + 1, len(candidates)):
                if examined >= budget:
                    break
                examined += 1
                c = candidates[idx]
                if c in differences:
                    logger.debug(f"[FS] a_{idx} rejected: FS difference of chosen terms")
                    continue
                clash = next(((j, s) for j, s in signed if layers.contains(add(spec, s, c), j)), None)
                if clash is not None:
                    logger.debug(f"[FS] a_{idx} rejected: {clash[1]} + a_{idx} lies in L_{clash[0]}")
                    continue
                accepted = idx
                break

            if accepted is None:
                partial = FSPrefix(spec=spec, terms=tuple(terms), sources=tuple(sources))
                logger.warning(f"[FS] Tail search exhausted at position {len(terms)} after {examined} candidates")
                raise ExtractionExhaustedError(
                    f"no admissible b_{len(terms)} among {examined} tail candidates "
                    f"(window {layers.window.describe()}, budget {budget})",
                    verify_prefix(partial, layers),
                    len(terms),
                )

            c = candidates[accepted]
            minus_c = neg(spec, c)
            grown = []
            for j, s in signed:
                grown.append((j + 1, add(spec, s, c)))
                grown.append((j + 1, add(spec, s, minus_c)))
            signed.extend(grown)
            differences.update(s for _, s in grown)
            terms.append(c)
            sources.append(accepted)
            logger.info(f"[FS] b_{len(terms) - 1} = a_{accepted} = {c} ({examined} candidates examined)")

        prefix = verify_prefix(FSPrefix(spec=spec, terms=tuple(terms), sources=tuple(sources)), layers)
        if not (prefix.fs_strict_verified and prefix.sign_verified):
            logger.error("[FS] Extracted prefix failed re-verification")
        return prefix


fs_extractor = FSExtractor()
