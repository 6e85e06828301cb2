"""
Slowly oscillating {0,1}-functions on the window and chain certificates
showing that such functions take the same value at two far-out points.

A chain from y to z is a list of steps (u, v, x) with u, v in the ball x + A.
If every center x lies outside L_m (and its ball inside the window), any
function that is constant on those balls agrees at y and z.
"""
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.config import settings
from app.logger import logger
from app.models.element import Element, ZERO
from app.models.errors import (
    ChainExhaustedError,
    InvalidInputError,
    OutsideWindowError,
    PreconditionError,
    WindowTooShallowError,
)
from app.models.schemas import SequenceSpec, Verdict
from app.services.balls import SumsetLayers
from app.services.group import add, neg, parse_element, sub

CHAIN_FORMAT = "tseq-chain/1"


class SOFunction(BaseModel):
    """
    A {0,1}-valued function on the window universe L_nmax: explicit values
    plus an optional default for every element not listed.
    """

    model_config = ConfigDict(frozen=True)

    values: Dict[Element, int] = {}
    default: Optional[int] = None

    def __call__(self, x: Element) -> int:
        value = self.values.get(x, self.default)
        if value is None:
            raise InvalidInputError(f"function has no value at '{x}'")
        return value

    def check_total(self, layers: SumsetLayers):
        if self.default is not None:
            return
        missing = [x for x in layers.elements() if x not in self.values]
        if missing:
            raise InvalidInputError(f"function is not total on the window: {len(missing)} elements missing, first '{missing[0]}'")

    def to_text(self) -> str:
        lines = [f"{x.serialize()}\t{v}" for x, v in sorted(self.values.items())]
        if self.default is not None:
            lines.append(f"*\t{self.default}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, layers: SumsetLayers) -> "SOFunction":
        values: Dict[Element, int] = {}
        default = None
        for number, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            key, sep, value_text = line.partition("\t")
            if not sep or value_text.strip() not in ("0", "1"):
                raise InvalidInputError(f"line {number}: expected 'element<TAB>0|1'")
            value = int(value_text)
            if key.strip() == "*":
                default = value
                continue
            x = parse_element(layers.spec, key)
            if values.get(x, value) != value:
                raise InvalidInputError(f"line {number}: conflicting values for '{x}'")
            values[x] = value
        return cls(values=values, default=default)


class SORadiusReport(BaseModel):
    radius: Optional[int] = None  # None is NOT_SO on this window
    tested_balls: int
    skipped_balls: int
    witness_center: Optional[Element] = None  # Outermost non-constant ball

    @property
    def slowly_oscillating(self) -> bool:
        return self.radius is not None


class ConstancyReport(BaseModel):
    verdict: Verdict
    m: int
    witness: Optional[Tuple[Element, Element]] = None


def _ball_is_constant(f: SOFunction, x: Element, layers: SumsetLayers) -> bool:
    values = {f(add(layers.spec, x, a)) for a in layers.alphabet}
    return len(values) == 1


def so_radius(f: SOFunction, layers: SumsetLayers) -> SORadiusReport:
    """
    Least m such that f is constant on x + A for every x with
    m < word_length(x) <= nmax - 1. Balls of centers at depth nmax leave the
    window and are skipped. A non-constant ball at the outermost testable depth
    means f is not slowly oscillating on this window.
    """
    if layers.nmax < 2:
        raise WindowTooShallowError(f"so_radius needs nmax >= 2, layers built to {layers.nmax}")
    f.check_total(layers)

    outermost_bad = -1
    witness = None
    tested = skipped = 0
    for x in layers.elements():
        depth = layers.depth[x]
        if depth == layers.nmax:
            skipped += 1
            continue
        tested += 1
        if depth > outermost_bad and not _ball_is_constant(f, x, layers):
            outermost_bad = depth
            witness = x

    if outermost_bad == layers.nmax - 1:
        logger.info(f"[Ends] Not slowly oscillating on {layers.window.describe()}: ball around {witness} varies")
        return SORadiusReport(radius=None, tested_balls=tested, skipped_balls=skipped, witness_center=witness)
    return SORadiusReport(
        radius=max(outermost_bad, 0), tested_balls=tested, skipped_balls=skipped, witness_center=witness
    )


def constancy_check(f: SOFunction, m: int, layers: SumsetLayers) -> ConstancyReport:
    """f constant on the universe minus L_m; the witness is the first pair that differs"""
    first = None
    for x in layers.elements():
        if layers.depth[x] <= m:
            continue
        if first is None:
            first = x
        elif f(x) != f(first):
            return ConstancyReport(verdict=Verdict.FAIL, m=m, witness=(first, x))
    return ConstancyReport(verdict=Verdict.PASS, m=m)


class ChainStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    u: Element
    v: Element
    x: Element  # Center


class ChainCertificate(BaseModel):
    y: Element
    z: Element
    radius: int
    requested_radius: Optional[int] = None  # Set when the radius was raised on retry
    steps: List[ChainStep] = []

    def vertices(self) -> List[Element]:
        return [self.y] + [step.v for step in self.steps]

    def to_text(self) -> str:
        lines = [CHAIN_FORMAT, f"radius\t{self.radius}"]
        if self.requested_radius is not None:
            lines.append(f"requested_radius\t{self.requested_radius}")
        lines.append(f"y\t{self.y.serialize()}")
        lines.append(f"z\t{self.z.serialize()}")
        for step in self.steps:
            lines.append(f"step\t{step.u.serialize()}\t{step.v.serialize()}\t{step.x.serialize()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, layers: SumsetLayers) -> "ChainCertificate":
        lines = [line for line in text.splitlines() if line]
        if not lines or lines[0] != CHAIN_FORMAT:
            raise InvalidInputError("not a chain certificate")
        fields: Dict[str, str] = {}
        steps: List[ChainStep] = []
        for line in lines[1:]:
            parts = line.split("\t")
            if parts[0] == "step":
                if len(parts) != 4:
                    raise InvalidInputError(f"malformed step line '{line}'")
                u, v, x = (parse_element(layers.spec, p) for p in parts[1:])
                steps.append(ChainStep(u=u, v=v, x=x))
            elif parts[0] in ("radius", "requested_radius", "y", "z") and len(parts) == 2:
                fields[parts[0]] = parts[1]
            else:
                raise InvalidInputError(f"unknown certificate line '{line}'")
        for key in ("radius", "y", "z"):
            if key not in fields:
                raise InvalidInputError(f"certificate has no '{key}' line")
        try:
            radius = int(fields["radius"])
            requested = int(fields["requested_radius"]) if "requested_radius" in fields else None
        except ValueError:
            raise InvalidInputError("radius must be an integer")
        return cls(
            y=parse_element(layers.spec, fields["y"]),
            z=parse_element(layers.spec, fields["z"]),
            radius=radius,
            requested_radius=requested,
            steps=steps,
        )


class ChainCheck(BaseModel):
    verdict: Verdict
    m: int
    failed_step: Optional[int] = None
    reason: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS


def verify_chain(cert: ChainCertificate, layers: SumsetLayers, m: Optional[int] = None) -> ChainCheck:
    """Re-check every step of a certificate against the layers"""
    m = cert.radius if m is None else m

    def fail(step: Optional[int], reason: str) -> ChainCheck:
        logger.info(f"[Ends] Chain rejected at step {step}: {reason}")
        return ChainCheck(verdict=Verdict.FAIL, m=m, failed_step=step, reason=reason)

    if not cert.steps:
        if cert.y == cert.z:
            return ChainCheck(verdict=Verdict.PASS, m=m)
        return fail(None, "empty chain between distinct endpoints")

    if cert.steps[0].u != cert.y:
        return fail(0, "chain does not start at y")
    if cert.steps[-1].v != cert.z:
        return fail(len(cert.steps) - 1, "chain does not end at z")

    for i, step in enumerate(cert.steps):
        if i > 0 and cert.steps[i - 1].v != step.u:
            return fail(i, "step does not continue the previous one")
        if not layers.in_alphabet(sub(layers.spec, step.u, step.x)):
            return fail(i, "u is not in x + A")
        if not layers.in_alphabet(sub(layers.spec, step.v, step.x)):
            return fail(i, "v is not in x + A")
        depth = layers.word_length(step.x)
        if depth is None or depth > layers.nmax - 1:
            return fail(i, "ball around the center leaves the window")
        if depth <= m:
            return fail(i, f"center lies in L_{m}")
    return ChainCheck(verdict=Verdict.PASS, m=m)


def evaluate_along(cert: ChainCertificate, f: SOFunction) -> List[int]:
    return [f(x) for x in cert.vertices()]


def random_so_function(m: int, layers: SumsetLayers, seed: int, constant: int = 0) -> SOFunction:
    """Seeded random values on L_{m-1} and `constant` everywhere else"""
    if m < 0 or m >= layers.nmax:
        raise InvalidInputError(f"fixture radius must lie in 0..{layers.nmax - 1}, got {m}")
    if constant not in (0, 1):
        raise InvalidInputError("constant must be 0 or 1")
    rng = np.random.default_rng(seed)
    values: Dict[Element, int] = {}
    if m >= 1:
        inner = layers.layer(m - 1)
        for x, value in zip(inner, rng.integers(0, 2, size=len(inner))):
            values[x] = int(value)
    return SOFunction(values=values, default=constant)


class ChainService:
    """
    Builds chain certificates by rewriting both endpoint words into a common
    word, one summand per step, through centers outside L_m.
    """

    def __init__(self):
        self.budget = settings.CHAIN_TAIL_BUDGET

    def connect_chain(
        self,
        y: Element,
        z: Element,
        m: int,
        layers: SumsetLayers,
        seq: Optional[SequenceSpec] = None,
        budget: Optional[int] = None,
    ) -> ChainCertificate:
        if seq is not None and layers.sequence != seq:
            raise InvalidInputError("layers were built for a different sequence")
        if m < 0:
            raise InvalidInputError("radius must be non-negative")
        if y == z:
            return ChainCertificate(y=y, z=z, radius=m)

        for name, point in (("y", y), ("z", z)):
            depth = layers.word_length(point)
            if depth is None:
                raise OutsideWindowError(f"{name} = '{point}' lies outside the window ({layers.window.describe()})")
            if depth <= m:
                raise PreconditionError(f"{name} = '{point}' lies in L_{m}")

        budget = self.budget if budget is None else budget
        if budget < 0:
            raise InvalidInputError("tail budget must be non-negative")
        try:
            return self._build(y, z, m, layers, budget)
        except ChainExhaustedError as first:
            logger.warning(f"[Ends] Chain search failed at radius {m} ({first.message}), retrying at {m + 1}")
            try:
                cert = self._build(y, z, m + 1, layers, budget)
            except ChainExhaustedError:
                raise first
            return cert.model_copy(update={"requested_radius": m})

    def _candidates(self, layers: SumsetLayers) -> List[Element]:
        out: List[Element] = []
        for g in layers.generators:
            if g == ZERO:
                continue
            out.append(g)
            minus = neg(layers.spec, g)
            if minus != g:
                out.append(minus)
        return out

    def _build(self, y: Element, z: Element, m: int, layers: SumsetLayers, budget: int) -> ChainCertificate:
        spec = layers.spec
        left = layers.decompose(y)
        right = layers.decompose(z)
        k = max(len(left), len(right))
        left += [ZERO] * (k - len(left))
        right += [ZERO] * (k - len(right))
        candidates = self._candidates(layers)

        def usable(center: Element) -> bool:
            depth = layers.word_length(center)
            return depth is not None and m < depth <= layers.nmax - 1

        y_side: List[ChainStep] = []
        z_side: List[ChainStep] = []
        y_cur, z_cur = y, z
        for i in range(k):
            examined = 0
            chosen = None
            for a in candidates:
                if examined >= budget:
                    break
                examined += 1
                if usable(add(spec, y_cur, a)) and usable(add(spec, z_cur, a)):
                    chosen = a
                    break
            if chosen is None:
                partial = ChainCertificate(y=y, z=z, radius=m, steps=y_side)
                raise ChainExhaustedError(
                    f"no tail term keeps both centers outside L_{m} at step {i} "
                    f"({examined} candidates, window {layers.window.describe()})",
                    partial,
                    i,
                )

            y_center, z_center = add(spec, y_cur, chosen), add(spec, z_cur, chosen)
            y_next, z_next = sub(spec, y_center, left[i]), sub(spec, z_center, right[i])
            if y_next != y_cur:
                y_side.append(ChainStep(u=y_cur, v=y_next, x=y_center))
            if z_next != z_cur:
                z_side.append(ChainStep(u=z_cur, v=z_next, x=z_center))
            logger.debug(f"[Ends] Step {i}: term {chosen}, centers {y_center} / {z_center}")
            y_cur, z_cur = y_next, z_next

        if y_cur != z_cur:
            raise ChainExhaustedError(f"rewritten words differ: {y_cur} vs {z_cur}", None, k)

        steps = y_side + [ChainStep(u=s.v, v=s.u, x=s.x) for s in reversed(z_side)]
        cert = ChainCertificate(y=y, z=z, radius=m, steps=steps)
        check = verify_chain(cert, layers, m)
        if not check.passed:
            raise ChainExhaustedError(f"constructed chain failed re-verification: {check.reason}", cert, check.failed_step or 0)
        logger.info(f"[Ends] Chain {y} -> {z}: {len(steps)} steps at radius {m}")
        return cert


chain_service = ChainService()
