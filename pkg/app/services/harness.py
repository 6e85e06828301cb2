import json
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from pydantic import BaseModel, ValidationError

from app.config import settings
from app.logger import logger
from app.models.element import Element
from app.models.errors import (
    ChainExhaustedError,
    ExtractionExhaustedError,
    InvalidInputError,
    TSeqError,
    error_payload,
)
from app.models.schemas import ExperimentConfig, GroupSpec, Verdict
from app.services.balls import SumsetLayers
from app.services.cache import LayerCache
from app.services.ends import (
    ChainCertificate,
    SOFunction,
    chain_service,
    constancy_check,
    random_so_function,
    so_radius,
    verify_chain,
)
from app.services.fs import (
    ConditionReport,
    FSPrefix,
    check_fs_strict,
    check_sign_condition,
    check_swap_condition,
    fs_collision_oracle,
    fs_extractor,
    prefix_from_indices,
)
from app.services.group import parse_element
from app.services.hamming import embed_cube, verify_embedding

COMMANDS = (
    "ball",
    "dist",
    "decompose",
    "extract-fs",
    "check-fs",
    "verify-embed",
    "embed-cube",
    "so-check",
    "chain",
    "verify-chain",
    "so-fixture",
)


class RunOptions(BaseModel):
    no_cache: bool = False
    cache_dir: Optional[str] = None
    seed: int = 0


class RunOutcome(BaseModel):
    exit_status: int
    records: List[Dict[str, Any]]

    def lines(self) -> List[str]:
        return [encode_record(r) for r in self.records]


def encode_record(record: Dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _int_arg(args: List[str], position: int, name: str) -> int:
    if position >= len(args):
        raise InvalidInputError(f"missing argument '{name}'")
    try:
        return int(args[position])
    except ValueError:
        raise InvalidInputError(f"argument '{name}' must be an integer, got '{args[position]}'")


def _str_arg(args: List[str], position: int, name: str) -> str:
    if position >= len(args):
        raise InvalidInputError(f"missing argument '{name}'")
    return args[position]


def _read_file(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidInputError(f"cannot read '{path}': {e}")


def _write_file(path: str, text: str):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise InvalidInputError(f"cannot write '{path}': {e}")


def _condition_fields(report: ConditionReport) -> Dict[str, Any]:
    fields: Dict[str, Any] = {"condition": report.condition, "verdict": report.verdict.value, "cases": report.cases}
    if report.counterexample is not None:
        fields["counterexample"] = report.counterexample.model_dump(mode="json")
    return fields


def _prefix_fields(prefix: FSPrefix) -> Dict[str, Any]:
    return {
        "sources": list(prefix.sources),
        "terms": [t.serialize() for t in prefix.terms],
        "fs_strict_verified": prefix.fs_strict_verified,
        "sign_verified": prefix.sign_verified,
    }


class HarnessService:
    """
    Runs one subcommand against an experiment config and returns the exit
    status with the list of records. Records never depend on cache state.
    """

    def __init__(self):
        self.schema = settings.RECORDS_SCHEMA
        self.handlers: Dict[str, Callable[..., int]] = {
            "ball": self._ball,
            "dist": self._dist,
            "decompose": self._decompose,
            "extract-fs": self._extract_fs,
            "check-fs": self._check_fs,
            "verify-embed": self._verify_embed,
            "embed-cube": self._embed_cube,
            "so-check": self._so_check,
            "chain": self._chain,
            "verify-chain": self._verify_chain,
            "so-fixture": self._so_fixture,
        }

    def run(self, config: ExperimentConfig, command: str, args: List[str], options: Optional[RunOptions] = None) -> RunOutcome:
        options = options or RunOptions()
        records: List[Dict[str, Any]] = []

        def emit(record: str, **fields):
            records.append({"schema": self.schema, "record": record, **fields})

        logger.info(f"[Harness] {command} {' '.join(args)}")
        try:
            handler = self.handlers.get(command)
            if handler is None:
                raise InvalidInputError(f"unknown command '{command}' (expected one of {', '.join(COMMANDS)})")
            status = handler(config, args, options, emit)
        except TSeqError as e:
            logger.error(f"[Harness] {command} failed: {e.message}")
            extra: Dict[str, Any] = {}
            if isinstance(e, ExtractionExhaustedError) and e.partial is not None:
                extra["partial"] = _prefix_fields(e.partial)
            if isinstance(e, ChainExhaustedError) and e.partial is not None:
                extra["partial_steps"] = [[s.u.serialize(), s.v.serialize(), s.x.serialize()] for s in e.partial.steps]
            emit("error", command=command, **error_payload(e), **extra)
            status = e.exit_status
        except ValidationError as e:
            logger.error(f"[Harness] {command} rejected invalid input: {e}")
            emit("error", command=command, error="ValidationError", message=str(e), exit_status=3)
            status = 3
        return RunOutcome(exit_status=status, records=records)

    # --- Shared plumbing ---

    def _layers(self, config: ExperimentConfig, options: RunOptions) -> SumsetLayers:
        enabled = settings.CACHE_ENABLED and not options.no_cache
        cache = LayerCache(cache_dir=options.cache_dir, enabled=enabled)
        return cache.get_or_build(config.group_spec(), config.sequence_spec(), config.window_spec())

    def _element(self, spec: GroupSpec, text: str) -> Element:
        return parse_element(spec, text)

    def _prefix(self, config: ExperimentConfig, length: int) -> FSPrefix:
        if config.prefix is not None and config.prefix.indices:
            indices = config.prefix.indices
        else:
            indices = list(range(length))
        return prefix_from_indices(config.group_spec(), config.sequence_spec(), indices)

    # --- Subcommands ---

    def _ball(self, config, args, options, emit) -> int:
        layers = self._layers(config, options)
        emit("growth", window=layers.window.model_dump(), sizes=layers.growth_profile())
        depth = config.window.cover_depth if config.window.cover_depth is not None else layers.nmax
        for n in range(1, min(depth, layers.nmax) + 1):
            emit("covering", **layers.covering_number(n).model_dump())
        return 0

    def _dist(self, config, args, options, emit) -> int:
        layers = self._layers(config, options)
        x = self._element(layers.spec, _str_arg(args, 0, "x"))
        y = self._element(layers.spec, _str_arg(args, 1, "y"))
        d = layers.dist(x, y)
        emit("dist", x=x.serialize(), y=y.serialize(), dist=d, known=d is not None, nmax=layers.nmax)
        return 0 if d is not None else 2

    def _decompose(self, config, args, options, emit) -> int:
        layers = self._layers(config, options)
        x = self._element(layers.spec, _str_arg(args, 0, "x"))
        summands = layers.decompose(x)
        emit("decompose", x=x.serialize(), word_length=len(summands), summands=[s.serialize() for s in summands])
        return 0

    def _extract_fs(self, config, args, options, emit) -> int:
        length = _int_arg(args, 0, "L")
        layers = self._layers(config, options)
        prefix = fs_extractor.greedy_extract(
            layers.spec, layers.sequence, layers, length, budget=config.window.budget
        )
        emit("prefix", length=len(prefix), **_prefix_fields(prefix))
        return 0 if prefix.fs_strict_verified and prefix.sign_verified else 1

    def _check_fs(self, config, args, options, emit) -> int:
        layers = self._layers(config, options)
        if config.window.support is not None:
            length = config.window.support + 1
        else:
            length = min(layers.window.generators, layers.nmax + 1)
        prefix = self._prefix(config, length)

        reports = [check_fs_strict(prefix), fs_collision_oracle(prefix), check_sign_condition(prefix, layers)]
        for report in reports:
            emit("condition", **_condition_fields(report))
        if reports[0].passed:
            prefix = prefix.model_copy(update={"fs_strict_verified": True})
            for n in range(layers.nmax + 1):
                swap = check_swap_condition(prefix, layers, n)
                reports.append(swap)
                if not swap.passed:
                    break
            emit("condition", n=n, **_condition_fields(reports[-1]))
        return 0 if all(r.passed for r in reports) else 1

    def _verify_embed(self, config, args, options, emit) -> int:
        s = _int_arg(args, 0, "s")
        nmax = _int_arg(args, 1, "nmax")
        layers = self._layers(config, options)
        prefix = self._prefix(config, s + 1)
        report = verify_embedding(prefix, layers, s, nmax)
        fields = report.model_dump(mode="json", exclude={"window"})
        emit("embed", sources=list(prefix.sources), **fields)
        return 0 if report.passed else 1

    def _embed_cube(self, config, args, options, emit) -> int:
        d = _int_arg(args, 0, "d")
        layers = self._layers(config, options)
        prefix = self._prefix(config, d)
        cert = embed_cube(prefix, layers, d)
        emit(
            "cube",
            dimension=cert.dimension,
            images=[x.serialize() for x in cert.images],
            distances=cert.distances.tolist(),
            min_dist_by_hamming=cert.min_dist_by_hamming,
            injective=cert.injective,
            forward_ok=cert.forward_ok,
            exact_within=cert.exact_within,
        )
        return 0 if cert.injective and cert.forward_ok else 1

    def _so_check(self, config, args, options, emit) -> int:
        path = _str_arg(args, 0, "f-file")
        m = _int_arg(args, 1, "m")
        layers = self._layers(config, options)
        f = SOFunction.parse(_read_file(path), layers)
        radius = so_radius(f, layers)
        constancy = constancy_check(f, m, layers)
        emit(
            "so_radius",
            radius=radius.radius,
            slowly_oscillating=radius.slowly_oscillating,
            tested_balls=radius.tested_balls,
            skipped_balls=radius.skipped_balls,
            witness_center=None if radius.witness_center is None else radius.witness_center.serialize(),
        )
        emit(
            "constancy",
            m=m,
            verdict=constancy.verdict.value,
            witness=None if constancy.witness is None else [x.serialize() for x in constancy.witness],
        )
        return 0 if radius.radius is not None and radius.radius <= m else 1

    def _chain(self, config, args, options, emit) -> int:
        layers = self._layers(config, options)
        y = self._element(layers.spec, _str_arg(args, 0, "y"))
        z = self._element(layers.spec, _str_arg(args, 1, "z"))
        m = _int_arg(args, 2, "m")
        cert = chain_service.connect_chain(y, z, m, layers, layers.sequence, budget=config.window.budget)
        if len(args) > 3:
            _write_file(args[3], cert.to_text())
        emit(
            "chain",
            y=y.serialize(),
            z=z.serialize(),
            radius=cert.radius,
            requested_radius=cert.requested_radius,
            steps=[[s.u.serialize(), s.v.serialize(), s.x.serialize()] for s in cert.steps],
        )
        return 0

    def _verify_chain(self, config, args, options, emit) -> int:
        layers = self._layers(config, options)
        cert = ChainCertificate.parse(_read_file(_str_arg(args, 0, "cert-file")), layers)
        m = _int_arg(args, 1, "m") if len(args) > 1 else None
        check = verify_chain(cert, layers, m)
        emit("chain_check", **check.model_dump(mode="json"))
        return 0 if check.verdict == Verdict.PASS else 1

    def _so_fixture(self, config, args, options, emit) -> int:
        m = _int_arg(args, 0, "m")
        layers = self._layers(config, options)
        f = random_so_function(m, layers, options.seed)
        if len(args) > 1:
            _write_file(args[1], f.to_text())
        emit(
            "so_fixture",
            m=m,
            seed=options.seed,
            default=f.default,
            values={x.serialize(): v for x, v in sorted(f.values.items())},
        )
        return 0


harness_service = HarnessService()
