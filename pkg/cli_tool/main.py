import argparse
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, List, Optional

from colorama import Fore, Style, init
from pydantic import ValidationError

from app.config import settings
from app.logger import logger
from app.models.schemas import ExperimentConfig
from app.services.harness import RunOptions, RunOutcome, encode_record, harness_service

# Positional arguments per subcommand, in order; names ending in '?' are optional
COMMAND_ARGS: Dict[str, List[str]] = {
    "ball": [],
    "dist": ["x", "y"],
    "decompose": ["x"],
    "extract-fs": ["L"],
    "check-fs": [],
    "verify-embed": ["s", "nmax"],
    "embed-cube": ["d"],
    "so-check": ["f_file", "m"],
    "chain": ["y", "z", "m", "out?"],
    "verify-chain": ["cert_file", "m?"],
    "so-fixture": ["m", "out?"],
}

VERDICT_COLOURS = {"pass": Fore.GREEN, "fail": Fore.RED}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tseq",
        description="Exact finite-window experiments on coarse structures of T-sequences",
    )
    parser.add_argument("--config", required=True, help="experiment TOML file")
    parser.add_argument("--no-cache", action="store_true", help="ignore and do not write the layer cache")
    parser.add_argument("--cache-dir", default=None, help="layer cache directory (default: TSEQ_CACHE_DIR)")
    parser.add_argument("--output", choices=("human", "records"), default="human")
    parser.add_argument("--seed", type=int, default=0, help="seed for fixture generation")

    sub = parser.add_subparsers(dest="command", required=True)
    for command, names in COMMAND_ARGS.items():
        cmd = sub.add_parser(command)
        for name in names:
            if name.endswith("?"):
                cmd.add_argument(name[:-1], nargs="?", default=None)
            else:
                cmd.add_argument(name)
    return parser


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return ExperimentConfig.model_validate(data)


def command_args(ns: argparse.Namespace) -> List[str]:
    values = []
    for name in COMMAND_ARGS[ns.command]:
        value = getattr(ns, name.rstrip("?"))
        if value is not None:
            values.append(value)
    return values


def format_value(value: Any) -> str:
    if isinstance(value, list):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {format_value(v)}" for k, v in value.items()) + "}"
    if value == "":
        return "0"
    if value is None:
        return "?"
    return str(value)


def print_human(outcome: RunOutcome):
    for record in outcome.records:
        kind = record["record"]
        header = f"{Style.BRIGHT}{kind}{Style.RESET_ALL}"
        verdict = record.get("verdict")
        if verdict in VERDICT_COLOURS:
            header += f" {VERDICT_COLOURS[verdict]}{verdict.upper()}{Style.RESET_ALL}"
        elif kind == "error":
            header += f" {Fore.YELLOW}{record['error']}{Style.RESET_ALL}"
        print(header)
        for key in sorted(record):
            if key in ("schema", "record", "verdict"):
                continue
            if key == "distances":
                print("  distances:")
                for row in record[key]:
                    print("    " + " ".join("?" if v < 0 else str(v) for v in row))
                continue
            print(f"  {key}: {format_value(record[key])}")
    print(f"exit status {outcome.exit_status}")


def config_error(error: str, message: str) -> str:
    return encode_record(
        {"schema": settings.RECORDS_SCHEMA, "record": "error", "error": error, "message": message, "exit_status": 3}
    )


def main(argv: Optional[List[str]] = None) -> int:
    init()
    parser = build_parser()
    ns = parser.parse_args(argv)

    try:
        config = load_config(ns.config)
    except (OSError, tomllib.TOMLDecodeError) as e:
        logger.error(f"[CLI] Cannot read config {ns.config}: {e}")
        print(config_error("InvalidInputError", str(e)))
        return 3
    except ValidationError as e:
        logger.error(f"[CLI] Invalid config {ns.config}: {e}")
        print(config_error("ValidationError", str(e)))
        return 3

    options = RunOptions(no_cache=ns.no_cache, cache_dir=ns.cache_dir, seed=ns.seed)
    outcome = harness_service.run(config, ns.command, command_args(ns), options)

    if ns.output == "records":
        for line in outcome.lines():
            print(line)
    else:
        print_human(outcome)
    return outcome.exit_status


if __name__ == "__main__":
    sys.exit(main())
