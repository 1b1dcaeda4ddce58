"""
Command Line Module
Entry point exposing the library as reproducible table emitters
"""
import argparse
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, IO, List, Mapping, Optional

from pydantic import ValidationError

from . import __version__
from .errors import DomainError, PdtpError
from .models import (
    COMMANDS,
    ENV_PREFIX,
    OUTPUT_FORMATS,
    CtParams,
    NumericsSettings,
    PdtpParams,
    Route,
    RunConfig,
    TailMode,
)
from .report import ReportBuilder
from .utils import convert_numpy_types, parse_float_list, parse_int_range, parse_real_grid

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# every key accepted as a flag, an environment variable and a config-file entry
OPTION_KEYS = (
    "alpha", "nu", "xi", "xi0", "t", "n", "t-grid", "h-list", "mode", "route",
    "graph", "graph-name", "start", "seed", "walkers", "threads", "eps-tail",
    "output", "format", "log-level",
)
# header keys that are not options
ECHO_ONLY_KEYS = ("schema", "version", "command")

COMMAND_HELP = {
    "pmf": "waiting-time pmf theta(t)",
    "states": "state probabilities Phi^(n)(t)",
    "ct-states": "continuous-time state probabilities",
    "tail": "power-law tail asymptote against the exact value",
    "limit-probe": "well-scaled continuous-time limit gaps",
    "walk": "subordinated walk transition matrix P(t)",
    "simulate": "Monte Carlo ensemble against the analytic law",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", help="fractional order in (0, 1]")
    common.add_argument("--nu", help="Prabhakar exponent > 0")
    common.add_argument("--xi", help="discrete time scale > 0")
    common.add_argument("--xi0", help="continuous time scale > 0")
    common.add_argument("--t", help="integer times: 3, 1..7 or 1,4,16")
    common.add_argument("--n", help="state indices: 3, 1..7 or 1,4,16")
    common.add_argument("--t-grid", dest="t_grid", help="real times: log:a..b:k, lin:a..b:k or a list")
    common.add_argument("--h-list", dest="h_list", help="comma-separated step sizes")
    common.add_argument("--mode", choices=[m.value for m in TailMode])
    common.add_argument("--route", choices=[r.value for r in Route])
    common.add_argument("--graph", help="edge-list file")
    common.add_argument("--graph-name", dest="graph_name", help="k2, triangle, star3, cycle5 or gnp10")
    common.add_argument("--start", help="start node")
    common.add_argument("--seed", help="master seed (64-bit)")
    common.add_argument("--walkers", help="ensemble size")
    common.add_argument("--threads", help="worker threads")
    common.add_argument("--eps-tail", dest="eps_tail", help="sampler tail accuracy")
    common.add_argument("--output", help="output path (stdout by default)")
    common.add_argument("--format", choices=list(OUTPUT_FORMATS))
    common.add_argument("--log-level", dest="log_level")
    common.add_argument("--config", help="key=value file with the same keys as the flags")

    parser = argparse.ArgumentParser(prog="pdtp", description="Discrete-time Prabhakar counting process toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub.add_parser(command, parents=[common], help=COMMAND_HELP[command])
    return parser


def read_config_file(path: str) -> Dict[str, str]:
    """
    Read a flat key=value file; `#` lines are comments

    The header block of a CSV report with its `# ` prefixes removed is a valid
    config file.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DomainError(f"cannot read config file {path!r}: {e}", path=path)
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("_", "-")
        if not sep:
            raise DomainError(f"{path}:{lineno}: expected key=value", path=path, line=lineno)
        if key in ECHO_ONLY_KEYS:
            continue
        if key not in OPTION_KEYS:
            raise DomainError(f"{path}:{lineno}: unknown key {key!r}", path=path, line=lineno)
        values[key] = value.strip()
    return values


def read_environment(environ: Mapping[str, str]) -> Dict[str, str]:
    values = {}
    for key in OPTION_KEYS:
        value = environ.get(ENV_PREFIX + key.upper().replace("-", "_"))
        if value is not None:
            values[key] = value
    return values


def resolve_options(args: argparse.Namespace, environ: Mapping[str, str]) -> Dict[str, str]:
    """Flags over PDTP_* environment over config file"""
    options: Dict[str, str] = {}
    if args.config:
        options.update(read_config_file(args.config))
    options.update(read_environment(environ))
    for key in OPTION_KEYS:
        value = getattr(args, key.replace("-", "_"))
        if value is not None:
            options[key] = value
    return options


def build_run_config(command: str, options: Mapping[str, str]) -> RunConfig:
    """
    Parse option strings into a validated RunConfig

    Args:
        command: Subcommand name
        options: Merged option strings

    Returns:
        RunConfig
    """
    try:
        alpha = options.get("alpha")
        nu = options.get("nu")
        params = ct = None
        wants_ct = command in ("ct-states", "limit-probe") or (command == "tail" and "xi" not in options)
        if wants_ct and "xi0" in options:
            ct = CtParams(alpha=alpha, nu=nu, xi0=options["xi0"])
        elif not wants_ct and "xi" in options:
            params = PdtpParams(alpha=alpha, nu=nu, xi=options["xi"])

        fields = {
            "command": command,
            "params": params,
            "ct": ct,
            "t_values": parse_int_range(options["t"]) if "t" in options else [],
            "n_values": parse_int_range(options["n"]) if "n" in options else [],
            "t_grid": parse_real_grid(options["t-grid"]) if "t-grid" in options else [],
            "h_list": parse_float_list(options["h-list"]) if "h-list" in options else [],
            "route": options.get("route"),
            "graph_path": options.get("graph"),
            "graph_name": options.get("graph-name"),
            "start": options.get("start"),
            "eps_tail": options.get("eps-tail"),
            "output": options.get("output"),
        }
        for key, name in (("mode", "tail_mode"), ("seed", "seed"), ("walkers", "walkers"),
                          ("threads", "threads"), ("format", "fmt")):
            if key in options:
                fields[name] = options[key]
        return RunConfig(**fields)
    except ValidationError as e:
        errors = e.errors(include_url=False)
        raise DomainError(
            f"invalid parameters: {errors[0]['msg']}",
            fields=[".".join(str(part) for part in err["loc"]) for err in errors],
        )
    except ValueError as e:
        raise DomainError(str(e))


def run(config: RunConfig, settings: NumericsSettings, stream: IO[str]) -> None:
    """Build the table for config and write it to stream"""
    builder = ReportBuilder(config, settings)
    df = builder.build()
    builder.write(df, stream)
    logger.info(f"Wrote {len(df)} rows ({builder.schema})")


def main(
    argv: Optional[List[str]] = None,
    environ: Optional[Mapping[str, str]] = None,
    stdout: Optional[IO[str]] = None,
    stderr: Optional[IO[str]] = None
) -> int:
    """
    Run one command

    Args:
        argv: Arguments without the program name (sys.argv[1:] by default)
        environ: Environment mapping (os.environ by default)
        stdout: Output stream when no --output is given
        stderr: Stream for the error record

    Returns:
        Exit status: 0 on success, 2 on a library error, 1 otherwise
    """
    environ = os.environ if environ is None else environ
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr

    args = build_parser().parse_args(argv)
    try:
        options = resolve_options(args, environ)
        level = options.get("log-level", "INFO").upper()
        logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)

        try:
            settings = NumericsSettings.from_env(environ)
        except ValidationError as e:
            raise DomainError(f"invalid {ENV_PREFIX}* numeric setting: {e.errors(include_url=False)[0]['msg']}")
        config = build_run_config(args.command, options)

        if config.output:
            # rendered in memory so a failed run leaves no partial file
            buffer = io.StringIO()
            run(config, settings, buffer)
            with open(config.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(buffer.getvalue())
        else:
            run(config, settings, stdout)
        return 0
    except PdtpError as e:
        logger.error(f"{args.command} failed: {e.message}")
        print(json.dumps(convert_numpy_types(e.to_record())), file=stderr)
        return 2
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {e}", exc_info=True)
        record = {"status": "failed", "error": str(e), "error_type": type(e).__name__}
        print(json.dumps(record), file=stderr)
        return 1
