"""Cavity QND command line

Runs one computation and writes plot-ready CSV or JSON:

    python -m cavity_qnd transmittance --d 40
    python -m cavity_qnd sweep --mode symmetric --d 5,10,20,40,80
    python -m cavity_qnd metrics --d-signal 12.5 --d-ancilla 40 --format json
    python -m cavity_qnd find-duration --target 0.10 --mode symmetric
    python -m cavity_qnd shape --d-signal 80 --d-ancilla 160 --shape rectangular
    python -m cavity_qnd oracle-check
"""
import argparse
import io
import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from dotenv.parser import parse_stream
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from . import __version__
from .config import get_settings
from .errors import ConvergenceError, InvalidParameterError
from .models import (
    CavityParams,
    Channel,
    Command,
    DurationMode,
    OutputFormat,
    PulseShape,
    PulseSpec,
    QndMetrics,
    RunConfig,
    WeakLightSpec,
)
from .services import metrics_service, one_photon_service, oracle_service, two_photon_service

COLUMNS = {
    Command.TRANSMITTANCE: ["d", "p_L", "p_R"],
    Command.METRICS: ["d_signal", "d_ancilla", "p_suc", "eqnd", "p1R"],
    Command.SWEEP: ["d_signal", "d_ancilla", "p_suc", "eqnd", "p1R"],
    Command.SHAPE: ["delta", "amplitude"],
    Command.ORACLE_CHECK: ["check", "value", "reference", "deviation", "passed"],
    Command.FIND_DURATION: ["target", "d_signal", "d_ancilla", "p_suc", "eqnd", "p1R"],
}

TOLERANCE_FLAGS = {
    "tol_1d": "One-photon quadrature tolerance",
    "tol_2d": "Two-photon quadrature tolerance",
    "tol_root": "Tolerance on P_suc at the root",
}
GRID_FIELDS = {"grid_lo", "grid_hi", "grid_n"}
OVERRIDE_FIELDS = GRID_FIELDS | set(TOLERANCE_FLAGS)

# Grid and tolerance settings each command honours
ACCEPTED_OVERRIDES = {
    Command.TRANSMITTANCE: GRID_FIELDS | {"tol_1d"},
    Command.METRICS: GRID_FIELDS | {"tol_1d", "tol_2d"},
    Command.SWEEP: GRID_FIELDS | {"tol_1d", "tol_2d"},
    Command.FIND_DURATION: {"tol_1d", "tol_2d", "tol_root"},
    Command.SHAPE: set(),
    Command.ORACLE_CHECK: {"tol_1d"},
}

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2

BRUTE_FORCE_DURATION = 10.0
BRUTE_FORCE_POINTS = 8000


class ConfigFileError(InvalidParameterError):
    """Config file missing or malformed"""


# ===========================================
# CONFIGURATION
# ===========================================

def build_parser() -> argparse.ArgumentParser:
    # Absent flags stay out of the namespace so the config file can fill them
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="key=value file; flags override its entries")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], help="Data format (default csv)")
    common.add_argument("--output", "-o", help="Data file (default $QND_OUTPUT_DIR/<command>.<format> or stdout)")
    common.add_argument("--log-level", help="loguru level for stderr")

    pulse = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    pulse.add_argument("--shape", choices=[s.value for s in PulseShape], help="Pulse shape")

    grid = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    grid.add_argument("--grid-lo", type=float, help="Grid lower bound (with --grid-hi, --grid-n)")
    grid.add_argument("--grid-hi", type=float, help="Grid upper bound")
    grid.add_argument("--grid-n", type=int, help="Grid point count")

    parser = argparse.ArgumentParser(prog="cavity_qnd", description="Cavity QND photon detector simulations")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_command(command: Command, description: str, *parents: argparse.ArgumentParser) -> argparse.ArgumentParser:
        sub = commands.add_parser(command.value, parents=[common, *parents], help=description)
        for name in sorted(ACCEPTED_OVERRIDES[command] & set(TOLERANCE_FLAGS)):
            sub.add_argument(f"--{name.replace('_', '-')}", type=float, help=TOLERANCE_FLAGS[name])
        return sub

    transmittance = add_command(Command.TRANSMITTANCE, "One-photon p_L and p_R per duration", pulse, grid)
    transmittance.add_argument("--d", help="Comma-separated durations in units of 1/Gamma")

    metrics = add_command(Command.METRICS, "EQND and P_suc for one pair", pulse, grid)
    metrics.add_argument("--d-signal", type=float, help="Signal duration")
    metrics.add_argument("--d-ancilla", type=float, help="Ancilla duration (default: symmetric)")
    metrics.add_argument("--mode", choices=[m.value for m in DurationMode])
    metrics.add_argument("--weight", type=float, help="One-photon weight of a weak-light ancilla")

    sweep = add_command(Command.SWEEP, "Metrics over sorted durations", pulse, grid)
    sweep.add_argument("--d", help="Comma-separated sorted durations")
    sweep.add_argument("--mode", choices=[m.value for m in DurationMode])
    sweep.add_argument("--d-ancilla", type=float, help="Fixed ancilla duration in asymmetric mode")

    find = add_command(Command.FIND_DURATION, "Duration reaching a target P_suc", pulse)
    find.add_argument("--target", type=float, help="Success probability in (0, 1)")
    find.add_argument("--mode", choices=[m.value for m in DurationMode])
    find.add_argument("--d-ancilla", type=float, help="Fixed ancilla duration in asymmetric mode")

    shape = add_command(Command.SHAPE, "Heralded signal shape", pulse)
    shape.add_argument("--d-signal", type=float)
    shape.add_argument("--d-ancilla", type=float)
    shape.add_argument("--x-detect", type=float, help="Ancilla detection coordinate")
    shape.add_argument("--window", type=float, help="Half-width of the delay window")

    oracle = add_command(Command.ORACLE_CHECK, "Compare against the oracles")
    oracle.add_argument("--duration", type=float, help="Gaussian pulse duration of the full-model check")
    oracle.add_argument("--kappa-ratio", type=float, help="kappa/g of the full-model check")
    oracle.add_argument("--points", type=int, help="Random points of the brute-force check")
    oracle.add_argument("--seed", type=int, help="Seed for the brute-force points")
    return parser


def read_config_file(path: Path) -> dict[str, Optional[str]]:
    """Entries of a dotenv-style key=value file, keys normalized to field names"""
    path = Path(path)
    if not path.is_file():
        raise ConfigFileError(f"cannot read config file {path}")
    with path.open() as stream:
        malformed = [b.original.line for b in parse_stream(stream) if b.error or (b.key and b.value is None)]
    if malformed:
        raise ConfigFileError(f"{path}: expected key=value on line(s) {', '.join(map(str, malformed))}")
    entries = dotenv_values(path, interpolate=False)
    if "command" in entries:
        raise ConfigFileError(f"{path}: the command is given on the command line")
    return {key.replace("-", "_"): value for key, value in entries.items()}


def resolve_config(argv: Optional[list[str]] = None) -> RunConfig:
    """Merge the config file and flags into a validated RunConfig"""
    flags = vars(build_parser().parse_args(argv))
    config_path = flags.pop("config", None)
    values = read_config_file(Path(config_path)) if config_path else {}
    values.update(flags)
    return RunConfig.model_validate(values)


def check_overrides(config: RunConfig) -> None:
    """Reject grid and tolerance settings the command would silently ignore"""
    unused = (config.model_fields_set & OVERRIDE_FIELDS) - ACCEPTED_OVERRIDES[config.command]
    if unused:
        raise InvalidParameterError(f"{config.command.value} does not use {', '.join(sorted(unused))}")


@contextmanager
def tolerance_overrides(config: RunConfig) -> Iterator[None]:
    """Apply tolerance flags to the shared settings for one run"""
    settings = get_settings()
    overrides = {
        name: getattr(config, name)
        for name in ("tol_1d", "tol_2d", "tol_root")
        if getattr(config, name) is not None
    }
    saved = {name: getattr(settings, name) for name in overrides}
    for name, value in overrides.items():
        setattr(settings, name, value)
    try:
        yield
    finally:
        for name, value in saved.items():
            setattr(settings, name, value)


# ===========================================
# COMMANDS
# ===========================================

def _metrics_row(m: QndMetrics) -> dict:
    return {"d_signal": m.d_signal, "d_ancilla": m.d_ancilla, "p_suc": m.p_suc, "eqnd": m.eqnd, "p1R": m.p1R_ancilla}


def _transmittance(config: RunConfig) -> tuple[list[dict], float]:
    rows, error = [], 0.0
    for d in config.d:
        result = one_photon_service.output(PulseSpec(shape=config.shape, duration=d), config.grid())
        rows.append({"d": d, "p_L": result.p_L, "p_R": result.p_R})
        error = max(error, result.error_estimate)
    return rows, error


def _ancilla_duration(config: RunConfig, d_signal: float) -> float:
    if config.d_ancilla is not None:
        return config.d_ancilla
    if config.mode is DurationMode.ASYMMETRIC:
        return get_settings().asymmetric_ancilla
    return d_signal


def _metrics(config: RunConfig) -> tuple[list[dict], float]:
    m = metrics_service.qnd_metrics(
        config.d_signal, _ancilla_duration(config, config.d_signal), config.shape, config.grid()
    )
    if config.weight < 1.0:
        m = metrics_service.weak_light_metrics(m, WeakLightSpec(one_photon_weight=config.weight))
    for flag in m.flags:
        logger.warning(flag)
    return [_metrics_row(m)], m.error_estimate


def _sweep(config: RunConfig) -> tuple[list[dict], float]:
    points = metrics_service.sweep(config.mode, config.d, config.d_ancilla, config.shape, config.grid())
    return [_metrics_row(m) for m in points], max(m.error_estimate for m in points)


def _find_duration(config: RunConfig) -> tuple[list[dict], float]:
    if config.mode is DurationMode.SYMMETRIC and config.d_ancilla is not None:
        raise InvalidParameterError("--d-ancilla applies to the asymmetric mode only")
    _, m = metrics_service.find_duration_for_success(config.target, config.mode, config.d_ancilla, config.shape)
    return [{"target": config.target, **_metrics_row(m)}], m.error_estimate


def _shape(config: RunConfig) -> tuple[list[dict], float]:
    result = metrics_service.conditional_signal_shape(
        config.d_signal,
        _ancilla_duration(config, config.d_signal),
        config.x_detect,
        shape=config.shape,
        window=config.window,
    )
    logger.info(f"heralded shape decay rate {result.decay_rate:.6f}, normalization {result.aleph:.6g}")
    rows = [{"delta": float(d), "amplitude": float(a)} for d, a in zip(result.delta, result.amplitude)]
    return rows, 0.0


def _check(name: str, value: float, reference: float, deviation: float, passed: bool) -> dict:
    return {"check": name, "value": value, "reference": reference, "deviation": deviation, "passed": bool(passed)}


def _oracle_check(config: RunConfig) -> tuple[list[dict], float]:
    params = CavityParams.dimensionless(config.kappa_ratio)
    spec = PulseSpec(shape=PulseShape.GAUSSIAN, duration=config.duration)
    state = oracle_service.full_model_propagate(params, spec)
    effective = one_photon_service.output(spec)
    relative = abs(state.p_R - effective.p_R) / effective.p_R
    long_gap = oracle_service.effective_deviation(params, spec)
    short_gap = oracle_service.effective_deviation(params, PulseSpec(shape=PulseShape.GAUSSIAN, duration=0.5))

    brute_spec = PulseSpec(shape=PulseShape.GAUSSIAN, duration=BRUTE_FORCE_DURATION)
    rng = np.random.default_rng(config.seed)
    channels = list(Channel)
    worst = 0.0
    for x1, x2 in rng.uniform(-BRUTE_FORCE_DURATION, BRUTE_FORCE_DURATION, size=(config.points, 2)):
        channel = channels[rng.integers(len(channels))]
        fast = two_photon_service.amplitude(brute_spec, brute_spec, channel, x1, x2)
        brute = oracle_service.brute_force_two_photon(brute_spec, brute_spec, channel, x1, x2, BRUTE_FORCE_POINTS)
        worst = max(worst, abs(fast - brute))

    rows = [
        _check("full_model_p_R", state.p_R, effective.p_R, relative, relative < 0.05),
        _check("full_model_norm_drift", state.max_norm_drift, 0.0, state.max_norm_drift, state.max_norm_drift < 1e-6),
        _check("short_pulse_deviation", short_gap, long_gap, short_gap - long_gap, short_gap > long_gap),
        _check("brute_force_two_photon", worst, 0.0, worst, worst < 1e-6),
    ]
    return rows, max(state.error_estimate, effective.error_estimate)


HANDLERS = {
    Command.TRANSMITTANCE: _transmittance,
    Command.METRICS: _metrics,
    Command.SWEEP: _sweep,
    Command.SHAPE: _shape,
    Command.ORACLE_CHECK: _oracle_check,
    Command.FIND_DURATION: _find_duration,
}


# ===========================================
# OUTPUT
# ===========================================

def render(config: RunConfig, rows: list[dict], error_estimate: float) -> str:
    """Serialize rows in the requested format"""
    columns = COLUMNS[config.command]
    if config.format is OutputFormat.CSV:
        buffer = io.StringIO()
        pd.DataFrame(rows, columns=columns).to_csv(buffer, index=False, float_format="%.12g", lineterminator="\n")
        return buffer.getvalue()
    settings = get_settings()
    document = {
        "command": config.command.value,
        "columns": columns,
        "rows": [{c: _plain(row[c]) for c in columns} for row in rows],
        "tolerances": {"tol_1d": settings.tol_1d, "tol_2d": settings.tol_2d, "tol_root": settings.tol_root},
        "error_estimate": error_estimate,
    }
    return json.dumps(document, indent=2) + "\n"


def _plain(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, str):
        return value
    value = float(value)
    return None if math.isnan(value) else value


def destination(config: RunConfig) -> Optional[Path]:
    if config.output is not None:
        return config.output
    output_dir = get_settings().output_dir
    if output_dir is not None:
        return Path(output_dir) / f"{config.command.value}.{config.format.value}"
    return None


def summary(config: RunConfig, rows: list[dict], limit: int = 25) -> Table:
    table = Table(title=f"cavity_qnd {config.command.value}")
    columns = COLUMNS[config.command]
    for column in columns:
        table.add_column(column, justify="right")
    for row in rows[:limit]:
        table.add_row(*(f"{row[c]:.6g}" if isinstance(row[c], float) else str(row[c]) for c in columns))
    if len(rows) > limit:
        table.caption = f"{len(rows) - limit} more rows in the data output"
    return table


def run(config: RunConfig) -> int:
    """Execute one command and emit its data; returns the exit code"""
    check_overrides(config)
    with tolerance_overrides(config):
        rows, error = HANDLERS[config.command](config)
        text = render(config, rows, error)
    target = destination(config)
    if target is None:
        sys.stdout.write(text)
        console = Console(stderr=True)
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)
        logger.info(f"wrote {len(rows)} rows to {target}")
        console = Console()
    console.print(summary(config, rows))
    return EXIT_OK


def configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper())


def main(argv: Optional[list[str]] = None) -> int:
    """CLI entry point"""
    try:
        config = resolve_config(argv)
        configure_logging(config.log_level or get_settings().log_level)
    except SystemExit as e:
        # argparse exits 2 on bad flags
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID
    except (ValidationError, ValueError) as e:
        print(f"❌ Invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID

    try:
        return run(config)
    except ConvergenceError as e:
        print(f"❌ Not converged: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (ValidationError, InvalidParameterError) as e:
        print(f"❌ Invalid parameters: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
