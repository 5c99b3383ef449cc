"""
Command-line entry point: run, sweep, map and validate scenario files.

Exit codes: 0 success, 1 configuration error, 2 runtime or physics error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import structlog

from config import settings
from core_simulation.errors import ConfigError, LinkSimError, OutputError
from core_simulation.fiber_engine import FiberSpec
from core_simulation.metrics import dispersion_map, residual_dispersion
from core_simulation.outputs import emit_outputs, write_maps
from core_simulation.runner import MetricsReport, best_value, channel_transmitters, run_scenario, run_sweep
from core_simulation.scenario import ScenarioConfig, SweepDirective, config_hash, load_config, with_overrides

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


def configure_logging(level: str = "INFO") -> None:
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        numeric = logging.INFO
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric),
        # resolve stderr per logger so redirected streams are honoured
        logger_factory=lambda *args: structlog.PrintLogger(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"--values expects comma-separated numbers: {e}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simulate", description="DWDM direct-detection link simulator")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="structlog level (default from LINKSIM_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_run_options=True):
        p.add_argument("config", help="scenario file (.cfg, YAML)")
        p.add_argument("--out", help="output directory (default: LINKSIM_OUT_DIR/<scenario name>)")
        if with_run_options:
            p.add_argument("--seed", type=int, help="override master_seed")
            p.add_argument("--bits", type=int, help="override grid.n_bits")
            p.add_argument("--samples-per-bit", type=int, help="override grid.samples_per_bit")
            p.add_argument("--threads", type=int, default=settings.THREADS, help="worker threads")

    add_common(sub.add_parser("run", help="run one scenario end to end"))
    sweep = sub.add_parser("sweep", help="run a parameter sweep")
    add_common(sweep)
    sweep.add_argument("--param", help="dotted config path, e.g. transmitter.laser_power_dbm")
    sweep.add_argument("--values", help="comma-separated values")
    add_common(sub.add_parser("map", help="dispersion map only (no propagation)"), with_run_options=False)
    sub.add_parser("validate", help="check a scenario file").add_argument("config")
    return parser


def _apply_cli_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "bits", None) is not None:
        overrides["grid.n_bits"] = args.bits
    if getattr(args, "samples_per_bit", None) is not None:
        overrides["grid.samples_per_bit"] = args.samples_per_bit
    return with_overrides(config, overrides) if overrides else config


def _out_dir(args, config: ScenarioConfig) -> Path:
    return Path(args.out) if args.out else settings.OUT_DIR / config.name


def _print_report(report: MetricsReport) -> None:
    print(f"✅ {report.scenario}: {len(report.channels)} channels over {report.link_length_km:.1f} km")
    for channel in report.channels:
        if channel.aligned:
            print(
                f"   ch{channel.channel_index:02d} {channel.wavelength_nm:.2f} nm  "
                f"Prx {channel.rx_power_dbm:7.2f} dBm  Q {channel.q_db:6.2f} dB  BER {channel.ber_estimated:.3e}"
            )
        else:
            print(f"   ❌ ch{channel.channel_index:02d} {channel.wavelength_nm:.2f} nm not aligned: {channel.message}")


def cmd_run(args) -> int:
    config = _apply_cli_overrides(load_config(args.config), args)
    report = run_scenario(config, threads=max(1, args.threads))
    _print_report(report)
    written = emit_outputs(report, _out_dir(args, config))
    print(f"✅ wrote {len(written)} files to {written[0].parent}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _apply_cli_overrides(load_config(args.config), args)
    directive = config.sweep
    if args.param or args.values:
        if not (args.param and args.values):
            raise ConfigError("--param and --values must be given together")
        values = _parse_values(args.values)
        if len(values) < 2:
            raise ConfigError(f"sweep over '{args.param}' needs at least 2 values")
        directive = SweepDirective(param=args.param, values=values)
        # validates the path against the config
        config = with_overrides(config, {"sweep": directive.model_dump()})
    result = run_sweep(config, directive, threads=max(1, args.threads), progress=True)
    for point in result.points:
        ber = point.report.worst_ber
        print(f"   {result.param}={point.value:g}  worst Q {point.report.worst_q_db:6.2f} dB  worst BER {ber:.3e}")
    if any(not math.isnan(p.report.worst_q_db) for p in result.points):
        print(f"✅ best {result.param} = {best_value(result):g}")
    written = emit_outputs(result, _out_dir(args, config))
    print(f"✅ wrote {len(written)} files to {written[0].parent}")
    return EXIT_OK


def cmd_map(args) -> int:
    config = load_config(args.config)
    elements = config.link_elements()
    transmitters = channel_transmitters(config)
    pre_dcm = transmitters[0].pre_dcm_ps_nm or 0.0
    points = dispersion_map(elements, pre_dcm, per_km=config.output.per_km_maps)
    residuals = residual_dispersion(config.channel_plan, elements, transmitters)
    report = MetricsReport(
        scenario=config.name,
        channels=(),
        dispersion_map=tuple(points),
        residual_dispersion=tuple(residuals),
        power_map=(),
        tx_spectrum=None,
        rx_spectrum=None,
        master_seed=config.master_seed,
        config_hash=config_hash(config),
        link_length_km=config.link_length_km,
        wall_time_s=0.0,
    )
    span = config.span.as_span()
    if span is not None:
        print(f"   span length {span.length_km:.1f} km, residual {span.residual_dispersion:+.1f} ps/nm")
    print(f"   link length {config.link_length_km:.1f} km, pre-DCM {pre_dcm:+.1f} ps/nm")
    if elements and isinstance(elements[0], FiberSpec):
        first = elements[0]
        print(f"   after the first {first.label} {first.cumulative_dispersion():+.1f} ps/nm without pre-DCM")
    print(f"   link dispersion {points[-1].link_dispersion_ps_nm:+.1f} ps/nm without pre-DCM")
    finals = [r.final_dispersion_ps_nm for r in residuals]
    print(f"✅ final dispersion {min(finals):+.3f} .. {max(finals):+.3f} ps/nm")
    written = write_maps(report, _out_dir(args, config))
    print(f"✅ wrote {len(written)} files to {written[0].parent}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_config(args.config)
    print(f"✅ {args.config} is valid: {config.channel_plan.n_channels} channels, {config.loops} loops")
    print(f"   config hash {config_hash(config)}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "map": cmd_map, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_IO
    except LinkSimError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_RUNTIME
