"""Command-line interface.

Subcommands: budget, trace, transmit, pat-sim, filter-sim, sweep,
scenarios. Configuration precedence: built-in defaults < preset
(--scenario) < config file (--config or FSO_SIM_CONFIG) < --set
overrides. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys


from . import __version__, pipeline, reporting, scenarios
from .atmosphere import rytov_variance, total_atmospheric_loss
from .channel_trace import coherence_time, generate_trace, trace_to_binary, trace_to_csv
from .errors import FsoLinkError
from .linkbudget import received_power_dbm
from .modem import Pam4Config
from .pat import JitterParams, QdGeometry, run_tracking_loop
from .spatial_filter import FilterDemoScenario, filtering_ber_demo, grid_from_csv


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scenario",
        metavar="NAME",
        help=f"weather preset ({', '.join(scenarios.preset_names())})",
    )
    parser.add_argument(
        "--config",
        metavar="PATH",
        help="JSON config file (falls back to $FSO_SIM_CONFIG)",
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (dotted path, e.g. scenario.visibility_km=5)",
    )
    parser.add_argument("--seed", type=int, help="override the run seed")


def _resolve(args) -> dict:
    config_file = args.config or os.environ.get("FSO_SIM_CONFIG") or None
    cfg = scenarios.resolve_config(
        preset=args.scenario, config_file=config_file, overrides=args.overrides
    )
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsolink",
        description="Free-space optical link simulator and channel emulator.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_budget = sub.add_parser("budget", help="print the link loss budget")
    _add_config_args(p_budget)
    p_budget.add_argument(
        "--format", choices=("text", "csv", "json"), default="text"
    )
    p_budget.add_argument("--out", metavar="PATH", help="write instead of stdout")

    p_trace = sub.add_parser("trace", help="generate a fading trace file")
    _add_config_args(p_trace)
    p_trace.add_argument("--rate", type=float, default=1e5, help="samples per second")
    p_trace.add_argument("--duration", type=float, default=1.0, help="seconds")
    p_trace.add_argument("--out", required=True, metavar="PATH")
    p_trace.add_argument(
        "--format",
        choices=("csv", "bin"),
        help="default: from the file extension (.csv vs anything else)",
    )

    p_tx = sub.add_parser("transmit", help="run an end-to-end transmission")
    _add_config_args(p_tx)
    p_tx.add_argument("--symbols", type=int, help="override the symbol budget")
    p_tx.add_argument(
        "--payload", metavar="PATH", help="send file contents ('-' for stdin)"
    )
    p_tx.add_argument(
        "--payload-out", metavar="PATH", help="write recovered payload here"
    )
    p_tx.add_argument("--report", metavar="PATH", help="write the JSON run report")
    p_tx.add_argument(
        "--summary-csv", metavar="PATH", help="append-style one-row CSV summary"
    )
    p_tx.add_argument("--workers", type=int, help="worker threads (results identical)")
    p_tx.add_argument(
        "--no-timestamp",
        action="store_true",
        help="omit wall-clock fields for byte-identical reports",
    )

    p_pat = sub.add_parser("pat-sim", help="closed-loop quadrant-detector tracking")
    p_pat.add_argument("--m", type=int, default=10, help="samples per correction")
    p_pat.add_argument("--gain", type=float, default=0.8, help="proportional gain")
    p_pat.add_argument("--noise-std", type=float, default=0.05)
    p_pat.add_argument("--disturbance-rms", type=float, default=50e-6, metavar="M")
    p_pat.add_argument("--disturbance-bw", type=float, default=50.0, metavar="HZ")
    p_pat.add_argument("--loop-rate", type=float, default=1000.0, metavar="HZ")
    p_pat.add_argument("--duration", type=float, default=0.5, metavar="S")
    p_pat.add_argument("--initial-x", type=float, default=2e-4, metavar="M")
    p_pat.add_argument("--initial-y", type=float, default=-1e-4, metavar="M")
    p_pat.add_argument("--seed", type=int, default=0)
    p_pat.add_argument("--out", metavar="PATH", help="residual trace CSV")
    p_pat.add_argument("--summary", metavar="PATH", help="JSON summary")
    p_pat.add_argument("--no-timestamp", action="store_true")

    p_filter = sub.add_parser(
        "filter-sim", help="paired BER demo of n-by-n spatial selection"
    )
    p_filter.add_argument("--n", type=int, default=2, help="partition order")
    p_filter.add_argument("--seed", type=int, default=0)
    p_filter.add_argument("--symbols", type=int, default=1_000_000)
    p_filter.add_argument("--target-ber", type=float, default=1e-3)
    p_filter.add_argument("--spot-x", type=float, default=0.25)
    p_filter.add_argument("--spot-y", type=float, default=0.25)
    p_filter.add_argument("--spot-radius", type=float, default=0.35)
    p_filter.add_argument(
        "--grid", metavar="PATH", help="CSV matrix of cell intensities (overrides the beam model)"
    )
    p_filter.add_argument("--out", metavar="PATH", help="paired summary CSV")
    p_filter.add_argument("--report", metavar="PATH", help="JSON result")
    p_filter.add_argument("--no-timestamp", action="store_true")

    p_sweep = sub.add_parser("sweep", help="sweep one numeric parameter")
    _add_config_args(p_sweep)
    p_sweep.add_argument("--axis", required=True, metavar="NAME")
    p_sweep.add_argument(
        "--values", required=True, metavar="V1,V2,...", help="comma-separated"
    )
    p_sweep.add_argument("--out", required=True, metavar="PATH")

    p_scen = sub.add_parser("scenarios", help="list bundled weather presets")
    p_scen.add_argument("--format", choices=("text", "json"), default="text")

    return parser


def _cmd_budget(args) -> int:
    cfg = _resolve(args)
    run_cfg = pipeline.RunConfig.from_dict(cfg)
    losses = total_atmospheric_loss(
        run_cfg.scenario, run_cfg.geometry, run_cfg.outage_prob
    )
    budget = received_power_dbm(
        run_cfg.optics, losses, run_cfg.geometry.beam_divergence_rad
    )
    if args.format == "text":
        text = reporting.budget_text(losses, budget)
    elif args.format == "csv":
        text = reporting.budget_csv(losses, budget)
    else:
        text = reporting.report_to_json(
            {"losses": losses, "budget": budget}, no_timestamp=True
        )
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_trace(args) -> int:
    cfg = _resolve(args)
    run_cfg = pipeline.RunConfig.from_dict(cfg)
    rytov = rytov_variance(run_cfg.geometry, run_cfg.scenario)
    model = pipeline.select_fading_model(run_cfg.fading, rytov)
    tau0 = coherence_time(
        run_cfg.geometry, max(run_cfg.scenario.wind_speed_ground, 1e-6)
    )
    trace = generate_trace(model, tau0, args.rate, args.duration, run_cfg.seed)
    fmt = args.format or ("csv" if str(args.out).endswith(".csv") else "bin")
    if fmt == "csv":
        trace_to_csv(trace, args.out)
    else:
        trace_to_binary(trace, args.out)
    print(
        f"wrote {len(trace)} samples ({model.kind}, sigma_i2={model.sigma_i2:.4g}, "
        f"tau0={tau0:.4g} s) to {args.out}"
    )
    return 0


def _cmd_transmit(args) -> int:
    cfg = _resolve(args)
    if args.symbols is not None:
        cfg["n_symbols"] = args.symbols
    if args.workers is not None:
        cfg["workers"] = args.workers
    if args.payload is not None:
        cfg["payload"] = args.payload
    run_cfg = pipeline.RunConfig.from_dict(cfg)
    if run_cfg.payload:
        payload_out = args.payload_out or str(run_cfg.payload) + ".out"
        report = pipeline.payload_roundtrip(run_cfg.payload, run_cfg, payload_out)
    else:
        report = pipeline.run_endtoend(run_cfg)
    if args.report:
        reporting.write_json(report, args.report, no_timestamp=args.no_timestamp)
    if args.summary_csv:
        reporting.rows_to_csv([reporting.ber_summary_row(report)], args.summary_csv)
    ber = report.ber
    print(
        f"{report.fading_kind} fading, rytov={report.rytov_var:.4g}, "
        f"L_total={report.losses.l_total_db:.2f} dB, P_R={report.budget.p_r_dbm:.2f} dBm"
    )
    print(
        f"BER counted {ber.ber_counted:.3e} ({ber.bit_errors}/{ber.bits_tx} bits), "
        f"estimated {ber.ber_estimated:.3e}"
    )
    if report.byte_errors is not None:
        print(f"payload bytes {report.payload_bytes}, byte errors {report.byte_errors}")
    return 0


def _cmd_pat_sim(args) -> int:
    disturbance = (
        JitterParams(rms_m=args.disturbance_rms, bandwidth_hz=args.disturbance_bw)
        if args.disturbance_rms > 0
        else None
    )
    result = run_tracking_loop(
        initial_offset_m=(args.initial_x, args.initial_y),
        disturbance=disturbance,
        geometry=QdGeometry(),
        m=args.m,
        loop_rate_hz=args.loop_rate,
        controller_gain=args.gain,
        duration_s=args.duration,
        seed=args.seed,
        noise_std=args.noise_std,
    )
    if args.out:
        reporting.tracking_csv(result, args.out)
    summary = {
        "m": result.m,
        "loop_rate_hz": result.loop_rate_hz,
        "controller_gain": result.controller_gain,
        "seed": result.seed,
        "residual_rms_m": result.residual_rms_m,
        "residual_max_m": result.residual_max_m,
    }
    if args.summary:
        reporting.write_json(summary, args.summary, no_timestamp=args.no_timestamp)
    print(
        f"m={result.m}: residual rms {result.residual_rms_m * 1e6:.2f} um, "
        f"max {result.residual_max_m * 1e6:.2f} um"
    )
    return 0


def _cmd_filter_sim(args) -> int:
    scenario = FilterDemoScenario(
        spot_center=(args.spot_x, args.spot_y),
        spot_radius=args.spot_radius,
        target_unfiltered_ber=args.target_ber,
        n_symbols=args.symbols,
    )
    grid = grid_from_csv(args.grid) if args.grid else None
    config = Pam4Config()
    result = filtering_ber_demo(scenario, args.n, config, args.seed, grid=grid)
    rows = [
        {
            "selection": "off",
            "ber_counted": result.report_off.ber_counted,
            "ber_estimated": result.report_off.ber_estimated,
            "noise_std": result.noise_std_unfiltered,
            "gain_db": 0.0,
        },
        {
            "selection": "on",
            "ber_counted": result.report_on.ber_counted,
            "ber_estimated": result.report_on.ber_estimated,
            "noise_std": result.noise_std_filtered,
            "gain_db": result.snr.gain_db,
        },
    ]
    if args.out:
        reporting.rows_to_csv(rows, args.out)
    if args.report:
        reporting.write_json(result, args.report, no_timestamp=args.no_timestamp)
    print(
        f"n={args.n}: gain {result.snr.gain_db:.2f} dB, "
        f"BER {result.report_off.ber_counted:.3e} -> {result.report_on.ber_counted:.3e}"
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve(args)
    run_cfg = pipeline.RunConfig.from_dict(cfg)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    rows = pipeline.scenario_sweep(run_cfg, args.axis, values)
    fieldnames = list(rows[0].keys()) if rows else ["axis", "value"]
    reporting.rows_to_csv(rows, args.out, fieldnames=fieldnames)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_scenarios(args) -> int:
    if args.format == "json":
        data = {
            name: {
                "note": scenarios.preset_note(name),
                "config": scenarios.preset_config(name),
            }
            for name in scenarios.preset_names()
        }
        sys.stdout.write(reporting.report_to_json(data, no_timestamp=True))
        return 0
    for name in scenarios.preset_names():
        print(f"{name}: {scenarios.preset_note(name)}")
        for key, value in scenarios.preset_config(name)["scenario"].items():
            print(f"    {key} = {value}")
    return 0


_COMMANDS = {
    "budget": _cmd_budget,
    "trace": _cmd_trace,
    "transmit": _cmd_transmit,
    "pat-sim": _cmd_pat_sim,
    "filter-sim": _cmd_filter_sim,
    "sweep": _cmd_sweep,
    "scenarios": _cmd_scenarios,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except KeyError as exc:
        print(f"usage error: {exc.args[0]}", file=sys.stderr)
        return 2
    except (FsoLinkError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
