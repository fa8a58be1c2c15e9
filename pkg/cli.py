"""`kanesim` command line: simulate, sweep, theta, calibrate, schedule-dump."""
import argparse
import logging
import sys
import traceback

import numpy as np

from core import config as settings
from core.adiabaticity import DEFAULT_GAP_FLOOR, LevelSet, theta_scan
from core.config_file import parse_config
from core.dynamics import write_trajectory_csv
from core.errors import EXIT_NUMERICAL, EXIT_OK, exit_code_for
from core.gate import INPUT_LABELS, calibrate_bac, ensure_b_ac, run_all_inputs, run_cnot
from core.hamiltonian import level_energies, spectrum_summary
from core.pulses import ProfileKind, build_cnot_schedule, j_ramp_stage, sample_schedule
from core.result_store import dumps_json, fmt, render_csv, write_json, write_text
from core.sweep import emit_contour, emit_json, render_sweep_csv, run_sweep, write_metrics_textfile

RESULT_SCHEMA = "kanesim.result.v1"
PROFILES = [k.value for k in ProfileKind if k is not ProfileKind.HOLD]


def _positive_int(value):
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return number


def _sample_count(value):
    number = int(value)
    if number < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 samples, got {value}")
    return number


def _common(parser):
    parser.add_argument("--config", dest="config_path", help="JSON config document; defaults apply when omitted.")
    parser.add_argument("--out", help="Output file; stdout when omitted.")
    parser.add_argument("--parallelism", type=_positive_int, help="Worker count (default: KANESIM_PARALLELISM).")
    parser.add_argument("--seed", type=int, help="Reserved; the simulator has no stochastic parts.")
    parser.add_argument("--log-level", type=str.upper, choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _parse_args(argv=None):
    parser = argparse.ArgumentParser(prog="kanesim", description="Two-qubit Kane CNOT simulator.")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Run the CNOT and report the gate error.")
    _common(simulate)
    simulate.add_argument("--input", dest="input_label", choices=list(INPUT_LABELS) + ["all"], default="all")
    simulate.add_argument("--dump-trajectory", help="CSV of populations, trace, purity and smallest eigenvalue.")
    simulate.add_argument("--samples", type=_sample_count, default=201, help="Trajectory samples (default 201).")
    simulate.set_defaults(handler=cmd_simulate)

    sweep = commands.add_parser("sweep", help="Gate error over the (tau_e, tau_n) grid.")
    _common(sweep)
    sweep.add_argument("--contour", help="Worst-case error matrix CSV.")
    sweep.add_argument("--json", dest="json_path", help="Full JSON result.")
    sweep.add_argument("--metrics-textfile", help="Prometheus textfile with the worst-case gauges.")
    sweep.set_defaults(handler=cmd_sweep)

    theta = commands.add_parser("theta", help="Adiabaticity measure along the J ramp.")
    _common(theta)
    theta.add_argument("--profile", choices=PROFILES + ["all"], default="all")
    theta.add_argument("--samples", type=_sample_count, default=401)
    theta.add_argument("--gap-floor", type=float, default=DEFAULT_GAP_FLOOR)
    theta.add_argument("--levels", choices=[k.value for k in LevelSet], default=LevelSet.COMPUTATIONAL.value,
                       help="Level pairs entering the maximum (default: pairs touching a computational level).")
    theta.set_defaults(handler=cmd_theta)

    calibrate = commands.add_parser("calibrate", help="B_ac for an exact swap in the stage-4 time.")
    _common(calibrate)
    calibrate.set_defaults(handler=cmd_calibrate)

    dump = commands.add_parser("schedule-dump", help="Sampled (t, A1, A2, J, B_ac) over the whole gate.")
    _common(dump)
    dump.add_argument("--samples", type=_sample_count, default=1001)
    dump.add_argument("--energies", action="store_true", help="Append the static eigenvalues as E00..E15.")
    dump.set_defaults(handler=cmd_schedule_dump)

    args = parser.parse_args(argv)
    if args.command == "simulate" and args.dump_trajectory and args.input_label == "all":
        parser.error("--dump-trajectory needs a single --input")
    return args


def _startup_banner(args, loaded):
    config = loaded.config
    summary = spectrum_summary(config.consts, config.b_z)
    integrator = config.integrator
    logging.info("=" * 60)
    logging.info("kanesim %s", args.command)
    logging.info("=" * 60)
    logging.info("Configuration:")
    logging.info("  Config file:          %s", args.config_path or "(defaults)")
    logging.info("  Config hash:          %s", loaded.digest)
    logging.info("  B_z:                  %g T", config.b_z)
    logging.info("  Zeeman (n / e):       %.6g / %.6g u", summary["nuclear_zeeman_u"], summary["electron_zeeman_u"])
    logging.info("  A2 / dA1 / J_max:     %g / %g / %g u", config.a2, config.delta_a1, config.j_max)
    logging.info("  Profile / order:      %s / %s", config.profile.value, config.reverse_order.value)
    logging.info("  Durations:            %s us", ", ".join(f"{k}={v:g}" for k, v in config.durations.as_dict().items()))
    logging.info("  B_ac:                 %s", "calibrate" if config.b_ac is None else f"{config.b_ac:g} T")
    logging.info("  Dephasing tau e / n:  %g / %g us", config.dephasing.tau_e, config.dephasing.tau_n)
    logging.info("  Integrator:           %s frame, rtol %g, atol %g",
                 integrator.frame.value, integrator.rel_tol, integrator.abs_tol)
    logging.info("  Parallelism:          %d", settings.resolve_parallelism(args.parallelism))
    logging.info("=" * 60)


def _emit_text(out, text):
    if out:
        write_text(out, text)
        logging.info("Wrote %s", out)
    else:
        sys.stdout.write(text)


def _emit_document(out, document):
    if out:
        write_json(out, document)
        logging.info("Wrote %s", out)
    else:
        sys.stdout.write(dumps_json(document))


def cmd_simulate(args, loaded):
    config = ensure_b_ac(loaded.config)
    if args.dump_trajectory:
        result, trajectory = run_cnot(config, args.input_label, n_samples=args.samples)
        write_trajectory_csv(trajectory, args.dump_trajectory)
        results = (result,)
    else:
        labels = INPUT_LABELS if args.input_label == "all" else (args.input_label,)
        results = run_all_inputs(config, labels, args.parallelism)
    worst = max(r.error for r in results)
    logging.info("Worst-case error over %d input(s): %.6g", len(results), worst)
    _emit_document(args.out, {
        "schema": RESULT_SCHEMA,
        "config": loaded.document,
        "config_hash": loaded.digest,
        "b_ac_t": config.b_ac,
        "results": {r.input_label: r.as_dict() for r in results},
        "worst_error": worst,
    })
    return EXIT_OK


def cmd_sweep(args, loaded):
    result = run_sweep(loaded.config, loaded.grid, args.parallelism, loaded.document, loaded.digest)
    _emit_text(args.out, render_sweep_csv(result))
    if args.contour:
        emit_contour(result, args.contour)
    if args.json_path:
        emit_json(result, args.json_path)
    if args.metrics_textfile:
        write_metrics_textfile(result, args.metrics_textfile)
    return EXIT_NUMERICAL if result.failed else EXIT_OK


def cmd_theta(args, loaded):
    config = loaded.config
    kinds = PROFILES if args.profile == "all" else [args.profile]
    rows = []
    for kind in kinds:
        stage = j_ramp_stage(config, kind)
        series = theta_scan(config.consts, stage, config.b_z, args.samples, args.gap_floor, args.parallelism,
                            args.levels)
        logging.info("Profile %s: peak theta %.4g at t=%.6g us", kind, series.peak, series.peak_time)
        for t, value, (a, b) in zip(series.times, series.theta, series.labels):
            rows.append((kind, t, value, a, b))
    header = ["profile", "t_us", "theta", "level_a", "level_b"]
    _emit_text(args.out, render_csv(header, rows, [("config_hash", loaded.digest)]))
    return EXIT_OK


def cmd_calibrate(args, loaded):
    result = calibrate_bac(loaded.config)
    _emit_document(args.out, dict(result.as_dict(), config_hash=loaded.digest))
    return EXIT_OK


def cmd_schedule_dump(args, loaded):
    config = ensure_b_ac(loaded.config)
    schedule = build_cnot_schedule(config)
    rows = sample_schedule(schedule, args.samples)
    header = ["t_us", "a1", "a2", "j", "b_ac_t"]
    if args.energies:
        levels = level_energies(config.consts, schedule, [row[0] for row in rows])
        header += [f"E{i:02d}" for i in range(levels.shape[1])]
        rows = [tuple(row) + tuple(float(e) for e in np.asarray(level)) for row, level in zip(rows, levels)]
    comments = [("config_hash", loaded.digest), ("b_ac_t", fmt(config.b_ac))]
    _emit_text(args.out, render_csv(header, rows, comments))
    return EXIT_OK


def main(argv=None):
    args = _parse_args(argv)
    settings.configure_logging(args.log_level)
    if args.seed is not None:
        logging.debug("--seed %d accepted and ignored", args.seed)
    try:
        loaded = parse_config(args.config_path)
        _startup_banner(args, loaded)
        return args.handler(args, loaded)
    except Exception as e:
        logging.error("%s: %s", type(e).__name__, e)
        if settings.DEBUG:
            traceback.print_exc()
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
