import logging
import traceback
import concurrent.futures

from flask import Blueprint, request, Response, jsonify, current_app
from prometheus_client import Gauge, generate_latest, CollectorRegistry

from core.config import DEBUG, resolve_parallelism
from core.adiabaticity import DEFAULT_GAP_FLOOR, LevelSet, theta_scan
from core.errors import KanesimError
from core.gate import INPUT_LABELS, run_cnot
from core.pulses import ProfileKind, build_cnot_schedule, j_ramp_stage, sample_schedule

bp = Blueprint("routes", __name__)

MAX_SAMPLES = 5001


def _get_state():
    return current_app.config["exporter_state"]


def _float_arg(name):
    value = request.args.get(name)
    if value is None or value == "":
        return None
    return float(value)


def _samples_arg(default):
    samples = int(request.args.get("samples", default))
    if not 2 <= samples <= MAX_SAMPLES:
        raise ValueError(f"samples must be in [2, {MAX_SAMPLES}]")
    return samples


def run_input(config, label):
    """Run one basis input; returns (label, status, result) and never raises."""
    try:
        result, _ = run_cnot(config, label)
        return label, "ok", result
    except Exception as e:
        logging.warning(f"Gate run for input {label} failed: {e}")
        if DEBUG:
            traceback.print_exc()
        return label, type(e).__name__, None


@bp.route('/gate')
def gate():
    state = _get_state()

    try:
        tau_e_us = _float_arg('tau_e_us')
        tau_n_us = _float_arg('tau_n_us')
    except ValueError:
        return "Invalid tau_e_us or tau_n_us parameter", 400

    input_param = request.args.get('input', 'all')
    labels = INPUT_LABELS if input_param == 'all' else tuple(v.strip() for v in input_param.split(','))
    if any(label not in INPUT_LABELS for label in labels):
        return f"Invalid input parameter; expected 'all' or a comma list of {', '.join(INPUT_LABELS)}", 400

    try:
        config = state.gate_config()
        if tau_e_us is not None or tau_n_us is not None:
            config = config.with_dephasing(tau_e_us, tau_n_us)
    except KanesimError as e:
        logging.error(f"Gate setup failed: {e}")
        return f"{type(e).__name__}: {e}\n", 400

    registry = CollectorRegistry()
    point = {
        "tau_e_us": f"{config.dephasing.tau_e:g}",
        "tau_n_us": f"{config.dephasing.tau_n:g}",
    }
    labels_per_input = ['input', 'tau_e_us', 'tau_n_us', 'status']

    gate_error = Gauge('kanesim_gate_error', 'CNOT error for one basis input', labels_per_input, registry=registry)
    success = Gauge('kanesim_gate_success', 'Gate run success (1) or failure (0)', labels_per_input,
                    registry=registry)
    worst = Gauge('kanesim_gate_worst_error', 'Worst-case CNOT error over the requested inputs', list(point),
                  registry=registry)

    output_format = request.args.get('format')
    json_results = []
    errors = []

    workers = min(resolve_parallelism(None), len(labels))
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(run_input, config, label): label for label in labels}
        for future in concurrent.futures.as_completed(futures):
            label, status, result = future.result()

            label_kwargs = dict(point, input=label, status=status)
            success.labels(**label_kwargs).set(1 if status == "ok" else 0)
            if status == "ok":
                gate_error.labels(**label_kwargs).set(result.error)
                errors.append(result.error)

            if output_format == 'json':
                entry = {"input": label, "status": status, **point}
                entry.update(result.as_dict() if result else {"error": None})
                json_results.append(entry)

    if errors and len(errors) == len(labels):
        worst.labels(**point).set(max(errors))

    if output_format == 'json':
        json_results.sort(key=lambda r: r["input"])
        return jsonify({
            "config_hash": state.loaded.digest,
            "b_ac_t": config.b_ac,
            "results": json_results,
            "worst_error": max(errors) if errors and len(errors) == len(labels) else None,
        })

    return Response(generate_latest(registry), mimetype="text/plain")


@bp.route('/schedule')
def schedule():
    state = _get_state()
    try:
        samples = _samples_arg(201)
    except ValueError as e:
        return f"Invalid samples parameter: {e}", 400
    try:
        config = state.gate_config()
        rows = sample_schedule(build_cnot_schedule(config), samples)
    except KanesimError as e:
        logging.error(f"Schedule request failed: {e}")
        return jsonify({"error": f"{type(e).__name__}: {e}"}), 500
    return jsonify({
        "config_hash": state.loaded.digest,
        "columns": ["t_us", "a1", "a2", "j", "b_ac_t"],
        "rows": [list(row) for row in rows],
    })


@bp.route('/theta')
def theta():
    state = _get_state()
    config = state.loaded.config
    profile = request.args.get('profile', config.profile.value)
    try:
        kind = ProfileKind(profile)
        if kind is ProfileKind.HOLD:
            raise ValueError(profile)
        samples = _samples_arg(401)
        gap_floor = _float_arg('gap_floor') or DEFAULT_GAP_FLOOR
        levels = LevelSet(request.args.get('levels', LevelSet.COMPUTATIONAL.value))
    except ValueError:
        return "Invalid profile, samples, gap_floor or levels parameter", 400
    try:
        series = theta_scan(config.consts, j_ramp_stage(config, kind), config.b_z, samples, gap_floor,
                            levels=levels)
    except KanesimError as e:
        logging.error(f"Theta scan failed: {e}")
        return jsonify({"error": f"{type(e).__name__}: {e}"}), 500
    return jsonify({
        "profile": kind.value,
        "level_set": levels.value,
        "peak": series.peak,
        "peak_time_us": series.peak_time,
        "t_us": list(series.times),
        "theta": list(series.theta),
        "levels": [list(pair) for pair in series.labels],
    })


@bp.route('/health')
def health():
    state = _get_state()
    config = state.loaded.config
    failure = state.calibration_error
    body = {
        "status": "degraded" if failure else "ok",
        "config_hash": state.loaded.digest,
        "level_crossing_u": state.crossing,
        "j_max_u": config.j_max,
        "b_ac_calibrated": state.calibrated,
    }
    if failure:
        body["calibration_error"] = failure
    return jsonify(body), 503 if failure else 200
