import concurrent.futures
import logging
import traceback
from dataclasses import dataclass

from prometheus_client import CollectorRegistry, Gauge, write_to_textfile

from core.config import DEBUG, KANESIM_PROGRESS_EVERY, resolve_parallelism
from core.config_file import canonical_json
from core.gate import INPUT_LABELS, ensure_b_ac, run_all_inputs
from core.result_store import fmt, render_csv, write_json, write_text

SWEEP_SCHEMA = "kanesim.sweep.v1"
CSV_HEADER = ["tau_e_s", "tau_n_s", "input", "error"]


@dataclass(frozen=True)
class PointResult:
    tau_e_s: float
    tau_n_s: float
    status: str
    errors: tuple = ()

    @property
    def ok(self):
        return self.status == "ok"

    @property
    def worst(self):
        return max(self.errors) if self.ok else None

    def marker(self):
        return f"failed:{self.status}"


@dataclass(frozen=True)
class SweepResult:
    points: tuple
    b_ac: float
    document: dict = None
    digest: str = ""

    @property
    def rows(self):
        """(tau_e, tau_n, input, error) sorted by grid point then input label."""
        out = []
        for point in self.points:
            for k, label in enumerate(INPUT_LABELS):
                value = point.errors[k] if point.ok else point.marker()
                out.append((point.tau_e_s, point.tau_n_s, label, value))
        return out

    @property
    def failed(self):
        return [p for p in self.points if not p.ok]

    def worst_case(self, tau_e_s, tau_n_s):
        for point in self.points:
            if point.tau_e_s == tau_e_s and point.tau_n_s == tau_n_s:
                return point.worst
        raise KeyError((tau_e_s, tau_n_s))


def evaluate_point(config, tau_e_s, tau_n_s):
    """All four inputs at one (tau_e, tau_n); failures come back as a status, never raised."""
    try:
        point_config = config.with_dephasing(tau_e_s * 1e6, tau_n_s * 1e6)
        results = run_all_inputs(point_config, parallelism=1)
        return PointResult(tau_e_s, tau_n_s, "ok", tuple(r.error for r in results))
    except Exception as e:
        logging.warning("Sweep point tau_e=%gs tau_n=%gs failed: %s", tau_e_s, tau_n_s, e)
        if DEBUG:
            traceback.print_exc()
        return PointResult(tau_e_s, tau_n_s, type(e).__name__)


def run_sweep(config, grid, parallelism=None, document=None, digest="", progress_every=None):
    """Worst-case and per-input errors over the grid; output order does not depend on parallelism."""
    config = ensure_b_ac(config)
    points = grid.points
    results = [None] * len(points)
    workers = min(resolve_parallelism(parallelism), len(points))
    progress_every = progress_every or KANESIM_PROGRESS_EVERY
    logging.info("Sweeping %d grid points with %d worker(s)", len(points), workers)

    def _record(index, result, done):
        results[index] = result
        if done % progress_every == 0 or done == len(points):
            logging.info("Sweep progress: %d/%d points", done, len(points))

    if workers <= 1:
        for index, (tau_e, tau_n) in enumerate(points):
            _record(index, evaluate_point(config, tau_e, tau_n), index + 1)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {
                executor.submit(evaluate_point, config, tau_e, tau_n): index
                for index, (tau_e, tau_n) in enumerate(points)
            }
            for done, future in enumerate(concurrent.futures.as_completed(futures), start=1):
                index = futures[future]
                try:
                    result = future.result()
                except Exception as e:
                    logging.error("Worker for grid point %d died: %s", index, e)
                    tau_e, tau_n = points[index]
                    result = PointResult(tau_e, tau_n, type(e).__name__)
                _record(index, result, done)

    result = SweepResult(tuple(results), config.b_ac, document, digest)
    if result.failed:
        logging.warning("%d of %d grid points failed", len(result.failed), len(points))
    return result


def _provenance(result):
    comments = [("schema", SWEEP_SCHEMA), ("config_hash", result.digest), ("b_ac_t", fmt(result.b_ac))]
    if result.document:
        for section in ("constants", "device", "durations", "integrator"):
            comments.append((section, canonical_json(result.document[section])))
    return comments


def render_sweep_csv(result):
    """One row per grid point and input, after `# key=value` provenance lines."""
    return render_csv(CSV_HEADER, result.rows, _provenance(result))


def emit_csv(result, path):
    write_text(path, render_sweep_csv(result))
    logging.info("Wrote %d sweep rows to %s", len(result.rows), path)


def render_contour(result):
    """Worst-case error matrix: rows are tau_n, columns are tau_e."""
    tau_e_axis = sorted({p.tau_e_s for p in result.points})
    tau_n_axis = sorted({p.tau_n_s for p in result.points})
    cells = {(p.tau_e_s, p.tau_n_s): p for p in result.points}
    header = ["tau_n_s"] + [fmt(t) for t in tau_e_axis]
    rows = []
    for tau_n in tau_n_axis:
        row = [tau_n]
        for tau_e in tau_e_axis:
            point = cells[(tau_e, tau_n)]
            row.append(point.worst if point.ok else point.marker())
        rows.append(row)
    return render_csv(header, rows, _provenance(result))


def emit_contour(result, path):
    write_text(path, render_contour(result))
    logging.info("Wrote contour grid to %s", path)


def sweep_document(result):
    return {
        "schema": SWEEP_SCHEMA,
        "config": result.document,
        "config_hash": result.digest,
        "b_ac_t": result.b_ac,
        "points": [
            {
                "tau_e_s": p.tau_e_s,
                "tau_n_s": p.tau_n_s,
                "status": p.status,
                "errors": dict(zip(INPUT_LABELS, p.errors)) if p.ok else None,
                "worst_error": p.worst,
            }
            for p in result.points
        ],
    }


def emit_json(result, path):
    write_json(path, sweep_document(result))


def write_metrics_textfile(result, path):
    """Worst-case gauges in the node-exporter textfile format."""
    registry = CollectorRegistry()
    labels = ["tau_e_us", "tau_n_us"]
    worst = Gauge("kanesim_gate_worst_error", "Worst-case CNOT error over the basis inputs", labels, registry=registry)
    success = Gauge("kanesim_gate_success", "Grid point simulated (1) or failed (0)", labels, registry=registry)
    for point in result.points:
        label_kwargs = {"tau_e_us": f"{point.tau_e_s * 1e6:g}", "tau_n_us": f"{point.tau_n_s * 1e6:g}"}
        success.labels(**label_kwargs).set(1 if point.ok else 0)
        if point.ok:
            worst.labels(**label_kwargs).set(point.worst)
    write_to_textfile(path, registry)
    logging.info("Wrote sweep metrics to %s", path)
