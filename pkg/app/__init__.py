import logging
import threading

from flask import Flask

from core.config import (
    KANESIM_CONFIG, KANESIM_PARALLELISM, LOG_LEVEL, DEBUG,
    FLASK_HOST, FLASK_PORT, configure_logging,
)
from core.config_file import parse_config
from core.errors import KanesimError
from core.gate import ensure_b_ac
from core.hamiltonian import spectrum_summary
from core.pulses import check_j_max


class ExporterState:
    """Loaded config plus the B_ac calibration, done once on first use."""

    def __init__(self, loaded):
        self.loaded = loaded
        self.crossing = check_j_max(loaded.config)
        self._calibrated = None
        self.calibration_error = None
        self._lock = threading.Lock()

    @property
    def calibrated(self):
        return self._calibrated is not None

    def gate_config(self):
        """Calibrated config; a failed calibration is kept for /health and retried on the next call."""
        with self._lock:
            if self._calibrated is None:
                try:
                    self._calibrated = ensure_b_ac(self.loaded.config)
                except KanesimError as e:
                    self.calibration_error = f"{type(e).__name__}: {e}"
                    logging.error("B_ac calibration failed: %s", e)
                    raise
                self.calibration_error = None
                logging.info("Exporter B_ac: %.9g T", self._calibrated.b_ac)
            return self._calibrated


def _startup_banner(state):
    """Log configuration summary."""
    config = state.loaded.config
    summary = spectrum_summary(config.consts, config.b_z)
    logging.info("=" * 60)
    logging.info("Starting Kane CNOT Prometheus Exporter")
    logging.info("=" * 60)

    logging.info("Configuration:")
    logging.info("  Config file:          %s", KANESIM_CONFIG or "(defaults)")
    logging.info("  Config hash:          %s", state.loaded.digest)
    logging.info("  B_z:                  %g T", config.b_z)
    logging.info("  Electron Zeeman:      %.6g u", summary["electron_zeeman_u"])
    logging.info("  Level crossing:       J=%.6g u (J_max %g)", state.crossing, config.j_max)
    logging.info("  Profile:              %s", config.profile.value)
    logging.info("  Frame:                %s", config.integrator.frame.value)
    logging.info("  Parallelism:          %d", KANESIM_PARALLELISM)
    logging.info("  Log level:            %s", LOG_LEVEL)
    logging.info("  Debug mode:           %s", DEBUG)
    logging.info("  Listen:               %s:%d", FLASK_HOST, FLASK_PORT)
    logging.info("=" * 60)


def create_app(config_path=None):
    # Logging (module-level so it works under Gunicorn)
    configure_logging()

    flask_app = Flask(__name__)

    state = ExporterState(parse_config(config_path or KANESIM_CONFIG or None))
    flask_app.config["exporter_state"] = state

    from app.routes import bp
    flask_app.register_blueprint(bp)

    _startup_banner(state)

    return flask_app
