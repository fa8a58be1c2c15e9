from core.config import DEBUG, FLASK_HOST, FLASK_PORT, LOG_FORMAT, LOG_LEVEL

bind = f"{FLASK_HOST}:{FLASK_PORT}"
workers = 1          # One B_ac calibration cache per process
threads = 4          # /gate fans the four inputs out over threads
worker_class = "gthread"
timeout = 3600       # A full-scale /gate with dephasing integrates ~26 us of gate time per input
accesslog = "-"
errorlog = "-"
access_log_format = '%(h)s "%(r)s" %(s)s %(b)s %(L)ss'

# Gunicorn's own loggers share the application's LOG_FORMAT
_level = "DEBUG" if DEBUG else LOG_LEVEL
_console = {"level": _level, "handlers": ["console"], "propagate": False}

logconfig_dict = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {"kanesim": {"format": LOG_FORMAT}},
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "kanesim", "stream": "ext://sys.stderr"},
    },
    "root": {"level": _level, "handlers": ["console"]},
    "loggers": {
        "gunicorn.error": _console,
        "gunicorn.access": dict(_console, level="INFO"),
    },
}
