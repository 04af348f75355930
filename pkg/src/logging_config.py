"""
Logging configuration for ekman-bifurcation.

Provides:
- Structured logging with context (text or JSON)
- Console (stderr) and rotating file handlers
- Log level management via config.yaml with env var overrides
- Run ids tying every record to the RunConfig that produced it
"""

import json
import logging
import logging.handlers
import os
import sys
import threading
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

# Thread-local storage for run ids
_thread_local = threading.local()

SERVICE_NAME = "ekman-bifurcation"

# LogRecord attributes that are not user-supplied context
_RESERVED_ATTRS = frozenset(
    [
        "name",
        "msg",
        "args",
        "created",
        "filename",
        "funcName",
        "levelname",
        "levelno",
        "lineno",
        "module",
        "msecs",
        "message",
        "pathname",
        "process",
        "processName",
        "relativeCreated",
        "thread",
        "threadName",
        "taskName",
        "exc_info",
        "exc_text",
        "stack_info",
        "run_id",
        "service",
        "hostname",
    ]
)


class StructuredFormatter(logging.Formatter):
    """
    Formatter emitting either JSON or a compact text line.

    Every record carries the service name, hostname and the current run id.
    Fields passed through ``extra=`` are kept: as JSON keys in JSON mode and
    as ``key=value`` pairs in text mode.
    """

    def __init__(self, fmt=None, datefmt=None, style="%", json_format=False):
        super().__init__(fmt, datefmt, style)
        self.json_format = json_format
        self.hostname = os.environ.get("HOSTNAME", "unknown")
        self.service_name = SERVICE_NAME

    def format(self, record: logging.LogRecord) -> str:
        run_id = getattr(_thread_local, "run_id", None)
        if run_id:
            record.run_id = run_id

        record.service = self.service_name
        record.hostname = self.hostname

        if self.json_format:
            return self._format_json(record)
        return self._format_text(record)

    @staticmethod
    def _context(record: logging.LogRecord) -> Dict[str, Any]:
        return {
            key: value
            for key, value in record.__dict__.items()
            if key not in _RESERVED_ATTRS
        }

    def _format_json(self, record: logging.LogRecord) -> str:
        log_data: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "service": self.service_name,
            "hostname": self.hostname,
        }

        if hasattr(record, "run_id"):
            log_data["run_id"] = record.run_id

        if record.exc_info:
            log_data["exception"] = {
                "type": record.exc_info[0].__name__ if record.exc_info[0] else None,
                "message": str(record.exc_info[1]) if record.exc_info[1] else None,
                "traceback": self.formatException(record.exc_info),
            }

        log_data.update(self._context(record))
        # numpy scalars and paths fall back to str
        return json.dumps(log_data, default=str)

    def _format_text(self, record: logging.LogRecord) -> str:
        timestamp = datetime.fromtimestamp(record.created).strftime(
            "%Y-%m-%d %H:%M:%S.%f"
        )[:-3]

        run_str = f" [{record.run_id}]" if hasattr(record, "run_id") else ""
        context = self._context(record)
        context_str = ""
        if context:
            context_str = " " + " ".join(f"{k}={v}" for k, v in context.items())

        line = (
            f"{timestamp} {record.levelname:8s} [{record.name}]"
            f"{run_str} {record.getMessage()}{context_str}"
        )
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        return line


def set_run_id(run_id: str):
    """Set the run id for the current thread."""
    _thread_local.run_id = run_id


def get_run_id() -> Optional[str]:
    """Get the run id for the current thread."""
    return getattr(_thread_local, "run_id", None)


def clear_run_id():
    """Clear the run id for the current thread."""
    if hasattr(_thread_local, "run_id"):
        delattr(_thread_local, "run_id")


def _env_flag(name: str) -> Optional[bool]:
    value = os.environ.get(name)
    if value is None:
        return None
    return value.lower() in ("true", "1", "yes")


DEFAULT_LOG_FILE = "./logs/ekman.log"

# noisy at DEBUG
_QUIET_LOGGERS = ("matplotlib", "PIL")


def _lookup(config: Dict[str, Any], dotted: str, fallback: Any) -> Any:
    node: Any = config
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return fallback
        node = node[part]
    return node


def _resolve_settings(config: Dict[str, Any]) -> Dict[str, Any]:
    """Merge built-in defaults < config.yaml < environment."""
    console = _env_flag("ENABLE_CONSOLE_LOGGING")
    to_file = _env_flag("ENABLE_FILE_LOGGING")
    return {
        "level": (os.environ.get("LOG_LEVEL") or _lookup(config, "level", "INFO")).upper(),
        "format": (os.environ.get("LOG_FORMAT") or _lookup(config, "format", "text")).lower(),
        "console": bool(_lookup(config, "console.enabled", True)) if console is None else console,
        "file": bool(_lookup(config, "file.enabled", False)) if to_file is None else to_file,
        "path": os.environ.get("LOG_FILE") or _lookup(config, "file.path", DEFAULT_LOG_FILE),
        "max_bytes": int(_lookup(config, "file.max_size_mb", 10)) * 1024 * 1024,
        "backups": int(_lookup(config, "file.backup_count", 5)),
    }


def _rotating_json_handler(path: str, max_bytes: int, backups: int) -> logging.Handler:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    handler = logging.handlers.RotatingFileHandler(
        path, maxBytes=max_bytes, backupCount=backups, encoding="utf-8"
    )
    handler.setFormatter(StructuredFormatter(json_format=True))
    return handler


def setup_logging(config: Optional[Dict[str, Any]] = None) -> None:
    """
    Configure application-wide logging.

    Priority (highest first): environment variables, the ``logging``
    section of config.yaml, built-in defaults.

    Args:
        config: Logging section with keys ``level``, ``format`` ('text' or
            'json'), ``console.enabled``, ``file.enabled``, ``file.path``,
            ``file.max_size_mb`` and ``file.backup_count``.

    Environment Variables (overrides):
        LOG_LEVEL, LOG_FORMAT, LOG_FILE, ENABLE_FILE_LOGGING,
        ENABLE_CONSOLE_LOGGING
    """
    settings = _resolve_settings(config or {})

    level = logging.getLevelName(settings["level"])
    if not isinstance(level, int):
        print(f"Warning: Invalid log level '{settings['level']}', using INFO", file=sys.stderr)
        settings["level"], level = "INFO", logging.INFO

    handlers: List[logging.Handler] = []
    if settings["console"]:
        # stdout carries JSON/CSV results
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(StructuredFormatter(json_format=settings["format"] == "json"))
        handlers.append(console)

    file_error: Optional[OSError] = None
    if settings["file"]:
        try:
            handlers.append(
                _rotating_json_handler(settings["path"], settings["max_bytes"], settings["backups"])
            )
        except OSError as e:
            file_error = e

    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(level)
    for handler in handlers:
        handler.setLevel(level)
        root.addHandler(handler)

    logger = logging.getLogger(__name__)
    if file_error is not None:
        logger.warning(
            "File logging unavailable, console only",
            extra={"log_file": settings["path"], "error": str(file_error)},
        )
    logger.debug("Logging configured", extra={"settings": settings})

    for name in _QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    """Return the logger for ``name`` (typically ``__name__``)."""
    return logging.getLogger(name)


def log_solver_event(
    logger: logging.Logger, stage: str, action: str, status: str, **kwargs
):
    """
    Log a solver milestone with structured context.

    Args:
        logger: Logger instance
        stage: Pipeline stage (critical_value, newton, continuation, gate, ...)
        action: What happened (start, accepted, complete, failed)
        status: Outcome label
        **kwargs: Additional context
    """
    logger.info(
        f"{stage} {action}",
        extra={"stage": stage, "action": action, "status": status, **kwargs},
    )


def log_metric_event(
    logger: logging.Logger, metric_name: str, metric_value: Any, **kwargs
):
    """Log a numeric diagnostic at DEBUG level."""
    logger.debug(
        f"Metric: {metric_name}={metric_value}",
        extra={"metric_name": metric_name, "metric_value": metric_value, **kwargs},
    )
