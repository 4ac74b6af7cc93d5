"""
Structured logging for solver runs, sweeps and the inequality lab.

Loggers live under the ``cpks`` namespace and carry keyword fields
(``t=``, ``dt=``, ``reason=``) next to the message. Fields are rendered as
JSON lines or as trailing ``key=value`` pairs depending on CPKS_LOG_JSON.
"""
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

ROOT = "cpks"
TEXT_FORMAT = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"
TEXT_DATEFMT = "%Y-%m-%d %H:%M:%S"


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and paths into JSON-friendly values."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (tuple, set)):
        return list(value)
    return value


def _fields(record: logging.LogRecord) -> Mapping[str, Any]:
    return getattr(record, "fields", None) or {}


class JSONFormatter(logging.Formatter):
    """One JSON object per record: ts, level, logger, msg, then the fields."""

    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, Any] = {
            "ts": datetime.fromtimestamp(record.created, timezone.utc).isoformat(timespec="milliseconds"),
            "level": record.levelname.lower(),
            "logger": record.name,
            "msg": record.getMessage(),
        }
        payload.update({k: _plain(v) for k, v in _fields(record).items()})
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str)


class KeyValueFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        text = super().format(record)
        pairs = " ".join(f"{k}={_short(v)}" for k, v in _fields(record).items())
        return f"{text} {pairs}" if pairs else text


def _short(value: Any) -> str:
    value = _plain(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class StructuredLogger(logging.Logger):
    """Logger with ``*_with(msg, **fields)`` helpers."""

    def _emit(self, level: int, msg: str, fields: dict[str, Any]) -> None:
        if self.isEnabledFor(level):
            self._log(level, msg, (), extra={"fields": fields}, stacklevel=3)

    def debug_with(self, msg: str, **fields: Any) -> None:
        self._emit(logging.DEBUG, msg, fields)

    def info_with(self, msg: str, **fields: Any) -> None:
        self._emit(logging.INFO, msg, fields)

    def warning_with(self, msg: str, **fields: Any) -> None:
        self._emit(logging.WARNING, msg, fields)

    def error_with(self, msg: str, **fields: Any) -> None:
        self._emit(logging.ERROR, msg, fields)


logging.setLoggerClass(StructuredLogger)


def setup_logging(
    level: Optional[str] = None,
    json_format: Optional[bool] = None,
    log_file: Optional[str] = None,
) -> logging.Logger:
    """Configure the root logger from arguments, falling back to CPKS_LOG_*."""
    level = (level or os.environ.get("CPKS_LOG_LEVEL") or "INFO").upper()
    if json_format is None:
        json_format = os.environ.get("CPKS_LOG_JSON", "0") == "1"
    log_file = log_file or os.environ.get("CPKS_LOG_FILE")

    root = logging.getLogger()
    root.setLevel(logging.getLevelName(level) if level in logging.getLevelNamesMapping() else logging.INFO)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    formatter: logging.Formatter = (
        JSONFormatter() if json_format else KeyValueFormatter(TEXT_FORMAT, datefmt=TEXT_DATEFMT)
    )
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(formatter)
    root.addHandler(console)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        # files always get JSON lines so runs can be post-processed
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(JSONFormatter())
        root.addHandler(file_handler)

    logging.getLogger("asyncio").setLevel(logging.WARNING)
    return root


def get_logger(name: str) -> StructuredLogger:
    if name != ROOT and not name.startswith(ROOT + "."):
        name = f"{ROOT}.{name}"
    return logging.getLogger(name)  # type: ignore[return-value]
