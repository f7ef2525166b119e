from __future__ import annotations

"""
Minimal logging setup shared by the library and the CLI.

Goals
-----
- One-line setup: `from bionic.logging_setup import setup_logging, get_logger; setup_logging()`
- JSON logs to stderr by default, so stdout stays free for tables and JSON
  summaries printed by the CLI.
- Contextual logs via `LoggerAdapter`; `bind()` narrows the context (a CV
  fold, a view). Model context (`regime`, `fold`, `seed`, `view`, `sweep`,
  `active_h`, `elbo`) becomes top-level JSON keys, other extras go under `data`.

Usage
-----
    from bionic.logging_setup import setup_logging, get_logger
    setup_logging()  # idempotent
    log = get_logger(__name__, component="inference", regime="ss")
    log.info("sweep=10 elbo=-1234.5 active_h=12", extra={"sweep": 10})

Environment knobs
-----------------
- LOG_LEVEL: DEBUG|INFO|WARNING|ERROR|CRITICAL (default: INFO)
- LOG_FORMAT: json|text (default: json); text prints the bare message
"""

import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Mapping

import numpy as np

# ---------------------------
# Formatters
# ---------------------------

# model context promoted to top-level keys, in this order
CONTEXT_FIELDS = ("component", "regime", "fold", "seed", "view", "sweep", "active_h", "elbo")

# LogRecord attributes that are not caller extras
_RECORD_ATTRS = frozenset(vars(logging.LogRecord("", 0, "", 0, "", None, None))) | {"message", "asctime"}


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars/arrays unwrapped, non-finite floats as strings."""
    if isinstance(value, np.generic):
        value = value.item()
    elif isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    elif isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    elif isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


class JsonFormatter(logging.Formatter):
    """
    One JSON object per record:

        {"ts", "level", "logger", <context fields>, "message", "data"?, "exc"?}

    Context fields (CONTEXT_FIELDS) sit at the top level when set; any other
    extra lands under "data". A diverged bound logs elbo as "nan" / "-inf".
    """

    def format(self, record: logging.LogRecord) -> str:
        payload: Dict[str, Any] = {
            "ts": datetime.fromtimestamp(record.created, tz=timezone.utc)
            .isoformat(timespec="milliseconds")
            .replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
        }
        extras = {k: v for k, v in record.__dict__.items() if k not in _RECORD_ATTRS}
        for key in CONTEXT_FIELDS:
            if key in extras:
                payload[key] = _plain(extras.pop(key))
        payload["message"] = record.getMessage()
        if extras:
            payload["data"] = {k: _plain(v) for k, v in sorted(extras.items())}
        if record.exc_info:
            payload["exc_type"] = getattr(record.exc_info[0], "__name__", str(record.exc_info[0]))
            payload["exc"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False)


class TextFormatter(logging.Formatter):
    """Bare message lines (`sweep=10 elbo=... active_h=...`)."""

    def format(self, record: logging.LogRecord) -> str:
        msg = record.getMessage()
        if record.levelno >= logging.WARNING:
            msg = f"{record.levelname}: {msg}"
        if record.exc_info:
            msg = f"{msg}\n{self.formatException(record.exc_info)}"
        return msg


# ---------------------------
# Setup & helpers
# ---------------------------


_CONFIGURED = False


def _level_from_env(default: str = "INFO") -> int:
    lvl = os.environ.get("LOG_LEVEL", default).upper()
    return {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }.get(lvl, logging.INFO)


def setup_logging(force: bool = False) -> None:
    """
    Configure root logging once, idempotently.

    Args:
        force: if True, remove existing handlers and reconfigure.
    """
    global _CONFIGURED
    if _CONFIGURED and not force:
        return

    root = logging.getLogger()
    level = _level_from_env("INFO")

    if force:
        for h in list(root.handlers):
            root.removeHandler(h)

    if not root.handlers:
        root.setLevel(level)
        sh = logging.StreamHandler(stream=sys.stderr)
        sh.setLevel(level)
        if os.environ.get("LOG_FORMAT", "json").lower() == "text":
            sh.setFormatter(TextFormatter())
        else:
            sh.setFormatter(JsonFormatter())
        root.addHandler(sh)

    _CONFIGURED = True


class ContextAdapter(logging.LoggerAdapter):
    """
    LoggerAdapter that merges context `extra` dicts (adapter.extra < call.extra).
    """

    def process(self, msg: Any, kwargs: Mapping[str, Any]) -> tuple[Any, Mapping[str, Any]]:
        call_extra = dict(kwargs.get("extra") or {})
        merged = dict(self.extra or {})
        merged.update(call_extra)
        kwargs["extra"] = merged
        return msg, kwargs

    def bind(self, **fields: Any) -> "ContextAdapter":
        """Child adapter with `fields` added to this one's context."""
        return ContextAdapter(self.logger, {**(self.extra or {}), **fields})


def get_logger(name: str = "bionic", **context: Any) -> ContextAdapter:
    """
    Return a context-aware logger. Call `setup_logging()` once at program start.

    Example:
        log = get_logger(__name__, component="evaluation", regime="tss")
        log.info("fold done", extra={"fold": 3, "auc": 0.91})
    """
    logger = logging.getLogger(name)
    return ContextAdapter(logger, context)


__all__ = [
    "CONTEXT_FIELDS",
    "JsonFormatter",
    "TextFormatter",
    "ContextAdapter",
    "setup_logging",
    "get_logger",
]
