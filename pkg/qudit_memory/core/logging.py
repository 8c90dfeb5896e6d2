import json
import logging
from datetime import datetime, timezone
from typing import Optional

LOGGER_NAME = "qudit_memory"
PLAIN_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class JSONFormatter(logging.Formatter):
    def format(self, record):
        log_record = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
        }

        if hasattr(record, "run_id"):
            log_record["run_id"] = record.run_id

        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_record)


def setup_logging(level: Optional[str] = None, json_format: Optional[bool] = None) -> logging.Logger:
    """Attach a single stderr handler to the package logger.

    Calling it again only updates the level and formatter.
    """
    from .config import settings

    level = (level or settings.LOG_LEVEL).upper()
    json_format = settings.LOG_JSON if json_format is None else json_format

    logger = logging.getLogger(LOGGER_NAME)
    handler = next(
        (h for h in logger.handlers if getattr(h, "_qudit_memory", False)),
        None
    )
    if handler is None:
        handler = logging.StreamHandler()
        handler._qudit_memory = True
        logger.addHandler(handler)

    handler.setFormatter(JSONFormatter() if json_format else logging.Formatter(PLAIN_FORMAT))
    logger.setLevel(level)
    logger.propagate = False
    return logger
