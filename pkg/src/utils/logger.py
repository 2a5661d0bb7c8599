import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

LOG_FILE = "codenet.log"


def setup_logger(log_dir=None, level=logging.INFO, stream=None):
    """Root logger with a rotating debug file in `log_dir` and info+ on stdout."""
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)
    for handler in [h for h in logger.handlers if getattr(h, "_codenet", False)]:
        logger.removeHandler(handler)
        handler.close()

    log_format = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )

    if log_dir is not None:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(
            Path(log_dir) / LOG_FILE,
            maxBytes=5 * 1024 * 1024,  # 5 MB
            backupCount=3
        )
        file_handler.setFormatter(log_format)
        file_handler.setLevel(logging.DEBUG)
        file_handler._codenet = True
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler(stream or sys.stdout)
    console_handler.setFormatter(log_format)
    console_handler.setLevel(level)
    console_handler._codenet = True
    logger.addHandler(console_handler)

    return logger
