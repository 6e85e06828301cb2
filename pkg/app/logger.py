import logging
import sys
from pathlib import Path
from datetime import datetime

from app.config import settings


def setup_logger():
    """Configure the library logger (stderr, plus a dated file outside production)"""

    logger = logging.getLogger("tseq")
    logger.setLevel(settings.LOG_LEVEL.upper())

    if logger.hasHandlers():
        return logger

    # stdout carries machine records, so the console handler goes to stderr
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(settings.LOG_LEVEL.upper())

    formatter = logging.Formatter(
        '%(asctime)s | %(levelname)s | %(name)s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if settings.ENVIRONMENT != "production" and settings.LOG_DIR:
        try:
            log_dir = Path(settings.LOG_DIR)
            log_dir.mkdir(parents=True, exist_ok=True)

            log_file = log_dir / f"tseq_{datetime.now().strftime('%Y%m%d')}.log"
            file_handler = logging.FileHandler(log_file)
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
        except Exception as e:
            logger.warning(f"Could not create file handler: {e}")

    logger.propagate = False
    return logger


logger = setup_logger()
