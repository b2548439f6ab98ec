# mlq/utils/logger.py
import logging
import sys
from typing import Optional

from mlq.app.config import settings


def setup_logging(level: Optional[str] = None):
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
