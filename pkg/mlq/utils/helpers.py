# mlq/utils/helpers.py

import hashlib
import json
import logging
import zlib
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

logger = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%d-%m-%Y %H:%M:%S"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def canonical_json(data: Any) -> str:
    """Compact, key-sorted JSON; identical inputs give identical text."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text.strip(), TIMESTAMP_FORMAT)


def format_timestamp(moment: datetime) -> str:
    return moment.strftime(TIMESTAMP_FORMAT)


def string_code(value: str) -> float:
    """Stable numeric stand-in for a string feature, in [0, 1)."""
    return zlib.crc32(value.encode("utf-8")) / 2**32


def rebase(path: str, root: Optional[str]) -> str:
    """Resolve a model-relative path against `root` (absolute paths are kept)."""
    if root is None or Path(path).is_absolute():
        return path
    return str(Path(root) / path)


def read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        return fh.read()


def write_text(path: str, text: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    logger.info(f"Wrote {path}")
