# mlq/services/synthetic.py
"""
Seeded synthetic datasets standing in for real recordings.

The smart-home presets simulate nine appliances switching on and off as
square waves; the washer-dryer is the last of them. Appliance draws are far
apart (OFF below 5 units, ON above 400) so its state is separable by
construction. The aggregate column is the sum of the nine loads plus noise
strictly inside (-1, 1).
"""
import logging
from datetime import datetime, timedelta
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from mlq.app.config import settings
from mlq.utils.helpers import format_timestamp, write_text

from .ml_errors import PresetError

logger = logging.getLogger(__name__)

APPLIANCES = (
    "fridge", "freezer", "kettle", "toaster", "microwave",
    "dishwasher", "television", "computer", "washer_dryer",
)
WASHER = len(APPLIANCES) - 1

OFF_DRAW = (0.0, 4.9)
ON_DRAW = (410.0, 700.0)
WASHER_ON_DRAW = (2400.0, 2500.0)
NOISE = 0.999

TIMESTAMP_START = datetime(2013, 10, 1, 0, 0, 0)
SAMPLE_PERIOD = timedelta(seconds=8)

Columns = List[List[str]]


def _fmt(values: np.ndarray) -> List[str]:
    return [f"{v:.3f}" for v in values]


def _flags(values: np.ndarray) -> List[str]:
    return ["true" if v else "false" for v in values]


def _square_wave(rng: np.random.Generator, rows: int, duty_range) -> np.ndarray:
    period = int(rng.integers(20, 81))
    duty = rng.uniform(*duty_range)
    phase = int(rng.integers(0, period))
    return ((np.arange(rows) + phase) % period) < duty * period


def appliance_loads(rng: np.random.Generator, rows: int) -> np.ndarray:
    """(rows, 9) matrix of rounded loads; column `WASHER` is the washer-dryer."""
    loads = np.empty((rows, len(APPLIANCES)))
    for j in range(len(APPLIANCES)):
        washer = j == WASHER
        on = _square_wave(rng, rows, (0.3, 0.5) if washer else (0.1, 0.3))
        on_draw = rng.uniform(*(WASHER_ON_DRAW if washer else ON_DRAW), size=rows)
        off_draw = rng.uniform(*OFF_DRAW, size=rows)
        loads[:, j] = np.where(on, on_draw, off_draw)
    return np.round(loads, 3)


def _smarthome(rng: np.random.Generator, rows: int, target: str) -> Columns:
    # one extra sample so the regression target can look one step ahead
    loads = appliance_loads(rng, rows + 1)
    noise = rng.uniform(-NOISE, NOISE, size=rows + 1)
    aggregate = np.round(loads.sum(axis=1) + noise, 3)
    columns = [_fmt(loads[:rows, j]) for j in range(len(APPLIANCES))]
    columns.append(_fmt(aggregate[:rows]))
    washer_on = loads[:, WASHER] > ON_DRAW[0]
    if target == "state":
        columns.append(_flags(washer_on[:rows]))
    else:
        columns.append(_fmt(loads[1:, WASHER]))
    return columns


def _line(rng: np.random.Generator, rows: int) -> Columns:
    x = np.round(rng.uniform(-10.0, 10.0, size=rows), 3)
    return [_fmt(x), _fmt(2.0 * x + 1.0)]


def _separable(rng: np.random.Generator, rows: int) -> Columns:
    positive = rng.random(rows) < 0.5
    centre = np.where(positive, 1.5, -1.5)
    x1 = centre + rng.normal(0.0, 0.5, size=rows)
    x2 = centre + rng.normal(0.0, 0.5, size=rows)
    return [_fmt(x1), _fmt(x2), _flags(positive)]


def _ping_clients(rng: np.random.Generator, rows: int) -> Columns:
    octets = rng.integers(0, 256, size=(rows, 2))
    codes = rng.integers(0, 1001, size=rows)
    return [
        [f"10.0.{a}.{b}" for a, b in octets],
        [str(c) for c in codes],
        _flags(codes > 500),
    ]


PRESETS: Dict[str, Callable[[np.random.Generator, int], Columns]] = {
    "smarthome-classify": lambda rng, rows: _smarthome(rng, rows, "state"),
    "smarthome-cluster": lambda rng, rows: _smarthome(rng, rows, "state"),
    "smarthome-regress": lambda rng, rows: _smarthome(rng, rows, "load"),
    "line": _line,
    "separable-2d": _separable,
    "ping-clients": _ping_clients,
}


def gen_synthetic(preset: str, seed: Optional[int] = None, rows: int = 1000,
                  timestamps: bool = False, target: bool = True) -> str:
    """CSV text of a preset; identical arguments give identical bytes.

    `target=False` drops the trailing label/target column (unlabeled data).
    """
    if preset not in PRESETS:
        raise PresetError(f"unknown preset '{preset}' (choose from {', '.join(sorted(PRESETS))})")
    if rows < 1:
        raise PresetError("rows must be positive")
    seed = settings.SEED if seed is None else seed
    columns = PRESETS[preset](np.random.default_rng(seed), rows)
    if not target:
        columns = columns[:-1]
    if timestamps:
        columns.insert(0, [format_timestamp(TIMESTAMP_START + i * SAMPLE_PERIOD) for i in range(rows)])
    frame = pd.DataFrame({i: col for i, col in enumerate(columns)})
    logger.info(f"Generated {rows} row(s) of '{preset}' with seed {seed}")
    return frame.to_csv(header=False, index=False, lineterminator="\n")


def write_synthetic(path: str, preset: str, seed: Optional[int] = None, rows: int = 1000,
                    timestamps: bool = False, target: bool = True) -> str:
    text = gen_synthetic(preset, seed, rows, timestamps, target)
    write_text(path, text)
    return text
