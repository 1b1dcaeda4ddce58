"""
Utility Functions Module
Helper functions for compensated sums, confidence bands, grid parsing and serialization
"""
import math
from enum import Enum
from typing import Any, Iterable, List, Tuple, Union
import logging

import numpy as np

logger = logging.getLogger(__name__)

# two-sided 99% normal quantile
Z_99 = 2.5758293035489004


def neumaier_cumsum(values: Iterable[float]) -> np.ndarray:
    """
    Running sums with Neumaier compensation

    Args:
        values: Summands in order

    Returns:
        Array whose k-th entry is the compensated sum of values[0..k]
    """
    out: List[float] = []
    total = 0.0
    comp = 0.0
    for v in values:
        v = float(v)
        s = total + v
        if abs(total) >= abs(v):
            comp += (total - s) + v
        else:
            comp += (v - s) + total
        total = s
        out.append(total + comp)
    return np.asarray(out, dtype=float)


class NeumaierAccumulator:
    """Elementwise compensated accumulation of equally-shaped arrays"""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)

    def add(self, values: np.ndarray) -> None:
        s = self.total + values
        big = np.abs(self.total) >= np.abs(values)
        self.comp += np.where(big, (self.total - s) + values, (values - s) + self.total)
        self.total = s

    def value(self) -> np.ndarray:
        return self.total + self.comp


def wilson_interval(
    successes: Union[int, np.ndarray],
    total: int,
    z: float = Z_99
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Wilson score interval for binomial proportions

    Args:
        successes: Success count(s)
        total: Number of trials
        z: Normal quantile (99% two-sided by default)

    Returns:
        (center, half_width) arrays
    """
    if total <= 0:
        raise ValueError("Wilson interval needs at least one trial")
    p = np.asarray(successes, dtype=float) / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (p + z2 / (2.0 * total)) / denom
    half = z * np.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total)) / denom
    return center, half


def parse_int_range(text: str) -> List[int]:
    """
    Parse integer selections such as "3", "1..7" or "1,4,16"

    Args:
        text: Range expression

    Returns:
        List of integers in the given order
    """
    values: List[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError(f"empty integer range {part!r}")
            values.extend(range(lo_i, hi_i + 1))
        else:
            values.append(int(part))
    if not values:
        raise ValueError(f"no integers in {text!r}")
    return values


def parse_real_grid(text: str) -> List[float]:
    """
    Parse real grids: "log:a..b:k", "lin:a..b:k" or a comma list

    Args:
        text: Grid expression

    Returns:
        List of grid points
    """
    text = str(text).strip()
    if text.startswith(("log:", "lin:")):
        kind, rest = text.split(":", 1)
        bounds, _, count = rest.rpartition(":")
        lo, hi = (float(v) for v in bounds.split("..", 1))
        k = int(count)
        if k < 1:
            raise ValueError(f"grid {text!r} needs at least one point")
        if kind == "log":
            if lo <= 0 or hi <= 0:
                raise ValueError(f"log grid {text!r} needs positive bounds")
            grid = np.logspace(math.log10(lo), math.log10(hi), k)
        else:
            grid = np.linspace(lo, hi, k)
        return [float(v) for v in grid]
    return parse_float_list(text)


def parse_float_list(text: str) -> List[float]:
    values = [float(part) for part in str(text).split(",") if part.strip()]
    if not values:
        raise ValueError(f"no numbers in {text!r}")
    return values


def convert_numpy_types(obj: Any) -> Any:
    """
    Recursively convert numpy types to native Python types for JSON serialization

    Args:
        obj: Object that may contain numpy types

    Returns:
        Object with numpy types converted to Python types
    """
    if isinstance(obj, Enum):
        return obj.value
    elif isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, np.floating):
        return float(obj)
    elif isinstance(obj, np.ndarray):
        return [convert_numpy_types(item) for item in obj.tolist()]
    elif isinstance(obj, np.bool_):
        return bool(obj)
    elif isinstance(obj, dict):
        return {key: convert_numpy_types(value) for key, value in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [convert_numpy_types(item) for item in obj]
    else:
        return obj
