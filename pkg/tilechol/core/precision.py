import enum

import ml_dtypes
import numpy as np

from tilechol.constants import (
    BYTES_PER_ELEMENT,
    FP8_E4M3_MAX,
    PRECISION_CODES,
    PRECISION_NAMES,
    UNIT_ROUNDOFF,
)


class Precision(str, enum.Enum):
    """Storage precisions, ordered from most to least precise.

    Comparisons follow precision, not the string value:
    FP64 > FP32 > FP16 > FP8E4M3.
    """

    FP64 = "FP64"
    FP32 = "FP32"
    FP16 = "FP16"
    FP8E4M3 = "FP8E4M3"

    @property
    def unit_roundoff(self) -> float:
        return UNIT_ROUNDOFF[self.value]

    @property
    def bytes_per_element(self) -> int:
        return BYTES_PER_ELEMENT[self.value]

    @property
    def code(self) -> int:
        return PRECISION_CODES[self.value]

    @property
    def rank(self) -> int:
        # higher is more precise
        return len(PRECISION_NAMES) - PRECISION_NAMES.index(self.value)

    @classmethod
    def parse(cls, name: str) -> "Precision":
        key = name.strip().upper()
        if key == "FP8":
            key = "FP8E4M3"
        return cls(key)

    @classmethod
    def from_code(cls, code: int) -> "Precision":
        for p in cls:
            if p.code == code:
                return p
        raise ValueError(f"unknown precision code {code}")

    def __lt__(self, other):
        if not isinstance(other, Precision):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other):
        if not isinstance(other, Precision):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other):
        if not isinstance(other, Precision):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other):
        if not isinstance(other, Precision):
            return NotImplemented
        return self.rank >= other.rank

    def __str__(self) -> str:
        return self.value


def quantize(values: np.ndarray, p: Precision) -> np.ndarray:
    """Round every element to the value set of ``p`` (round to nearest even).

    The result is a new FP64 array. FP8 E4M3 saturates at +-448, FP16 and
    FP32 overflow to infinity.
    """
    values = np.asarray(values, dtype=np.float64)
    if p is Precision.FP64:
        return values.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        if p is Precision.FP32:
            return values.astype(np.float32).astype(np.float64)
        if p is Precision.FP16:
            return values.astype(np.float16).astype(np.float64)
        clipped = np.clip(values, -FP8_E4M3_MAX, FP8_E4M3_MAX)
        return clipped.astype(ml_dtypes.float8_e4m3fn).astype(np.float64)


def cast_scalar(x: float, p: Precision) -> float:
    """Value of ``x`` rounded to ``p``, expressed as an FP64 scalar."""
    return float(quantize(np.array([x], dtype=np.float64), p)[0])


def highest(precisions) -> Precision:
    return max(precisions)
