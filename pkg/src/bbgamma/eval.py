"""Classification metrics and McNemar significance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

Z_CRITICAL = 2.32  # one-sided normal threshold for p <= 0.01


def _pair(predictions, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions).ravel()
    y = np.asarray(labels).ravel()
    if p.shape != y.shape:
        raise ValueError(f"{p.size} predictions for {y.size} labels")
    return p, y


def zero_one_total(predictions, labels) -> int:
    p, y = _pair(predictions, labels)
    return int(np.count_nonzero(p != y))


def error_percent(predictions, labels) -> float:
    p, y = _pair(predictions, labels)
    if y.size == 0:
        raise ValueError("error rate of an empty set is undefined")
    return 100.0 * zero_one_total(p, y) / y.size


@dataclass(frozen=True)
class ContingencyPair:
    """Discordant counts: ``n01`` = A wrong and B right, ``n10`` = A right and B wrong."""

    n01: int
    n10: int

    def __post_init__(self):
        if self.n01 < 0 or self.n10 < 0:
            raise ValueError("contingency counts must be non-negative")

    @classmethod
    def from_predictions(cls, pred_a, pred_b, labels) -> "ContingencyPair":
        a, y = _pair(pred_a, labels)
        b, _ = _pair(pred_b, labels)
        ok_a, ok_b = a == y, b == y
        return cls(int(np.count_nonzero(~ok_a & ok_b)), int(np.count_nonzero(ok_a & ~ok_b)))

    def __add__(self, other: "ContingencyPair") -> "ContingencyPair":
        return ContingencyPair(self.n01 + other.n01, self.n10 + other.n10)


@dataclass(frozen=True)
class McNemarResult:
    z: float
    defined: bool

    @property
    def significant(self) -> bool:
        return self.defined and self.z >= Z_CRITICAL


def mcnemar_z(pair: ContingencyPair) -> McNemarResult:
    """Continuity-corrected statistic ``(|n01 - n10| - 1) / sqrt(n01 + n10)``.

    With no discordant pairs the statistic is undefined; 0 is reported with
    ``defined=False``.
    """
    total = pair.n01 + pair.n10
    if total == 0:
        return McNemarResult(0.0, False)
    return McNemarResult((abs(pair.n01 - pair.n10) - 1.0) / math.sqrt(total), True)


def pooled_mcnemar(pairs: Iterable[ContingencyPair]) -> McNemarResult:
    """Sum discordant counts over splits, then test once."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("pooled McNemar needs at least one split")
    total = ContingencyPair(0, 0)
    for p in pairs:
        total = total + p
    return mcnemar_z(total)
