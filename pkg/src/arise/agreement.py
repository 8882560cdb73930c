"""Inter-rater reliability: Krippendorff's alpha under the interval metric.

alpha = 1 - D_o / D_e, with squared-difference distance and pairwise
deletion of missing cells. Units rated by fewer than two raters carry no
pairable information and are excluded from both disagreement terms.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class AgreementMetric(enum.Enum):
    Interval = "interval"


@dataclass
class AgreementInput:
    """Reliability matrix: one row per rater, one column per item.

    ``None`` marks a missing cell. At least two raters, and at least two
    items must be pairable (two or more non-missing ratings).
    """

    matrix: list[list[float | None]]
    metric: AgreementMetric = AgreementMetric.Interval

    def __post_init__(self):
        if len(self.matrix) < 2:
            raise ValueError("agreement needs at least 2 raters")
        widths = {len(row) for row in self.matrix}
        if len(widths) != 1:
            raise ValueError("ragged matrix: all raters must cover the same items")
        n_items = widths.pop()
        if n_items < 2:
            raise ValueError("agreement needs at least 2 items")
        pairable = 0
        for j in range(n_items):
            ratings = [row[j] for row in self.matrix if row[j] is not None]
            if len(ratings) >= 2:
                pairable += 1
        if pairable < 2:
            raise ValueError("agreement needs at least 2 items with >= 2 ratings")


def krippendorff_alpha(data: AgreementInput) -> float:
    """Interval-level alpha in (-inf, 1].

    Degenerate data (every pairable rating identical) has zero expected
    disagreement; alpha is defined as 1.0 there and flagged in the log.
    """
    grid = np.array(
        [[np.nan if v is None else float(v) for v in row] for row in data.matrix],
        dtype=float,
    )
    observed_num = 0.0
    pooled: list[np.ndarray] = []
    n_pairable = 0
    for j in range(grid.shape[1]):
        column = grid[:, j]
        values = column[~np.isnan(column)]
        m = values.size
        if m < 2:
            continue
        # Sum of squared differences over ordered within-unit pairs.
        pair_sum = 2.0 * (m * float(np.sum(values**2)) - float(np.sum(values)) ** 2)
        observed_num += pair_sum / (m - 1)
        pooled.append(values)
        n_pairable += m

    values_all = np.concatenate(pooled)
    n = values_all.size
    observed = observed_num / n
    expected = 2.0 * (n * float(np.sum(values_all**2)) - float(np.sum(values_all)) ** 2) / (n * (n - 1))

    if expected == 0.0:
        logger.warning("degenerate agreement data: all pairable ratings identical; alpha defined as 1.0")
        return 1.0
    return 1.0 - observed / expected


def load_scores_csv(path: Path | str) -> AgreementInput:
    """Read a raters x items CSV (one row per rater, blank cell = missing)."""
    matrix: list[list[float | None]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or all(not cell.strip() for cell in row):
                continue
            matrix.append([float(cell) if cell.strip() else None for cell in row])
    return AgreementInput(matrix=matrix)
