"""Unified chi-square folding and cross-algorithm ranking scores."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..errors import UndefinedMetricError


def chi_tilde(chi2: float) -> float:
    """Fold a reduced chi-square about its ideal value 1.

    Under-dispersion (chi2 < 1) is flipped to 1/chi2 so 1 is always the
    best attainable score and the result never drops below 1.
    """
    c = float(chi2)
    if not c > 0:
        raise UndefinedMetricError(f"chi-square must be positive, got {c!r}")
    return c if c >= 1.0 else 1.0 / c


def ranking_score(values, direction: str = "higher") -> np.ndarray:
    """Per-algorithm scores 100 (L - R + 1)/L from one metric column.

    ``values[k]`` is algorithm k's metric value; ``direction`` says whether
    larger ("higher") or smaller ("lower") values are better.  Ties share
    the average of the ranks they straddle, so a two-way tie for first out
    of ten scores 95 for both.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise UndefinedMetricError("ranking expects a nonempty 1-D value set")
    if direction == "higher":
        ranks = rankdata(-v, method="average")
    elif direction == "lower":
        ranks = rankdata(v, method="average")
    else:
        raise UndefinedMetricError(f"unknown ranking direction {direction!r}")
    ell = v.size
    return 100.0 * (ell - ranks + 1.0) / ell


def mean_ranking_scores(columns: dict, directions: dict) -> dict:
    """Average the per-metric ranking scores for each algorithm.

    ``columns[metric][algorithm]`` holds that algorithm's value for the
    metric; the result maps algorithm -> mean score over all metrics the
    algorithm appears in.
    """
    totals: dict = {}
    counts: dict = {}
    for metric, per_algo in columns.items():
        names = sorted(per_algo)
        scores = ranking_score(
            [per_algo[a] for a in names], directions.get(metric, "higher")
        )
        for name, s in zip(names, scores):
            totals[name] = totals.get(name, 0.0) + float(s)
            counts[name] = counts.get(name, 0) + 1
    return {name: totals[name] / counts[name] for name in totals}
