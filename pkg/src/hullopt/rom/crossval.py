"""K-fold cross-validation of the surrogate's failure counts."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..criteria import Criteria, PenaltyConfig
from ..errors import DataError
from ..hull_model import ParameterSpace
from .database import SnapshotDatabase
from .surrogate import RankPolicy, surrogate_fit

SUMMARY_COLUMNS = ("rank", "qoi", "count", "min", "q1", "median", "q3", "max")


def fold_indices(n: int, folds: int, seed: int = 0) -> list[np.ndarray]:
    if folds < 2:
        raise DataError("cross-validation needs at least two folds")
    if n < folds:
        raise DataError(f"database has {n} entries, fewer than {folds} folds")
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(order, folds)]


def cross_validate(
    db: SnapshotDatabase,
    space: ParameterSpace,
    criteria: Criteria,
    pen: PenaltyConfig,
    ranks,
    folds: int = 5,
    seed: int = 0,
    restarts: int = 2,
) -> list[dict]:
    """Held-out errors of n_y and n_b, divided by their critical thresholds
    (thresholds of zero fall back to 1). One row per (rank, held-out entry)."""
    parts = fold_indices(len(db), folds, seed)
    truth = db.qoi_array()
    X = db.configs(space)
    y_norm = pen.y_crit or 1.0
    b_norm = pen.b_crit or 1.0
    rows = []
    for r in ranks:
        for k, test in enumerate(parts):
            train = np.setdiff1d(np.arange(len(db)), test)
            if len(train) < 2:
                raise DataError("each training fold needs at least two entries")
            model = surrogate_fit(db.subset(train), space, criteria, RankPolicy(fixed=int(r)),
                                  restarts=restarts, seed=seed)
            pred = model.predict_qois(X[test], pen)
            for j, i in enumerate(test):
                rows.append(
                    {
                        "rank": int(r),
                        "fold": k,
                        "entry": int(i),
                        "err_n_y": (pred[j, 0] - truth[i, 0]) / y_norm,
                        "err_n_b": (pred[j, 1] - truth[i, 1]) / b_norm,
                    }
                )
    return rows


def summarize(rows: list[dict]) -> list[dict]:
    out = []
    for r in sorted({row["rank"] for row in rows}):
        for qoi in ("n_y", "n_b"):
            e = np.array([row[f"err_{qoi}"] for row in rows if row["rank"] == r])
            q = np.percentile(e, [0, 25, 50, 75, 100])
            out.append(dict(zip(SUMMARY_COLUMNS, [r, qoi, len(e), *map(float, q)])))
    return out


def write_cv_csv(rows: list[dict], path) -> tuple[Path, Path]:
    """Raw per-entry errors to ``path`` and the distribution summary next to it."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["rank", "fold", "entry", "err_n_y", "err_n_b"])
        w.writeheader()
        w.writerows(rows)
    summary = path.with_name(path.stem + "_summary.csv")
    with open(summary, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(SUMMARY_COLUMNS))
        w.writeheader()
        w.writerows(summarize(rows))
    return path, summary
