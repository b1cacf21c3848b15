"""Data ingestion and test-statistic computation.

CSV conventions
---------------
* Raw data files: one header row naming the columns; an optional ``group``
  column holding exactly two labels; every other column is a numeric
  feature.  Rows are observations.  Values parse as IEEE doubles; blank or
  non-numeric cells are rejected at ingestion with the offending row/column
  named.
* Statistic files: header ``index,statistic[,margin]``, one row per
  hypothesis, written at 17 significant digits so a written file re-reads to
  bit-identical values.

Indices are 0-based everywhere.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import HypothesisShape, StatisticVector

__all__ = [
    "DataMatrix",
    "read_data_csv",
    "read_statistics_csv",
    "write_statistics_csv",
    "column_mean_statistics",
    "two_group_statistics",
    "welch_t_statistics",
    "apply_margin_shift",
]

GROUP_COLUMN = "group"


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An n-by-m matrix of observations with optional two-group labels.

    ``values[i, j]`` is observation i of feature j.  ``group`` (when
    present) assigns each row to one of exactly two labels; ``group_labels``
    lists them in first-appearance order, and the first label plays the role
    of the "treatment" group in two-sample statistics.
    """

    values: np.ndarray
    feature_names: tuple[str, ...]
    group: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError("values must be a non-empty 2-d array")
        if not np.all(np.isfinite(values)):
            raise ValueError("data matrix contains non-finite entries")
        names = tuple(self.feature_names)
        if len(names) != values.shape[1]:
            raise ValueError("feature_names length must match the number of columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", names)
        if self.group is not None:
            group = np.asarray(self.group)
            if group.shape != (values.shape[0],):
                raise ValueError("group must have one label per row")
            if len(dict.fromkeys(group.tolist())) != 2:
                raise ValueError("group column must contain exactly two distinct labels")
            object.__setattr__(self, "group", group)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def m(self) -> int:
        return int(self.values.shape[1])

    @property
    def group_labels(self) -> tuple:
        """The two labels in first-appearance order (treatment first)."""
        if self.group is None:
            raise ValueError("data matrix has no group column")
        return tuple(dict.fromkeys(self.group.tolist()))

    def group_rows(self) -> tuple[np.ndarray, np.ndarray]:
        """Row indices of the first-appearing and second-appearing label."""
        first, second = self.group_labels
        return np.flatnonzero(self.group == first), np.flatnonzero(self.group == second)


def read_data_csv(path) -> DataMatrix:
    """Read a raw data CSV (header row, optional ``group`` column)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: empty file (a header row is required)")
        header = [h.strip() for h in header]
        group_idx = header.index(GROUP_COLUMN) if GROUP_COLUMN in header else None
        feature_cols = [k for k in range(len(header)) if k != group_idx]
        if not feature_cols:
            raise ValueError(f"{path}: no numeric feature columns")
        rows: list[list[float]] = []
        groups: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}"
                )
            parsed = []
            for k in feature_cols:
                cell = row[k].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {lineno}, column '{header[k]}': "
                        f"could not parse {cell!r} as a number"
                    ) from None
                if not math.isfinite(value):
                    raise ValueError(
                        f"{path}: row {lineno}, column '{header[k]}': non-finite value {cell!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
            if group_idx is not None:
                groups.append(row[group_idx].strip())
        if not rows:
            raise ValueError(f"{path}: no data rows")
    return DataMatrix(
        values=np.asarray(rows, dtype=np.float64),
        feature_names=tuple(header[k] for k in feature_cols),
        group=np.asarray(groups) if group_idx is not None else None,
    )


def read_statistics_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a ``index,statistic[,margin]`` file.

    Returns ``(statistics, margins)``, ordered by index; ``margins`` is
    None when the file has no margin column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: empty file (a header row is required)")
        header = [h.strip() for h in header]
        if header[:2] != ["index", "statistic"] or (
            len(header) > 2 and header[2] != "margin"
        ):
            raise ValueError(
                f"{path}: expected header 'index,statistic[,margin]', got {header!r}"
            )
        has_margin = len(header) > 2
        triples = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                idx = int(row[0])
                stat = float(row[1])
                margin = float(row[2]) if has_margin else None
            except (ValueError, IndexError):
                raise ValueError(f"{path}: malformed row {lineno}: {row!r}") from None
            triples.append((idx, stat, margin))
    if not triples:
        raise ValueError(f"{path}: no data rows")
    triples.sort(key=lambda tr: tr[0])
    stats = np.asarray([tr[1] for tr in triples], dtype=np.float64)
    margins = (
        np.asarray([tr[2] for tr in triples], dtype=np.float64) if has_margin else None
    )
    return stats, margins


def write_statistics_csv(sv: StatisticVector, path) -> None:
    """Write ``index,statistic,margin`` rows at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "statistic", "margin"])
        for i in range(sv.m):
            writer.writerow(
                [i, format(sv.statistics[i], ".17g"), format(sv.margins[i], ".17g")]
            )


def column_mean_statistics(
    dm: DataMatrix, margins, shape: HypothesisShape = HypothesisShape.DIRECTIONAL
) -> StatisticVector:
    """Per-feature column means as test statistics."""
    return StatisticVector(dm.values.mean(axis=0), margins, shape)


def two_group_statistics(
    dm: DataMatrix, margins, shape: HypothesisShape = HypothesisShape.DIRECTIONAL
) -> StatisticVector:
    """Scaled mean differences ``sqrt(n) * (mean_treat - mean_control)``.

    Both groups must have the same size n (the scaling gives the statistic
    variance 2*sigma^2 under i.i.d. noise, independent of n; margins are
    interpreted on this scale).  The first-appearing group label is
    treated as the treatment arm.
    """
    rows_a, rows_b = dm.group_rows()
    if rows_a.size != rows_b.size:
        raise ValueError(
            f"two_group_statistics needs equal group sizes, got {rows_a.size} and {rows_b.size}"
        )
    n = rows_a.size
    if n < 1:
        raise ValueError("each group needs at least one observation")
    diff = dm.values[rows_a].mean(axis=0) - dm.values[rows_b].mean(axis=0)
    return StatisticVector(math.sqrt(n) * diff, margins, shape)


def welch_t_statistics(
    dm: DataMatrix, margins, shape: HypothesisShape = HypothesisShape.DIRECTIONAL
) -> tuple[StatisticVector, np.ndarray, np.ndarray]:
    """Welch t statistics (unequal variances allowed, unequal sizes allowed).

    Features whose sample variance is zero in *both* groups have an
    undefined statistic; they are dropped with a warning.

    Returns
    -------
    (sv, kept, dof)
        ``sv`` holds the statistics for the retained features, ``kept`` maps
        each retained position back to its original column index, and
        ``dof`` carries the Welch-Satterthwaite degrees of freedom (computed
        for completeness; the symmetry-based procedures never consume it).
    """
    rows_a, rows_b = dm.group_rows()
    na, nb = rows_a.size, rows_b.size
    if na < 2 or nb < 2:
        raise ValueError("welch_t_statistics needs at least two observations per group")
    a = dm.values[rows_a]
    b = dm.values[rows_b]
    var_a = a.var(axis=0, ddof=1)
    var_b = b.var(axis=0, ddof=1)
    se2 = var_a / na + var_b / nb
    kept = np.flatnonzero(se2 > 0.0)
    if kept.size < dm.m:
        dropped = np.setdiff1d(np.arange(dm.m), kept)
        warnings.warn(
            f"dropping {dropped.size} zero-variance feature(s): "
            f"{[dm.feature_names[int(j)] for j in dropped[:10]]}",
            stacklevel=2,
        )
    if kept.size == 0:
        raise ValueError("all features have zero variance in both groups")
    mean_diff = a.mean(axis=0)[kept] - b.mean(axis=0)[kept]
    se2 = se2[kept]
    t = mean_diff / np.sqrt(se2)
    with np.errstate(divide="ignore", invalid="ignore"):
        dof = se2**2 / (
            (var_a[kept] / na) ** 2 / (na - 1) + (var_b[kept] / nb) ** 2 / (nb - 1)
        )
    marg = np.asarray(margins, dtype=np.float64)
    if marg.ndim > 0 and marg.size == dm.m:
        marg = marg[kept]
    return StatisticVector(t, marg, shape), kept, dof


def apply_margin_shift(sv: StatisticVector, new_margins=None, flip=None) -> StatisticVector:
    """Fold margins into statistics and/or convert hypothesis sidedness.

    Parameters
    ----------
    sv : StatisticVector
    new_margins : float or array, optional
        Directional only.  Replaces the margins by ``new_margins`` while
        shifting each statistic by the margin change, preserving every
        ``T_j - delta_j`` difference.  Shifting to margin 0 is exact in
        floating point (the difference is formed once); other targets can
        move a cut point by one rounding step.
    flip : boolean mask or index array, optional
        Hypotheses to mirror.  For a directional family this negates both
        statistic and margin, turning a left-sided null ``mu_j >= delta_j``
        (tested on the negated scale) into the right-sided convention used
        everywhere here.  For an equivalence family it negates the statistic
        only (the family is sign-symmetric, so inference is unchanged).

    Applying the same flip twice returns the original vector.
    """
    stats = sv.statistics.copy()
    margins = sv.margins.copy()
    if flip is not None:
        flip_idx = np.asarray(flip)
        stats[flip_idx] = -stats[flip_idx]
        if sv.shape is HypothesisShape.DIRECTIONAL:
            margins[flip_idx] = -margins[flip_idx]
    if new_margins is not None:
        if sv.shape is not HypothesisShape.DIRECTIONAL:
            raise ValueError("margin shifts are only defined for directional families")
        target = np.broadcast_to(
            np.asarray(new_margins, dtype=np.float64), stats.shape
        ).copy()
        if np.all(target == 0.0):
            stats = stats - margins
        else:
            stats = (stats - margins) + target
        margins = target
    return StatisticVector(stats, margins, sv.shape)
