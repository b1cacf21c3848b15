"""Reference procedures: resampling FDP bounds, BH, step-down FDX, exact tests.

Three families live here:

* SAM-style significance-analysis bounds: for a group of data
  transformations (sign flips or permutations) under which the joint null
  distribution is invariant, the number of false rejections at threshold t
  is bounded by an order statistic of the rejection counts over the
  transformed data sets.  At ``alpha = 0.5`` (the default) the bound holds
  at median level, making it directly comparable to the mirror-count
  estimators in :mod:`artifact.estimators`; the two-transformation special
  case (identity + global negation/swap) *equals* the directional mirror
  estimator at margin zero.
* P-value procedures: Benjamini-Hochberg step-up (mean FDP) and the
  Lehmann-Romano step-down (tail FDP) with critical values
  ``alpha * (floor(gamma*i) + 1) / (m + floor(gamma*i) + 1 - i)``.
* Exact single-hypothesis tests by full enumeration of a transformation
  group: one-sample sign flips (all 2^n patterns) and two-group label
  permutations (all C(2n, n) distinct splits).

Feasibility caps raise :class:`artifact.core.InfeasibleError`: 2^n
enumeration needs n <= 20, and full split enumeration needs
C(2n, n) <= 2^20.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterator

import numpy as np

from .core import InfeasibleError

__all__ = [
    "TransformationGroup",
    "SamEstimate",
    "sam_bound",
    "sam_two_transform",
    "benjamini_hochberg",
    "lehmann_romano_critical_values",
    "lehmann_romano_stepdown",
    "ExactTestResult",
    "sign_flip_test",
    "two_group_permutation_test",
]

_NEAR_INT_TOL = 1e-9


def _guarded_floor(x: np.ndarray | float):
    """floor(x) robust to float representation of rational inputs.

    ``gamma * i`` for, say, gamma=0.3, i=10 evaluates to 2.999...96 although
    the intended real value is 3; values within a small relative tolerance
    of an integer are snapped before flooring.  (This guards index
    arithmetic only -- threshold comparisons elsewhere stay exact.)
    """
    x = np.asarray(x, dtype=np.float64)
    nearest = np.round(x)
    snapped = np.where(np.abs(x - nearest) <= _NEAR_INT_TOL * np.maximum(1.0, np.abs(x)), nearest, x)
    out = np.floor(snapped)
    return out if out.ndim else float(out)


def _order_index(alpha: float, n_transforms: int) -> int:
    """1-based index of the ceil((1-alpha)*B)-th smallest of B values."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    # ceil((1 - a) * B) == B - floor(a * B) for integer B, evaluated with the
    # guarded floor so rationals like 7/70 land on the intended index.
    k = n_transforms - int(_guarded_floor(alpha * n_transforms))
    return min(max(k, 1), n_transforms)


@dataclass(frozen=True, eq=False)
class TransformationGroup:
    """A finite set of data transformations with the identity first.

    ``signs`` (entries +-1, one row per transformation) encodes row-wise
    sign flips; ``perms`` encodes row permutations.  Exactly one of the two
    is set.  Subsampled variants draw transformations with replacement,
    always keep the identity as row 0, and record their seed.
    """

    kind: str
    n: int
    signs: np.ndarray | None = None
    perms: np.ndarray | None = None
    seed: int | None = None

    @property
    def size(self) -> int:
        arr = self.signs if self.signs is not None else self.perms
        return int(arr.shape[0])

    @property
    def n_rows(self) -> int:
        """Number of data rows the transformations act on."""
        arr = self.signs if self.signs is not None else self.perms
        return int(arr.shape[1])

    @classmethod
    def sign_flip_full(cls, n: int) -> "TransformationGroup":
        """All 2^n sign-flip patterns (requires n <= 20)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if n > 20:
            raise InfeasibleError(
                f"full sign-flip enumeration needs n <= 20 (2^n transformations); got n={n}"
            )
        codes = np.arange(2**n, dtype=np.int64)
        bits = (codes[:, None] >> np.arange(n)[None, :]) & 1
        signs = (1 - 2 * bits).astype(np.int8)
        return cls(kind="sign-flip-full", n=n, signs=signs)

    @classmethod
    def sign_flip_subsample(cls, n: int, n_transforms: int, seed: int) -> "TransformationGroup":
        """Identity + (n_transforms - 1) random sign-flip patterns."""
        if n_transforms < 2:
            raise ValueError("n_transforms must be >= 2 (identity plus at least one draw)")
        rng = np.random.default_rng(seed)
        signs = rng.choice(np.asarray([-1, 1], dtype=np.int8), size=(n_transforms, n))
        signs[0] = 1
        return cls(kind="sign-flip-subsample", n=n, signs=signs, seed=seed)

    @classmethod
    def negation_pair(cls, n: int) -> "TransformationGroup":
        """The two-element subgroup {identity, global negation}."""
        signs = np.ones((2, n), dtype=np.int8)
        signs[1] = -1
        return cls(kind="negation-pair", n=n, signs=signs)

    @classmethod
    def case_control_swap(cls, n: int) -> "TransformationGroup":
        """{identity, swap-all-cases-with-controls} acting on 2n rows.

        ``n`` is the per-group size; rows 0..n-1 are the cases and rows
        n..2n-1 the controls.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        identity = np.arange(2 * n)
        swap = np.concatenate([identity[n:], identity[:n]])
        return cls(kind="case-control-swap", n=n, perms=np.stack([identity, swap]))

    @classmethod
    def permutation_subsample(cls, n: int, n_transforms: int, seed: int) -> "TransformationGroup":
        """Identity + random row permutations of 2n rows (n per group)."""
        if n_transforms < 2:
            raise ValueError("n_transforms must be >= 2 (identity plus at least one draw)")
        rng = np.random.default_rng(seed)
        perms = np.empty((n_transforms, 2 * n), dtype=np.int64)
        perms[0] = np.arange(2 * n)
        for b in range(1, n_transforms):
            perms[b] = rng.permutation(2 * n)
        return cls(kind="permutation-subsample", n=n, perms=perms, seed=seed)

    def apply_to(self, data: np.ndarray) -> Iterator[np.ndarray]:
        """Yield the transformed copies of ``data`` (identity first)."""
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != self.n_rows:
            raise ValueError(
                f"data must be 2-d with {self.n_rows} rows for this group, got {data.shape}"
            )
        if self.signs is not None:
            for row in self.signs:
                yield data * row[:, None]
        else:
            for perm in self.perms:
                yield data[perm]

    def statistics(self, data: np.ndarray, statistic_fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Stack ``statistic_fn`` over all transformed data sets: (B, m)."""
        return np.stack([np.asarray(statistic_fn(x), dtype=np.float64) for x in self.apply_to(data)])


@dataclass(frozen=True, eq=False)
class SamEstimate:
    """Order-statistic FDP bound over a transformation group at threshold t."""

    t: float
    rejected: np.ndarray
    r: int
    v_bar: int
    fdp_bar: float
    alpha: float
    order_index: int
    n_transforms: int
    kind: str
    seed: int | None = None


def sam_bound(
    data: np.ndarray,
    statistic_fn: Callable[[np.ndarray], np.ndarray],
    group: TransformationGroup,
    t: float,
    alpha: float = 0.5,
) -> SamEstimate:
    """Significance-analysis bound on false rejections at threshold t.

    Computes the rejection count ``R(g(X), t) = #{j : T_j(g(X)) > t}`` for
    every transformation g in the group, takes the
    ``ceil((1-alpha)*B)``-th smallest of those B counts as the bound, and
    caps it at the observed count.  With the default ``alpha = 0.5`` this is
    a median-level bound.

    Parameters
    ----------
    data : ndarray, shape (n_rows, m)
    statistic_fn : callable
        Maps a (transformed) data matrix to the m test statistics.
    group : TransformationGroup
    t : float
        Rejection threshold (statistics strictly above t are rejected).
    alpha : float
        One minus the quantile used for the bound, in (0, 1).
    """
    t = float(t)
    stats = group.statistics(data, statistic_fn)
    counts = (stats > t).sum(axis=1)
    k = _order_index(alpha, group.size)
    bound = int(np.partition(counts, k - 1)[k - 1])
    observed = int(counts[0])  # identity is always row 0
    rejected = np.flatnonzero(stats[0] > t)
    v_bar = min(bound, observed)
    return SamEstimate(
        t=t,
        rejected=rejected,
        r=observed,
        v_bar=v_bar,
        fdp_bar=v_bar / max(observed, 1),
        alpha=float(alpha),
        order_index=k,
        n_transforms=group.size,
        kind=group.kind,
        seed=group.seed,
    )


def sam_two_transform(
    data: np.ndarray,
    statistic_fn: Callable[[np.ndarray], np.ndarray],
    t: float,
    kind: str = "sign-flip",
) -> SamEstimate:
    """Median-level bound from the smallest possible group: identity + mirror.

    ``kind="sign-flip"`` uses global negation; ``kind="swap"`` exchanges the
    two halves of the rows (cases vs. controls, equal sizes).  For any odd
    statistic (T(-X) = -T(X), as all the built-in linear statistics are)
    this reproduces the directional mirror estimator with zero margins
    exactly: the mirrored rejection count is the mirror count.
    """
    data = np.asarray(data, dtype=np.float64)
    if kind == "sign-flip":
        group = TransformationGroup.negation_pair(data.shape[0])
    elif kind == "swap":
        if data.shape[0] % 2:
            raise ValueError("swap needs an even number of rows (two equal groups)")
        group = TransformationGroup.case_control_swap(data.shape[0] // 2)
    else:
        raise ValueError(f"kind must be 'sign-flip' or 'swap', got {kind!r}")
    return sam_bound(data, statistic_fn, group, t, alpha=0.5)


def _validated_pvalues(pvalues) -> np.ndarray:
    p = np.atleast_1d(np.asarray(pvalues, dtype=np.float64))
    if p.ndim != 1 or p.size == 0:
        raise ValueError("pvalues must be a non-empty 1-d array")
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("pvalues must all lie in [0, 1]")
    return p


def benjamini_hochberg(pvalues, gamma: float) -> np.ndarray:
    """Benjamini-Hochberg step-up: indices rejected at mean-FDP level gamma."""
    p = _validated_pvalues(pvalues)
    gamma = float(gamma)
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    m = p.size
    order = np.argsort(p, kind="stable")
    passing = np.flatnonzero(p[order] <= gamma * np.arange(1, m + 1) / m)
    k = int(passing[-1]) + 1 if passing.size else 0
    return np.sort(order[:k])


def lehmann_romano_critical_values(m: int, gamma: float, alpha: float = 0.5) -> np.ndarray:
    """Step-down critical values alpha*(floor(gamma*i)+1)/(m+floor(gamma*i)+1-i)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    gamma = float(gamma)
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    i = np.arange(1, m + 1, dtype=np.float64)
    fl = _guarded_floor(gamma * i)
    return alpha * (fl + 1.0) / (m + fl + 1.0 - i)


def lehmann_romano_stepdown(pvalues, gamma: float, alpha: float = 0.5) -> np.ndarray:
    """Step-down control of P(FDP > gamma) <= alpha; returns rejected indices.

    Walks the sorted p-values against
    :func:`lehmann_romano_critical_values` and stops at the first failure.
    For m = 1 and gamma = 0 this reduces to rejecting iff p <= alpha.
    """
    p = _validated_pvalues(pvalues)
    crit = lehmann_romano_critical_values(p.size, gamma, alpha)
    order = np.argsort(p, kind="stable")
    failing = np.flatnonzero(p[order] > crit)
    k = int(failing[0]) if failing.size else p.size
    return np.sort(order[:k])


@dataclass(frozen=True)
class ExactTestResult:
    """Outcome of a full-enumeration group-invariance test."""

    reject: bool
    t_observed: float
    critical_value: float
    alpha: float
    n_transforms: int
    order_index: int


def sign_flip_test(x, alpha: float) -> ExactTestResult:
    """One-sample test of symmetry around 0 by full sign-flip enumeration.

    The statistic is ``n^(-1/2) * sum(s_i * x_i)`` over all 2^n sign
    patterns; the observed (all +1) statistic is compared against the
    ``ceil((1-alpha)*2^n)``-th smallest.  Rejection requires a *strictly*
    larger observed value, which makes the size exactly alpha for continuous
    data when alpha is a multiple of 2^-n.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.ndim != 1 or x.size < 1:
        raise ValueError("x must be a non-empty 1-d array")
    n = x.size
    if n > 20:
        raise InfeasibleError(
            f"full sign-flip enumeration needs n <= 20 (2^n transformations); got n={n}"
        )
    # All 2^n signed sums by repeated doubling; index 0 keeps every +x_i,
    # so it is the identity transformation's sum.
    sums = np.zeros(1, dtype=np.float64)
    for xi in x:
        sums = np.concatenate([sums + xi, sums - xi])
    stats = sums / math.sqrt(n)
    k = _order_index(alpha, stats.size)
    critical = float(np.partition(stats, k - 1)[k - 1])
    observed = float(stats[0])
    return ExactTestResult(
        reject=observed > critical,
        t_observed=observed,
        critical_value=critical,
        alpha=float(alpha),
        n_transforms=stats.size,
        order_index=k,
    )


def two_group_permutation_test(z, y, alpha: float) -> ExactTestResult:
    """Two-sample test by full enumeration of all C(2n, n) group splits.

    The statistic is ``sqrt(n) * (mean(z) - mean(y))`` recomputed for every
    way of choosing which n of the 2n pooled values play the z role.  Groups
    must have equal size.  The size is exactly alpha for continuous data
    when alpha is a multiple of 1/C(2n, n).
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if z.ndim != 1 or y.ndim != 1 or z.size < 1:
        raise ValueError("z and y must be non-empty 1-d arrays")
    if z.size != y.size:
        raise ValueError(f"groups must have equal sizes, got {z.size} and {y.size}")
    n = z.size
    n_splits = math.comb(2 * n, n)
    if n_splits > 2**20:
        raise InfeasibleError(
            f"full split enumeration needs C(2n, n) <= 2^20; got C({2 * n}, {n}) = {n_splits}"
        )
    pooled = np.concatenate([z, y])
    total = float(pooled.sum())
    picks = np.asarray(list(combinations(range(2 * n), n)), dtype=np.intp)
    sums = pooled[picks].sum(axis=1)
    stats = math.sqrt(n) * (2.0 * sums - total) / n
    # combinations() emits (0, ..., n-1) first: the identity split.
    observed = float(stats[0])
    k = _order_index(alpha, n_splits)
    critical = float(np.partition(stats, k - 1)[k - 1])
    return ExactTestResult(
        reject=observed > critical,
        t_observed=observed,
        critical_value=critical,
        alpha=float(alpha),
        n_transforms=n_splits,
        order_index=k,
    )
