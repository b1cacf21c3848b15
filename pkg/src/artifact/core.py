"""Core types: hypothesis shapes, statistic vectors, and rejection profiles.

The central object is the pair of integer-valued counting functions

    R(t)  = number of hypotheses rejected at threshold t,
    R-(t) = number of hypotheses in the mirrored (reflected) region at t,

both non-increasing, right-continuous step functions of t >= 0.  For a
one-sided (noninferiority) family the regions are ``T_j - delta_j > t`` and
``T_j - delta_j < -t``; for an equivalence family they are
``|T_j| < delta_j - t`` and ``|T_j| > delta_j + t``.

Every hypothesis is canonicalized to scalar *cut points* computed once from
its statistic/margin pair (e.g. ``delta_j - |T_j|`` for equivalence
rejection), and all threshold comparisons are performed as ``cut > t`` in
exact IEEE double arithmetic -- no epsilons anywhere.  The step functions are
stored as sorted cut-point arrays, so a single evaluation is a binary search.

For equivalence families the rejection count is forced to zero for
``t >= c`` where ``c = min_j delta_j`` (thresholds at or beyond the smallest
margin reject nothing); the cut points are clipped to ``c`` accordingly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HypothesisShape",
    "StatisticVector",
    "RejectionProfile",
    "FdpEstimate",
    "ControlResult",
    "InfeasibleError",
    "build_profile",
]


class InfeasibleError(Exception):
    """Raised when an exact/enumerative routine is asked to run at an
    infeasible scale (e.g. full sign-flip enumeration with n > 20)."""


class HypothesisShape(enum.Enum):
    """Shape of the tested null hypotheses.

    DIRECTIONAL : one-sided nulls ``mu_j <= delta_j`` (right-sided
        alternatives; left-sided problems are handled by negating the
        statistic and margin, see :func:`artifact.stats.apply_margin_shift`).
    EQUIVALENCE : nulls ``|mu_j| >= delta_j`` with all ``delta_j > 0``.
    """

    DIRECTIONAL = "directional"
    EQUIVALENCE = "equivalence"


@dataclass(frozen=True, eq=False)
class StatisticVector:
    """Test statistics with per-hypothesis margins and a hypothesis shape.

    Parameters
    ----------
    statistics : array_like of float, shape (m,)
        Observed test statistics, one per hypothesis, all finite.
    margins : float or array_like of float, shape (m,)
        Margin(s) ``delta_j``.  A scalar is broadcast to every hypothesis.
        Must be strictly positive for equivalence families.
    shape : HypothesisShape
        Whether the family is directional (one-sided) or equivalence.
    """

    statistics: np.ndarray
    margins: np.ndarray
    shape: HypothesisShape

    def __post_init__(self):
        stats = np.atleast_1d(np.asarray(self.statistics, dtype=np.float64))
        if stats.ndim != 1 or stats.size < 1:
            raise ValueError("statistics must be a one-dimensional, non-empty array")
        margins = np.asarray(self.margins, dtype=np.float64)
        if margins.ndim == 0:
            margins = np.full(stats.shape, float(margins))
        if margins.shape != stats.shape:
            raise ValueError(
                f"margins length {margins.shape} does not match statistics length {stats.shape}"
            )
        if not np.all(np.isfinite(stats)):
            raise ValueError("statistics must all be finite")
        if not np.all(np.isfinite(margins)):
            raise ValueError("margins must all be finite")
        if not isinstance(self.shape, HypothesisShape):
            raise TypeError("shape must be a HypothesisShape")
        if self.shape is HypothesisShape.EQUIVALENCE and not np.all(margins > 0):
            raise ValueError("equivalence margins must all be strictly positive")
        stats.flags.writeable = False
        margins.flags.writeable = False
        object.__setattr__(self, "statistics", stats)
        object.__setattr__(self, "margins", margins)

    @property
    def m(self) -> int:
        """Number of hypotheses."""
        return int(self.statistics.size)


def _count_above(cuts: np.ndarray, t) -> np.ndarray | int:
    """Count cut points strictly greater than t (t scalar or array)."""
    n = cuts.size
    out = n - np.searchsorted(cuts, t, side="right")
    if np.ndim(t) == 0:
        return int(out)
    return out


@dataclass(frozen=True, eq=False)
class RejectionProfile:
    """Step-function view of the rejection and mirror counts for one family.

    Construct with :func:`build_profile`.  ``r`` and ``r_minus`` evaluate the
    counting functions at scalar or array thresholds in O(log m) per point;
    ``thresholds`` is the finite grid {0} union {discontinuities of R or R-
    in (0, inf)} that threshold-search procedures scan.
    """

    source: StatisticVector
    # Sorted cut points (with multiplicity): R(t) = #{cuts_r > t}, and
    # likewise for the mirror count.  Cuts <= 0 never affect t >= 0 and are
    # dropped at construction.
    _cuts_r: np.ndarray = field(repr=False)
    _cuts_rminus: np.ndarray = field(repr=False)
    # Per-hypothesis rejection cut points (unclipped only by sign), used to
    # recover the identity of the rejected hypotheses at a threshold.
    _reject_cut_by_hyp: np.ndarray = field(repr=False)

    def r(self, t):
        """R(t): number of hypotheses rejected at threshold t (t >= 0)."""
        return _count_above(self._cuts_r, t)

    def r_minus(self, t):
        """R-(t): size of the mirrored count at threshold t (t >= 0)."""
        return _count_above(self._cuts_rminus, t)

    def rejected_at(self, t: float) -> np.ndarray:
        """Indices (0-based) of the hypotheses rejected at threshold t."""
        return np.flatnonzero(self._reject_cut_by_hyp > t)

    @property
    def thresholds(self) -> np.ndarray:
        """Sorted grid {0.0} + all jump points of R or R- in (0, inf)."""
        jumps = np.unique(np.concatenate([self._cuts_r, self._cuts_rminus]))
        return np.concatenate([[0.0], jumps])

    @property
    def jump_points_r(self) -> np.ndarray:
        """Deduplicated jump points of R, ascending."""
        return np.unique(self._cuts_r)

    @property
    def jump_points_r_minus(self) -> np.ndarray:
        """Deduplicated jump points of R-, ascending."""
        return np.unique(self._cuts_rminus)


def build_profile(sv: StatisticVector) -> RejectionProfile:
    """Build the step-function profile (R, R-) for a statistic vector.

    For a directional family the cut points are ``T_j - delta_j`` (rejection)
    and ``delta_j - T_j`` (mirror); for an equivalence family they are
    ``delta_j - |T_j|`` clipped to ``c = min_j delta_j`` (rejection) and
    ``|T_j| - delta_j`` (mirror).  Only positive cut points are retained.
    """
    if sv.shape is HypothesisShape.DIRECTIONAL:
        diffs = sv.statistics - sv.margins
        reject_cut = diffs
        mirror_cut = -diffs
    else:
        gap = sv.margins - np.abs(sv.statistics)
        c = float(np.min(sv.margins))
        reject_cut = np.minimum(gap, c)
        mirror_cut = -gap  # == |T_j| - delta_j up to IEEE sign exactness
    cuts_r = np.sort(reject_cut[reject_cut > 0.0])
    cuts_rm = np.sort(mirror_cut[mirror_cut > 0.0])
    return RejectionProfile(
        source=sv,
        _cuts_r=cuts_r,
        _cuts_rminus=cuts_rm,
        _reject_cut_by_hyp=reject_cut,
    )


@dataclass(frozen=True, eq=False)
class FdpEstimate:
    """Result of a false-discovery-proportion estimate at one threshold.

    Attributes
    ----------
    estimator : str
        Which estimator produced this ("directional",
        "directional-randomized", "equivalence", "equivalence-windowed").
    t : float
        Threshold the estimate was computed at.
    rejected : ndarray of int
        0-based indices of the rejected hypotheses.
    r : int
        Number of rejections, ``len(rejected)``.
    v_tilde : int or None
        Median-level upper bound for the number of false rejections.
        ``None`` encodes the randomized estimator's minus-infinity floor
        (a tagged sentinel -- never a float).
    fdp_hat : float
        ``v_tilde / max(r, 1)``; reported as 0.0 when the sentinel fired.
    randomized : bool
        True when produced by the randomized estimator.
    coin : bool or None
        For the randomized estimator, the drawn coin (True = the floor
        branch was selected for ties); None otherwise.
    floored : bool
        True when the estimate was randomized to the floor sentinel
        (tie at this threshold and the floor coin came up).
    """

    estimator: str
    t: float
    rejected: np.ndarray
    r: int
    v_tilde: int | None
    fdp_hat: float
    randomized: bool = False
    coin: bool | None = None
    floored: bool = False

    def __post_init__(self):
        if self.r != len(self.rejected):
            raise ValueError("r must equal the number of rejected indices")
        if self.floored:
            if not self.randomized or self.v_tilde is not None:
                raise ValueError("floored estimates must be randomized with sentinel v_tilde")
        elif self.v_tilde is None:
            raise ValueError("sentinel v_tilde requires floored=True")
        elif not 0 <= self.v_tilde <= max(self.r, 0):
            raise ValueError(f"v_tilde={self.v_tilde} outside [0, r={self.r}]")

    @property
    def requires_independence(self) -> bool:
        """True when the guarantee needs independent hypotheses.

        The windowed equivalence estimator is valid only for independent
        statistics with unimodal symmetric null densities; every other
        estimator here needs only joint symmetry around the margins.
        """
        return self.estimator == "equivalence-windowed"


@dataclass(frozen=True, eq=False)
class ControlResult:
    """Result of the median-FDP threshold search at level gamma.

    ``s`` is the largest scanned threshold where the FDP estimate still
    exceeded gamma (``None`` when the estimate never exceeded gamma -- the
    minus-infinity case, in which ``s_plus`` is 0 and every hypothesis with a
    positive rejection cut is rejected).  ``s_plus`` is the next scanned
    threshold after ``s`` and is the threshold actually applied.
    """

    gamma: float
    s: float | None
    s_plus: float
    rejected: np.ndarray
    r: int
    v_tilde: int
    fdp_hat: float

    def __post_init__(self):
        if self.s is not None and not self.s < self.s_plus:
            raise ValueError("s must be strictly below s_plus")
        if self.fdp_hat > self.gamma:
            raise ValueError("the FDP estimate at s_plus must not exceed gamma")
