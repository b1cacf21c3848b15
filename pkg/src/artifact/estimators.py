"""Median-level false discovery proportion estimators.

All estimators here follow the same mirror-counting idea: under the null
hypotheses the statistics are (jointly) symmetrically distributed around
their margins, so the number of *true* hypotheses landing in the rejection
region at threshold t is matched, at median level, by the count landing in
the mirrored region.  The estimate

    V~(t)    = min(R-(t), R(t))
    FDP~(t)  = V~(t) / max(R(t), 1)

therefore satisfies P(V(t) <= V~(t)) >= 1/2, where V(t) is the unknown
number of false rejections.  The randomized variant sharpens this to exact
1/2 at the least favourable configuration by breaking ties R(t) == R-(t)
with a fair coin: on the floor branch the bound collapses to minus infinity,
encoded as a tagged sentinel (``v_tilde is None`` + ``floored=True``), and
the reported FDP estimate is 0.0.

The windowed equivalence variant replaces the unbounded mirror region
``|T_j| > delta_j + t`` by the window ``delta_j + t < |T_j| <= 3*delta_j - t``.
It is never larger than the plain equivalence estimate, but its median-level
guarantee additionally requires the null statistics to be mutually
independent with unimodal symmetric densities.
"""

from __future__ import annotations

import numpy as np

from .core import FdpEstimate, HypothesisShape, StatisticVector

__all__ = [
    "CoinSource",
    "estimate_directional",
    "estimate_directional_randomized",
    "estimate_equivalence",
    "estimate_equivalence_windowed",
]


class CoinSource:
    """Seeded source of fair coin flips for the randomized estimator.

    A fixed seed yields a fixed, reproducible coin sequence.  With
    ``seed=None`` the flips are drawn from fresh OS entropy.
    """

    def __init__(self, seed: int | None = None):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def flip(self) -> bool:
        """One fair coin flip."""
        return bool(self._rng.integers(0, 2))

    def __repr__(self):  # pragma: no cover - cosmetic
        return f"CoinSource(seed={self.seed!r})"


def _check_threshold(t: float) -> float:
    t = float(t)
    if not (np.isfinite(t) and t >= 0.0):
        raise ValueError(f"threshold t must be finite and >= 0, got {t}")
    return t


def _require_shape(sv: StatisticVector, shape: HypothesisShape, what: str) -> None:
    if sv.shape is not shape:
        raise ValueError(f"{what} requires a {shape.value} statistic vector, got {sv.shape.value}")


def estimate_directional(sv: StatisticVector, t: float) -> FdpEstimate:
    """Median-level FDP estimate for a one-sided family at threshold t.

    Rejects ``{j : T_j - delta_j > t}`` and bounds the false rejections by
    the mirror count ``R-(t) = #{j : T_j - delta_j < -t}``, capped at R(t).

    Parameters
    ----------
    sv : StatisticVector
        Directional statistics with margins.
    t : float
        Threshold, finite and >= 0.

    Returns
    -------
    FdpEstimate
    """
    _require_shape(sv, HypothesisShape.DIRECTIONAL, "estimate_directional")
    t = _check_threshold(t)
    diffs = sv.statistics - sv.margins
    rejected = np.flatnonzero(diffs > t)
    r = int(rejected.size)
    r_minus = int(np.count_nonzero(-diffs > t))
    v = min(r_minus, r)
    return FdpEstimate(
        estimator="directional",
        t=t,
        rejected=rejected,
        r=r,
        v_tilde=v,
        fdp_hat=v / max(r, 1),
    )


def estimate_directional_randomized(sv: StatisticVector, t: float, coin: CoinSource) -> FdpEstimate:
    """Randomized (admissible) variant of :func:`estimate_directional`.

    Identical to the plain estimate whenever ``R(t) != R-(t)``.  On a tie the
    bound is kept with probability 1/2 and randomized down to the
    minus-infinity floor with probability 1/2.  The coin is drawn on every
    call (its outcome only matters on ties) and recorded on the result:
    ``coin=True`` means the floor branch was selected.
    """
    _require_shape(sv, HypothesisShape.DIRECTIONAL, "estimate_directional_randomized")
    t = _check_threshold(t)
    diffs = sv.statistics - sv.margins
    rejected = np.flatnonzero(diffs > t)
    r = int(rejected.size)
    r_minus = int(np.count_nonzero(-diffs > t))
    floor = bool(coin.flip())
    if r == r_minus and floor:
        return FdpEstimate(
            estimator="directional-randomized",
            t=t,
            rejected=rejected,
            r=r,
            v_tilde=None,
            fdp_hat=0.0,
            randomized=True,
            coin=floor,
            floored=True,
        )
    v = min(r_minus, r)
    return FdpEstimate(
        estimator="directional-randomized",
        t=t,
        rejected=rejected,
        r=r,
        v_tilde=v,
        fdp_hat=v / max(r, 1),
        randomized=True,
        coin=floor,
    )


def _equivalence_counts(sv: StatisticVector, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Rejection mask and mirror cut points for an equivalence family."""
    abs_stats = np.abs(sv.statistics)
    gap = sv.margins - abs_stats
    c = float(np.min(sv.margins))
    if t >= c:
        reject_mask = np.zeros(sv.m, dtype=bool)
    else:
        reject_mask = gap > t
    return reject_mask, -gap


def estimate_equivalence(sv: StatisticVector, t: float) -> FdpEstimate:
    """Median-level FDP estimate for an equivalence family at threshold t.

    Rejects ``{j : |T_j| < delta_j - t}`` (empty for ``t >= min_j delta_j``)
    and bounds false rejections by ``R-(t) = #{j : |T_j| > delta_j + t}``,
    capped at R(t).
    """
    _require_shape(sv, HypothesisShape.EQUIVALENCE, "estimate_equivalence")
    t = _check_threshold(t)
    reject_mask, mirror_cut = _equivalence_counts(sv, t)
    rejected = np.flatnonzero(reject_mask)
    r = int(rejected.size)
    r_minus = int(np.count_nonzero(mirror_cut > t))
    v = min(r_minus, r)
    return FdpEstimate(
        estimator="equivalence",
        t=t,
        rejected=rejected,
        r=r,
        v_tilde=v,
        fdp_hat=v / max(r, 1),
    )


def estimate_equivalence_windowed(sv: StatisticVector, t: float) -> FdpEstimate:
    """Windowed equivalence estimate: mirror count restricted to a band.

    The mirror region is ``delta_j + t < |T_j| <= 3*delta_j - t`` -- the
    same lower edge as the plain estimator (strict), but truncated above at
    ``3*delta_j - t`` (inclusive).  Statistics far outside the equivalence
    band no longer inflate the estimate, at the price of a stronger
    assumption: validity additionally needs the null statistics to be
    mutually independent with unimodal symmetric densities.  The window's
    upper edge is evaluated as ``t <= 3*delta_j - |T_j|`` with the
    right-hand side computed once per hypothesis.
    """
    _require_shape(sv, HypothesisShape.EQUIVALENCE, "estimate_equivalence_windowed")
    t = _check_threshold(t)
    reject_mask, mirror_cut = _equivalence_counts(sv, t)
    rejected = np.flatnonzero(reject_mask)
    r = int(rejected.size)
    upper_slack = 3.0 * sv.margins - np.abs(sv.statistics)
    r_minus = int(np.count_nonzero((mirror_cut > t) & (t <= upper_slack)))
    v = min(r_minus, r)
    return FdpEstimate(
        estimator="equivalence-windowed",
        t=t,
        rejected=rejected,
        r=r,
        v_tilde=v,
        fdp_hat=v / max(r, 1),
    )
