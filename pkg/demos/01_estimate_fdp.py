"""How many of the findings at a threshold are likely false?

A small noninferiority screen.  Twelve candidate treatments, one z-statistic
each against its margin; we flag a treatment when T_j - delta_j > t.  The
estimator counts statistics in the mirror region T_j - delta_j < -t: under
the null symmetry assumption, that count behaves like the number of false
flags, and taking the minimum with R(t) makes it a median-unbiased estimate.
"""

import numpy as np

from artifact import (
    HypothesisShape,
    StatisticVector,
    build_profile,
    CoinSource,
    estimate_directional,
    estimate_directional_randomized,
)

rng = np.random.default_rng(2)

# Eight nulls straddling their margins, four real effects well above.
statistics = np.concatenate([rng.normal(0.0, 1.0, 8), rng.normal(3.5, 1.0, 4)])
sv = StatisticVector(statistics, margins=0.0, shape=HypothesisShape.DIRECTIONAL)

print("statistics:", np.round(statistics, 2))
print()

for t in (0.5, 1.0, 2.0):
    est = estimate_directional(sv, t)
    print(
        f"t = {t}: R = {est.r}, mirror count gives Vtilde = {est.v_tilde}, "
        f"FDPhat = {est.fdp_hat:.3f}, rejected = {est.rejected.tolist()}"
    )

# The profile behind those numbers: R and R- are step functions of t, and
# the estimate only changes at their jump points.
profile = build_profile(sv)
print()
print("thresholds where something changes:", np.round(profile.thresholds, 2))

# When R(t) == R-(t) the plain estimate says "everything rejected may be
# false".  The randomized variant flips a fair coin on those ties: heads
# keeps the estimate, tails floors it (v_tilde None, estimate 0) -- which is
# what makes the median guarantee exhaust exactly at the boundary.
tie = StatisticVector(np.array([2.0, -2.0]), 0.0, HypothesisShape.DIRECTIONAL)
print()
print("tie instance T = (2, -2), t = 1:")
for seed in (1, 2):
    est = estimate_directional_randomized(tie, 1.0, CoinSource(seed))
    branch = "floored" if est.floored else f"kept Vtilde = {est.v_tilde}"
    print(f"  coin seed {seed}: {branch}, FDPhat = {est.fdp_hat}")
