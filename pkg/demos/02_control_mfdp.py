"""Pick the rejection threshold from the data, keeping median FDP below gamma.

control_mfdp walks the grid of thresholds where the rejection profile jumps,
finds the last one where the FDP estimate still exceeds gamma, and returns
the next grid point s+ as the operating threshold.  Everything above s+ is
rejected, and P(FDP <= gamma) >= 1/2.
"""

import numpy as np

from artifact import (
    HypothesisShape,
    ScenarioSpec,
    StatisticVector,
    control_mfdp,
    estimate_directional,
    generate_statistics,
)

# --- a hand-sized example first ---------------------------------------------

sv = StatisticVector(
    np.array([5.0, 4.0, 3.0, -3.5]), 0.0, HypothesisShape.DIRECTIONAL
)
ctl = control_mfdp(sv, gamma=0.4)
print(f"gamma = 0.4: s = {ctl.s}, s+ = {ctl.s_plus}")
print(f"rejected {ctl.rejected.tolist()} with estimated FDP {ctl.fdp_hat}")
# At t = 3 the estimate is 1/3 < 0.4 -- but FDPtilde is not monotone, and
# control scans the whole grid: at t just below 3.5 the mirror point -3.5
# still contributes, so s lands at 3.0 and s+ at 3.5.
print()

# --- and on simulated data ---------------------------------------------------

spec = ScenarioSpec(n=10, m=400, pi0=0.8, rho=0.0, d=1.5, seed=11)
sv, truth = generate_statistics(spec, 0)

for gamma in (0.05, 0.1, 0.25):
    ctl = control_mfdp(sv, gamma)
    false = int(truth.null_mask[ctl.rejected].sum())
    realized = false / max(ctl.r, 1)
    print(
        f"gamma = {gamma:4}: s+ = {ctl.s_plus:6.3f}, {ctl.r:3d} rejections, "
        f"estimated FDP {ctl.fdp_hat:.3f}, realized FDP {realized:.3f}"
    )

print()
print("the ESTIMATE at s+ never exceeds gamma; the realized FDP lands above")
print("on some levels and below on others.  That is the guarantee working:")
print("nulls here sit exactly on their margins (the worst case), where")
print("P(FDP <= gamma) is an even coin flip across replications -- rerun")
print("with other seeds and the realized column flips sides about half the")
print("time, never the estimate.")

# For comparison, a fixed threshold of t = 1 on the same data:
est = estimate_directional(sv, 1.0)
print(f"\nfixed t = 1 for reference: R = {est.r}, FDPhat = {est.fdp_hat:.3f}")
