"""Monte Carlo scenario generation and method comparison studies.

Data model
----------
Each scenario draws an n x m matrix ``X_ij = mu_j / sqrt(n) + sqrt(1-rho) *
eps_ij + sqrt(rho) * eta_i`` with unit-variance noise ``eps`` and row
effects ``eta``, so the study statistic ``T_j = sqrt(n) * mean(X_.j)`` has
mean ``mu_j``, unit variance, and pairwise correlation exactly ``rho``
(for any of the symmetric noise families, not just the normal).  ``mu`` is
always reported on the statistic scale; the effect size ``d`` is applied on
the data scale, so it shifts statistics by ``sqrt(n) * d``.

Scenario means:

* directional -- true hypotheses sit exactly on the margin (``mu_j =
  delta``) and false ones at ``delta + sqrt(n) * d``;
* equivalence -- true hypotheses sit at ``+-(delta + sqrt(n) * d)`` with
  alternating signs and false ones at 0.

The truth (which hypotheses are null) is derived from the realized ``mu``,
not from the requested ``pi0``: with ``d = 0`` every "false" column lands
on the boundary and is in fact null.

Reproducibility
---------------
Replicate r of a scenario with seed s uses the generator seeded by
``SeedSequence([s, r])``; within a replicate the draw order is fixed (noise
matrix first, then row effects, which are skipped entirely when rho = 0).
Study cells derive their scenario seeds from ``SeedSequence([study_seed,
cell_id])``, so a study is bit-reproducible regardless of thread count.
With normal noise and no data-demanding method in the study, statistics
are drawn directly on the statistic scale (same law, fewer draws); any
other configuration generates full data matrices.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Iterator

import numpy as np

from .baselines import (
    TransformationGroup,
    _guarded_floor,
    _order_index,
    benjamini_hochberg,
    lehmann_romano_stepdown,
)
from .control import (
    NullDensitySpec,
    control_mfdp,
    directional_pvalues,
    equivalence_pvalues,
    write_pvalues_csv,
)
from .core import HypothesisShape, InfeasibleError, StatisticVector
from .ct_oracle import LocalTestFamily, indices_to_mask, run_closure
from .estimators import (
    CoinSource,
    estimate_directional,
    estimate_directional_randomized,
    estimate_equivalence,
)

__all__ = [
    "NOISE_FAMILIES",
    "STUDY_METHODS",
    "ScenarioSpec",
    "ScenarioTruth",
    "generate",
    "generate_statistics",
    "StudySpec",
    "MetricRow",
    "MetricTable",
    "run_study",
    "control_coverage",
]

NOISE_FAMILIES = ("normal", "laplace", "student-t")

STUDY_METHODS = (
    "novel",
    "novel-randomized",
    "SAM-full",
    "SAM-2",
    "SAM+CT",
    "BH",
    "LR",
    "flexible-pvals-export",
)

# Full sign-flip groups grow as 2^n; above this the per-replicate cost makes
# studies impractical and the subsampled group is the intended tool.
_SAM_FULL_MAX_N = 12
_SAM_CT_MAX_M = 12


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation cell: dimensions, signal placement, noise, and seed."""

    n: int
    m: int
    pi0: float
    rho: float = 0.0
    d: float = 0.0
    shape: HypothesisShape = HypothesisShape.DIRECTIONAL
    delta: float = 0.0
    noise: str = "normal"
    noise_df: float = 5.0
    replicates: int = 1
    seed: int = 0
    independent_blocks: bool = False

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be >= 1")
        if not 0.0 <= self.pi0 <= 1.0:
            raise ValueError(f"pi0 must be in [0, 1], got {self.pi0}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        if self.d < 0.0:
            raise ValueError(f"d must be >= 0, got {self.d}")
        if not isinstance(self.shape, HypothesisShape):
            raise ValueError("shape must be a HypothesisShape")
        if self.shape is HypothesisShape.EQUIVALENCE:
            if self.delta <= 0.0:
                raise ValueError("equivalence scenarios need delta > 0")
        elif self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.noise not in NOISE_FAMILIES:
            raise ValueError(f"noise must be one of {NOISE_FAMILIES}, got {self.noise!r}")
        if self.noise == "student-t" and self.noise_df < 3.0:
            raise ValueError("student-t noise needs noise_df >= 3")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    @property
    def n_true_requested(self) -> int:
        """floor(pi0 * m): how many leading columns carry the null mean."""
        return int(_guarded_floor(self.pi0 * self.m))


@dataclass(frozen=True, eq=False)
class ScenarioTruth:
    """Statistic-scale means and the null set they imply."""

    mu: np.ndarray
    null_mask: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        mask = np.asarray(self.null_mask, dtype=bool)
        if mu.shape != mask.shape or mu.ndim != 1:
            raise ValueError("mu and null_mask must be 1-d arrays of equal length")
        mu.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "null_mask", mask)

    @property
    def n_false(self) -> int:
        return int((~self.null_mask).sum())

    def false_count(self, rejected: np.ndarray) -> int:
        """Number of true (null) hypotheses among the rejected indices."""
        return int(self.null_mask[np.asarray(rejected, dtype=np.intp)].sum()) if len(rejected) else 0

    def fdp(self, rejected: np.ndarray) -> float:
        return self.false_count(rejected) / max(len(rejected), 1)

    def power_fraction(self, rejected: np.ndarray) -> float:
        """Fraction of false hypotheses rejected; NaN when none are false."""
        if self.n_false == 0:
            return math.nan
        hits = len(rejected) - self.false_count(rejected)
        return hits / self.n_false


def _unit_noise(rng: np.random.Generator, size, family: str, df: float) -> np.ndarray:
    """Draws from the requested symmetric family, scaled to unit variance."""
    if family == "normal":
        return rng.standard_normal(size)
    if family == "laplace":
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size)
    if family == "student-t":
        return rng.standard_t(df, size) * math.sqrt((df - 2.0) / df)
    raise ValueError(f"unknown noise family {family!r}")


def _scenario_means(spec: ScenarioSpec) -> ScenarioTruth:
    m0 = spec.n_true_requested
    mu = np.empty(spec.m, dtype=np.float64)
    shift = math.sqrt(spec.n) * spec.d
    if spec.shape is HypothesisShape.DIRECTIONAL:
        mu[:m0] = spec.delta
        mu[m0:] = spec.delta + shift
        null_mask = mu <= spec.delta
    else:
        signs = np.where(np.arange(m0) % 2 == 0, 1.0, -1.0)
        mu[:m0] = signs * (spec.delta + shift)
        mu[m0:] = 0.0
        null_mask = np.abs(mu) >= spec.delta
    return ScenarioTruth(mu=mu, null_mask=null_mask)


def _row_effects(spec: ScenarioSpec, truth: ScenarioTruth, rng: np.random.Generator) -> np.ndarray:
    """(n, m) additive row-effect component, already scaled by sqrt(rho).

    Under ``independent_blocks`` the true and false columns get their own
    independent row effects (drawn null block first), which makes the two
    blocks of statistics independent of each other.
    """
    n, m = spec.n, spec.m
    scale = math.sqrt(spec.rho)
    effects = np.zeros((n, m))
    if spec.independent_blocks and 0 < truth.n_false < m:
        eta_null = _unit_noise(rng, n, spec.noise, spec.noise_df)
        eta_false = _unit_noise(rng, n, spec.noise, spec.noise_df)
        effects[:, truth.null_mask] = scale * eta_null[:, None]
        effects[:, ~truth.null_mask] = scale * eta_false[:, None]
    else:
        eta = _unit_noise(rng, n, spec.noise, spec.noise_df)
        effects[:] = scale * eta[:, None]
    return effects


def generate(spec: ScenarioSpec, replicate_index: int):
    """Draw one data matrix; deterministic given (spec.seed, replicate_index).

    Returns ``(DataMatrix, ScenarioTruth)``.  Column offsets are
    ``mu / sqrt(n)`` so the statistic-scale means are exactly ``truth.mu``.
    """
    from .stats import DataMatrix  # local import: stats also imports core

    if replicate_index < 0:
        raise ValueError("replicate_index must be >= 0")
    truth = _scenario_means(spec)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, int(replicate_index)]))
    eps = _unit_noise(rng, (spec.n, spec.m), spec.noise, spec.noise_df)
    values = truth.mu / math.sqrt(spec.n) + math.sqrt(1.0 - spec.rho) * eps
    if spec.rho > 0.0:
        values = values + _row_effects(spec, truth, rng)
    names = tuple(f"h{j + 1:04d}" for j in range(spec.m))
    return DataMatrix(values=values, feature_names=names), truth


def study_statistics(values: np.ndarray, spec: ScenarioSpec) -> StatisticVector:
    """The study statistic: root-n-scaled column means (unit-variance nulls)."""
    t = math.sqrt(spec.n) * values.mean(axis=0)
    return StatisticVector(t, spec.delta, spec.shape)


def generate_statistics(spec: ScenarioSpec, replicate_index: int):
    """Statistics for one replicate; returns ``(StatisticVector, ScenarioTruth)``.

    With normal noise the statistics are drawn directly on their own scale
    (``T = mu + sqrt(1-rho) Z + sqrt(rho) W``, identical in law to the data
    route because means of normals are normal); other noise families go
    through :func:`generate`, since their column means are not in-family.
    The two routes consume different random streams, so they agree in law,
    not bit for bit.
    """
    if spec.noise != "normal":
        dm, truth = generate(spec, replicate_index)
        return study_statistics(dm.values, spec), truth
    if replicate_index < 0:
        raise ValueError("replicate_index must be >= 0")
    truth = _scenario_means(spec)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, int(replicate_index)]))
    z = rng.standard_normal(spec.m)
    t = truth.mu + math.sqrt(1.0 - spec.rho) * z
    if spec.rho > 0.0:
        scale = math.sqrt(spec.rho)
        if spec.independent_blocks and 0 < truth.n_false < spec.m:
            w_null, w_false = rng.standard_normal(2)
            t = t + scale * np.where(truth.null_mask, w_null, w_false)
        else:
            t = t + scale * rng.standard_normal()
    return StatisticVector(t, spec.delta, spec.shape), truth


def _as_grid(value) -> tuple[float, ...]:
    if isinstance(value, (list, tuple, np.ndarray)):
        grid = tuple(float(v) for v in value)
        if not grid:
            raise ValueError("grid parameters must be non-empty")
        return grid
    return (float(value),)


@dataclass(frozen=True)
class StudySpec:
    """A grid of scenarios (over pi0, rho, d) plus the methods to compare.

    ``t`` is the estimation threshold used by the estimate-style methods;
    ``gamma`` is the control level used by the novel control step, BH, and
    LR.  Cells are enumerated in ``product(pi0, rho, d)`` order with
    ``cell_id`` starting at 0.
    """

    n: int
    m: int
    pi0: tuple[float, ...]
    rho: tuple[float, ...]
    d: tuple[float, ...]
    methods: tuple[str, ...]
    t: float
    gamma: float
    shape: HypothesisShape = HypothesisShape.DIRECTIONAL
    delta: float = 0.0
    noise: str = "normal"
    noise_df: float = 5.0
    replicates: int = 100
    seed: int = 0
    independent_blocks: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pi0", _as_grid(self.pi0))
        object.__setattr__(self, "rho", _as_grid(self.rho))
        object.__setattr__(self, "d", _as_grid(self.d))
        methods = tuple(self.methods)
        if not methods:
            raise ValueError("methods must be non-empty")
        for name in methods:
            if name not in STUDY_METHODS:
                raise ValueError(f"unknown method {name!r}; choose from {STUDY_METHODS}")
        if len(set(methods)) != len(methods):
            raise ValueError("methods must not repeat")
        object.__setattr__(self, "methods", methods)
        t = float(self.t)
        if not np.isfinite(t) or t < 0.0:
            raise ValueError(f"t must be finite and >= 0, got {t}")
        gamma = float(self.gamma)
        if not 0.0 <= gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {gamma}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "gamma", gamma)
        # Validate the scenario parameters once via a representative cell.
        base = self._cell_spec(self.pi0[0], self.rho[0], self.d[0], seed=0)
        needs_symmetry_at_zero = {"SAM-full", "SAM-2", "SAM+CT"} & set(methods)
        if needs_symmetry_at_zero or "novel-randomized" in methods:
            if base.shape is not HypothesisShape.DIRECTIONAL:
                raise ValueError(
                    "SAM-style and randomized methods apply to directional scenarios only"
                )
        if needs_symmetry_at_zero and self.delta != 0.0:
            raise ValueError("SAM-style methods assume symmetry around zero; set delta = 0")
        if "SAM-full" in methods and self.n > _SAM_FULL_MAX_N:
            raise InfeasibleError(
                f"SAM-full enumerates 2^n sign flips per replicate; n <= {_SAM_FULL_MAX_N} "
                f"required in studies (got n={self.n}) -- use SAM-2 or reduce n"
            )
        if "SAM+CT" in methods and self.m > _SAM_CT_MAX_M:
            raise InfeasibleError(
                f"SAM+CT runs the brute-force closure; m <= {_SAM_CT_MAX_M} required "
                f"(got m={self.m}) -- reduce m or drop SAM+CT"
            )

    def _cell_spec(self, pi0: float, rho: float, d: float, seed: int) -> ScenarioSpec:
        return ScenarioSpec(
            n=self.n,
            m=self.m,
            pi0=pi0,
            rho=rho,
            d=d,
            shape=self.shape,
            delta=self.delta,
            noise=self.noise,
            noise_df=self.noise_df,
            replicates=self.replicates,
            seed=seed,
            independent_blocks=self.independent_blocks,
        )

    def cells(self) -> Iterator[tuple[int, ScenarioSpec]]:
        for cell_id, (pi0, rho, d) in enumerate(product(self.pi0, self.rho, self.d)):
            cell_seed = int(np.random.SeedSequence([self.seed, cell_id]).generate_state(1)[0])
            yield cell_id, self._cell_spec(pi0, rho, d, seed=cell_seed)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "pi0": list(self.pi0),
            "rho": list(self.rho),
            "d": list(self.d),
            "methods": list(self.methods),
            "t": self.t,
            "gamma": self.gamma,
            "shape": self.shape.value,
            "delta": self.delta,
            "noise": self.noise,
            "noise_df": self.noise_df,
            "replicates": self.replicates,
            "seed": self.seed,
            "independent_blocks": self.independent_blocks,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "StudySpec":
        if not isinstance(raw, dict):
            raise ValueError("study spec must be a JSON object")
        known = {
            "n", "m", "pi0", "rho", "d", "methods", "t", "gamma", "shape",
            "delta", "noise", "noise_df", "replicates", "seed", "independent_blocks",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown study spec keys: {sorted(unknown)}")
        missing = {"n", "m", "pi0", "rho", "d", "methods", "t", "gamma"} - set(raw)
        if missing:
            raise ValueError(f"study spec is missing required keys: {sorted(missing)}")
        kwargs = dict(raw)
        if "shape" in kwargs:
            try:
                kwargs["shape"] = HypothesisShape(kwargs["shape"])
            except ValueError:
                raise ValueError(
                    f"shape must be 'directional' or 'equivalence', got {kwargs['shape']!r}"
                ) from None
        kwargs["methods"] = tuple(kwargs["methods"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "StudySpec":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"study spec {path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw)


@dataclass(frozen=True)
class MetricRow:
    cell_id: int
    pi0: float
    rho: float
    d: float
    method: str
    metric: str
    value: float
    se: float


@dataclass(frozen=True, eq=False)
class MetricTable:
    """Long-format study results: one row per (cell, method, metric).

    Metrics by method:

    * novel -- mean_fdp_estimate, mean_fdp_at_t, p_fdp_le_estimate (all at
      the study threshold t), then p_control, mean_rejections, power for
      the gamma-level control step;
    * novel-randomized -- mean_fdp_estimate, p_fdp_le_estimate, floor_rate;
    * SAM-full / SAM-2 -- mean_fdp_estimate, p_fdp_le_estimate;
    * SAM+CT -- mean_ct_bound, p_v_le_ct_bound;
    * BH / LR -- p_control, mean_rejections, power;
    * flexible-pvals-export -- n_exported (files written, first replicate).

    ``power`` rows are omitted in cells where no hypothesis is false.
    Probabilities carry binomial standard errors sqrt(p(1-p)/reps); means
    carry sample standard errors.
    """

    rows: tuple[MetricRow, ...]
    study: dict

    def get(self, cell_id: int, method: str, metric: str) -> tuple[float, float]:
        for row in self.rows:
            if row.cell_id == cell_id and row.method == method and row.metric == metric:
                return row.value, row.se
        raise KeyError(f"no row for cell={cell_id} method={method!r} metric={metric!r}")

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("cell_id,pi0,rho,d,method,metric,value,se\n")
            for r in self.rows:
                fh.write(
                    f"{r.cell_id},{r.pi0:.17g},{r.rho:.17g},{r.d:.17g},"
                    f"{r.method},{r.metric},{r.value:.17g},{r.se:.17g}\n"
                )

    def summary_dict(self) -> dict:
        return {
            "study": dict(self.study),
            "rows": [
                {
                    "cell_id": r.cell_id,
                    "pi0": r.pi0,
                    "rho": r.rho,
                    "d": r.d,
                    "method": r.method,
                    "metric": r.metric,
                    "value": r.value,
                    "se": r.se,
                }
                for r in self.rows
            ],
        }


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, se


def _prob_se(events: list[bool]) -> tuple[float, float]:
    arr = np.asarray(events, dtype=np.float64)
    p = float(arr.mean())
    return p, math.sqrt(p * (1.0 - p) / arr.size)


class _CellAccumulator:
    """Per-replicate metric values for one (cell, method) pair."""

    def __init__(self):
        self.means: dict[str, list[float]] = {}
        self.events: dict[str, list[bool]] = {}

    def add_value(self, metric: str, value: float) -> None:
        self.means.setdefault(metric, []).append(float(value))

    def add_event(self, metric: str, happened: bool) -> None:
        self.events.setdefault(metric, []).append(bool(happened))


_METRIC_ORDER = (
    "mean_fdp_estimate",
    "mean_fdp_at_t",
    "p_fdp_le_estimate",
    "floor_rate",
    "mean_ct_bound",
    "p_v_le_ct_bound",
    "p_control",
    "mean_rejections",
    "power",
    "n_exported",
)


def _sam_ct_group(spec: ScenarioSpec) -> TransformationGroup:
    if spec.n <= 10:
        return TransformationGroup.sign_flip_full(spec.n)
    seed = int(np.random.SeedSequence([spec.seed, 7301]).generate_state(1)[0])
    return TransformationGroup.sign_flip_subsample(spec.n, 256, seed)


def _run_cell(study: StudySpec, cell_id: int, spec: ScenarioSpec, out_dir) -> list[MetricRow]:
    methods = study.methods
    t, gamma = study.t, study.gamma
    needs_data = bool({"SAM-full", "SAM+CT"} & set(methods)) or spec.noise != "normal"
    needs_pvalues = bool({"BH", "LR", "flexible-pvals-export"} & set(methods))
    null_spec = NullDensitySpec.standard_normal()
    sqrt_n = math.sqrt(spec.n)

    sam_signs = None
    if "SAM-full" in methods:
        sam_signs = TransformationGroup.sign_flip_full(spec.n).signs.astype(np.float64)
    ct_group = _sam_ct_group(spec) if "SAM+CT" in methods else None

    acc: dict[str, _CellAccumulator] = {name: _CellAccumulator() for name in methods}
    n_exported = 0

    for rep in range(spec.replicates):
        if needs_data:
            dm, truth = generate(spec, rep)
            data = dm.values
            sv = study_statistics(data, spec)
        else:
            sv, truth = generate_statistics(spec, rep)
            data = None
        pv = None
        if needs_pvalues:
            if spec.shape is HypothesisShape.DIRECTIONAL:
                pv = directional_pvalues(sv, null_spec)
            else:
                pv = equivalence_pvalues(sv, null_spec)

        for name in methods:
            a = acc[name]
            if name == "novel":
                if spec.shape is HypothesisShape.DIRECTIONAL:
                    est = estimate_directional(sv, t)
                else:
                    est = estimate_equivalence(sv, t)
                v_true = truth.false_count(est.rejected)
                a.add_value("mean_fdp_estimate", est.fdp_hat)
                a.add_value("mean_fdp_at_t", v_true / max(est.r, 1))
                a.add_event("p_fdp_le_estimate", v_true <= est.v_tilde)
                ctl = control_mfdp(sv, gamma)
                a.add_event("p_control", truth.fdp(ctl.rejected) <= gamma)
                a.add_value("mean_rejections", len(ctl.rejected))
                if truth.n_false:
                    a.add_value("power", truth.power_fraction(ctl.rejected))
            elif name == "novel-randomized":
                coin_seed = int(
                    np.random.SeedSequence([spec.seed, rep, 9001]).generate_state(1)[0]
                )
                est = estimate_directional_randomized(sv, t, CoinSource(coin_seed))
                v_true = truth.false_count(est.rejected)
                a.add_value("mean_fdp_estimate", est.fdp_hat)
                a.add_event("p_fdp_le_estimate", (not est.floored) and v_true <= est.v_tilde)
                a.add_event("floor_rate", est.floored)
            elif name == "SAM-full":
                stats_all = (sam_signs @ data) * (sqrt_n / spec.n)
                counts = (stats_all > t).sum(axis=1)
                k = _order_index(0.5, counts.size)
                bound = int(np.partition(counts, k - 1)[k - 1])
                observed = int(counts[0])
                v_bar = min(bound, observed)
                rejected = np.flatnonzero(stats_all[0] > t)
                a.add_value("mean_fdp_estimate", v_bar / max(observed, 1))
                a.add_event("p_fdp_le_estimate", truth.false_count(rejected) <= v_bar)
            elif name == "SAM-2":
                est = estimate_directional(sv, t)
                v_true = truth.false_count(est.rejected)
                a.add_value("mean_fdp_estimate", est.fdp_hat)
                a.add_event("p_fdp_le_estimate", v_true <= est.v_tilde)
            elif name == "SAM+CT":
                family = LocalTestFamily.sam_subset(
                    data,
                    lambda x: sqrt_n * x.mean(axis=0),
                    ct_group,
                    t,
                )
                closure = run_closure(family)
                rejected = sv.statistics - sv.margins
                rejected = np.flatnonzero(rejected > t)
                mask = indices_to_mask(rejected)
                bound = closure.t_alpha(mask) if mask else 0
                a.add_value("mean_ct_bound", bound)
                a.add_event("p_v_le_ct_bound", truth.false_count(rejected) <= bound)
            elif name == "BH":
                rejected = benjamini_hochberg(pv.values, gamma)
                a.add_event("p_control", truth.fdp(rejected) <= gamma)
                a.add_value("mean_rejections", len(rejected))
                if truth.n_false:
                    a.add_value("power", truth.power_fraction(rejected))
            elif name == "LR":
                rejected = lehmann_romano_stepdown(pv.values, gamma)
                a.add_event("p_control", truth.fdp(rejected) <= gamma)
                a.add_value("mean_rejections", len(rejected))
                if truth.n_false:
                    a.add_value("power", truth.power_fraction(rejected))
            elif name == "flexible-pvals-export":
                if rep == 0 and out_dir is not None:
                    path = Path(out_dir) / f"cell{cell_id:03d}_pvalues.csv"
                    write_pvalues_csv(pv, path)
                    n_exported += 1

    rows: list[MetricRow] = []
    for name in methods:
        a = acc[name]
        if name == "flexible-pvals-export":
            rows.append(
                MetricRow(cell_id, spec.pi0, spec.rho, spec.d, name, "n_exported", float(n_exported), 0.0)
            )
            continue
        for metric in _METRIC_ORDER:
            if metric in a.means:
                value, se = _mean_se(a.means[metric])
            elif metric in a.events:
                value, se = _prob_se(a.events[metric])
            else:
                continue
            rows.append(MetricRow(cell_id, spec.pi0, spec.rho, spec.d, name, metric, value, se))
    return rows


def run_study(study: StudySpec, out_dir=None, threads: int | None = None) -> MetricTable:
    """Run every cell of the study and aggregate the per-method metrics.

    Cells run in a thread pool (``threads`` defaults to the CPU count,
    capped by the number of cells); results are assembled in cell order, so
    the output is identical for any thread count.  ``out_dir`` is only used
    by the flexible-pvals-export method.
    """
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    cells = list(study.cells())
    if threads is None:
        threads = min(len(cells), os.cpu_count() or 1)
    threads = max(1, int(threads))
    if threads == 1 or len(cells) == 1:
        per_cell = [_run_cell(study, cid, spec, out_dir) for cid, spec in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_cell = list(
                pool.map(lambda item: _run_cell(study, item[0], item[1], out_dir), cells)
            )
    rows: list[MetricRow] = []
    for chunk in per_cell:
        rows.extend(chunk)
    return MetricTable(rows=tuple(rows), study=study.to_dict())


def control_coverage(spec: ScenarioSpec, gamma: float) -> dict:
    """Empirical P(FDP(s_plus) <= gamma) over the spec's replicates.

    Returns ``{"gamma", "coverage", "se", "replicates"}``.  The guarantee
    (coverage >= 1/2) is proved for all-null configurations and for
    independent blocks; for other dependence structures the estimate is
    reported without any claim.
    """
    gamma = float(gamma)
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    hits = []
    for rep in range(spec.replicates):
        sv, truth = generate_statistics(spec, rep)
        ctl = control_mfdp(sv, gamma)
        hits.append(truth.fdp(ctl.rejected) <= gamma)
    coverage, se = _prob_se(hits)
    return {"gamma": gamma, "coverage": coverage, "se": se, "replicates": spec.replicates}
