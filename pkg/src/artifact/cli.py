"""Command-line interface: estimate | control | pvalues | simulate | verify-ct | exact-test.

Conventions shared by every subcommand:

* exit codes -- 0 on success, 2 on malformed input or bad configuration,
  3 when a request is valid but computationally infeasible;
* results print as an aligned two-column table (or CSV with ``--csv``),
  and ``--out`` additionally writes a JSON document embedding the package
  version, the seed in effect, and a hash of the effective configuration;
* every source of randomness funnels through ``--seed``; commands that
  need randomness without one draw a seed and print it, so any run can be
  replayed.

Statistic inputs are CSV.  A file whose header is ``index,statistic`` or
``index,statistic,margin`` is taken as precomputed statistics; any other
header is parsed as a raw data matrix (optional ``group`` column with two
labels), from which statistics are computed per ``--statistic``.  Margins
come from ``--delta`` or from the statistics file's margin column; having
neither is an error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import sign_flip_test, two_group_permutation_test
from .control import (
    NullDensitySpec,
    control_mfdp,
    directional_pvalues,
    equivalence_pvalues,
    write_pvalues_csv,
)
from .core import FdpEstimate, HypothesisShape, InfeasibleError, StatisticVector
from .ct_oracle import verify_random_instances
from .estimators import (
    CoinSource,
    estimate_directional,
    estimate_directional_randomized,
    estimate_equivalence,
    estimate_equivalence_windowed,
)
from .simulate import StudySpec, run_study
from .stats import (
    column_mean_statistics,
    read_data_csv,
    read_statistics_csv,
    two_group_statistics,
    welch_t_statistics,
)

_STATISTICS_HEADERS = ("index,statistic", "index,statistic,margin")


def _config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _print_table(pairs: list[tuple[str, str]], csv_mode: bool) -> None:
    if csv_mode:
        print("field,value")
        for key, value in pairs:
            print(f"{key},{value}")
        return
    width = max(len(key) for key, _ in pairs)
    for key, value in pairs:
        print(f"{key:<{width}}  {value}")


def _format_indices(indices) -> str:
    seq = [str(int(i)) for i in indices]
    return " ".join(seq) if seq else "(none)"


def _write_json(path, command: str, seed, config: dict, result: dict) -> None:
    payload = {
        "version": __version__,
        "command": command,
        "seed": seed,
        "config_hash": _config_hash(config),
        "config": config,
        "result": result,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _ensure_seed(args) -> int:
    """The seed in effect; drawn and printed when the user gave none."""
    if args.seed is None:
        args.seed = secrets.randbits(32)
        print(f"seed: {args.seed}")
    return args.seed


def _is_statistics_file(path) -> bool:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().lower()
    return header in _STATISTICS_HEADERS


def _load_statistics(args) -> tuple[StatisticVector, tuple[str, ...] | None]:
    """Build the statistic vector from either kind of input file.

    Returns the vector plus feature names (data inputs only; None for
    statistics files).
    """
    shape = HypothesisShape(args.shape)
    path = args.input
    if _is_statistics_file(path):
        statistics, file_margins = read_statistics_csv(path)
        if args.delta is not None:
            margins = args.delta
        elif file_margins is not None:
            margins = file_margins
        else:
            raise ValueError(
                f"{path}: no margin available; pass --delta or include a margin column"
            )
        return StatisticVector(statistics, margins, shape), None

    dm = read_data_csv(path)
    if args.delta is None:
        raise ValueError("raw data input needs an explicit margin: pass --delta")
    statistic = args.statistic
    if statistic == "auto":
        statistic = "welch" if dm.group is not None else "column-mean"
    if statistic == "column-mean":
        if dm.group is not None:
            raise ValueError("column-mean statistics take ungrouped data (drop the group column)")
        sv = column_mean_statistics(dm, args.delta, shape)
        return sv, dm.feature_names
    if statistic == "two-group":
        sv = two_group_statistics(dm, args.delta, shape)
        return sv, dm.feature_names
    if statistic == "welch":
        sv, kept, _dof = welch_t_statistics(dm, args.delta, shape)
        names = tuple(dm.feature_names[int(j)] for j in kept)
        return sv, names
    raise ValueError(f"unknown statistic {statistic!r}")


def _estimate_result(est: FdpEstimate) -> dict:
    return {
        "estimator": est.estimator,
        "t": est.t,
        "r": est.r,
        "v_tilde": est.v_tilde,
        "fdp_hat": est.fdp_hat,
        "rejected": [int(i) for i in est.rejected],
        "randomized": est.randomized,
        "coin": est.coin,
        "floored": est.floored,
    }


def _add_statistics_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("input", help="CSV of statistics (index,statistic[,margin]) or raw data")
    parser.add_argument(
        "--shape",
        choices=[s.value for s in HypothesisShape],
        default="directional",
        help="hypothesis shape (default: directional)",
    )
    parser.add_argument("--delta", type=float, default=None, help="common margin for all hypotheses")
    parser.add_argument(
        "--statistic",
        choices=["auto", "column-mean", "two-group", "welch"],
        default="auto",
        help="statistic for raw data input (default: welch when a group column is present)",
    )


def _cmd_estimate(args) -> int:
    sv, names = _load_statistics(args)
    seed = None
    if args.randomized:
        if HypothesisShape(args.shape) is not HypothesisShape.DIRECTIONAL:
            raise ValueError("--randomized applies to the directional estimator only")
        seed = _ensure_seed(args)
        est = estimate_directional_randomized(sv, args.t, CoinSource(seed))
    elif HypothesisShape(args.shape) is HypothesisShape.DIRECTIONAL:
        est = estimate_directional(sv, args.t)
    elif args.windowed:
        est = estimate_equivalence_windowed(sv, args.t)
    else:
        est = estimate_equivalence(sv, args.t)
    result = _estimate_result(est)
    result["requires_independence"] = est.requires_independence
    if names is not None:
        result["rejected_features"] = [names[i] for i in result["rejected"]]
    pairs = [
        ("estimator", est.estimator),
        ("t", f"{est.t:g}"),
        ("r", str(est.r)),
        ("v_tilde", "floored" if est.v_tilde is None else str(est.v_tilde)),
        ("fdp_hat", f"{est.fdp_hat:.6g}"),
        ("rejected", _format_indices(est.rejected)),
    ]
    if est.randomized:
        pairs.append(("coin", str(est.coin)))
    _print_table(pairs, args.csv)
    if args.out:
        config = {
            "input": str(args.input),
            "shape": args.shape,
            "delta": args.delta,
            "t": args.t,
            "statistic": args.statistic,
            "randomized": args.randomized,
            "windowed": args.windowed,
        }
        _write_json(args.out, "estimate", seed, config, result)
    return 0


def _cmd_control(args) -> int:
    sv, names = _load_statistics(args)
    ctl = control_mfdp(sv, args.gamma)
    result = {
        "gamma": ctl.gamma,
        "s": ctl.s,
        "s_plus": ctl.s_plus,
        "r": ctl.r,
        "v_tilde": ctl.v_tilde,
        "fdp_hat": ctl.fdp_hat,
        "rejected": [int(i) for i in ctl.rejected],
    }
    if names is not None:
        result["rejected_features"] = [names[i] for i in result["rejected"]]
    pairs = [
        ("gamma", f"{ctl.gamma:g}"),
        ("s", "never-exceeded" if ctl.s is None else f"{ctl.s:.10g}"),
        ("s_plus", f"{ctl.s_plus:.10g}"),
        ("r", str(ctl.r)),
        ("v_tilde", str(ctl.v_tilde)),
        ("fdp_hat", f"{ctl.fdp_hat:.6g}"),
        ("rejected", _format_indices(ctl.rejected)),
    ]
    _print_table(pairs, args.csv)
    if args.out:
        config = {
            "input": str(args.input),
            "shape": args.shape,
            "delta": args.delta,
            "gamma": args.gamma,
            "statistic": args.statistic,
        }
        _write_json(args.out, "control", None, config, result)
    return 0


def _parse_null(text: str) -> NullDensitySpec:
    if text == "std-normal":
        return NullDensitySpec.standard_normal()
    if text.startswith("scaled-normal:"):
        return NullDensitySpec.scaled_normal(float(text.split(":", 1)[1]))
    if text.startswith("student-t:"):
        return NullDensitySpec.student_t(float(text.split(":", 1)[1]))
    raise ValueError(
        f"unknown null density {text!r}; use std-normal, scaled-normal:SIGMA, or student-t:NU"
    )


def _cmd_pvalues(args) -> int:
    sv, _names = _load_statistics(args)
    null = _parse_null(args.null)
    if sv.shape is HypothesisShape.DIRECTIONAL:
        pv = directional_pvalues(sv, null)
    else:
        pv = equivalence_pvalues(sv, null)
    if args.out:
        write_pvalues_csv(pv, args.out)
        print(f"wrote {pv.values.size} p-values to {args.out}")
    else:
        if args.csv:
            print("index,pvalue")
            for j, p in enumerate(pv.values):
                print(f"{j},{p:.17g}")
        else:
            width = max(5, len(str(pv.values.size - 1)))
            print(f"{'index':<{width}}  pvalue")
            for j, p in enumerate(pv.values):
                print(f"{j:<{width}}  {p:.10g}")
    return 0


def _cmd_simulate(args) -> int:
    study = StudySpec.from_json(args.spec)
    if args.seed is not None:
        study = StudySpec.from_dict({**study.to_dict(), "seed": args.seed})
    table = run_study(study, out_dir=args.out_dir, threads=args.threads)
    if args.csv:
        print("cell_id,pi0,rho,d,method,metric,value,se")
        for r in table.rows:
            print(
                f"{r.cell_id},{r.pi0:g},{r.rho:g},{r.d:g},{r.method},{r.metric},"
                f"{r.value:.10g},{r.se:.10g}"
            )
    else:
        header = f"{'cell':>4}  {'pi0':>5}  {'rho':>5}  {'d':>5}  {'method':<22}  {'metric':<18}  {'value':>12}  {'se':>10}"
        print(header)
        for r in table.rows:
            print(
                f"{r.cell_id:>4}  {r.pi0:>5g}  {r.rho:>5g}  {r.d:>5g}  {r.method:<22}  "
                f"{r.metric:<18}  {r.value:>12.6g}  {r.se:>10.3g}"
            )
    if args.out_dir:
        out = Path(args.out_dir)
        table.write_csv(out / "metrics.csv")
        summary = {
            "version": __version__,
            "command": "simulate",
            "seed": study.seed,
            "config_hash": _config_hash(study.to_dict()),
            **table.summary_dict(),
        }
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
        print(f"wrote {out / 'metrics.csv'} and {out / 'summary.json'}")
    return 0


def _cmd_verify_ct(args) -> int:
    seed = _ensure_seed(args)
    if args.family == "all":
        kinds = [
            "directional-basic",
            "directional-randomized",
            "equivalence-basic",
            "equivalence-windowed",
        ]
    else:
        kinds = [args.family]
    reports = []
    total = 0
    for offset, kind in enumerate(kinds):
        report = verify_random_instances(kind, args.instances, args.m, seed + offset)
        reports.append(report)
        total += report["mismatches"]
        print(
            f"{kind}: {report['instances']} instances, "
            f"{report['subsets_checked']} subsets checked, {report['mismatches']} mismatches"
        )
    if args.out:
        config = {"family": args.family, "m": args.m, "instances": args.instances}
        result = {"reports": reports, "total_mismatches": total}
        _write_json(args.out, "verify-ct", seed, config, result)
    return 0


def _cmd_exact_test(args) -> int:
    dm = read_data_csv(args.input)
    if args.feature is not None:
        if args.feature not in dm.feature_names:
            raise ValueError(f"feature {args.feature!r} not found in {args.input}")
        col = dm.feature_names.index(args.feature)
    else:
        col = 0
    values = dm.values[:, col]
    if args.test == "sign-flip":
        if dm.group is not None:
            raise ValueError("sign-flip test takes ungrouped data (drop the group column)")
        res = sign_flip_test(values, args.alpha)
    else:
        if dm.group is None:
            raise ValueError("permutation test needs a group column with two labels")
        rows_z, rows_y = dm.group_rows()
        res = two_group_permutation_test(values[rows_z], values[rows_y], args.alpha)
    pairs = [
        ("test", args.test),
        ("feature", dm.feature_names[col]),
        ("reject", str(res.reject).lower()),
        ("t_observed", f"{res.t_observed:.10g}"),
        ("critical_value", f"{res.critical_value:.10g}"),
        ("alpha", f"{res.alpha:g}"),
        ("n_transforms", str(res.n_transforms)),
        ("order_index", str(res.order_index)),
    ]
    _print_table(pairs, args.csv)
    if args.out:
        config = {
            "input": str(args.input),
            "test": args.test,
            "alpha": args.alpha,
            "feature": args.feature,
        }
        result = {
            "reject": res.reject,
            "t_observed": res.t_observed,
            "critical_value": res.critical_value,
            "alpha": res.alpha,
            "n_transforms": res.n_transforms,
            "order_index": res.order_index,
        }
        _write_json(args.out, "exact-test", None, config, result)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact",
        description="Median-level FDP estimation and median-FDP control for "
        "directional and equivalence multiple testing.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate the FDP at a fixed threshold t")
    _add_statistics_args(p)
    p.add_argument("--t", type=float, default=0.0, help="rejection threshold (default: 0)")
    p.add_argument("--randomized", action="store_true", help="use the coin-flip variant (directional)")
    p.add_argument("--windowed", action="store_true", help="use the windowed variant (equivalence)")
    p.add_argument("--seed", type=int, default=None, help="seed for the randomized coin")
    p.add_argument("--out", default=None, help="write a JSON result document here")
    p.add_argument("--csv", action="store_true", help="emit CSV instead of an aligned table")
    p.set_defaults(fn=_cmd_estimate)

    p = sub.add_parser("control", help="largest rejection set with median FDP <= gamma")
    _add_statistics_args(p)
    p.add_argument("--gamma", type=float, required=True, help="FDP level in [0, 1)")
    p.add_argument("--out", default=None, help="write a JSON result document here")
    p.add_argument("--csv", action="store_true", help="emit CSV instead of an aligned table")
    p.set_defaults(fn=_cmd_control)

    p = sub.add_parser("pvalues", help="median-level p-values for downstream procedures")
    _add_statistics_args(p)
    p.add_argument(
        "--null",
        default="std-normal",
        help="null density: std-normal, scaled-normal:SIGMA, or student-t:NU",
    )
    p.add_argument("--out", default=None, help="write the p-values as CSV here")
    p.add_argument("--csv", action="store_true", help="emit CSV instead of an aligned table")
    p.set_defaults(fn=_cmd_pvalues)

    p = sub.add_parser("simulate", help="run a Monte Carlo study from a JSON spec")
    p.add_argument("--spec", required=True, help="study spec JSON file")
    p.add_argument("--out-dir", default=None, help="directory for metrics.csv and summary.json")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: cores)")
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p.add_argument("--csv", action="store_true", help="emit CSV instead of an aligned table")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("verify-ct", help="brute-force closed testing vs. the closed forms")
    p.add_argument(
        "--family",
        choices=[
            "directional-basic",
            "directional-randomized",
            "equivalence-basic",
            "equivalence-windowed",
            "all",
        ],
        default="all",
    )
    p.add_argument("--m", type=int, default=8, help="maximum hypotheses per instance (<= 12)")
    p.add_argument("--instances", type=int, default=500, help="random instances per family")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="write a JSON report here")
    p.set_defaults(fn=_cmd_verify_ct)

    p = sub.add_parser("exact-test", help="exact sign-flip or permutation test, full enumeration")
    p.add_argument("input", help="data CSV; permutation tests need a group column")
    p.add_argument("--test", choices=["sign-flip", "permutation"], required=True)
    p.add_argument("--alpha", type=float, required=True, help="test level in (0, 1)")
    p.add_argument("--feature", default=None, help="feature column to test (default: first)")
    p.add_argument("--out", default=None, help="write a JSON result document here")
    p.add_argument("--csv", action="store_true", help="emit CSV instead of an aligned table")
    p.set_defaults(fn=_cmd_exact_test)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
