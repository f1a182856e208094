"""Command-line interface.

Subcommands:

  analyze   primary-analysis report: KM medians, log-rank p, overall HR,
            phase-specific HRs
  tpa       tipping-point analysis for one effect and stop rule; writes
            results.csv into the output directory
  simulate  emit a calibrated synthetic trial dataset as CSV
  curve     evaluate the adjustment-factor grid and emit the curve CSV
            plus an SVG plot

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
A flat key=value config file can supply any long flag's value; explicit
flags win. The PHASETIP_SEED environment variable is the seed fallback
when neither the flag nor the config file sets one.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .counterfactual import Effect, Threshold
from .dataio import read_dataset, write_dataset
from .errors import DataError, EstimationError, PhasetipError
from .records import Arm
from .simulate import SimConfig, simulate_trial, summarize_trial
from .survival import cox_fit, km_estimate, logrank_test, phase_hr, to_counting_process
from .svgplot import find_crossings, line_plot
from .tipping import SearchConfig, TpaResult, find_tipping, grid_scan

__all__ = ["main", "entry", "emit_results"]

CURVE_COLUMNS = ["gamma", "p", "hr_overall", "hr_mono"]
RESULT_COLUMNS = [
    "effect_method", "adjustment_factor_at_tip", "avg_n_events",
    "hr_at_tip", "p_at_tip",
    "tip_min", "tip_max", "tip_sd", "n_replicates", "n_degenerate", "flags",
]


class UsageError(PhasetipError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(value):
    return "" if value is None else repr(float(value))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phasetip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key=value file supplying flag defaults")
    common.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("analyze", parents=[common], help="primary-analysis report")
    p.add_argument("--input", required=True)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--ties", choices=("efron", "breslow"), default="efron")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tpa", parents=[common], help="tipping-point analysis")
    p.add_argument("--input", required=True)
    p.add_argument("--effect", choices=("1", "2"), default=None)
    p.add_argument("--threshold", choices=("a", "b"), default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--grid-step", type=float, default=None)
    p.add_argument("--grid-max", type=float, default=None)
    p.add_argument("--grid-min", type=float, default=None)
    p.add_argument("--imputation", choices=("auto", "cutoff", "fitted"), default=None)
    p.add_argument("--p-source", choices=("logrank", "wald"), default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_tpa)

    p = sub.add_parser("simulate", parents=[common], help="emit a synthetic trial")
    p.add_argument("--out", required=True, help="output CSV path")
    for flag, cast in SIM_FLAGS.items():
        p.add_argument(f"--{flag}", type=cast, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("curve", parents=[common], help="factor-grid curve and plot")
    p.add_argument("--input", required=True)
    p.add_argument("--effect", choices=("1", "2"), default=None)
    p.add_argument("--threshold", choices=("a", "b"), default=None)
    p.add_argument("--grid-step", type=float, default=None)
    p.add_argument("--grid-max", type=float, default=None)
    p.add_argument("--grid-min", type=float, default=None)
    p.add_argument("--imputation", choices=("auto", "cutoff", "fitted"), default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_curve)

    return parser


SIM_FLAGS = {
    "n-experimental": int,
    "n-control": int,
    "combo-event-hazard": float,
    "switch-hazard": float,
    "mono-event-hazard": float,
    "hr-combo": float,
    "hr-mono": float,
    "switch-multiplier": float,
    "accrual-months": float,
    "cutoff-months": float,
    "dropout-hazard": float,
}


def _load_config(path) -> dict:
    cfg = {}
    try:
        with open(path) as handle:
            for raw in handle:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"bad config line (need key=value): {line!r}")
                key, value = line.split("=", 1)
                cfg[key.strip().replace("_", "-")] = value.strip()
    except OSError as err:
        raise DataError(f"cannot read config file: {err}") from None
    return cfg


class _Options:
    """Flag > config file > fallback resolution for one command."""

    def __init__(self, args):
        self.args = args
        self.cfg = _load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, name, cast, fallback):
        explicit = getattr(self.args, name, None)
        if explicit is not None:
            return explicit
        key = name.replace("_", "-")
        if key in self.cfg:
            raw = self.cfg[key]
            try:
                return cast(raw)
            except (TypeError, ValueError):
                raise DataError(f"config value for {key} is invalid: {raw!r}") from None
        return fallback

    def seed(self) -> int:
        env = os.environ.get("PHASETIP_SEED")
        return self.get("seed", int, int(env) if env else 0)


def _effect(opt) -> Effect:
    return Effect.from_number(opt.get("effect", int, 1))


def _threshold(opt) -> Threshold:
    return Threshold(opt.get("threshold", str, "a"))


# ---------------------------------------------------------------------------
# analyze


def _fmt_ci(ci):
    return f"({ci[0]:.3f}, {ci[1]:.3f})"


def cmd_analyze(args) -> int:
    records = read_dataset(args.input)
    if not records:
        raise DataError("dataset is empty")
    lines = []
    for arm, label in ((Arm.EXPERIMENTAL, "Experimental"), (Arm.CONTROL, "Control")):
        subset = [r for r in records if r.arm is arm]
        if not subset:
            raise DataError(f"no subjects on the {label.lower()} arm")
        curve = km_estimate(subset)
        events = sum(r.delta for r in subset)
        median = "not reached" if curve.median is None else f"{curve.median:.2f}"
        lines.append(
            f"{label} arm: n={len(subset)}, events={events}, "
            f"censored={len(subset) - events}, median PFS={median} months"
        )
    lr = logrank_test(records, stratified=args.stratified)
    lines.append(f"Log-rank chi2={lr.chi2:.4f}, two-sided p={lr.p_two_sided:.6g}")
    overall = cox_fit(to_counting_process(records), ("trt",), ties=args.ties,
                      stratified=args.stratified)
    hr, ci = overall.contrast(("trt",))
    lines.append(f"Overall HR={hr:.4f} {_fmt_ci(ci)}")
    phases = phase_hr(records, ties=args.ties, stratified=args.stratified)
    lines.append(f"Combination-phase HR={phases.hr_combo:.4f} {_fmt_ci(phases.ci_combo)}")
    if phases.hr_mono is None:
        lines.append("Monotherapy-phase HR: not estimable (no transitions observed)")
    else:
        lines.append(f"Monotherapy-phase HR={phases.hr_mono:.4f} {_fmt_ci(phases.ci_mono)}")
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# tpa


def _search_config(opt, effect, threshold, seed) -> SearchConfig:
    return SearchConfig(
        effect=effect,
        threshold=threshold,
        alpha_level=opt.get("alpha_level", float, 0.05),
        grid_step=opt.get("grid_step", float, 0.01),
        grid_max=opt.get("grid_max", float, 10.0),
        grid_min=opt.get("grid_min", float, 0.01),
        bisection_tol=opt.get("bisection_tol", float, 1e-3),
        mi_replicates=opt.get("replicates", int, 20),
        seed=seed,
        imputation=opt.get("imputation", str, "auto"),
        p_source=opt.get("p_source", str, "logrank"),
        threads=opt.get("threads", int, 1),
    )


def emit_results(results: list[TpaResult], outdir) -> str:
    """Write results.csv (one row per effect/threshold) into `outdir`."""
    try:
        os.makedirs(outdir, exist_ok=True)
        path = os.path.join(outdir, "results.csv")
        with open(path, "w", newline="") as handle:
            handle.write(",".join(RESULT_COLUMNS) + "\n")
            for res in results:
                row = [
                    f"effect{res.effect.number}_threshold_{res.threshold.value}",
                    _num(res.tip),
                    _num(res.n_events_at_tip),
                    _num(res.hr_at_tip),
                    _num(res.p_at_tip),
                    _num(res.tip_min),
                    _num(res.tip_max),
                    _num(res.tip_sd),
                    str(len(res.replicates)),
                    str(res.n_degenerate),
                    '"' + "; ".join(res.flags).replace('"', "'") + '"',
                ]
                handle.write(",".join(row) + "\n")
    except OSError as err:
        raise DataError(f"cannot write results: {err}") from None
    return path


def cmd_tpa(args) -> int:
    opt = _Options(args)
    records = read_dataset(args.input)
    if not records:
        raise DataError("dataset is empty")
    effect, threshold = _effect(opt), _threshold(opt)
    config = _search_config(opt, effect, threshold, opt.seed())
    result = find_tipping(records, config)
    path = emit_results([result], args.out)
    if result.tip is None:
        print(f"no tipping point in range (details in {path})")
    else:
        hr = "n/a" if result.hr_at_tip is None else f"{result.hr_at_tip:.4f}"
        p = "n/a" if result.p_at_tip is None else f"{result.p_at_tip:.4g}"
        kind = "degenerate at start" if result.degenerate else "tipping point"
        print(
            f"effect {effect.number}, threshold {threshold.value}: {kind} "
            f"factor={result.tip:.4f} (HR at tip {hr}, p at tip {p}, "
            f"replicates {len(result.replicates)}, spread sd={result.tip_sd:.4g})"
        )
    print(f"results written to {path}")
    return 0


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    opt = _Options(args)
    overrides = {}
    for flag, cast in SIM_FLAGS.items():
        value = opt.get(flag.replace("-", "_"), cast, None)
        if value is not None:
            overrides[flag.replace("-", "_")] = value
    config = SimConfig(**overrides, seed=opt.seed())
    records = simulate_trial(config)
    write_dataset(records, args.out)
    summary = summarize_trial(records)
    print(
        f"wrote {len(records)} subjects to {args.out} "
        f"(events {summary.total_events}, "
        f"monotherapy fraction {summary.mono_fraction:.3f})"
    )
    return 0


# ---------------------------------------------------------------------------
# curve


def cmd_curve(args) -> int:
    opt = _Options(args)
    records = read_dataset(args.input)
    if not records:
        raise DataError("dataset is empty")
    effect, threshold = _effect(opt), _threshold(opt)
    seed = opt.seed()
    step = opt.get("grid_step", float, 0.05)
    if effect is Effect.INFLATE_CONTROL:
        hi = opt.get("grid_max", float, 3.0 if threshold is Threshold.SIGNIFICANCE else 4.0)
        grid = np.arange(1.0, hi + 1e-9, step)
    else:
        lo = opt.get("grid_min", float, 0.3)
        grid = np.arange(1.0, lo - 1e-9, -step)
    config = SearchConfig(
        effect=effect, threshold=threshold, seed=seed,
        imputation=opt.get("imputation", str, "auto"),
    )
    points = [p for p in grid_scan(records, config, grid) if p.evaluable]

    try:
        os.makedirs(args.out, exist_ok=True)
        stem = f"curve_{effect.number}_{threshold.value}"
        csv_path = os.path.join(args.out, stem + ".csv")
        with open(csv_path, "w", newline="") as handle:
            handle.write(",".join(CURVE_COLUMNS) + "\n")
            for pt in points:
                handle.write(
                    ",".join([
                        _num(pt.gamma), _num(pt.p_two_sided),
                        _num(pt.hr_overall), _num(pt.hr_mono),
                    ]) + "\n"
                )
    except OSError as err:
        raise DataError(f"cannot write curve: {err}") from None

    if not points:
        print(f"no evaluable grid points; wrote header-only {csv_path}")
        return 0

    xs = [pt.gamma for pt in points]
    if threshold is Threshold.SIGNIFICANCE:
        ys, ref, ylabel = [pt.p_two_sided for pt in points], 0.05, "two-sided p-value"
    else:
        ys, ref, ylabel = [pt.hr_mono for pt in points], 1.0, "monotherapy-phase HR"
    svg_path = os.path.join(args.out, stem + ".svg")
    line_plot(
        xs, ys, svg_path,
        title=f"Counterfactual scan, effect {effect.number}, stop rule {threshold.value}",
        xlabel="adjustment factor", ylabel=ylabel,
        ref_y=ref, mark_crossings=True,
    )
    n_cross = len(find_crossings(xs, ys, ref))
    print(f"wrote {csv_path} and {svg_path} ({len(points)} points, {n_cross} crossing(s))")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except SystemExit as err:  # -h/--help
        return int(err.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        for diag in err.diagnostics[1:]:
            print(f"  {diag}", file=sys.stderr)
        return 2
    except EstimationError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
