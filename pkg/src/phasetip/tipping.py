"""Tipping-point search over the adjustment factor.

Per replicate, imputation draws are made once and reused across the whole
grid, which makes the evaluated curves monotone in the adjustment factor
and the tipping point well defined. The search walks the factor away from
1 until the stop rule fires, then refines the bracket by bisection:

* Stop rule "a" (significance): the first factor at which the two-sided
  between-arm p-value exceeds the significance level.
* Stop rule "b" (neutralization): the factor at which the refit
  monotherapy-phase hazard ratio reaches 1; the overall hazard ratio at
  that point is the residual effect attributable to the combination phase.

Replicate tips are aggregated by median (the headline tip), with min, max,
and standard deviation reporting the multiple-imputation spread.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import statistics
from dataclasses import dataclass, field

from .counterfactual import (
    Effect,
    ImputationDraws,
    Threshold,
    TransformParams,
    apply_transform,
    make_draws,
)
from .errors import DataError, EstimationError
from .records import SubjectRecord
from .survival import cox_fit, logrank_test, to_counting_process

__all__ = [
    "SearchConfig",
    "TpaCurvePoint",
    "ReplicateOutcome",
    "TpaResult",
    "evaluate_at",
    "find_tipping_a",
    "find_tipping_b",
    "grid_scan",
    "mi_aggregate",
]


@dataclass(frozen=True)
class SearchConfig:
    effect: Effect
    threshold: Threshold = Threshold.SIGNIFICANCE
    alpha_level: float = 0.05
    grid_start: float = 1.0
    grid_step: float = 0.01
    grid_max: float = 10.0          # inflation bound (effect 1)
    grid_min: float = 0.01          # shrinkage bound (effect 2)
    bisection_tol: float = 1e-3
    mi_replicates: int = 20
    mdd: float | None = None        # reference HR carried into reports
    seed: int = 0
    imputation: str = "auto"
    p_source: str = "logrank"       # or "wald" (from the treatment-only Cox fit)
    neutral_tol: float = 0.01       # |mono HR - 1| defining neutralization
    threads: int = 1

    def __post_init__(self):
        if not self.grid_step > 0:
            raise DataError("grid_step must be positive")
        if not 0 < self.alpha_level < 1:
            raise DataError("alpha_level must be in (0, 1)")
        if self.mi_replicates < 1:
            raise DataError("need at least one replicate")
        if self.p_source not in ("logrank", "wald"):
            raise DataError(f"unknown p_source {self.p_source!r}")


@dataclass(frozen=True)
class TpaCurvePoint:
    gamma: float
    p_two_sided: float | None
    hr_overall: float | None
    hr_mono: float | None
    n_events: int
    evaluable: bool = True
    note: str | None = None


@dataclass(frozen=True)
class ReplicateOutcome:
    replicate_id: int
    tip: float | None
    point: TpaCurvePoint | None
    degenerate: bool = False
    flags: list = field(default_factory=list)


@dataclass(frozen=True)
class TpaResult:
    effect: Effect
    threshold: Threshold
    tip: float | None               # median of replicate tips
    hr_at_tip: float | None
    p_at_tip: float | None
    n_events_at_tip: float | None   # mean across replicates
    tip_min: float | None
    tip_max: float | None
    tip_sd: float | None
    replicates: list
    n_degenerate: int
    degenerate: bool
    flags: list


def evaluate_at(records: list[SubjectRecord], params: TransformParams,
                draws: ImputationDraws, p_source: str = "logrank") -> TpaCurvePoint:
    """One counterfactual evaluation: transform, then p-value, overall HR,
    and monotherapy-phase HR on the transformed dataset. Estimator failures
    mark the point unevaluable instead of aborting the search."""
    data = apply_transform(records, params, draws)
    n_events = sum(r.delta for r in data)
    try:
        rows = to_counting_process(data)
        trt_fit = cox_fit(rows, ("trt",))
        hr_overall = trt_fit.hr("trt")
        if p_source == "wald":
            p = trt_fit.wald_p("trt")
        else:
            p = logrank_test(data).p_two_sided
    except EstimationError as err:
        return TpaCurvePoint(
            gamma=params.gamma, p_two_sided=None, hr_overall=None, hr_mono=None,
            n_events=n_events, evaluable=False, note=str(err),
        )
    hr_mono = None
    note = None
    if any(r.mono for r in rows):
        try:
            full_fit = cox_fit(rows, ("trt", "mono", "trt_x_mono"))
            hr_mono = full_fit.contrast(("trt", "trt_x_mono"))[0]
        except EstimationError as err:
            note = f"mono-phase fit failed: {err}"
    return TpaCurvePoint(
        gamma=params.gamma, p_two_sided=p, hr_overall=hr_overall,
        hr_mono=hr_mono, n_events=n_events, note=note,
    )


class _Evaluator:
    """Caches curve points for one replicate's fixed draws."""

    def __init__(self, records, config, draws):
        self.records = records
        self.config = config
        self.draws = draws
        self.cache = {}

    def at(self, gamma: float) -> TpaCurvePoint:
        if gamma not in self.cache:
            params = TransformParams(self.config.effect, gamma, self.config.threshold)
            self.cache[gamma] = evaluate_at(
                self.records, params, self.draws, self.config.p_source
            )
        return self.cache[gamma]


def _grid_walk(ev, config, usable, crossed):
    """Walk the factor from grid_start in the effect's direction until
    `crossed(point)` fires. Unusable points (estimator failures) are skipped
    with a warning. Returns (last_clear, first_crossed, flags) where the
    crossed side is None when the bound is reached without a crossing."""
    effect = config.effect
    direction = 1.0 if effect is Effect.INFLATE_CONTROL else -1.0
    bound = config.grid_max if direction > 0 else config.grid_min
    flags = []

    last_clear = config.grid_start
    k = 0
    while True:
        k += 1
        gamma = config.grid_start + direction * k * config.grid_step
        gamma = min(gamma, bound) if direction > 0 else max(gamma, bound)
        point = ev.at(gamma)
        if not usable(point):
            flags.append(f"factor {gamma:g} skipped: {point.note}")
            if gamma == bound:
                return last_clear, None, flags
            continue
        if crossed(point):
            return last_clear, gamma, flags
        last_clear = gamma
        if gamma == bound:
            return last_clear, None, flags


def _bisect(ev, lo, hi, config, usable, crossed, flags):
    """Shrink [clear, crossed] to bisection_tol; unusable midpoints are
    nudged once toward each side, then the bracket is kept as-is."""
    while abs(hi - lo) > config.bisection_tol:
        mid = 0.5 * (lo + hi)
        point = ev.at(mid)
        if not usable(point):
            nudged = None
            for cand in (mid + 0.1 * (hi - mid), mid + 0.1 * (lo - mid)):
                alt = ev.at(cand)
                if usable(alt):
                    mid, point, nudged = cand, alt, cand
                    break
            if nudged is None:
                flags.append(f"bisection stopped early: midpoint {mid:g} unevaluable")
                break
        if crossed(point):
            hi = mid
        else:
            lo = mid
    return lo, hi


def _run_replicate_a(records, config, replicate_id, draws=None):
    if draws is None:
        draws = make_draws(
            records, config.effect, config.imputation, config.seed, replicate_id
        )
    ev = _Evaluator(records, config, draws)

    start = ev.at(config.grid_start)
    if not start.evaluable:
        return ReplicateOutcome(
            replicate_id, tip=None, point=start,
            flags=[f"start unevaluable: {start.note}"],
        )
    if start.p_two_sided > config.alpha_level:
        return ReplicateOutcome(
            replicate_id, tip=config.grid_start, point=start, degenerate=True,
            flags=["already non-significant at start"],
        )

    usable = lambda pt: pt.evaluable
    crossed = lambda pt: pt.p_two_sided > config.alpha_level
    last_clear, first_crossed, flags = _grid_walk(ev, config, usable, crossed)
    if first_crossed is None:
        flags.append("no tipping point in range")
        return ReplicateOutcome(replicate_id, tip=None, point=None, flags=flags)

    lo, hi = _bisect(ev, last_clear, first_crossed, config, usable, crossed, flags)
    tip = 0.5 * (lo + hi)
    return ReplicateOutcome(replicate_id, tip=tip, point=ev.at(hi), flags=flags)


def _run_replicate_b(records, config, replicate_id, draws=None):
    if draws is None:
        draws = make_draws(
            records, config.effect, config.imputation, config.seed, replicate_id
        )
    ev = _Evaluator(records, config, draws)

    start = ev.at(config.grid_start)
    if not start.evaluable or start.hr_mono is None:
        return ReplicateOutcome(
            replicate_id, tip=None, point=start,
            flags=[f"start unevaluable: {start.note}"],
        )
    if start.hr_mono >= 1.0:
        return ReplicateOutcome(
            replicate_id, tip=config.grid_start, point=start, degenerate=True,
            flags=["monotherapy difference already neutral at start"],
        )

    def neutral(pt):
        return pt.hr_mono is not None and abs(pt.hr_mono - 1.0) <= config.neutral_tol

    usable = lambda pt: pt.evaluable and pt.hr_mono is not None
    crossed = lambda pt: pt.hr_mono >= 1.0
    last_clear, first_crossed, flags = _grid_walk(ev, config, usable, crossed)
    if first_crossed is None:
        flags.append("no tipping point in range")
        return ReplicateOutcome(replicate_id, tip=None, point=None, flags=flags)

    lo, hi = last_clear, first_crossed
    while abs(hi - lo) > config.bisection_tol:
        for side in (lo, hi):
            pt = ev.at(side)
            if usable(pt) and neutral(pt):
                return ReplicateOutcome(replicate_id, tip=side, point=pt, flags=flags)
        mid = 0.5 * (lo + hi)
        point = ev.at(mid)
        if not usable(point):
            flags.append(f"bisection stopped early: midpoint {mid:g} unevaluable")
            break
        if neutral(point):
            return ReplicateOutcome(replicate_id, tip=mid, point=point, flags=flags)
        if crossed(point):
            hi = mid
        else:
            lo = mid

    # bracket collapsed without hitting the tolerance: report the endpoint
    # whose mono HR is closest to 1
    candidates = [ev.at(g) for g in (lo, hi)]
    candidates = [c for c in candidates if c.evaluable and c.hr_mono is not None]
    best = min(candidates, key=lambda c: abs(c.hr_mono - 1.0))
    if not neutral(best):
        flags.append("neutralization tolerance not met within bracket")
    return ReplicateOutcome(replicate_id, tip=0.5 * (lo + hi), point=best, flags=flags)


def mi_aggregate(outcomes, effect: Effect, threshold: Threshold) -> TpaResult:
    """Median/min/max/SD of replicate tips (degenerate replicates keep their
    start-value tip); replicates with no tip in range are excluded from the
    statistics and surfaced via flags."""
    if not outcomes:
        raise DataError("no replicates to aggregate")
    tipped = [o for o in outcomes if o.tip is not None]
    n_degenerate = sum(1 for o in outcomes if o.degenerate)
    flags = [f"replicate {o.replicate_id}: {f}" for o in outcomes for f in o.flags]
    all_degenerate = n_degenerate == len(outcomes)

    if not tipped:
        return TpaResult(
            effect=effect, threshold=threshold, tip=None, hr_at_tip=None,
            p_at_tip=None, n_events_at_tip=None, tip_min=None, tip_max=None,
            tip_sd=None, replicates=list(outcomes), n_degenerate=n_degenerate,
            degenerate=all_degenerate, flags=flags,
        )

    tips = [o.tip for o in tipped]
    points = [o.point for o in tipped if o.point is not None]
    tip_sd = statistics.stdev(tips) if len(tips) > 1 else 0.0
    hrs = [p.hr_overall for p in points if p.hr_overall is not None]
    ps = [p.p_two_sided for p in points if p.p_two_sided is not None]
    events = [p.n_events for p in points]
    return TpaResult(
        effect=effect, threshold=threshold,
        tip=statistics.median(tips),
        hr_at_tip=statistics.median(hrs) if hrs else None,
        p_at_tip=statistics.median(ps) if ps else None,
        n_events_at_tip=(sum(events) / len(events)) if events else None,
        tip_min=min(tips), tip_max=max(tips), tip_sd=tip_sd,
        replicates=list(outcomes), n_degenerate=n_degenerate,
        degenerate=all_degenerate, flags=flags,
    )


def _run_replicates(records, config, runner):
    """Run all replicates, searching once per distinct draw set.

    Deterministic imputation (the cutoff method) gives every replicate the
    same draws; duplicating the search would only repeat identical work, so
    replicates sharing a draw set share one search result.
    """
    ids = list(range(config.mi_replicates))
    draws_list = [
        make_draws(records, config.effect, config.imputation, config.seed, r)
        for r in ids
    ]
    groups = {}
    for r in ids:
        key = tuple(sorted(draws_list[r].values.items()))
        groups.setdefault(key, []).append(r)
    leaders = [members[0] for members in groups.values()]

    def solve(rid):
        return runner(records, config, rid, draws_list[rid])

    if config.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.threads) as pool:
            solved = dict(zip(leaders, pool.map(solve, leaders)))
    else:
        solved = {rid: solve(rid) for rid in leaders}

    outcomes = []
    for members in groups.values():
        lead = solved[members[0]]
        for r in members:
            outcomes.append(dataclasses.replace(lead, replicate_id=r))
    outcomes.sort(key=lambda o: o.replicate_id)
    return mi_aggregate(outcomes, config.effect, config.threshold)


def find_tipping_a(records: list[SubjectRecord], config: SearchConfig) -> TpaResult:
    """Significance-loss tipping point with multiple imputation."""
    return _run_replicates(records, config, _run_replicate_a)


def find_tipping_b(records: list[SubjectRecord], config: SearchConfig) -> TpaResult:
    """Neutralization tipping point: the factor at which the refit
    monotherapy-phase HR reaches 1. The overall HR at that factor is the
    residual effect of the combination phase."""
    if not any(r.mono_start is not None for r in records):
        raise DataError("no mono phase to neutralize")
    return _run_replicates(records, config, _run_replicate_b)


def find_tipping(records: list[SubjectRecord], config: SearchConfig) -> TpaResult:
    if config.threshold is Threshold.SIGNIFICANCE:
        return find_tipping_a(records, config)
    return find_tipping_b(records, config)


def grid_scan(records: list[SubjectRecord], config: SearchConfig,
              gammas) -> list[TpaCurvePoint]:
    """Curve points over an explicit factor grid, using replicate 0 draws
    (deterministic for a given seed)."""
    draws = make_draws(records, config.effect, config.imputation, config.seed, 0)
    ev = _Evaluator(records, config, draws)
    return [ev.at(float(g)) for g in gammas]
