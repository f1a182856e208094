#!/usr/bin/env python3
"""Calibration search for the simulator defaults.

Measures, for a candidate hazard configuration, the quantities the defaults
must reproduce: per-arm medians, overall HR, phase HRs, transition fraction,
event counts and phase mix, censoring composition, and coarse tipping-point
locations for both adjustment directions and both stop rules. Run with no
arguments to evaluate the committed defaults; pass field=value pairs to try
alternatives, e.g.:

    python scripts/calibrate_defaults.py combo_event_hazard=0.06 seeds=10
"""

import sys
from dataclasses import replace

import numpy as np

sys.path.insert(0, "src")

from phasetip.counterfactual import (  # noqa: E402
    Effect,
    TransformParams,
    apply_transform,
    make_draws,
)
from phasetip.simulate import SimConfig, simulate_trial, summarize_trial  # noqa: E402
from phasetip.survival import cox_fit, logrank_test, phase_hr, to_counting_process  # noqa: E402


def evaluate_point(records, effect, gamma, draws):
    data = apply_transform(records, TransformParams(effect, gamma), draws)
    rows = to_counting_process(data)
    p = logrank_test(data).p_two_sided
    hr_overall = cox_fit(rows, ("trt",)).hr("trt")
    hrm = phase_hr(data).hr_mono
    n_events = sum(r.delta for r in data)
    return p, hr_overall, hrm, n_events


def first_crossing(xs, ys, level, rising):
    for x, y in zip(xs, ys):
        if (y > level) if rising else (y >= level):
            return x, y
    return None, None


def trial_measures(cfg, seed):
    records = simulate_trial(cfg, seed=seed)
    summ = summarize_trial(records)
    res = phase_hr(records)
    rows = to_counting_process(records)
    overall = cox_fit(rows, ("trt",)).hr("trt")
    p = logrank_test(records).p_two_sided
    mono_events = sum(
        r.delta for r in records if r.mono_start is not None and r.mono_start < r.s
    )
    censored = [r for r in records if r.delta == 0]
    at_cutoff = sum(1 for r in censored if abs(r.s - r.cutoff) < 1e-9)
    return dict(
        median_c=summ.arms[list(summ.arms)[1]].median_pfs,
        median_e=summ.arms[list(summ.arms)[0]].median_pfs,
        overall_hr=overall,
        p=p,
        hr_combo=res.hr_combo,
        hr_mono=res.hr_mono,
        mono_fraction=summ.mono_fraction,
        events=summ.total_events,
        mono_event_share=mono_events / summ.total_events,
        cutoff_censor_frac=at_cutoff / len(censored) if censored else 1.0,
    )


def tipping_measures(cfg, seed):
    records = simulate_trial(cfg, seed=seed)
    out = {}

    draws1 = make_draws(records, Effect.INFLATE_CONTROL, "auto", seed=seed, replicate_id=0)
    gammas = np.round(np.arange(1.0, 4.01, 0.05), 4)
    pts = [evaluate_point(records, Effect.INFLATE_CONTROL, g, draws1) for g in gammas]
    g_tip, _ = first_crossing(gammas, [p for p, *_ in pts], 0.05, rising=True)
    out["gamma_c_tip"] = g_tip
    if g_tip is not None:
        i = list(gammas).index(g_tip)
        out["hr_at_gamma_c_tip"] = pts[i][1]
    a_tip, _ = first_crossing(gammas, [hm for _, _, hm, _ in pts], 1.0, rising=False)
    out["alpha_c_tip"] = a_tip
    if a_tip is not None:
        i = list(gammas).index(a_tip)
        out["theta_c"] = pts[i][1]

    draws2 = make_draws(records, Effect.SHRINK_EXPERIMENTAL, "auto", seed=seed, replicate_id=0)
    gammas2 = np.round(np.arange(1.0, 0.29, -0.02), 4)
    pts2 = [evaluate_point(records, Effect.SHRINK_EXPERIMENTAL, g, draws2) for g in gammas2]
    g_tip2, _ = first_crossing(gammas2, [p for p, *_ in pts2], 0.05, rising=True)
    out["gamma_e_tip"] = g_tip2
    if g_tip2 is not None:
        i = list(gammas2).index(g_tip2)
        out["hr_at_gamma_e_tip"] = pts2[i][1]
        out["events_at_gamma_e_tip"] = pts2[i][3]
    a_tip2, _ = first_crossing(gammas2, [hm for _, _, hm, _ in pts2], 1.0, rising=False)
    out["alpha_e_tip"] = a_tip2
    if a_tip2 is not None:
        i = list(gammas2).index(a_tip2)
        out["theta_e"] = pts2[i][1]
    return out


def main(argv):
    overrides = {}
    seeds = 10
    do_tipping = True
    for arg in argv:
        key, _, val = arg.partition("=")
        if key == "seeds":
            seeds = int(val)
        elif key == "tipping":
            do_tipping = val.lower() in ("1", "true", "yes")
        else:
            overrides[key] = float(val) if "." in val or "e" in val else int(val)
    cfg = replace(SimConfig(), **overrides) if overrides else SimConfig()
    print(f"config: {cfg}")

    keys = None
    rowsum = {}
    for sd in range(seeds):
        m = trial_measures(cfg, seed=sd)
        if keys is None:
            keys = list(m)
            rowsum = {k: [] for k in keys}
        for k in keys:
            rowsum[k].append(m[k])
    print(f"\n=== trial measures over {seeds} seeds (mean [min, max]) ===")
    for k in keys:
        vals = np.array([v for v in rowsum[k] if v is not None], dtype=float)
        print(f"{k:22s} {vals.mean():8.4f}  [{vals.min():8.4f}, {vals.max():8.4f}]")

    if do_tipping:
        print(f"\n=== coarse tipping measures over {min(seeds, 5)} seeds ===")
        agg = {}
        for sd in range(min(seeds, 5)):
            t = tipping_measures(cfg, seed=sd)
            for k, v in t.items():
                agg.setdefault(k, []).append(v)
        for k, vals in agg.items():
            arr = np.array([v for v in vals if v is not None], dtype=float)
            if arr.size:
                print(f"{k:22s} {arr.mean():8.4f}  [{arr.min():8.4f}, {arr.max():8.4f}]  (n={arr.size})")
            else:
                print(f"{k:22s} no crossing found")


if __name__ == "__main__":
    main(sys.argv[1:])
