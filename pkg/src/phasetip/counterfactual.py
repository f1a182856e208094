"""Counterfactual phase transforms and imputation of unobserved times.

Two directions of adjustment are supported. Effect 1 inflates the
control-arm monotherapy durations (adjustment factor >= 1), standing in
for the counterfactual where control subjects had received active
maintenance. Effect 2 shrinks the experimental-arm monotherapy durations
(factor in (0, 1]), standing in for the counterfactual without active
maintenance.

For Effect 1, subjects who had an event after transitioning need an
imputed censoring time: either the administrative cutoff (when censoring
is dominated by the data cutoff) or a draw from a censoring distribution
fitted with reversed event indicators, conditioned to lie at or beyond
the observed time. For Effect 2, subjects censored during monotherapy
need an imputed event time drawn from an exponential fit to the
experimental monotherapy durations; memorylessness makes the conditional
draw a fresh exponential added to the observed time.

Draws are made once per replicate with a counter-keyed generator per
(seed, replicate, subject), so results do not depend on iteration order
or thread count, and the same draws are reused across the whole
adjustment-factor grid.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EstimationError
from .records import Arm, SubjectRecord
from .survival import KmCurve, km_estimate

__all__ = [
    "Effect",
    "Threshold",
    "TransformParams",
    "CensoringModel",
    "MonoEventModel",
    "ImputationDraws",
    "keyed_rng",
    "impute_censoring_cutoff",
    "fit_censoring_model",
    "sample_censoring_conditional",
    "fit_mono_event_model",
    "impute_event_time",
    "transform_effect1",
    "transform_effect2",
    "apply_transform",
    "naive_transform",
    "cutoff_censoring_fraction",
    "make_draws",
]

REJECTION_CAP = 10_000


class Effect(enum.Enum):
    """Which arm's monotherapy phase the adjustment factor acts on."""

    INFLATE_CONTROL = 1
    SHRINK_EXPERIMENTAL = 2

    @classmethod
    def from_number(cls, n) -> "Effect":
        return cls(int(n))

    @property
    def number(self) -> int:
        return self.value

    @property
    def target_arm(self) -> Arm:
        return Arm.CONTROL if self is Effect.INFLATE_CONTROL else Arm.EXPERIMENTAL


class Threshold(enum.Enum):
    SIGNIFICANCE = "a"   # stop when the between-arm difference loses significance
    NEUTRALIZE = "b"     # stop when the monotherapy-phase HR reaches 1


@dataclass(frozen=True)
class TransformParams:
    effect: Effect
    gamma: float
    threshold: Threshold = Threshold.SIGNIFICANCE

    def __post_init__(self):
        if self.effect is Effect.INFLATE_CONTROL and self.gamma < 1.0:
            raise DataError(f"inflation factor must be >= 1, got {self.gamma}")
        if self.effect is Effect.SHRINK_EXPERIMENTAL and not 0.0 < self.gamma <= 1.0:
            raise DataError(f"shrinkage factor must be in (0, 1], got {self.gamma}")


@dataclass(frozen=True)
class CensoringModel:
    """Fitted censoring-time distribution (event indicators reversed)."""

    kind: str                    # "exponential" or "km"
    rate: float | None
    curve: KmCurve | None
    n_censorings: int
    exposure: float

    def __post_init__(self):
        if self.kind == "exponential" and not (self.rate and self.rate > 0):
            raise EstimationError("censoring model needs a positive rate")


@dataclass(frozen=True)
class MonoEventModel:
    """Exponential fit to experimental-arm time from mono start to event."""

    rate: float
    n_events: int
    exposure: float

    def __post_init__(self):
        if not self.rate > 0:
            raise EstimationError("mono event model needs a positive rate")


@dataclass(frozen=True)
class ImputationDraws:
    """Per-subject imputed times for one replicate.

    Effect 1 stores censoring times (for control mono subjects with an
    event); Effect 2 stores event times (for experimental mono subjects
    censored during monotherapy).
    """

    effect: Effect
    replicate_id: int
    seed: int
    method: str
    values: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def get(self, subject_id: str):
        return self.values.get(subject_id)


def _subject_key(subject_id: str) -> int:
    digest = hashlib.sha256(subject_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def keyed_rng(seed: int, replicate_id: int, subject_id: str) -> np.random.Generator:
    """Independent generator per (seed, replicate, subject)."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(replicate_id), _subject_key(subject_id)])
    )


# ---------------------------------------------------------------------------
# Imputation models


def impute_censoring_cutoff(record: SubjectRecord) -> float:
    """Administrative imputation: the unobserved censoring time is the
    months from randomization to the data-cutoff date."""
    if record.delta != 1:
        raise DataError("cutoff imputation applies to subjects with an event")
    return record.cutoff


def cutoff_censoring_fraction(records) -> float:
    """Share of censored observations that are censored at the cutoff."""
    censored = [r for r in records if r.delta == 0]
    if not censored:
        return 1.0
    at_cutoff = sum(1 for r in censored if math.isclose(r.s, r.cutoff, rel_tol=1e-9, abs_tol=1e-9))
    return at_cutoff / len(censored)


def fit_censoring_model(records, kind: str = "exponential") -> CensoringModel:
    """Fit the censoring distribution by reversing the event indicator.

    The exponential fit is the MLE: censorings over total exposure. The
    KM variant estimates the curve nonparametrically.
    """
    n_cens = sum(1 for r in records if r.delta == 0)
    if n_cens == 0:
        raise EstimationError("no censored observations to fit a censoring model")
    exposure = float(sum(r.s for r in records))
    if kind == "exponential":
        return CensoringModel("exponential", n_cens / exposure, None, n_cens, exposure)
    if kind == "km":
        reversed_records = [
            SubjectRecord(r.subject_id, r.arm, r.s, 1 - r.delta, r.cutoff)
            for r in records
        ]
        return CensoringModel("km", None, km_estimate(reversed_records), n_cens, exposure)
    raise DataError(f"unknown censoring model kind {kind!r}")


def _km_inverse_draw(curve: KmCurve, rng) -> float:
    """Inverse-transform draw from a KM curve; tail mass maps to +inf."""
    u = rng.uniform()
    idx = np.nonzero(curve.surv <= u)[0]
    if idx.size == 0:
        return math.inf
    return float(curve.times[idx[0]])


def sample_censoring_conditional(model: CensoringModel, floor: float, rng,
                                 fallback: float | None = None):
    """Draw a censoring time conditioned to be at or beyond `floor`.

    The exponential path uses memorylessness directly. The KM path uses
    rejection sampling with a retry cap; if the cap is exceeded (all
    fitted mass below the floor) the draw falls back to the supplied
    administrative time and is flagged. Returns (draw, fell_back).
    """
    if floor < 0:
        raise DataError("conditioning floor must be non-negative")
    if model.kind == "exponential":
        return floor + rng.exponential(1.0 / model.rate), False
    for _ in range(REJECTION_CAP):
        draw = _km_inverse_draw(model.curve, rng)
        if draw >= floor:
            return draw, False
    if fallback is None:
        raise EstimationError("rejection sampling cap exceeded and no fallback given")
    return max(fallback, floor), True


def fit_mono_event_model(records) -> MonoEventModel:
    """Censoring-aware exponential MLE on experimental mono durations."""
    subset = [
        r for r in records
        if r.arm is Arm.EXPERIMENTAL and r.mono_start is not None and r.mono_start < r.s
    ]
    n_events = sum(r.delta for r in subset)
    if n_events == 0:
        raise EstimationError("no monotherapy-phase events on the experimental arm")
    exposure = float(sum(r.s - r.mono_start for r in subset))
    return MonoEventModel(n_events / exposure, int(n_events), exposure)


def impute_event_time(record: SubjectRecord, model: MonoEventModel, rng) -> float:
    """Event time for a subject censored during monotherapy: the observed
    time plus a fresh exponential residual (strictly beyond the observed
    time, so the identity transform leaves the record unchanged)."""
    if record.delta != 0:
        raise DataError("event-time imputation applies to censored subjects")
    residual = rng.exponential(1.0 / model.rate)
    while residual == 0.0:
        residual = rng.exponential(1.0 / model.rate)
    return record.s + residual


# ---------------------------------------------------------------------------
# Transforms


def transform_effect1(record: SubjectRecord, gamma: float,
                      imputed_r: float | None = None) -> SubjectRecord:
    """Inflate a control subject's monotherapy duration by `gamma`.

    Censored subjects are unchanged (their counterfactual time only moves
    further beyond the censoring time). An observed event moves to
    t' = x + gamma*(s - x); it stays an event if t' is within the imputed
    censoring time, otherwise the subject becomes censored there.
    Non-control subjects and subjects without a monotherapy phase pass
    through untouched.
    """
    if gamma < 1.0:
        raise DataError(f"inflation factor must be >= 1, got {gamma}")
    if record.arm is not Arm.CONTROL or record.mono_start is None:
        return record
    if record.delta == 0:
        return record
    if imputed_r is None:
        raise DataError(f"subject {record.subject_id}: missing imputed censoring time")
    # algebraically x + gamma*(s - x); this form is exact at gamma == 1
    t_prime = record.s + (gamma - 1.0) * (record.s - record.mono_start)
    if t_prime <= imputed_r:
        return record.with_outcome(t_prime, 1)
    return record.with_outcome(imputed_r, 0)


def transform_effect2(record: SubjectRecord, gamma: float,
                      imputed_t: float | None = None) -> SubjectRecord:
    """Shrink an experimental subject's monotherapy duration by `gamma`.

    Observed events stay events with shortened time x + gamma*(s - x).
    A subject censored during monotherapy gets an imputed event time
    t-hat beyond the observed time; the shrunk time x + gamma*(t-hat - x)
    becomes an observed event if it lands at or before the observed
    censoring time (the observed s), otherwise the record is unchanged.
    """
    if not 0.0 < gamma <= 1.0:
        raise DataError(f"shrinkage factor must be in (0, 1], got {gamma}")
    if record.arm is not Arm.EXPERIMENTAL or record.mono_start is None:
        return record
    x = record.mono_start
    if record.delta == 1:
        t_prime = record.s + (gamma - 1.0) * (record.s - x)
        return record.with_outcome(t_prime, 1)
    if imputed_t is None:
        raise DataError(f"subject {record.subject_id}: missing imputed event time")
    t_prime = imputed_t + (gamma - 1.0) * (imputed_t - x)
    if t_prime <= record.s:
        return record.with_outcome(t_prime, 1)
    return record


def apply_transform(records, params: TransformParams, draws: ImputationDraws):
    """Counterfactual dataset under `params`, using per-subject draws."""
    if params.effect is Effect.INFLATE_CONTROL:
        return [transform_effect1(r, params.gamma, draws.get(r.subject_id)) for r in records]
    return [transform_effect2(r, params.gamma, draws.get(r.subject_id)) for r in records]


def naive_transform(records, effect: Effect, gamma: float):
    """Rescale monotherapy durations regardless of event status.

    Event indicators never change, so the total number of events is
    preserved by construction; the cutoff is extended when an inflated
    time moves past it.
    """
    if effect is Effect.INFLATE_CONTROL and gamma < 1.0:
        raise DataError(f"inflation factor must be >= 1, got {gamma}")
    if effect is Effect.SHRINK_EXPERIMENTAL and not 0.0 < gamma <= 1.0:
        raise DataError(f"shrinkage factor must be in (0, 1], got {gamma}")
    out = []
    for r in records:
        if r.arm is not effect.target_arm or r.mono_start is None:
            out.append(r)
            continue
        s_new = r.s + (gamma - 1.0) * (r.s - r.mono_start)
        out.append(r.with_outcome(s_new, r.delta))
    return out


# ---------------------------------------------------------------------------
# Replicate draw generation


def make_draws(records, effect: Effect, imputation: str = "auto",
               seed: int = 0, replicate_id: int = 0) -> ImputationDraws:
    """All imputed times one replicate needs, keyed per subject.

    Effect 1: imputed censoring times for control mono subjects with an
    event. `imputation` picks the source: "cutoff", "fitted" (exponential
    censoring model), or "auto", which uses the cutoff when at least half
    of the censored observations sit on the cutoff date.

    Effect 2: imputed event times for experimental subjects censored
    during monotherapy, from the exponential mono-duration fit.
    """
    if imputation not in ("auto", "cutoff", "fitted"):
        raise DataError(f"unknown imputation method {imputation!r}")

    values = {}
    flags = []
    if effect is Effect.INFLATE_CONTROL:
        method = imputation
        if method == "auto":
            method = "cutoff" if cutoff_censoring_fraction(records) >= 0.5 else "fitted"
        needing = [
            r for r in records
            if r.arm is Arm.CONTROL and r.mono_start is not None
            and r.mono_start < r.s and r.delta == 1
        ]
        if method == "cutoff":
            for r in needing:
                values[r.subject_id] = impute_censoring_cutoff(r)
        else:
            model = fit_censoring_model(records) if needing else None
            for r in needing:
                rng = keyed_rng(seed, replicate_id, r.subject_id)
                draw, fell_back = sample_censoring_conditional(
                    model, r.s, rng, fallback=r.cutoff
                )
                values[r.subject_id] = draw
                if fell_back:
                    flags.append(f"subject {r.subject_id}: rejection cap hit, used cutoff")
    else:
        method = "fitted"
        needing = [
            r for r in records
            if r.arm is Arm.EXPERIMENTAL and r.mono_start is not None
            and r.mono_start < r.s and r.delta == 0
        ]
        model = fit_mono_event_model(records) if needing else None
        for r in needing:
            rng = keyed_rng(seed, replicate_id, r.subject_id)
            values[r.subject_id] = impute_event_time(r, model, rng)

    return ImputationDraws(
        effect=effect, replicate_id=replicate_id, seed=seed,
        method=method, values=values, flags=flags,
    )
