"""Survival estimators built from scratch on subject records.

Provides the product-limit (Kaplan-Meier) curve with Greenwood variance,
the (optionally stratified) two-group log-rank test, expansion of subject
records into counting-process intervals, and a Cox proportional-hazards
fitter for start-stop data with the fixed design used by the phase
analysis: treatment, monotherapy status, and their interaction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2 as _chi2
from scipy.stats import norm as _norm

from .errors import ConvergenceError, DataError, EstimationError, SeparationError
from .records import Arm, CountingProcessRow, SubjectRecord

__all__ = [
    "KmCurve",
    "LogRankResult",
    "CoxFit",
    "PhaseHr",
    "km_estimate",
    "logrank_test",
    "to_counting_process",
    "cox_fit",
    "partial_loglik_and_gradient",
    "phase_hr",
]

COVARIATE_NAMES = ("trt", "mono", "trt_x_mono")

# Convergence policy for the Newton-Raphson fitter.
_LL_TOL = 1e-9
_GRAD_TOL = 1e-8
_MAX_ITER = 50
_SEPARATION_BOUND = 15.0


# ---------------------------------------------------------------------------
# Kaplan-Meier


@dataclass(frozen=True)
class KmCurve:
    """Product-limit estimate: one step per distinct event time."""

    times: np.ndarray
    surv: np.ndarray
    greenwood_se: np.ndarray
    n_risk: np.ndarray
    n_event: np.ndarray
    median: float | None
    n_subjects: int
    n_events_total: int

    def survival_at(self, t: float) -> float:
        """Step-function value S(t); 1.0 before the first event time."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        if idx < 0:
            return 1.0
        return float(self.surv[idx])


def km_estimate(records: list[SubjectRecord], arm: Arm | None = None) -> KmCurve:
    """Kaplan-Meier curve for the given records (optionally one arm).

    The median is the earliest time at which the curve drops to 0.5 or
    below; it is None when the curve never reaches 0.5.
    """
    if arm is not None:
        records = [r for r in records if r.arm is arm]
    if not records:
        raise DataError("no subjects")

    s = np.array([r.s for r in records], dtype=float)
    d = np.array([r.delta for r in records], dtype=int)

    order = np.argsort(s, kind="stable")
    s, d = s[order], d[order]
    event_times = np.unique(s[d == 1])

    n = len(s)
    # at risk at t: everyone with s >= t; events at t: delta=1 rows with s == t
    n_risk = n - np.searchsorted(s, event_times, side="left")
    ev_idx = np.searchsorted(event_times, s[d == 1])
    n_event = np.bincount(ev_idx, minlength=event_times.size)

    surv = np.cumprod(1.0 - n_event / n_risk)
    # Greenwood: Var(S) = S^2 * cumsum(d / (n (n - d))); SE pinned to 0 when S hits 0.
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = n_event / (n_risk * (n_risk - n_event))
        var = surv**2 * np.cumsum(terms)
    se = np.where(surv > 0, np.sqrt(np.where(np.isfinite(var), var, 0.0)), 0.0)

    median = None
    hit = np.nonzero(surv <= 0.5)[0]
    if hit.size:
        median = float(event_times[hit[0]])

    return KmCurve(
        times=event_times,
        surv=surv,
        greenwood_se=se,
        n_risk=n_risk,
        n_event=n_event,
        median=median,
        n_subjects=n,
        n_events_total=int(d.sum()),
    )


# ---------------------------------------------------------------------------
# Log-rank


@dataclass(frozen=True)
class LogRankResult:
    chi2: float
    p_two_sided: float
    observed: dict
    expected: dict


def logrank_test(records: list[SubjectRecord], stratified: bool = False) -> LogRankResult:
    """Two-group log-rank test comparing arms, optionally summed over strata.

    Uses the standard O-E statistic with hypergeometric variance at each
    distinct event time; the two-sided p-value comes from chi-square with
    one degree of freedom.
    """
    arms = {r.arm for r in records}
    if len(arms) < 2:
        raise DataError("log-rank needs both arms present")
    if sum(r.delta for r in records) == 0:
        raise EstimationError("log-rank needs at least one event")

    if stratified:
        strata = sorted({(-1 if r.stratum is None else r.stratum) for r in records})
        groups = [
            [r for r in records if (-1 if r.stratum is None else r.stratum) == st]
            for st in strata
        ]
    else:
        groups = [records]

    o1 = e1 = v = 0.0
    d_total = 0
    for grp in groups:
        s = np.array([r.s for r in grp], dtype=float)
        d = np.array([r.delta for r in grp], dtype=int)
        g = np.array([r.trt for r in grp], dtype=int)  # 1 = experimental
        event_times = np.unique(s[d == 1])
        if event_times.size == 0:
            continue
        s1, s0 = np.sort(s[g == 1]), np.sort(s[g == 0])
        n1 = len(s1) - np.searchsorted(s1, event_times, side="left")
        n0 = len(s0) - np.searchsorted(s0, event_times, side="left")
        n_at = n1 + n0
        ev = d == 1
        idx = np.searchsorted(event_times, s[ev])
        d_at = np.bincount(idx, minlength=event_times.size)
        d1 = np.bincount(idx, weights=g[ev].astype(float), minlength=event_times.size)

        o1 += d1.sum()
        e1 += np.sum(d_at * n1 / n_at)
        ok = n_at > 1
        v += np.sum(
            d_at[ok]
            * (n1[ok] / n_at[ok])
            * (n0[ok] / n_at[ok])
            * (n_at[ok] - d_at[ok])
            / (n_at[ok] - 1)
        )
        d_total += int(d_at.sum())

    if v > 0:
        stat = (o1 - e1) ** 2 / v
    else:
        stat = 0.0
    p = float(_chi2.sf(stat, 1)) if stat > 0 else 1.0
    return LogRankResult(
        chi2=float(stat),
        p_two_sided=p,
        observed={Arm.EXPERIMENTAL: float(o1), Arm.CONTROL: float(d_total - o1)},
        expected={Arm.EXPERIMENTAL: float(e1), Arm.CONTROL: float(d_total - e1)},
    )


# ---------------------------------------------------------------------------
# Counting-process expansion


def to_counting_process(records: list[SubjectRecord]) -> list[CountingProcessRow]:
    """Expand records into (start, stop] rows with a time-varying mono flag.

    A subject who entered monotherapy at m < s contributes two rows: the
    combination interval (0, m] with no event, and (m, s] carrying the
    subject's event status. A zero-length monotherapy interval (m == s) is
    dropped and the subject is treated as never transitioning.
    """
    rows = []
    for r in records:
        if r.mono_start is not None and r.mono_start > r.s:
            raise DataError(f"subject {r.subject_id}: phase time exceeds follow-up")
        trt = r.trt
        if r.mono_start is None or r.mono_start == r.s:
            rows.append(
                CountingProcessRow(r.subject_id, 0.0, r.s, r.delta, trt, 0, 0, r.stratum)
            )
        else:
            m = r.mono_start
            rows.append(CountingProcessRow(r.subject_id, 0.0, m, 0, trt, 0, 0, r.stratum))
            rows.append(
                CountingProcessRow(r.subject_id, m, r.s, r.delta, trt, 1, trt, r.stratum)
            )
    return rows


# ---------------------------------------------------------------------------
# Cox proportional hazards on start-stop data


@dataclass(frozen=True)
class CoxFit:
    """Maximum partial-likelihood fit."""

    names: tuple
    beta: np.ndarray
    se: np.ndarray
    cov: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    n_events: int
    ties: str
    gradient_norm: float

    def _idx(self, name: str) -> int:
        return self.names.index(name)

    def coef(self, name: str) -> float:
        return float(self.beta[self._idx(name)])

    def hr(self, name: str) -> float:
        return math.exp(self.coef(name))

    def wald_p(self, name: str) -> float:
        i = self._idx(name)
        z = self.beta[i] / self.se[i]
        return float(2.0 * _norm.sf(abs(z)))

    def contrast(self, names, level: float = 0.95):
        """HR and Wald CI for exp(sum of the named coefficients)."""
        c = np.zeros(len(self.names))
        for nm in names:
            c[self._idx(nm)] += 1.0
        est = float(c @ self.beta)
        se = math.sqrt(float(c @ self.cov @ c))
        z = _norm.ppf(0.5 + level / 2.0)
        return math.exp(est), (math.exp(est - z * se), math.exp(est + z * se))


class _CoxDesign:
    """Preprocessed arrays for repeated likelihood evaluation.

    Risk-set sums at an event time t use the identity
    sum over {start < t <= stop} = sum over {stop >= t} - sum over {start >= t},
    evaluated with suffix sums on stop-sorted and start-sorted row orders.
    Tied events are handled by the Efron (default) or Breslow adjustment via
    one flat expansion row per (event time, tie index) pair.
    """

    def __init__(self, rows, covariates, ties, stratified):
        if not rows:
            raise DataError("no counting-process rows")
        for c in covariates:
            if c not in COVARIATE_NAMES:
                raise DataError(f"unknown covariate {c!r}")
        self.ties = ties
        self.names = tuple(covariates)
        n = len(rows)
        p = len(covariates)
        self.n, self.p = n, p

        start = np.array([r.start for r in rows], dtype=float)
        stop = np.array([r.stop for r in rows], dtype=float)
        event = np.array([r.event_at_stop for r in rows], dtype=int)
        X = np.array([[r.covariate(c) for c in covariates] for r in rows], dtype=float)
        if stratified:
            strat = np.array(
                [-1 if r.stratum is None else r.stratum for r in rows], dtype=int
            )
        else:
            strat = np.zeros(n, dtype=int)

        self.n_events = int(event.sum())
        if self.n_events == 0:
            raise EstimationError("no events in counting-process data")

        self.X = X
        # packed symmetric products x_a * x_b for the Hessian
        self.pairs = [(a, b) for a in range(p) for b in range(a, p)]
        self.P = np.column_stack([X[:, a] * X[:, b] for a, b in self.pairs])

        self.strata = []
        for st in np.unique(strat):
            idx = np.nonzero(strat == st)[0]
            ev_idx = idx[event[idx] == 1]
            if ev_idx.size == 0:
                continue
            ev_order = ev_idx[np.argsort(stop[ev_idx], kind="stable")]
            ut, group_starts, d = np.unique(
                stop[ev_order], return_index=True, return_counts=True
            )
            so = idx[np.argsort(stop[idx], kind="stable")]
            sa = idx[np.argsort(start[idx], kind="stable")]
            q_stop = np.searchsorted(stop[so], ut, side="left")
            q_start = np.searchsorted(start[sa], ut, side="left")
            sum_xd = np.add.reduceat(X[ev_order], group_starts, axis=0)
            jj = np.repeat(np.arange(ut.size), d)
            if ties == "efron":
                frac = np.concatenate([np.arange(k) / k for k in d])
            elif ties == "breslow":
                frac = np.zeros(int(d.sum()))
            else:
                raise DataError(f"unknown ties method {ties!r}")
            self.strata.append(
                dict(
                    so=so, sa=sa, q_stop=q_stop, q_start=q_start,
                    ev_order=ev_order, group_starts=group_starts,
                    sum_xd=sum_xd, jj=jj, frac=frac,
                )
            )

    def loglik_grad_hess(self, beta):
        n, p = self.n, self.p
        eta = self.X @ beta
        w = np.exp(eta)
        F = np.concatenate(
            [w[:, None], w[:, None] * self.X, w[:, None] * self.P], axis=1
        )
        ncol = F.shape[1]

        ll = 0.0
        grad = np.zeros(p)
        hess_packed = np.zeros(len(self.pairs))
        for sd in self.strata:
            suf_stop = np.vstack(
                [np.cumsum(F[sd["so"]][::-1], axis=0)[::-1], np.zeros((1, ncol))]
            )
            suf_start = np.vstack(
                [np.cumsum(F[sd["sa"]][::-1], axis=0)[::-1], np.zeros((1, ncol))]
            )
            risk = suf_stop[sd["q_stop"]] - suf_start[sd["q_start"]]
            dmom = np.add.reduceat(F[sd["ev_order"]], sd["group_starts"], axis=0)

            jj, frac = sd["jj"], sd["frac"]
            Z = risk[jj, 0] - frac * dmom[jj, 0]
            ll += float(sd["sum_xd"].sum(axis=0) @ beta) - float(np.log(Z).sum())
            N1 = risk[jj, 1 : 1 + p] - frac[:, None] * dmom[jj, 1 : 1 + p]
            M1 = N1 / Z[:, None]
            grad += sd["sum_xd"].sum(axis=0) - M1.sum(axis=0)
            N2 = risk[jj, 1 + p :] - frac[:, None] * dmom[jj, 1 + p :]
            outer = np.column_stack([M1[:, a] * M1[:, b] for a, b in self.pairs])
            hess_packed -= (N2 / Z[:, None] - outer).sum(axis=0)

        hess = np.empty((p, p))
        for k, (a, b) in enumerate(self.pairs):
            hess[a, b] = hess[b, a] = hess_packed[k]
        return ll, grad, hess


def partial_loglik_and_gradient(rows, covariates=("trt",), beta=None, ties="efron",
                                stratified=False):
    """Log partial likelihood and its gradient at an arbitrary beta.

    Exposed so tests can check the analytic gradient against finite
    differences and scan the likelihood directly.
    """
    design = _CoxDesign(rows, covariates, ties, stratified)
    if beta is None:
        beta = np.zeros(design.p)
    beta = np.asarray(beta, dtype=float)
    ll, grad, _ = design.loglik_grad_hess(beta)
    return ll, grad


def cox_fit(rows, covariates=("trt",), ties="efron", stratified=False,
            max_iter=_MAX_ITER) -> CoxFit:
    """Maximize the partial likelihood by damped Newton-Raphson.

    Starts at beta = 0, halves the step whenever the likelihood would
    decrease, and stops when both the likelihood change and the gradient
    norm are below tolerance. Raises SeparationError when a coefficient
    runs away (monotone likelihood) and ConvergenceError, carrying the
    last iterate, when the iteration cap is reached.
    """
    design = _CoxDesign(rows, covariates, ties, stratified)
    beta = np.zeros(design.p)
    ll, grad, hess = design.loglik_grad_hess(beta)

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.linalg.norm(grad) < _GRAD_TOL:
            converged = True
            iterations -= 1
            break
        info = -hess
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise EstimationError(
                "singular information matrix: design is collinear on the risk sets"
            ) from None
        if not np.all(np.isfinite(step)):
            raise EstimationError(
                "singular information matrix: design is collinear on the risk sets"
            )

        # accept a step whose apparent decrease is within float resolution
        ll_slack = 1e-11 * max(1.0, abs(ll))
        factor = 1.0
        accepted = False
        for _ in range(30):
            cand = beta + factor * step
            ll_new, grad_new, hess_new = design.loglik_grad_hess(cand)
            if np.isfinite(ll_new) and ll_new >= ll - ll_slack:
                accepted = True
                break
            factor /= 2.0
        if not accepted:
            raise ConvergenceError(
                "Newton-Raphson step halving failed", last_beta=beta, iterations=iterations
            )

        delta_ll = ll_new - ll
        beta, ll, grad, hess = cand, ll_new, grad_new, hess_new
        if np.max(np.abs(beta)) > _SEPARATION_BOUND:
            raise SeparationError(last_beta=beta)
        if abs(delta_ll) < _LL_TOL and np.linalg.norm(grad) < _GRAD_TOL:
            converged = True
            break

    if not converged:
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations",
            last_beta=beta,
            iterations=max_iter,
        )

    info = -hess
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise EstimationError(
            "singular information at the optimum: design is collinear on the risk sets"
        ) from None
    se = np.sqrt(np.diag(cov))
    return CoxFit(
        names=design.names,
        beta=beta,
        se=se,
        cov=cov,
        loglik=ll,
        iterations=iterations,
        converged=True,
        n_events=design.n_events,
        ties=ties,
        gradient_norm=float(np.linalg.norm(grad)),
    )


# ---------------------------------------------------------------------------
# Phase-specific hazard ratios


@dataclass(frozen=True)
class PhaseHr:
    """Phase-specific hazard ratios from the three-term time-varying model."""

    hr_combo: float
    ci_combo: tuple
    hr_mono: float | None
    ci_mono: tuple | None
    fit: CoxFit
    flags: list = field(default_factory=list)


def phase_hr(records: list[SubjectRecord], ties="efron", stratified=False) -> PhaseHr:
    """Combination-phase and monotherapy-phase hazard ratios with Wald CIs.

    Fits treatment, monotherapy status, and their interaction on the
    counting-process expansion. The combination-phase HR is exp(b_trt);
    the monotherapy-phase HR is exp(b_trt + b_interaction). When no subject
    ever transitions, the monotherapy HR is undefined and flagged, and the
    model reduces to treatment only.
    """
    rows = to_counting_process(records)
    if not any(r.mono for r in rows):
        fit = cox_fit(rows, covariates=("trt",), ties=ties, stratified=stratified)
        hr_c, ci_c = fit.contrast(("trt",))
        return PhaseHr(
            hr_combo=hr_c, ci_combo=ci_c, hr_mono=None, ci_mono=None,
            fit=fit, flags=["no monotherapy phase observed"],
        )
    fit = cox_fit(
        rows, covariates=("trt", "mono", "trt_x_mono"), ties=ties, stratified=stratified
    )
    hr_c, ci_c = fit.contrast(("trt",))
    hr_m, ci_m = fit.contrast(("trt", "trt_x_mono"))
    return PhaseHr(hr_combo=hr_c, ci_combo=ci_c, hr_mono=hr_m, ci_mono=ci_m, fit=fit)
