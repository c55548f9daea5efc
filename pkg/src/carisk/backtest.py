"""Coverage and calibration tests for VaR and ES forecast paths.

Implemented checks:

* Kupiec unconditional coverage likelihood ratio, chi-square(1).
* Christoffersen conditional coverage (unconditional coverage plus
  first-order independence of the hit sequence), chi-square(2).
* Dynamic quantile regression of demeaned hits on their own lags and the
  contemporaneous VaR, chi-square with the rank of the regressor matrix as
  degrees of freedom.
* Studentised bootstrap of the standardised ES residuals (y - ES)/q on
  violation days, q = -VaR, two-sided p-value under null centering.
* Basel-style traffic light from the binomial CDF of the violation count.

VaR enters every function in the positive loss convention, so a violation
is hit_t = 1{y_t < -VaR_t}.  Likelihood-ratio statistics are assembled with
xlogy, making empty cells contribute exactly zero, and tiny negatives from
cancellation are clipped at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy
from scipy.stats import binom, chi2

from .model import as_values
from .risk import RiskSeries
from .sep import check_loss


@dataclass(frozen=True, eq=False)
class HitSequence:
    """Violation indicators at one coverage level.

    ``ad`` holds the absolute deviations |y_t + VaR_t| on hit days (depth of
    each violation below the quantile); it is None when the sequence was
    built without the underlying returns.
    """

    hits: np.ndarray
    tau: float
    ad: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        object.__setattr__(self, "hits", np.asarray(self.hits, dtype=bool))
        if self.ad is not None:
            ad = np.asarray(self.ad, dtype=float)
            if ad.size != int(self.hits.sum()):
                raise ValueError("need one deviation per violation")
            object.__setattr__(self, "ad", ad)

    @property
    def n_obs(self) -> int:
        return int(self.hits.size)

    @property
    def n_violations(self) -> int:
        return int(self.hits.sum())

    @property
    def rate(self) -> float:
        return self.n_violations / self.n_obs

    @property
    def actual_over_expected(self) -> float:
        return self.rate / self.tau

    @property
    def ad_mean(self) -> float | None:
        if self.ad is None or self.ad.size == 0:
            return None
        return float(self.ad.mean())

    @property
    def ad_max(self) -> float | None:
        if self.ad is None or self.ad.size == 0:
            return None
        return float(self.ad.max())


def hits(y, var, tau: float) -> HitSequence:
    """Violation indicators 1{y_t < -VaR_t} for a positive-VaR path."""
    y = as_values(y)
    var = np.asarray(var, dtype=float)
    if y.shape != var.shape:
        raise ValueError("series and VaR path must have equal length")
    flags = y < -var
    return HitSequence(hits=flags, tau=tau, ad=np.abs(y + var)[flags])


def kupiec_lr_uc(x: int, m: int, tau: float) -> tuple[float, float]:
    """Unconditional coverage LR from the violation count, chi-square(1)."""
    if not 0 <= x <= m or m == 0:
        raise ValueError("need 0 <= x <= m with m > 0")
    saturated = xlogy(x, x / m) + xlogy(m - x, 1.0 - x / m)
    null = xlogy(x, tau) + xlogy(m - x, 1.0 - tau)
    lr = max(0.0, 2.0 * (saturated - null))
    return lr, float(chi2.sf(lr, 1))


def christoffersen_lr_cc(hit: HitSequence) -> tuple[float, float]:
    """Conditional coverage LR (coverage + independence), chi-square(2).

    Degenerate transition cells contribute zero through the 0 log 0 = 0
    convention; with no transitions at all the statistic reduces to the
    Kupiec component.
    """
    h = hit.hits.astype(int)
    lr_uc, _ = kupiec_lr_uc(hit.n_violations, hit.n_obs, hit.tau)
    if h.size >= 2:
        prev, cur = h[:-1], h[1:]
        n00 = int(np.sum((prev == 0) & (cur == 0)))
        n01 = int(np.sum((prev == 0) & (cur == 1)))
        n10 = int(np.sum((prev == 1) & (cur == 0)))
        n11 = int(np.sum((prev == 1) & (cur == 1)))
        p01 = n01 / (n00 + n01) if n00 + n01 else 0.0
        p11 = n11 / (n10 + n11) if n10 + n11 else 0.0
        pooled = (n01 + n11) / (n00 + n01 + n10 + n11)
        alt = (
            xlogy(n00, 1.0 - p01)
            + xlogy(n01, p01)
            + xlogy(n10, 1.0 - p11)
            + xlogy(n11, p11)
        )
        null = xlogy(n00 + n10, 1.0 - pooled) + xlogy(n01 + n11, pooled)
        lr_ind = max(0.0, 2.0 * (alt - null))
    else:
        lr_ind = 0.0
    lr = lr_uc + lr_ind
    return lr, float(chi2.sf(lr, 2))


def dq_test(hit: HitSequence, var, lags: int = 4) -> tuple[float, float]:
    """Dynamic quantile statistic and p-value.

    Regresses H_t = hit_t - tau on an intercept, H_{t-1..t-lags} and the
    contemporaneous VaR; the quadratic form H'X (X'X)^+ X'H scaled by
    tau(1 - tau) is referred to chi-square with rank(X) degrees of freedom.
    The projection is computed from an SVD of the design itself rather than
    of the Gram matrix, so an exactly collinear design (for example a
    constant VaR path) loses the redundant direction cleanly and the
    degrees of freedom shrink to match.
    """
    if lags < 0:
        raise ValueError("lags must be non-negative")
    var = np.asarray(var, dtype=float)
    h = hit.hits.astype(float)
    if h.shape != var.shape:
        raise ValueError("hits and VaR path must have equal length")
    m = h.size
    if m <= lags + 2:
        raise ValueError("need more than lags + 2 observations")
    centred = h - hit.tau
    cols = [np.ones(m - lags)]
    cols += [centred[lags - j : m - j] for j in range(1, lags + 1)]
    cols.append(var[lags:])
    design = np.column_stack(cols)
    target = centred[lags:]
    u, s, _ = np.linalg.svd(design, full_matrices=False)
    keep = s > s[0] * max(design.shape) * np.finfo(float).eps
    coeffs = u[:, keep].T @ target
    stat = float(coeffs @ coeffs) / (hit.tau * (1.0 - hit.tau))
    stat = max(0.0, stat)
    df = int(np.count_nonzero(keep))
    return stat, float(chi2.sf(stat, df))


def es_bootstrap_test(
    y, var, es, seed: int = 0, draws: int = 1000
) -> tuple[float, float]:
    """Two-sided studentised bootstrap test of zero-mean ES residuals.

    On violation days the residuals (y - ES)/q with q = -VaR should average
    zero if the ES path is correct.  The observed t statistic is compared
    with the bootstrap distribution of t over centred resamples.  Requires
    at least three violations.
    """
    y = as_values(y)
    var = np.asarray(var, dtype=float)
    es = np.asarray(es, dtype=float)
    if not y.shape == var.shape == es.shape:
        raise ValueError("series, VaR and ES paths must have equal length")
    viol = y < -var
    n = int(viol.sum())
    if n < 3:
        raise ValueError("ES backtest needs at least 3 violations")
    resid = (y[viol] - es[viol]) / (-var[viol])
    mean = float(resid.mean())
    sd = float(resid.std(ddof=1))
    root_n = math.sqrt(n)
    if sd == 0.0:
        return (0.0, 1.0) if mean == 0.0 else (math.copysign(math.inf, mean), 0.0)
    t_obs = mean / (sd / root_n)
    centred = resid - mean
    rng = np.random.default_rng(seed)
    samples = rng.choice(centred, size=(draws, n), replace=True)
    means = samples.mean(axis=1)
    sds = samples.std(axis=1, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(
            sds > 0.0,
            means / (sds / root_n),
            np.where(means == 0.0, 0.0, np.inf),
        )
    pvalue = float(np.mean(np.abs(t_star) >= abs(t_obs)))
    return t_obs, pvalue


def traffic_light(x: int, m: int, tau: float) -> tuple[str, float]:
    """Basel zone from the binomial CDF of the violation count.

    Green up to cumulative probability 0.95, yellow up to 0.9999, red
    above; the Basel 250-day boundaries at the 1% level come out at 5 and
    10 violations.
    """
    cum = float(binom.cdf(x, m, tau))
    if cum <= 0.95:
        zone = "green"
    elif cum <= 0.9999:
        zone = "yellow"
    else:
        zone = "red"
    return zone, cum


@dataclass(eq=False)
class BacktestReport:
    """Every backtest outcome for one forecast window at one level."""

    tau: float
    n_obs: int
    n_violations: int
    violation_rate: float
    actual_over_expected: float
    ad_mean: float | None
    ad_max: float | None
    kupiec_lr: float
    kupiec_p: float
    christoffersen_lr: float
    christoffersen_p: float
    dq_stat: float | None
    dq_p: float | None
    dq_lags: int
    es_stat: float | None
    es_p: float | None
    traffic_light: str
    traffic_cumprob: float
    avg_check_loss: float

    def to_dict(self) -> dict:
        out = {}
        for key in self.__dataclass_fields__:
            value = getattr(self, key)
            if value is None or isinstance(value, str):
                out[key] = value
            elif isinstance(value, (int, np.integer)):
                out[key] = int(value)
            else:
                out[key] = float(value)
        return out


def evaluate_forecasts(
    y,
    risk: RiskSeries,
    dq_lags: int = 4,
    bootstrap_seed: int = 0,
    bootstrap_draws: int = 1000,
) -> BacktestReport:
    """Run the full battery against realised returns and collect a report.

    The DQ entries are None when the window is too short for the lag order,
    and the ES entries are None when no ES path is present or fewer than
    three violations occurred.  The average check loss scores the quantile
    path q = -VaR under the tick loss at the report's level.
    """
    y = as_values(y)
    var = risk.var
    seq = hits(y, var, risk.tau)
    kup_lr, kup_p = kupiec_lr_uc(seq.n_violations, seq.n_obs, risk.tau)
    cc_lr, cc_p = christoffersen_lr_cc(seq)
    try:
        dq_stat, dq_p = dq_test(seq, var, dq_lags)
    except ValueError:
        dq_stat, dq_p = None, None
    es_stat = es_p = None
    if risk.es is not None:
        try:
            es_stat, es_p = es_bootstrap_test(
                y, var, risk.es, seed=bootstrap_seed, draws=bootstrap_draws
            )
        except ValueError:
            pass
    zone, cum = traffic_light(seq.n_violations, seq.n_obs, risk.tau)
    avg_loss = float(np.mean(check_loss(y + var, risk.tau, 1)))
    return BacktestReport(
        tau=risk.tau,
        n_obs=seq.n_obs,
        n_violations=seq.n_violations,
        violation_rate=seq.rate,
        actual_over_expected=seq.actual_over_expected,
        ad_mean=seq.ad_mean,
        ad_max=seq.ad_max,
        kupiec_lr=kup_lr,
        kupiec_p=kup_p,
        christoffersen_lr=cc_lr,
        christoffersen_p=cc_p,
        dq_stat=dq_stat,
        dq_p=dq_p,
        dq_lags=dq_lags,
        es_stat=es_stat,
        es_p=es_p,
        traffic_light=zone,
        traffic_cumprob=cum,
        avg_check_loss=avg_loss,
    )
