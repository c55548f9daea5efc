"""Synthetic data generators shared across the test suite.

Everything here is deliberately independent of the package internals: noise
comes from inverse-CDF or branch sampling and the recursions are plain
Python loops, so these fixtures double as oracles for the vectorised code.
"""

import csv

import numpy as np

# Truth for the SAV recovery fixture, stated in model space where the latent
# level g_t sits below zero at small tau.
SAV_TRUTH = {"omega": -0.05, "gamma": 0.85, "beta_1": -0.2, "sigma": 0.5}

SPLINE_KINK = 0.25


def al_innovations(rng, n, sigma=1.0, tau=0.5):
    """Asymmetric Laplace noise via the inverse CDF, located at zero."""
    u = rng.uniform(size=n)
    left = (sigma / (1.0 - tau)) * np.log(u / tau)
    right = -(sigma / tau) * np.log((1.0 - u) / (1.0 - tau))
    return np.where(u < tau, left, right)


def ag_innovations(rng, n, sigma=1.0, tau=0.5):
    """Asymmetric Gaussian noise (shape 2): two half-normal branches."""
    w_left = (1.0 - tau) ** -0.5
    w_right = tau ** -0.5
    go_left = rng.uniform(size=n) < w_left / (w_left + w_right)
    z = np.abs(rng.standard_normal(n))
    scale = np.where(go_left, sigma / np.sqrt(2.0 * (1.0 - tau)), sigma / np.sqrt(2.0 * tau))
    return np.where(go_left, -z * scale, z * scale)


def sav_var_series(n, seed, *, burn=300):
    """Returns whose 5% quantile path follows a SAV recursion.

    On the positive-loss scale v_t = 0.05 + 0.85 v_{t-1} + 0.2 |y_{t-1}| and
    y_t = -v_t + e_t with AL(sigma=0.5, tau=0.05) noise located at zero, so
    the model-space quantile path is g_t = -v_t and the model-space truth is
    SAV_TRUTH.

    The |y| feedback totals gamma + beta = 1.05, so the stationary regime is
    only metastable: a rare run of noise can push the level past the unstable
    fixed point near 37, after which the path grows geometrically.  Samples
    are therefore drawn conditionally on staying inside the stationary basin;
    an attempt that leaves it is discarded and regenerated from the next
    sub-seed, keeping every returned series a deterministic function of
    ``seed``.
    """
    for attempt in range(100):
        key = [44, seed] if attempt == 0 else [44, seed, attempt]
        rng = np.random.default_rng(np.random.SeedSequence(key))
        e = al_innovations(rng, n + burn, sigma=0.5, tau=0.05)
        out = np.empty(n + burn)
        v = 1.0
        for t in range(n + burn):
            out[t] = -v + e[t]
            v = 0.05 + 0.85 * v + 0.2 * abs(out[t])
        if np.abs(out).max() <= 1000.0:
            return out[burn:]
    raise RuntimeError("no stationary sample in 100 attempts")


def true_spline_nic(u):
    """Piecewise-linear curve driving spline_nic_series, on the loss scale.

    Slope -0.4 left of the kink at +0.25 and +0.1 right of it.
    """
    u = np.asarray(u, dtype=float)
    return 0.4 * np.maximum(SPLINE_KINK - u, 0.0) + 0.1 * np.maximum(u - SPLINE_KINK, 0.0)


def spline_nic_series(n, seed, *, burn=300):
    """Returns whose 5% quantile path reacts through a kinked curve.

    v_t = 0.05 + 0.5 v_{t-1} + l(y_{t-1}) with l = true_spline_nic, and
    y_t = -v_t + e_t.  The noise is normal, shifted so its 5% quantile sits
    exactly at zero (e = 0.25 (Z + z_{0.95})), which keeps -v_t the true
    conditional quantile while giving the returns compact two-sided support;
    a fat one-sided tail would leave most of the y-range without data and no
    curve estimate could be expected there.
    """
    rng = np.random.default_rng(np.random.SeedSequence([46, seed]))
    e = 0.25 * (rng.standard_normal(n + burn) + 1.6448536269514722)
    out = np.empty(n + burn)
    v = 1.0
    for t in range(n + burn):
        out[t] = -v + e[t]
        v = 0.05 + 0.5 * v + float(true_spline_nic(out[t]))
    return out[burn:]


def write_returns_csv(path, values, dates=None, header=("date", "ret")):
    """Write a two-column date/value csv (or one column when undated)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if dates is None:
            writer.writerow([header[1]])
            for v in values:
                writer.writerow([format(float(v), ".10g")])
        else:
            writer.writerow(list(header))
            for d, v in zip(dates, values):
                writer.writerow([d, format(float(v), ".10g")])


def business_dates(n, start_year=2015):
    """n ISO dates skipping weekends, plenty for any fixture length."""
    from datetime import date, timedelta

    out = []
    d = date(start_year, 1, 1)
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d.isoformat())
        d += timedelta(days=1)
    return out
