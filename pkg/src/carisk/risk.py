"""Risk measures from fitted conditional models.

Value-at-Risk follows the loss convention: the reported VaR_t is positive
for lower-tail levels and relates to the model path by VaR_t = -g_t, so a
violation is a return falling below -VaR_t.  Expected Shortfall stays in
return space (negative in the lower tail), which keeps the usual ordering
ES_t <= -VaR_t when the expectile path sits below the sample mean.

Under the quantile loss (shape 1) the path g_t is the tau-quantile and VaR
comes straight off it.  Under the squared loss (shape 2) g_t is a
nu-expectile, so two extra steps produce the usual pair of tail measures:

* calibrate nu so that the in-sample proportion of observations below the
  expectile path matches the target quantile level tau, and
* map the expectile to Expected Shortfall through the closed form

      ES_t = (1 + nu / ((1 - 2 nu) tau)) g_t - nu / ((1 - 2 nu) tau) ybar

  with ybar the in-sample mean, valid once the expectile path is calibrated
  to the tau quantile.

The violation proportion below a nu-expectile path is non-decreasing in nu
(raising nu pushes the expectile up through the sample), which is what lets
the calibration search bisect: a smaller target tau ends at a smaller nu.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import ModelSpec, as_values, recurse_g
from .sampler import PosteriorDraws, PriorSpec, SamplerConfig, run_chain

NU_GRID_STEP = 0.001


class CalibrationError(RuntimeError):
    """No candidate expectile level reproduced the target quantile level."""


@dataclass(frozen=True, eq=False)
class RiskSeries:
    """Aligned per-observation risk paths at one coverage level.

    ``var`` uses the positive loss convention; ``es`` is in return space.
    ``nu`` records the calibrated expectile level when one was used.
    """

    tau: float
    var: np.ndarray
    es: np.ndarray | None = None
    nu: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        object.__setattr__(self, "var", np.asarray(self.var, dtype=float))
        if self.es is not None:
            es = np.asarray(self.es, dtype=float)
            if es.shape != self.var.shape:
                raise ValueError("es and var must have equal length")
            object.__setattr__(self, "es", es)
        if self.nu is not None and not 0.0 < self.nu < 0.5:
            raise ValueError("nu must lie in (0, 0.5)")


@dataclass(eq=False)
class CalibrationResult:
    """Chosen expectile level with its fit and the evaluated candidates."""

    nu: float
    proportion: float
    fit: PosteriorDraws
    trace: list[tuple[float, float]] = field(default_factory=list)


def violation_proportion(y, path) -> float:
    """Share of observations strictly below a model-space path."""
    y = as_values(y)
    path = np.asarray(path, dtype=float)
    if y.shape != path.shape:
        raise ValueError("series and path must have equal length")
    return float(np.mean(y < path))


def extract_var(
    spec: ModelSpec,
    g_path,
    tau: float | None = None,
    *,
    nu: float | None = None,
    es=None,
) -> RiskSeries:
    """Convert a fitted model-space path into a loss-convention VaR series.

    ``tau`` defaults to the level the model was fitted at; pass the target
    quantile level explicitly when the fit ran at a calibrated expectile
    level nu instead.
    """
    path = np.asarray(g_path, dtype=float)
    return RiskSeries(
        tau=spec.tau if tau is None else tau, var=-path, es=es, nu=nu
    )


def expectile_to_es(path, tau: float, nu: float, y_mean: float):
    """Map a calibrated nu-expectile path to Expected Shortfall at level tau."""
    if not 0.0 < nu < 0.5:
        raise ValueError("nu must lie in (0, 0.5)")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    factor = nu / ((1.0 - 2.0 * nu) * tau)
    arr = np.asarray(path, dtype=float)
    # computed as path + factor * (path - mean) so a path at the mean maps to
    # itself exactly and the nu -> 0 limit returns the path unchanged
    out = arr + factor * (arr - y_mean)
    return float(out) if np.isscalar(path) else out


def calibrate_nu(
    spec: ModelSpec,
    prior: PriorSpec,
    config: SamplerConfig,
    y,
    z=None,
) -> CalibrationResult:
    """Search the expectile level whose fit covers the tau quantile.

    Candidates live on the grid nu = 0.001, 0.002, ..., 0.499.  Each is
    fitted with a chain seeded from (config.seed, grid index) so the search
    is reproducible yet candidate fits stay distinct; consecutive fits
    warm-start from the previous candidate's final state.  Bisection uses
    the non-decreasing violation proportion of the posterior-mean path; the
    returned nu minimises the distance to tau, preferring the smaller level
    on ties.  Raises CalibrationError when even the best candidate lands
    outside [tau/2, 2 tau].
    """
    if spec.alpha != 2:
        raise ValueError("expectile calibration requires shape alpha = 2")
    tau = spec.tau
    y = as_values(y)
    cache: dict[int, tuple[float, PosteriorDraws]] = {}
    trace: list[tuple[float, float]] = []
    warm: dict[str, object] = {"params": None, "state": None}

    def evaluate(idx: int) -> float:
        if idx in cache:
            return cache[idx][0]
        nu = idx * NU_GRID_STEP
        cand_spec = replace(spec, tau=nu)
        seed = int(np.random.SeedSequence([config.seed, idx]).generate_state(1)[0])
        cand_config = replace(config, seed=seed)
        try:
            fit = run_chain(
                cand_spec, prior, cand_config, y, z,
                init_params=warm["params"], init_proposal=warm["state"],
            )
        except RuntimeError:
            fit = run_chain(cand_spec, prior, cand_config, y, z)
        warm["params"], warm["state"] = fit.final_params, fit.final_state
        path = recurse_g(cand_spec, fit.mean_params(), y, z)
        prop = violation_proportion(y, path)
        cache[idx] = (prop, fit)
        trace.append((nu, prop))
        return prop

    lo, hi = 1, 499
    while lo <= hi:
        mid = (lo + hi) // 2
        prop = evaluate(mid)
        if prop < tau:
            lo = mid + 1
        elif prop > tau:
            hi = mid - 1
        else:
            break

    best = min(cache, key=lambda i: (abs(cache[i][0] - tau), i))
    best_prop, best_fit = cache[best]
    if not tau / 2.0 <= best_prop <= 2.0 * tau:
        raise CalibrationError(
            f"best candidate nu={best * NU_GRID_STEP:.3f} reaches proportion "
            f"{best_prop:.4f}, outside [{tau / 2.0:.4f}, {2.0 * tau:.4f}]"
        )
    return CalibrationResult(
        nu=best * NU_GRID_STEP, proportion=best_prop, fit=best_fit, trace=trace
    )
