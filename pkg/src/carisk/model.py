"""Conditional autoregressive location paths and the SEP log likelihood.

The location path (a conditional quantile for ``alpha = 1``, a conditional
expectile for ``alpha = 2``) obeys

    g[t] = omega + gamma * g[t-1] + nic(beta, y[t-1])                (linear)
    g[t] = s * sqrt(omega + gamma * g[t-1]**2 + beta * y[t-1]**2)    (indirect
                                                                      garch)

with ``s = -1`` whenever ``tau < 0.5`` so the square-root form still yields a
negative lower-tail level; the radicand is floored at zero.  Both recursions
are first order and linear in g (or g**2), which lets scipy.signal.lfilter
run them at C speed, an essential property for the MCMC hot loop.

The starting level g[1] is the empirical tau-quantile (or tau-expectile) of
the first ``init_window`` observations.  Forecasting continues the recursion
over realised out-of-sample returns with parameters held fixed, so g[t]
never touches y[s] for s >= t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .nic import NicSpec, nic_design


class ExplosivePathError(ArithmeticError):
    """The location recursion overflowed (explosive parameter region)."""


def as_values(y) -> np.ndarray:
    """Plain float array from an ndarray, sequence or ReturnSeries-like."""
    return np.asarray(getattr(y, "values", y), dtype=float)


@dataclass(frozen=True)
class ModelSpec:
    """Risk-measure model: curve family, loss shape and tail level."""

    nic: NicSpec = NicSpec()
    alpha: int = 1
    tau: float = 0.05
    init_window: int = 100

    def __post_init__(self) -> None:
        if self.alpha not in (1, 2):
            raise ValueError(f"alpha must be 1 (quantile) or 2 (expectile), got {self.alpha}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.init_window < 1:
            raise ValueError("init_window must be positive")

    @property
    def recursion(self) -> str:
        """Recursion form, tied to the curve family by construction."""
        return "indirect_garch" if self.nic.variant == "indirect_garch" else "linear"


@dataclass(frozen=True, eq=False)
class ParamVector:
    """One point in parameter space; ``phi2`` only exists for spline curves."""

    omega: float
    gamma: float
    beta: np.ndarray
    sigma: float
    phi2: float | None = None


def empirical_expectile(values, nu: float) -> float:
    """Sample nu-expectile, by bisection on the weighted-moment condition

    nu * sum(max(y - m, 0)) = (1 - nu) * sum(max(m - y, 0)).
    """
    if not 0.0 < nu < 1.0:
        raise ValueError(f"nu must lie in (0, 1), got {nu}")
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return lo
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        grad = nu * np.sum(np.maximum(v - mid, 0.0)) - (1.0 - nu) * np.sum(
            np.maximum(mid - v, 0.0)
        )
        if grad > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def initial_level(spec: ModelSpec, y) -> float:
    """Starting level g[1]: empirical tail statistic of the first window."""
    v = as_values(y)
    w = v[: min(spec.init_window, len(v))]
    if spec.alpha == 1:
        return float(np.quantile(w, spec.tau))
    return empirical_expectile(w, spec.tau)


class PreparedModel:
    """Model bound to one data set, with the lagged design precomputed.

    The design matrix only depends on the data and the curve family, never
    on the parameters, so it is built once and reused across the thousands
    of likelihood evaluations an MCMC run needs.
    """

    def __init__(self, spec: ModelSpec, y, z=None, g1: float | None = None):
        self.spec = spec
        self.y = as_values(y)
        if self.y.ndim != 1 or len(self.y) < 1:
            raise ValueError("y must be a one-dimensional series with at least 1 value")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y contains non-finite values")
        zv = None if z is None else as_values(z)
        if zv is not None and zv.shape != self.y.shape:
            raise ValueError("threshold variable must have the same length as y")
        if len(self.y) > 1:
            zl = None if zv is None else zv[:-1]
            self.design = nic_design(spec.nic, self.y[:-1], zl)
        else:
            self.design = np.zeros((0, spec.nic.dimension))
        self.g1 = float(g1) if g1 is not None else initial_level(spec, self.y)
        a = spec.alpha
        self._log_norm_unit = math.lgamma(1.0 + 1.0 / a) + math.log(
            spec.tau ** (-1.0 / a) + (1.0 - spec.tau) ** (-1.0 / a)
        )

    def g_path(self, params: ParamVector) -> np.ndarray:
        """Location path over the bound series."""
        beta = np.asarray(params.beta, dtype=float)
        if beta.shape != (self.spec.nic.dimension,):
            raise ValueError(
                f"beta has length {beta.shape}, curve needs {self.spec.nic.dimension}"
            )
        if len(self.y) == 1:
            return np.array([self.g1])
        with np.errstate(over="ignore", invalid="ignore"):
            drive = params.omega + self.design @ beta
            den = np.array([1.0, -params.gamma])
            if self.spec.recursion == "indirect_garch":
                zi = np.array([params.gamma * self.g1**2])
                sq = np.maximum(lfilter([1.0], den, drive, zi=zi)[0], 0.0)
                tail = np.sqrt(sq)
                if self.spec.tau < 0.5:
                    tail = -tail
            else:
                zi = np.array([params.gamma * self.g1])
                tail = lfilter([1.0], den, drive, zi=zi)[0]
        path = np.concatenate(([self.g1], tail))
        if not np.all(np.isfinite(path)):
            raise ExplosivePathError(
                "location path overflowed; parameters look explosive"
            )
        return path

    def log_likelihood(self, params: ParamVector) -> float:
        """SEP log likelihood; -inf for invalid sigma (documented sentinel)."""
        if not params.sigma > 0:
            return float("-inf")
        path = self.g_path(params)
        d = self.y - path
        weight = np.where(d < 0.0, 1.0 - self.spec.tau, self.spec.tau)
        z = np.abs(d) / params.sigma
        with np.errstate(over="ignore"):
            penal = float(np.sum(weight * z**self.spec.alpha))
        log_norm = math.log(params.sigma) + self._log_norm_unit
        return -len(self.y) * log_norm - penal


def prepare(spec: ModelSpec, y, z=None, g1: float | None = None) -> PreparedModel:
    """Bind a model to a series (precomputes the lagged curve design)."""
    return PreparedModel(spec, y, z, g1)


def recurse_g(spec: ModelSpec, params: ParamVector, y, z=None) -> np.ndarray:
    """Location path over ``y`` (g[1] from the initial-window policy)."""
    return prepare(spec, y, z).g_path(params)


def log_likelihood(spec: ModelSpec, params: ParamVector, y, z=None) -> float:
    """SEP log likelihood of ``y`` under the recursion."""
    return prepare(spec, y, z).log_likelihood(params)


def forecast_path(
    spec: ModelSpec,
    params: ParamVector,
    y_insample,
    y_outsample,
    z_insample=None,
    z_outsample=None,
) -> np.ndarray:
    """One-step-ahead location forecasts over the out-of-sample span.

    Runs the recursion across the concatenated series with the starting
    level taken from the in-sample window only, then returns the tail, so
    the result equals the tail of ``recurse_g`` on the unsplit series.
    """
    y_in = as_values(y_insample)
    y_out = as_values(y_outsample)
    if len(y_out) < 1:
        raise ValueError("out-of-sample series is empty")
    full = np.concatenate([y_in, y_out])
    if z_insample is None and z_outsample is None:
        z_full = None
    else:
        if z_insample is None or z_outsample is None:
            raise ValueError("threshold variable must cover both sample spans")
        z_full = np.concatenate([as_values(z_insample), as_values(z_outsample)])
    g1 = initial_level(spec, y_in)
    return prepare(spec, full, z_full, g1=g1).g_path(params)[len(y_in):]
