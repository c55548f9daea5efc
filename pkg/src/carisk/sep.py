"""Skew exponential power (SEP) distribution and the tail check losses.

The SEP density with location ``g``, scale ``sigma``, skewness ``tau`` and
shape ``alpha`` is

    f(y) = exp(-(1 - tau) * ((g - y) / sigma)**alpha) / c   for y <  g
    f(y) = exp(-tau * ((y - g) / sigma)**alpha) / c         for y >= g

with normalizing constant

    c = sigma * Gamma(1 + 1/alpha) * (tau**(-1/alpha) + (1 - tau)**(-1/alpha)).

Two special cases carry the risk-measure semantics.  At ``alpha = 1`` the
location is the ``tau``-quantile and the density coincides with the
asymmetric Laplace under the rate mapping ``lambda_left = (1 - tau) / sigma``
and ``lambda_right = tau / sigma`` (same ``sigma``, no rescaling needed).
At ``alpha = 2`` the location is the ``tau``-expectile, i.e. the asymmetric
Gaussian.  At ``tau = 0.5, alpha = 2`` the density is N(g, sigma**2).

Densities are exposed in log space only; callers exponentiate when they need
the raw density.  Random-variate generation is deliberately out of scope
(the test suite carries its own documented samplers for the two special
cases).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class SepParams:
    """Parameter set of the SEP distribution."""

    location: float
    scale: float
    skew: float
    shape: float = 1.0

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not 0.0 < self.skew < 1.0:
            raise ValueError(f"skew must lie in (0, 1), got {self.skew}")
        if not self.shape > 0:
            raise ValueError(f"shape must be positive, got {self.shape}")

    @property
    def log_norm(self) -> float:
        """Log of the normalizing constant c."""
        inv = 1.0 / self.shape
        return (
            math.log(self.scale)
            + math.lgamma(1.0 + inv)
            + math.log(self.skew**-inv + (1.0 - self.skew) ** -inv)
        )


def sep_log_pdf(y, params: SepParams):
    """Log density of the SEP law, vectorised over ``y``."""
    y = np.asarray(y, dtype=float)
    d = y - params.location
    weight = np.where(d < 0.0, 1.0 - params.skew, params.skew)
    z = np.abs(d) / params.scale
    out = -params.log_norm - weight * z**params.shape
    return out if out.ndim else float(out)


def sep_cdf(y, params: SepParams):
    """Distribution function of the SEP law.

    Both branches integrate in closed form through the regularised incomplete
    gamma function.  At ``alpha = 1`` the expression reduces to the piecewise
    exponential integral, so ``sep_cdf(g) == tau`` holds to rounding; for
    other shapes the mass left of the location is
    ``(1-tau)**(-1/a) / (tau**(-1/a) + (1-tau)**(-1/a))``.
    """
    inv = 1.0 / params.shape
    w_left = (1.0 - params.skew) ** -inv
    w_right = params.skew**-inv
    total = w_left + w_right
    y = np.asarray(y, dtype=float)
    d = y - params.location
    z = np.abs(d) / params.scale
    arg = np.where(d < 0.0, 1.0 - params.skew, params.skew) * z**params.shape
    left = w_left * special.gammaincc(inv, arg) / total
    right = (w_left + w_right * special.gammainc(inv, arg)) / total
    out = np.where(d < 0.0, left, right)
    return out if out.ndim else float(out)


def check_loss(u, tau: float, alpha: int):
    """Check loss of a forecast error ``u``.

    ``alpha = 1`` gives the quantile loss u * (tau - 1{u < 0}); ``alpha = 2``
    gives the expectile loss u**2 * |tau - 1{u < 0}|.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if alpha not in (1, 2):
        raise ValueError(f"alpha must be 1 or 2, got {alpha}")
    u = np.asarray(u, dtype=float)
    asym = np.abs(tau - (u < 0.0))
    out = np.abs(u) * asym if alpha == 1 else u**2 * asym
    return out if out.ndim else float(out)
