"""News impact curves: parametric families and the penalised B-spline.

Every family is linear in its coefficient vector, so each is described by a
design row ``x(y_prev)`` with curve value ``x(y_prev) @ beta``:

    sav             x = |y|
    as              x = ((y)+, (-y)+)         separate slopes for gains/losses
    threshold       x = (|y| 1{z <= r}, |y| 1{z > r})
    indirect_garch  x = y**2                  paired with the sqrt recursion
    spline          x = (B_1(y), ..., B_{k+d}(y))

The spline basis splits ``[lo, hi]`` into ``knots`` equal-width segments and
extends ``degree`` uniform knots past each end, which yields
``knots + degree`` B-splines summing to one everywhere on the range.  Query
points are clamped to ``[lo, hi]``; polynomial extrapolation of spline tails
is not trustworthy, holding the boundary value is.

Smoothness comes from a second-order random-walk prior on the coefficients,
expressed through the second-difference matrix D2.  D2.T @ D2 has rank
``n - 2``: constant and linear coefficient vectors are unpenalised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VARIANTS = ("sav", "as", "threshold", "indirect_garch", "spline")

_PARAM_DIMS = {"sav": 1, "as": 2, "threshold": 2, "indirect_garch": 1}


@dataclass(frozen=True)
class NicSpec:
    """Configuration of one news impact curve family.

    ``threshold`` is the regime split point r of the threshold family.
    ``degree``/``knots``/``knot_range`` only matter for the spline family;
    ``knots`` counts the equal-width segments between the range endpoints.
    """

    variant: str = "sav"
    threshold: float = 0.0
    degree: int = 3
    knots: int = 20
    knot_range: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown NIC variant {self.variant!r}")
        if self.variant == "spline":
            if self.degree < 1:
                raise ValueError("spline degree must be >= 1")
            if self.knots < 2:
                raise ValueError("spline needs at least 2 segments")
            if self.knot_range is None:
                raise ValueError("spline NIC requires a knot_range")
            lo, hi = self.knot_range
            if not lo < hi:
                raise ValueError(f"knot_range must satisfy lo < hi, got {self.knot_range}")

    @property
    def dimension(self) -> int:
        """Length of the coefficient vector."""
        if self.variant == "spline":
            return self.knots + self.degree
        return _PARAM_DIMS[self.variant]


def knot_vector(spec: NicSpec) -> np.ndarray:
    """Uniform knot sequence, ``degree`` knots beyond each range endpoint."""
    lo, hi = spec.knot_range
    step = (hi - lo) / spec.knots
    idx = np.arange(spec.knots + 2 * spec.degree + 1, dtype=float)
    return lo + step * (idx - spec.degree)


def basis_matrix(spec: NicSpec, y) -> np.ndarray:
    """B-spline design matrix, one row of basis values per query point.

    Uses the triangular Cox-de Boor scheme: only the ``degree + 1`` splines
    alive on a point's knot span are computed, then scattered into the row.
    """
    t = knot_vector(spec)
    d = spec.degree
    n_basis = spec.dimension
    x = np.clip(np.asarray(y, dtype=float), t[d], t[n_basis])
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, d, n_basis - 1)
    n = x.shape[0]
    vals = np.zeros((n, d + 1))
    vals[:, 0] = 1.0
    left = np.zeros((n, d + 1))
    right = np.zeros((n, d + 1))
    for j in range(1, d + 1):
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(n)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    rows = np.zeros((n, n_basis))
    cols = span[:, None] + np.arange(-d, 1)[None, :]
    rows[np.arange(n)[:, None], cols] = vals
    return rows


def bspline_basis(spec: NicSpec, y: float) -> np.ndarray:
    """Basis values at a single point."""
    return basis_matrix(spec, [y])[0]


def nic_design(spec: NicSpec, y_prev, z_prev=None) -> np.ndarray:
    """Design matrix of the curve family over lagged observations.

    ``z_prev`` is the threshold variable of the threshold family and
    defaults to the lagged return itself.
    """
    y_prev = np.asarray(y_prev, dtype=float)
    if spec.variant == "sav":
        return np.abs(y_prev)[:, None]
    if spec.variant == "as":
        return np.column_stack([np.maximum(y_prev, 0.0), np.maximum(-y_prev, 0.0)])
    if spec.variant == "threshold":
        z = y_prev if z_prev is None else np.asarray(z_prev, dtype=float)
        if z.shape != y_prev.shape:
            raise ValueError("threshold variable must align with the lagged returns")
        below = z <= spec.threshold
        mag = np.abs(y_prev)
        return np.column_stack([mag * below, mag * ~below])
    if spec.variant == "indirect_garch":
        return (y_prev**2)[:, None]
    return basis_matrix(spec, y_prev)


def nic_eval(spec: NicSpec, beta, y_prev: float, z_prev: float | None = None) -> float:
    """Curve value at one lagged observation."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (spec.dimension,):
        raise ValueError(
            f"coefficient vector has length {beta.shape}, "
            f"variant {spec.variant!r} needs {spec.dimension}"
        )
    z = None if z_prev is None else np.array([z_prev], dtype=float)
    return float(nic_design(spec, np.array([y_prev], dtype=float), z)[0] @ beta)


@dataclass(frozen=True)
class PenaltyMatrix:
    """Second-difference penalty: D2, K = D2.T @ D2 and rank(K) = n - 2."""

    d2: np.ndarray
    matrix: np.ndarray
    rank: int


def second_diff_penalty(n: int) -> PenaltyMatrix:
    """Penalty structure for an ``n``-dimensional coefficient vector."""
    if n < 3:
        raise ValueError(f"second differences need n >= 3, got {n}")
    d2 = np.diff(np.eye(n), n=2, axis=0)
    return PenaltyMatrix(d2=d2, matrix=d2.T @ d2, rank=n - 2)


def penalty_quadform(beta, penalty: PenaltyMatrix) -> float:
    """beta' K beta, the sum of squared second differences."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (penalty.matrix.shape[0],):
        raise ValueError(
            f"coefficient vector of length {beta.shape} does not match "
            f"penalty dimension {penalty.matrix.shape[0]}"
        )
    return float(beta @ penalty.matrix @ beta)
