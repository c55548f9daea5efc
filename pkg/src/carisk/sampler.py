"""Adaptive independence Metropolis-within-Gibbs posterior sampling.

Parameter blocks (beta, omega, gamma, sigma) draw from independence Gaussian
proposals whose means and (co)variances track the chain with the diminishing
step 1/(C * sqrt(i)), C = 10.  The scale parameter moves on the log scale;
its proposal density carries the 1/sigma Jacobian so the acceptance ratio
stays correct in sigma space.

Every proposal is a two-component mixture: weight 1 - ANCHOR_WEIGHT on the
adaptive Gaussian and ANCHOR_WEIGHT on the initial (anchor) Gaussian.  A pure
adaptive independence proposal can collapse around a transient mode and then
lacks the spread to ever leave it; the anchor component keeps a fixed floor
of probability on the initial search region, so a trapped chain escapes and
a runaway scale block gets pulled back.  The acceptance ratio uses the exact
mixture density, so the kernel still targets the posterior.

With a spline curve active, the smoothing variance phi2 has a conjugate
inverse-gamma full conditional and is drawn by Gibbs:

    phi2 | beta ~ IG(a_phi + rank(K)/2, b_phi + beta' K beta / 2).

Priors: omega, gamma (and the curve coefficients of parametric families) are
independent normals centred at zero; sigma and phi2 are inverse gamma; the
spline coefficients get the intrinsic second-order random-walk density
exp(-beta' K beta / (2 phi2)) with rank(K) = dim - 2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from .model import ExplosivePathError, ModelSpec, ParamVector, initial_level, prepare
from .nic import PenaltyMatrix, penalty_quadform, second_diff_penalty

_LOG_2PI = math.log(2.0 * math.pi)

# Mixture weight on the fixed anchor component of every proposal.
ANCHOR_WEIGHT = 0.05


@dataclass(frozen=True)
class PriorSpec:
    """Prior hyperparameters (variances for normals, shape/scale for IG)."""

    omega_var: float = 100.0
    gamma_var: float = 100.0
    sigma_shape: float = 0.001
    sigma_scale: float = 0.001
    phi2_shape: float = 0.001
    phi2_scale: float = 0.001

    def __post_init__(self) -> None:
        for name in ("omega_var", "gamma_var", "sigma_shape", "sigma_scale",
                     "phi2_shape", "phi2_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, thinning, seeding and initial proposal scales."""

    iterations: int = 50_000
    burnin: int = 20_000
    thin: int = 10
    seed: int = 0
    beta_scale: float = 0.1
    scalar_scale: float = 0.1

    def __post_init__(self) -> None:
        if self.burnin < 0 or self.iterations <= self.burnin:
            raise ValueError("need iterations > burnin >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not (self.beta_scale > 0 and self.scalar_scale > 0):
            raise ValueError("proposal scales must be positive")


@dataclass(frozen=True, eq=False)
class ProposalState:
    """Running moments of the independence proposals for every block."""

    mu_beta: np.ndarray
    cov_beta: np.ndarray
    mu_omega: float
    var_omega: float
    mu_gamma: float
    var_gamma: float
    mu_logsigma: float
    var_logsigma: float
    step: int = 0
    tuning: float = 10.0


def adaptation_step(i: int, tuning: float = 10.0) -> float:
    """Diminishing adaptation step 1 / (C * sqrt(i))."""
    if i < 1:
        raise ValueError("adaptation step needs i >= 1")
    return 1.0 / (tuning * math.sqrt(i))


def _repaired(cov: np.ndarray) -> np.ndarray:
    """Symmetrise and jitter a covariance until Cholesky succeeds."""
    cov = 0.5 * (cov + cov.T)
    jitter = 1e-8
    eye = np.eye(cov.shape[0])
    for _ in range(12):
        try:
            np.linalg.cholesky(cov)
            return cov
        except np.linalg.LinAlgError:
            cov = cov + jitter * eye
            jitter *= 10.0
    return cov


def adapt(state: ProposalState, params: ParamVector, i: int) -> ProposalState:
    """One diminishing-step update of every proposal block toward ``params``.

    Covariances use the deviation from the pre-update mean, so the update is
    mu'  = mu  + s (x - mu)
    cov' = cov + s ((x - mu)(x - mu)' - cov)     with s = 1/(C sqrt(i)).
    """
    s = adaptation_step(i, state.tuning)
    x = np.asarray(params.beta, dtype=float)
    dev = x - state.mu_beta
    cov = state.cov_beta + s * (np.outer(dev, dev) - state.cov_beta)
    ls = math.log(params.sigma)
    return ProposalState(
        mu_beta=state.mu_beta + s * dev,
        cov_beta=_repaired(cov),
        mu_omega=state.mu_omega + s * (params.omega - state.mu_omega),
        var_omega=state.var_omega
        + s * ((params.omega - state.mu_omega) ** 2 - state.var_omega),
        mu_gamma=state.mu_gamma + s * (params.gamma - state.mu_gamma),
        var_gamma=state.var_gamma
        + s * ((params.gamma - state.mu_gamma) ** 2 - state.var_gamma),
        mu_logsigma=state.mu_logsigma + s * (ls - state.mu_logsigma),
        var_logsigma=state.var_logsigma
        + s * ((ls - state.mu_logsigma) ** 2 - state.var_logsigma),
        step=i,
        tuning=state.tuning,
    )


def mh_accept_prob(
    log_post_new: float,
    log_post_old: float,
    log_q_at_old: float,
    log_q_at_new: float,
) -> float:
    """Independence-MH acceptance probability from log quantities."""
    if math.isnan(log_post_new) or log_post_new == float("-inf"):
        return 0.0
    delta = log_post_new - log_post_old + log_q_at_old - log_q_at_new
    return 1.0 if delta >= 0.0 else math.exp(delta)


def phi2_posterior(beta, penalty: PenaltyMatrix, prior: PriorSpec) -> tuple[float, float]:
    """Shape and scale of the inverse-gamma full conditional of phi2."""
    shape = prior.phi2_shape + 0.5 * penalty.rank
    scale = prior.phi2_scale + 0.5 * penalty_quadform(beta, penalty)
    return shape, scale


def gibbs_update_phi2(beta, penalty: PenaltyMatrix, prior: PriorSpec, rng) -> float:
    """Draw phi2 from its full conditional."""
    shape, scale = phi2_posterior(beta, penalty, prior)
    return scale / rng.gamma(shape)


def _normal_logpdf(x: float, var: float) -> float:
    return -0.5 * (_LOG_2PI + math.log(var) + x * x / var)


def _invgamma_logpdf(x: float, shape: float, scale: float) -> float:
    if not x > 0:
        return float("-inf")
    return shape * math.log(scale) - math.lgamma(shape) - (shape + 1.0) * math.log(x) - scale / x


class PosteriorDensity:
    """Log-posterior evaluator bound to one data set."""

    def __init__(self, spec: ModelSpec, prior: PriorSpec, y, z=None):
        self.spec = spec
        self.prior = prior
        self.model = prepare(spec, y, z)
        self.penalty = (
            second_diff_penalty(spec.nic.dimension)
            if spec.nic.variant == "spline"
            else None
        )

    def log_prior(self, params: ParamVector) -> float:
        pr = self.prior
        lp = (
            _normal_logpdf(params.omega, pr.omega_var)
            + _normal_logpdf(params.gamma, pr.gamma_var)
            + _invgamma_logpdf(params.sigma, pr.sigma_shape, pr.sigma_scale)
        )
        beta = np.asarray(params.beta, dtype=float)
        if self.penalty is not None:
            if params.phi2 is None or not params.phi2 > 0:
                return float("-inf")
            quad = penalty_quadform(beta, self.penalty)
            lp += -0.5 * quad / params.phi2 - 0.5 * self.penalty.rank * math.log(params.phi2)
            lp += _invgamma_logpdf(params.phi2, pr.phi2_shape, pr.phi2_scale)
        else:
            lp += float(
                np.sum(-0.5 * (_LOG_2PI + math.log(pr.omega_var) + beta**2 / pr.omega_var))
            )
        return lp

    def log_likelihood(self, params: ParamVector) -> float:
        return self.model.log_likelihood(params)

    def log_posterior(self, params: ParamVector) -> float:
        try:
            ll = self.model.log_likelihood(params)
        except ExplosivePathError:
            return float("-inf")
        if ll == float("-inf"):
            return ll
        return ll + self.log_prior(params)


def log_posterior(spec: ModelSpec, prior: PriorSpec, params: ParamVector, y, z=None) -> float:
    """Log posterior density (unnormalised); -inf outside the support."""
    return PosteriorDensity(spec, prior, y, z).log_posterior(params)


def hpd_interval(samples, prob: float = 0.95) -> tuple[float, float]:
    """Shortest interval containing ``prob`` of the sample mass."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    w = max(1, math.ceil(prob * n))
    if w >= n:
        return float(x[0]), float(x[-1])
    widths = x[w - 1 :] - x[: n - w + 1]
    j = int(np.argmin(widths))
    return float(x[j]), float(x[j + w - 1])


@dataclass(eq=False)
class PosteriorDraws:
    """Retained draws plus the bookkeeping a report needs."""

    names: list[str]
    draws: np.ndarray
    log_post: np.ndarray
    accept: dict[str, np.ndarray]
    acceptance_rates: dict[str, float]
    step_schedule: list[tuple[int, float]]
    config: SamplerConfig
    final_params: ParamVector
    final_state: ProposalState
    has_phi2: bool

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def beta_columns(self) -> np.ndarray:
        idx = [i for i, n in enumerate(self.names) if n.startswith("beta_")]
        return self.draws[:, idx]

    def mean_params(self) -> ParamVector:
        means = self.draws.mean(axis=0)
        get = dict(zip(self.names, means))
        beta = np.array([get[n] for n in self.names if n.startswith("beta_")])
        return ParamVector(
            omega=get["omega"],
            gamma=get["gamma"],
            beta=beta,
            sigma=get["sigma"],
            phi2=get["phi2"] if self.has_phi2 else None,
        )

    def credible_interval(self, name: str, prob: float = 0.95) -> tuple[float, float]:
        """Equal-tailed posterior interval for one parameter."""
        col = self.column(name)
        lo = (1.0 - prob) / 2.0
        return float(np.quantile(col, lo)), float(np.quantile(col, 1.0 - lo))

    def diagnostics(self) -> dict:
        return {
            "iterations": self.config.iterations,
            "burnin": self.config.burnin,
            "thin": self.config.thin,
            "seed": self.config.seed,
            "retained": int(self.draws.shape[0]),
            "acceptance_rates": {k: float(v) for k, v in self.acceptance_rates.items()},
            "stepsize_schedule": [[int(i), float(s)] for i, s in self.step_schedule],
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names + ["log_posterior"])
            for row, lp in zip(self.draws, self.log_post):
                writer.writerow([format(v, ".10g") for v in row] + [format(lp, ".10g")])


def _param_names(spec: ModelSpec) -> tuple[list[str], bool]:
    names = ["omega", "gamma"]
    names += [f"beta_{j + 1}" for j in range(spec.nic.dimension)]
    names.append("sigma")
    has_phi2 = spec.nic.variant == "spline"
    if has_phi2:
        names.append("phi2")
    return names, has_phi2


def _default_init(spec: ModelSpec, model) -> ParamVector:
    sd = float(np.std(model.y))
    return ParamVector(
        omega=initial_level(spec, model.y),
        gamma=0.8,
        beta=np.zeros(spec.nic.dimension),
        sigma=sd if sd > 0 else 1.0,
        phi2=1.0 if spec.nic.variant == "spline" else None,
    )


def _default_proposal(spec: ModelSpec, model, config: SamplerConfig) -> ProposalState:
    p = spec.nic.dimension
    sd = float(np.std(model.y))
    return ProposalState(
        mu_beta=np.zeros(p),
        cov_beta=config.beta_scale * np.eye(p),
        mu_omega=0.0,
        var_omega=config.scalar_scale,
        mu_gamma=0.0,
        var_gamma=config.scalar_scale,
        mu_logsigma=math.log(max(sd, 1e-8) / 2.0),
        var_logsigma=config.scalar_scale,
    )


def _mvn_logpdf(x: np.ndarray, mu: np.ndarray, chol: np.ndarray) -> float:
    d = solve_triangular(chol, x - mu, lower=True)
    return float(
        -0.5 * d @ d - np.sum(np.log(np.diag(chol))) - 0.5 * len(x) * _LOG_2PI
    )


def _mix_logq_scalar(x: float, mu_a: float, var_a: float, mu_0: float, var_0: float) -> float:
    """Log density of the adaptive/anchor scalar proposal mixture at ``x``."""
    return float(
        np.logaddexp(
            math.log1p(-ANCHOR_WEIGHT) + _normal_logpdf(x - mu_a, var_a),
            math.log(ANCHOR_WEIGHT) + _normal_logpdf(x - mu_0, var_0),
        )
    )


def _mix_logq_vector(x, mu_a, chol_a, mu_0, chol_0) -> float:
    """Log density of the adaptive/anchor vector proposal mixture at ``x``."""
    return float(
        np.logaddexp(
            math.log1p(-ANCHOR_WEIGHT) + _mvn_logpdf(x, mu_a, chol_a),
            math.log(ANCHOR_WEIGHT) + _mvn_logpdf(x, mu_0, chol_0),
        )
    )


def run_chain(
    spec: ModelSpec,
    prior: PriorSpec,
    config: SamplerConfig,
    y,
    z=None,
    init_params: ParamVector | None = None,
    init_proposal: ProposalState | None = None,
    fixed=(),
) -> PosteriorDraws:
    """Run the adaptive sampler and return the retained draws.

    ``fixed`` names blocks ("beta", "omega", "gamma", "sigma", "phi2") whose
    values stay at their initial point; useful for degenerate sub-models and
    for fast recalibration fits.  Given the same config (seed included) and
    data, the output is bit-for-bit reproducible.
    """
    density = PosteriorDensity(spec, prior, y, z)
    rng = np.random.default_rng(config.seed)
    fixed = frozenset(fixed)
    names, has_phi2 = _param_names(spec)

    params = init_params if init_params is not None else _default_init(spec, density.model)
    ll = _safe_ll(density, params)
    lp = ll + density.log_prior(params) if ll > float("-inf") else float("-inf")
    tries = 0
    while lp == float("-inf") and tries < 10:
        params = replace(
            params,
            omega=params.omega / 2.0,
            gamma=params.gamma / 2.0,
            beta=np.asarray(params.beta) / 2.0,
        )
        ll = _safe_ll(density, params)
        lp = ll + density.log_prior(params) if ll > float("-inf") else float("-inf")
        tries += 1
    if lp == float("-inf"):
        raise RuntimeError("no starting point with finite posterior after 10 retries")

    state = (
        init_proposal
        if init_proposal is not None
        else _default_proposal(spec, density.model, config)
    )
    anchor = replace(
        state,
        mu_beta=np.array(state.mu_beta, dtype=float),
        cov_beta=_repaired(np.array(state.cov_beta, dtype=float)),
    )
    anchor_chol = np.linalg.cholesky(anchor.cov_beta)

    p = spec.nic.dimension
    n_keep = (config.iterations - config.burnin) // config.thin
    draws = np.empty((n_keep, len(names)))
    log_post_trace = np.empty(n_keep)
    blocks = [b for b in ("beta", "omega", "gamma", "sigma") if b not in fixed]
    accept = {b: np.zeros(config.iterations, dtype=bool) for b in blocks}
    schedule: list[tuple[int, float]] = []
    checkpoint = 1
    kept = 0

    for i in range(1, config.iterations + 1):
        if "beta" in accept and p > 0:
            chol = np.linalg.cholesky(state.cov_beta)
            if rng.uniform() < ANCHOR_WEIGHT:
                prop = anchor.mu_beta + anchor_chol @ rng.standard_normal(p)
            else:
                prop = state.mu_beta + chol @ rng.standard_normal(p)
            cand = replace(params, beta=prop)
            ll_cand = _safe_ll(density, cand)
            lp_cand = ll_cand + density.log_prior(cand) if ll_cand > float("-inf") else float("-inf")
            lam = mh_accept_prob(
                lp_cand,
                lp,
                _mix_logq_vector(np.asarray(params.beta, dtype=float), state.mu_beta, chol, anchor.mu_beta, anchor_chol),
                _mix_logq_vector(prop, state.mu_beta, chol, anchor.mu_beta, anchor_chol),
            )
            if rng.uniform() < lam:
                params, ll, lp = cand, ll_cand, lp_cand
                accept["beta"][i - 1] = True

        if "omega" in accept:
            if rng.uniform() < ANCHOR_WEIGHT:
                prop = anchor.mu_omega + math.sqrt(anchor.var_omega) * rng.standard_normal()
            else:
                prop = state.mu_omega + math.sqrt(state.var_omega) * rng.standard_normal()
            cand = replace(params, omega=prop)
            ll_cand = _safe_ll(density, cand)
            lp_cand = ll_cand + density.log_prior(cand) if ll_cand > float("-inf") else float("-inf")
            lam = mh_accept_prob(
                lp_cand,
                lp,
                _mix_logq_scalar(params.omega, state.mu_omega, state.var_omega, anchor.mu_omega, anchor.var_omega),
                _mix_logq_scalar(prop, state.mu_omega, state.var_omega, anchor.mu_omega, anchor.var_omega),
            )
            if rng.uniform() < lam:
                params, ll, lp = cand, ll_cand, lp_cand
                accept["omega"][i - 1] = True

        if "gamma" in accept:
            if rng.uniform() < ANCHOR_WEIGHT:
                prop = anchor.mu_gamma + math.sqrt(anchor.var_gamma) * rng.standard_normal()
            else:
                prop = state.mu_gamma + math.sqrt(state.var_gamma) * rng.standard_normal()
            cand = replace(params, gamma=prop)
            ll_cand = _safe_ll(density, cand)
            lp_cand = ll_cand + density.log_prior(cand) if ll_cand > float("-inf") else float("-inf")
            lam = mh_accept_prob(
                lp_cand,
                lp,
                _mix_logq_scalar(params.gamma, state.mu_gamma, state.var_gamma, anchor.mu_gamma, anchor.var_gamma),
                _mix_logq_scalar(prop, state.mu_gamma, state.var_gamma, anchor.mu_gamma, anchor.var_gamma),
            )
            if rng.uniform() < lam:
                params, ll, lp = cand, ll_cand, lp_cand
                accept["gamma"][i - 1] = True

        if "sigma" in accept:
            if rng.uniform() < ANCHOR_WEIGHT:
                ls_prop = anchor.mu_logsigma + math.sqrt(anchor.var_logsigma) * rng.standard_normal()
            else:
                ls_prop = state.mu_logsigma + math.sqrt(state.var_logsigma) * rng.standard_normal()
            cand = replace(params, sigma=math.exp(ls_prop))
            ll_cand = _safe_ll(density, cand)
            lp_cand = ll_cand + density.log_prior(cand) if ll_cand > float("-inf") else float("-inf")
            ls_cur = math.log(params.sigma)
            # log proposal density in sigma space: mixture at log s, minus log s (Jacobian)
            lam = mh_accept_prob(
                lp_cand,
                lp,
                _mix_logq_scalar(ls_cur, state.mu_logsigma, state.var_logsigma, anchor.mu_logsigma, anchor.var_logsigma) - ls_cur,
                _mix_logq_scalar(ls_prop, state.mu_logsigma, state.var_logsigma, anchor.mu_logsigma, anchor.var_logsigma) - ls_prop,
            )
            if rng.uniform() < lam:
                params, ll, lp = cand, ll_cand, lp_cand
                accept["sigma"][i - 1] = True

        if density.penalty is not None and "phi2" not in fixed:
            phi2 = gibbs_update_phi2(params.beta, density.penalty, prior, rng)
            params = replace(params, phi2=phi2)
            lp = ll + density.log_prior(params)

        state = adapt(state, params, i)
        if i == checkpoint or i == config.iterations:
            schedule.append((i, adaptation_step(i, state.tuning)))
            checkpoint *= 10

        if i > config.burnin and (i - config.burnin) % config.thin == 0:
            row = [params.omega, params.gamma, *np.asarray(params.beta, dtype=float), params.sigma]
            if has_phi2:
                row.append(params.phi2)
            draws[kept] = row
            log_post_trace[kept] = lp
            kept += 1

    rates = {b: float(np.mean(flags)) for b, flags in accept.items()}
    return PosteriorDraws(
        names=names,
        draws=draws[:kept],
        log_post=log_post_trace[:kept],
        accept=accept,
        acceptance_rates=rates,
        step_schedule=schedule,
        config=config,
        final_params=params,
        final_state=state,
        has_phi2=has_phi2,
    )


def _safe_ll(density: PosteriorDensity, params: ParamVector) -> float:
    try:
        return density.log_likelihood(params)
    except ExplosivePathError:
        return float("-inf")
