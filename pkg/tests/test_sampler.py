"""Adaptive Metropolis-within-Gibbs machinery: priors, proposals, chains."""

import csv
import math

import numpy as np
import pytest
import synthetic
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from carisk import (
    ModelSpec,
    NicSpec,
    ParamVector,
    PriorSpec,
    SamplerConfig,
    adapt,
    adaptation_step,
    gibbs_update_phi2,
    hpd_interval,
    log_likelihood,
    log_posterior,
    mh_accept_prob,
    phi2_posterior,
    run_chain,
    second_diff_penalty,
)
from carisk.sampler import ProposalState


def sav_spec(tau=0.05):
    return ModelSpec(nic=NicSpec("sav"), alpha=1, tau=tau)


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(iterations=100, burnin=100)
    with pytest.raises(ValueError):
        SamplerConfig(thin=0)
    with pytest.raises(ValueError):
        SamplerConfig(beta_scale=0.0)
    with pytest.raises(ValueError):
        PriorSpec(omega_var=0.0)
    with pytest.raises(ValueError):
        PriorSpec(sigma_scale=-1.0)


def test_adaptation_step_values():
    assert adaptation_step(1) == pytest.approx(0.1, rel=1e-15)
    assert adaptation_step(100) == pytest.approx(0.01, rel=1e-15)
    assert adaptation_step(10_000) == pytest.approx(0.001, rel=1e-15)
    with pytest.raises(ValueError):
        adaptation_step(0)


def make_state(dim=2, scale=0.1):
    return ProposalState(
        mu_beta=np.zeros(dim),
        cov_beta=scale * np.eye(dim),
        mu_omega=0.0,
        var_omega=scale,
        mu_gamma=0.0,
        var_gamma=scale,
        mu_logsigma=0.0,
        var_logsigma=scale,
    )


def test_adapt_pulls_means_toward_the_draw():
    state = make_state()
    params = ParamVector(omega=1.0, gamma=-2.0, beta=np.array([3.0, 0.0]), sigma=1.0)
    new = adapt(state, params, 1)
    assert new.mu_omega == pytest.approx(0.1)
    assert new.mu_gamma == pytest.approx(-0.2)
    assert_allclose(new.mu_beta, [0.3, 0.0], rtol=1e-14)
    assert new.mu_logsigma == pytest.approx(0.0)
    assert new.step == 1
    # later iterations move less
    later = adapt(state, params, 10_000)
    assert abs(later.mu_omega) == pytest.approx(0.001)


def test_adapt_satisfies_diminishing_bound():
    rng = np.random.default_rng(8)
    state = make_state(dim=3)
    for i in range(1, 400):
        params = ParamVector(
            omega=rng.normal(),
            gamma=rng.normal(),
            beta=rng.normal(size=3),
            sigma=math.exp(rng.normal() * 0.3),
        )
        step = adaptation_step(i)
        dev = np.asarray(params.beta) - state.mu_beta
        outer = np.outer(dev, dev)
        new = adapt(state, params, i)
        delta = np.linalg.norm(new.cov_beta - state.cov_beta)
        bound = step * (np.linalg.norm(outer) + np.linalg.norm(state.cov_beta))
        assert delta <= bound + 1e-7  # cholesky jitter repair allowance
        state = new
    # the covariance stays usable for sampling
    np.linalg.cholesky(state.cov_beta)


def test_mh_accept_prob():
    assert mh_accept_prob(-5.0, -5.0, -1.0, -1.0) == 1.0
    assert mh_accept_prob(float("-inf"), -5.0, -1.0, -1.0) == 0.0
    assert mh_accept_prob(float("nan"), -5.0, -1.0, -1.0) == 0.0
    # worse posterior, symmetric proposal: exp(delta)
    assert mh_accept_prob(-5.7, -5.0, -1.0, -1.0) == pytest.approx(
        0.4965853037914095, rel=1e-12
    )
    # proposal-density correction enters with the right orientation
    assert mh_accept_prob(-5.0, -5.0, -0.3, -1.0) == 1.0
    assert mh_accept_prob(-5.0, -5.0, -1.0, -0.3) == pytest.approx(math.exp(-0.7), rel=1e-12)


def test_phi2_full_conditional():
    pen = second_diff_penalty(23)
    prior = PriorSpec()
    beta = np.linspace(-1.0, 1.0, 23)  # affine: zero penalty
    shape, scale = phi2_posterior(beta, pen, prior)
    assert shape == pytest.approx(0.001 + 21.0 / 2.0, rel=1e-15)
    assert scale == pytest.approx(0.001, rel=1e-12)
    rng = np.random.default_rng(4)
    beta = rng.standard_normal(23)
    shape, scale = phi2_posterior(beta, pen, prior)
    quad = float(np.sum(np.diff(beta, n=2) ** 2))
    assert scale == pytest.approx(0.001 + 0.5 * quad, rel=1e-12)


def test_gibbs_phi2_matches_inverse_gamma_moments():
    # IG(12, 5): mean 5/11, sd 5/(11 sqrt(10))
    pen = second_diff_penalty(4)
    prior = PriorSpec(phi2_shape=11.0, phi2_scale=4.0)
    beta = np.array([1.0, 0.0, 1.0, 0.0])  # quad = (1-0+1)^2... computed below
    quad = float(np.sum(np.diff(beta, n=2) ** 2))
    shape, scale = phi2_posterior(beta, pen, prior)
    assert shape == pytest.approx(12.0)
    assert scale == pytest.approx(4.0 + 0.5 * quad)
    rng = np.random.default_rng(12)
    draws = np.array([gibbs_update_phi2(beta, pen, prior, rng) for _ in range(20_000)])
    mean = scale / (shape - 1.0)
    sd = scale / ((shape - 1.0) * math.sqrt(shape - 2.0))
    assert abs(draws.mean() - mean) < 3.5 * sd / math.sqrt(len(draws))
    assert abs(draws.std() - sd) < 0.05 * sd


def test_log_posterior_term_by_term_parametric():
    rng = np.random.default_rng(19)
    y = rng.standard_normal(40)
    spec = ModelSpec(nic=NicSpec("as"), alpha=1, tau=0.1)
    prior = PriorSpec(omega_var=25.0, gamma_var=4.0, sigma_shape=2.0, sigma_scale=3.0)
    params = ParamVector(omega=0.2, gamma=-0.3, beta=np.array([0.4, -0.1]), sigma=0.7)
    want = (
        log_likelihood(spec, params, y)
        + stats.norm.logpdf(0.2, scale=5.0)
        + stats.norm.logpdf(-0.3, scale=2.0)
        + stats.norm.logpdf(0.4, scale=5.0)
        + stats.norm.logpdf(-0.1, scale=5.0)
        + stats.invgamma.logpdf(0.7, 2.0, scale=3.0)
    )
    assert_allclose(log_posterior(spec, prior, params, y), want, rtol=1e-12)


def test_log_posterior_term_by_term_spline():
    rng = np.random.default_rng(29)
    y = rng.uniform(-1.5, 1.5, size=60)
    nic = NicSpec("spline", degree=2, knots=4, knot_range=(-2.0, 2.0))
    spec = ModelSpec(nic=nic, alpha=2, tau=0.3)
    prior = PriorSpec(phi2_shape=1.5, phi2_scale=0.5)
    beta = rng.standard_normal(nic.dimension) * 0.2
    params = ParamVector(omega=0.1, gamma=0.4, beta=beta, sigma=0.9, phi2=0.6)
    quad = float(np.sum(np.diff(beta, n=2) ** 2))
    rank = nic.dimension - 2
    want = (
        log_likelihood(spec, params, y)
        + stats.norm.logpdf(0.1, scale=10.0)
        + stats.norm.logpdf(0.4, scale=10.0)
        - 0.5 * quad / 0.6
        - 0.5 * rank * math.log(0.6)
        + stats.invgamma.logpdf(0.6, 1.5, scale=0.5)
        + stats.invgamma.logpdf(0.9, 0.001, scale=0.001)
    )
    assert_allclose(log_posterior(spec, prior, params, y), want, rtol=1e-12)


def test_log_posterior_sentinels():
    spec = sav_spec()
    prior = PriorSpec()
    y = [0.1, -0.2, 0.3]
    bad_sigma = ParamVector(0.0, 0.2, np.array([0.1]), -1.0)
    assert log_posterior(spec, prior, bad_sigma, y) == float("-inf")
    explosive = ParamVector(0.0, 8.0, np.array([0.5]), 1.0)
    assert log_posterior(spec, prior, explosive, np.ones(900)) == float("-inf")


def test_hpd_interval_is_shortest():
    rng = np.random.default_rng(33)
    x = rng.standard_normal(4000)
    lo, hi = hpd_interval(x, 0.9)
    inside = np.mean((x >= lo) & (x <= hi))
    assert 0.895 <= inside <= 0.905
    # brute force over every sorted window
    xs = np.sort(x)
    w = math.ceil(0.9 * len(xs))
    widths = xs[w - 1 :] - xs[: len(xs) - w + 1]
    assert hi - lo == pytest.approx(widths.min(), rel=1e-12)
    # a request that cannot be trimmed returns the full range
    sub = x[:5]
    assert hpd_interval(sub, 0.999) == (float(sub.min()), float(sub.max()))


def toy_chain(seed=11, iterations=3000, **kw):
    rng = np.random.default_rng(5)
    y = -1.0 + 0.4 * rng.standard_normal(120)
    spec = sav_spec(tau=0.2)
    cfg = SamplerConfig(iterations=iterations, burnin=iterations // 3, thin=2, seed=seed)
    return run_chain(spec, PriorSpec(), cfg, y, **kw), y


def test_chain_is_deterministic_per_seed():
    fit1, _ = toy_chain(seed=42)
    fit2, _ = toy_chain(seed=42)
    assert_array_equal(fit1.draws, fit2.draws)
    assert_array_equal(fit1.log_post, fit2.log_post)
    fit3, _ = toy_chain(seed=43)
    assert not np.array_equal(fit1.draws, fit3.draws)


def test_chain_bookkeeping():
    fit, _ = toy_chain()
    assert fit.names == ["omega", "gamma", "beta_1", "sigma"]
    assert fit.draws.shape == (1000, 4)
    assert np.all(np.isfinite(fit.log_post))
    assert np.all(fit.column("sigma") > 0)
    d = fit.diagnostics()
    assert d["retained"] == 1000
    assert set(d["acceptance_rates"]) == {"beta", "omega", "gamma", "sigma"}
    steps = dict(d["stepsize_schedule"])
    assert steps[1] == pytest.approx(0.1)
    assert steps[100] == pytest.approx(0.01)
    assert steps[1000] == pytest.approx(adaptation_step(1000))
    assert fit.config.iterations == 3000
    lo, hi = fit.credible_interval("sigma")
    assert lo < float(np.median(fit.column("sigma"))) < hi


def test_draws_csv_roundtrip(tmp_path):
    fit, _ = toy_chain(iterations=900)
    path = tmp_path / "draws.csv"
    fit.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["omega", "gamma", "beta_1", "sigma", "log_posterior"]
    data = np.array(rows[1:], dtype=float)
    assert_allclose(data[:, :4], fit.draws, rtol=1e-9)
    assert_allclose(data[:, 4], fit.log_post, rtol=1e-9)


def test_fixed_blocks_stay_put():
    init = ParamVector(omega=-0.7, gamma=0.3, beta=np.array([0.2]), sigma=0.5)
    fit, _ = toy_chain(init_params=init, fixed=("omega", "beta"))
    assert np.all(fit.column("omega") == -0.7)
    assert np.all(fit.column("beta_1") == 0.2)
    assert fit.column("gamma").std() > 0
    assert fit.column("sigma").std() > 0
    assert set(fit.acceptance_rates) == {"gamma", "sigma"}


def test_mean_params_match_column_means():
    fit, _ = toy_chain()
    mp = fit.mean_params()
    assert mp.omega == pytest.approx(fit.column("omega").mean())
    assert mp.beta[0] == pytest.approx(fit.column("beta_1").mean())
    assert mp.phi2 is None


def test_retry_recovers_from_explosive_start():
    rng = np.random.default_rng(3)
    y = rng.standard_normal(400)
    bad = ParamVector(omega=0.0, gamma=16.0, beta=np.array([4.0]), sigma=1.0)
    cfg = SamplerConfig(iterations=400, burnin=100, thin=1, seed=1)
    fit = run_chain(sav_spec(), PriorSpec(), cfg, y, init_params=bad)
    assert np.all(np.isfinite(fit.log_post))


def test_unrecoverable_start_raises():
    cfg = SamplerConfig(iterations=200, burnin=50, thin=1, seed=1)
    bad = ParamVector(omega=0.0, gamma=0.2, beta=np.array([0.1]), sigma=-2.0)
    with pytest.raises(RuntimeError):
        run_chain(sav_spec(), PriorSpec(), cfg, [0.1, -0.2, 0.3], init_params=bad)


def quadrature_tv(fit_column, grid, log_target, bins=20):
    """Total variation between chain draws and a 1-d quadrature target."""
    dens = np.exp(log_target - log_target.max())
    dens /= np.trapezoid(dens, grid)
    cdf = np.concatenate([[0.0], np.cumsum(np.diff(grid) * 0.5 * (dens[1:] + dens[:-1]))])
    cdf /= cdf[-1]
    # equal-probability bin edges from the quadrature cdf
    qs = np.linspace(0.0, 1.0, bins + 1)
    edges = np.interp(qs, cdf, grid)
    edges[0], edges[-1] = -np.inf, np.inf
    counts = np.histogram(fit_column, bins=edges)[0] / len(fit_column)
    return 0.5 * np.sum(np.abs(counts - 1.0 / bins))


def test_sigma_block_targets_its_conditional():
    # two observations keep the likelihood cheap; everything but sigma fixed
    y = np.array([0.3, -0.4])
    spec = sav_spec(tau=0.3)
    prior = PriorSpec(sigma_shape=2.0, sigma_scale=1.0)
    init = ParamVector(omega=0.05, gamma=0.2, beta=np.array([0.1]), sigma=0.8)
    cfg = SamplerConfig(iterations=60_000, burnin=5_000, thin=1, seed=77)
    fit = run_chain(spec, prior, cfg, y, init_params=init, fixed=("beta", "omega", "gamma"))
    grid = np.exp(np.linspace(math.log(1e-3), math.log(50.0), 4001))
    log_target = np.array(
        [
            log_posterior(spec, prior,
                          ParamVector(0.05, 0.2, np.array([0.1]), s), y)
            for s in grid
        ]
    )
    tv = quadrature_tv(fit.column("sigma"), grid, log_target)
    assert tv < 0.05


def test_omega_block_targets_its_conditional():
    y = np.array([0.3, -0.4])
    spec = sav_spec(tau=0.3)
    prior = PriorSpec()
    init = ParamVector(omega=0.0, gamma=0.2, beta=np.array([0.1]), sigma=0.8)
    cfg = SamplerConfig(iterations=60_000, burnin=5_000, thin=1, seed=78)
    fit = run_chain(spec, prior, cfg, y, init_params=init, fixed=("beta", "gamma", "sigma"))
    # the conditional has Laplace-like tails; keep the grid wide enough that
    # the truncated quadrature mass is negligible
    grid = np.linspace(-40.0, 50.0, 9001)
    log_target = np.array(
        [
            log_posterior(spec, prior,
                          ParamVector(w, 0.2, np.array([0.1]), 0.8), y)
            for w in grid
        ]
    )
    tv = quadrature_tv(fit.column("omega"), grid, log_target)
    assert tv < 0.05


def test_location_scale_recovery():
    # AL noise around a constant level: omega and sigma should come back
    rng = np.random.default_rng(91)
    u = rng.uniform(size=500)
    tau = 0.1
    noise = np.where(
        u < tau,
        0.5 / (1 - tau) * np.log(u / tau),
        -0.5 / tau * np.log((1 - u) / (1 - tau)),
    )
    y = -1.2 + noise
    spec = sav_spec(tau=0.1)
    init = ParamVector(omega=0.0, gamma=0.0, beta=np.array([0.0]), sigma=1.0)
    cfg = SamplerConfig(iterations=8_000, burnin=3_000, thin=1, seed=13)
    fit = run_chain(spec, PriorSpec(), cfg, y, init_params=init, fixed=("beta", "gamma"))
    om = fit.column("omega")
    sg = fit.column("sigma")
    assert abs(om.mean() - (-1.2)) < 4 * om.std() + 0.05
    assert abs(sg.mean() - 0.5) < 4 * sg.std() + 0.05


def test_acceptance_rates_settle_in_band():
    y = synthetic.sav_var_series(800, 0)
    cfg = SamplerConfig(iterations=10_000, burnin=4_000, thin=5, seed=2)
    fit = run_chain(sav_spec(), PriorSpec(), cfg, y)
    for block in ("beta", "omega", "gamma"):
        rate = float(np.mean(fit.accept[block][cfg.burnin :]))
        assert 0.05 < rate < 0.8, (block, rate)
    sigma_rate = float(np.mean(fit.accept["sigma"][cfg.burnin :]))
    assert 0.05 < sigma_rate < 0.995, sigma_rate


def test_spline_chain_carries_phi2():
    rng = np.random.default_rng(55)
    y = np.clip(rng.standard_normal(300), -3.0, 3.0)
    nic = NicSpec("spline", degree=2, knots=5, knot_range=(-3.2, 3.2))
    spec = ModelSpec(nic=nic, alpha=1, tau=0.1)
    cfg = SamplerConfig(iterations=1_500, burnin=500, thin=2, seed=6)
    fit = run_chain(spec, PriorSpec(), cfg, y)
    assert fit.names[-1] == "phi2"
    phi2 = fit.column("phi2")
    assert np.all(phi2 > 0)
    assert phi2.std() > 0
    assert fit.beta_columns().shape == (500, nic.dimension)
    assert fit.mean_params().phi2 == pytest.approx(phi2.mean())
