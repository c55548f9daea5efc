"""End-to-end run driver: load, split, estimate, forecast, backtest, export.

A run is configured by RunConfig, executes the stages in order, and leaves
a self-describing artifact directory:

    draws.csv        one row per retained posterior draw + log posterior
    forecast.csv     date, return, var, es, hit (one row per forecast day)
    nic.csv          y, mean, hpd_low, hpd_high (spline runs only)
    report.json      summary stats, split sizes, calibration, backtests
    diagnostics.json acceptance rates, step schedule, calibration trace
    manifest.json    config echo, derived seeds, versions, artifact list
    forecast.png     forecast figure (optional)
    nic.png          news-impact-curve figure (spline runs, optional)

Numbers in delimited artifacts are printed with %.10g, so a repeated run
with the same config and seed reproduces them byte for byte.  Stage
failures surface as PipelineError tagged with the stage name.  The master
seed is split into chain, calibration and bootstrap streams; batch mode
derives one child seed per input series the same way.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from .backtest import BacktestReport, evaluate_forecasts
from .data import ReturnSeries, load_returns, split_series, summary_stats
from .model import ModelSpec, forecast_path, recurse_g
from .nic import NicSpec, basis_matrix
from .plots import save_forecast_figure, save_nic_figure
from .risk import RiskSeries, calibrate_nu, expectile_to_es, violation_proportion
from .sampler import PosteriorDraws, PriorSpec, SamplerConfig, hpd_interval, run_chain

MODEL_ALIASES = {
    "sav": "sav",
    "as": "as",
    "threshold": "threshold",
    "ig": "indirect_garch",
    "indirect_garch": "indirect_garch",
    "spline": "spline",
}

FORECAST_COLUMNS = ["date", "return", "var", "es", "hit"]
NIC_COLUMNS = ["y", "mean", "hpd_low", "hpd_high"]
REPORT_KEYS = {"summary", "split", "calibration", "backtest"}
MANIFEST_KEYS = {"config", "seeds", "versions", "artifacts", "n_insample", "n_outsample"}

MIN_INSAMPLE = 500


class PipelineError(RuntimeError):
    """A stage failed; carries the stage name for reporting."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage


@dataclass
class RunConfig:
    """Everything one pipeline run needs, defaulted to the standard setup."""

    input: str
    split: int | str
    out: str
    mode: str = "return"
    model: str = "sav"
    alpha: int = 1
    tau: float = 0.05
    threshold: float = 0.0
    knots: int = 20
    degree: int = 3
    iterations: int = 50_000
    burnin: int = 20_000
    thin: int = 10
    calib_iterations: int = 5_000
    calib_burnin: int = 2_000
    seed: int = 0
    dq_lags: int = 4
    date_column: str | None = None
    value_column: str | None = None
    date_format: str | None = None
    figures: bool = True
    bootstrap_draws: int = 1000


@dataclass(eq=False)
class PipelineResult:
    """In-memory view of a finished run."""

    config: RunConfig
    outdir: Path
    summary: dict
    nu: float | None
    backtest: BacktestReport
    fit: PosteriorDraws
    risk: RiskSeries
    artifacts: dict[str, Path]


def _derive_seeds(seed: int) -> dict[str, int]:
    chain, calib, boot = np.random.SeedSequence(seed).spawn(3)
    return {
        "chain": int(chain.generate_state(1)[0]),
        "calibration": int(calib.generate_state(1)[0]),
        "bootstrap": int(boot.generate_state(1)[0]),
    }


def _build_spec(config: RunConfig, y_in: np.ndarray) -> ModelSpec:
    if config.model not in MODEL_ALIASES:
        raise ValueError(
            f"unknown model {config.model!r}; choose from {sorted(MODEL_ALIASES)}"
        )
    variant = MODEL_ALIASES[config.model]
    if variant == "spline":
        lo, hi = float(y_in.min()), float(y_in.max())
        pad = 0.05 * (hi - lo)
        nic = NicSpec(
            variant="spline",
            degree=config.degree,
            knots=config.knots,
            knot_range=(lo - pad, hi + pad),
        )
    elif variant == "threshold":
        nic = NicSpec(variant="threshold", threshold=config.threshold)
    else:
        nic = NicSpec(variant=variant)
    return ModelSpec(nic=nic, alpha=config.alpha, tau=config.tau)


def _format(value) -> str:
    return format(float(value), ".10g")


def _write_forecast_csv(path: Path, dates, y_out, risk: RiskSeries, offset: int):
    hits = y_out < -risk.var
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FORECAST_COLUMNS)
        for t in range(y_out.size):
            label = dates[t] if dates is not None else str(offset + t)
            es = "" if risk.es is None else _format(risk.es[t])
            writer.writerow(
                [label, _format(y_out[t]), _format(risk.var[t]), es, int(hits[t])]
            )


def _nic_band(spec: ModelSpec, fit: PosteriorDraws, points: int = 200):
    lo, hi = spec.nic.knot_range
    grid = np.linspace(lo, hi, points)
    curves = basis_matrix(spec.nic, grid) @ fit.beta_columns().T
    mean = curves.mean(axis=1)
    lows = np.empty(points)
    highs = np.empty(points)
    for i in range(points):
        low, high = hpd_interval(curves[i], 0.95)
        lows[i] = min(low, mean[i])
        highs[i] = max(high, mean[i])
    return grid, mean, lows, highs


def _write_nic_csv(path: Path, band) -> None:
    grid, mean, lows, highs = band
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(NIC_COLUMNS)
        for row in zip(grid, mean, lows, highs):
            writer.writerow([_format(v) for v in row])


def _versions() -> dict[str, str]:
    import scipy

    try:
        own = metadata.version("carisk")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"carisk": own, "numpy": np.__version__, "scipy": scipy.__version__}


def validate_artifacts(outdir: Path, spline: bool, has_figures: bool) -> None:
    """Check every written artifact against its documented schema."""
    with open(outdir / "forecast.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != FORECAST_COLUMNS:
        raise ValueError(f"forecast.csv columns {rows[0]} != {FORECAST_COLUMNS}")
    if len(rows) < 2:
        raise ValueError("forecast.csv has no data rows")
    with open(outdir / "draws.csv", newline="") as fh:
        header = next(csv.reader(fh))
    if header[:2] != ["omega", "gamma"] or header[-1] != "log_posterior":
        raise ValueError(f"draws.csv header malformed: {header}")
    if spline:
        with open(outdir / "nic.csv", newline="") as fh:
            nic_rows = list(csv.reader(fh))
        if nic_rows[0] != NIC_COLUMNS:
            raise ValueError(f"nic.csv columns {nic_rows[0]} != {NIC_COLUMNS}")
        values = np.array(nic_rows[1:], dtype=float)
        if not np.all(np.diff(values[:, 0]) > 0):
            raise ValueError("nic.csv y-grid not strictly increasing")
        if not np.all((values[:, 2] <= values[:, 1]) & (values[:, 1] <= values[:, 3])):
            raise ValueError("nic.csv band does not bracket the mean")
    with open(outdir / "report.json") as fh:
        report = json.load(fh)
    if set(report) != REPORT_KEYS:
        raise ValueError(f"report.json keys {sorted(report)} != {sorted(REPORT_KEYS)}")
    with open(outdir / "manifest.json") as fh:
        manifest = json.load(fh)
    if set(manifest) != MANIFEST_KEYS:
        raise ValueError(
            f"manifest.json keys {sorted(manifest)} != {sorted(MANIFEST_KEYS)}"
        )
    for name in manifest["artifacts"]:
        if not (outdir / name).exists():
            raise ValueError(f"manifest lists missing artifact {name}")
    if has_figures and not (outdir / "forecast.png").exists():
        raise ValueError("figures requested but forecast.png missing")


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Execute one full run and write its artifact directory."""

    def stage(name: str, func, *args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, str(exc)) from exc

    series: ReturnSeries = stage(
        "load",
        load_returns,
        config.input,
        mode=config.mode,
        date_column=config.date_column,
        value_column=config.value_column,
        date_format=config.date_format,
    )
    summary = stage("load", summary_stats, series)

    def do_split():
        y_in, y_out = split_series(series, config.split)
        if len(y_in) < MIN_INSAMPLE:
            raise ValueError(
                f"split leaves {len(y_in)} in-sample observations; "
                f"need at least {MIN_INSAMPLE}"
            )
        return y_in, y_out

    y_in, y_out = stage("split", do_split)

    seeds = _derive_seeds(config.seed)
    spec = stage("estimate", _build_spec, config, y_in.values)
    prior = PriorSpec()

    def do_estimate():
        nu = None
        calibration = None
        fit_spec = spec
        if config.alpha == 2:
            calib_config = SamplerConfig(
                iterations=config.calib_iterations,
                burnin=config.calib_burnin,
                thin=config.thin,
                seed=seeds["calibration"],
            )
            calibration = calibrate_nu(spec, prior, calib_config, y_in.values)
            nu = calibration.nu
            fit_spec = dataclasses.replace(spec, tau=nu)
        chain_config = SamplerConfig(
            iterations=config.iterations,
            burnin=config.burnin,
            thin=config.thin,
            seed=seeds["chain"],
        )
        fit = run_chain(fit_spec, prior, chain_config, y_in.values)
        return fit_spec, fit, nu, calibration

    fit_spec, fit, nu, calibration = stage("estimate", do_estimate)

    def do_forecast():
        params = fit.mean_params()
        g_out = forecast_path(fit_spec, params, y_in.values, y_out.values)
        es = None
        if config.alpha == 2:
            es = expectile_to_es(g_out, config.tau, nu, float(y_in.values.mean()))
        return RiskSeries(tau=config.tau, var=-g_out, es=es, nu=nu)

    risk = stage("forecast", do_forecast)

    report = stage(
        "backtest",
        evaluate_forecasts,
        y_out.values,
        risk,
        dq_lags=config.dq_lags,
        bootstrap_seed=seeds["bootstrap"],
        bootstrap_draws=config.bootstrap_draws,
    )

    def do_export():
        outdir = Path(config.out)
        outdir.mkdir(parents=True, exist_ok=True)
        artifacts: dict[str, Path] = {}

        artifacts["draws.csv"] = outdir / "draws.csv"
        fit.to_csv(artifacts["draws.csv"])

        artifacts["forecast.csv"] = outdir / "forecast.csv"
        _write_forecast_csv(
            artifacts["forecast.csv"], y_out.dates, y_out.values, risk, len(y_in)
        )

        band = None
        if fit_spec.nic.variant == "spline":
            band = _nic_band(fit_spec, fit)
            artifacts["nic.csv"] = outdir / "nic.csv"
            _write_nic_csv(artifacts["nic.csv"], band)

        calib_block = None
        if calibration is not None:
            calib_block = {"nu": calibration.nu, "proportion": calibration.proportion}
        report_doc = {
            "summary": summary,
            "split": {
                "split": str(config.split),
                "n_insample": len(y_in),
                "n_outsample": len(y_out),
            },
            "calibration": calib_block,
            "backtest": report.to_dict(),
        }
        artifacts["report.json"] = outdir / "report.json"
        with open(artifacts["report.json"], "w") as fh:
            json.dump(report_doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

        diag = fit.diagnostics()
        if calibration is not None:
            diag["calibration_trace"] = [
                [float(a), float(b)] for a, b in calibration.trace
            ]
        artifacts["diagnostics.json"] = outdir / "diagnostics.json"
        with open(artifacts["diagnostics.json"], "w") as fh:
            json.dump(diag, fh, indent=2, sort_keys=True)
            fh.write("\n")

        if config.figures:
            artifacts["forecast.png"] = save_forecast_figure(
                outdir / "forecast.png",
                y_out.values,
                risk.var,
                es=risk.es,
                dates=y_out.dates,
                tau=config.tau,
            )
            if band is not None:
                artifacts["nic.png"] = save_nic_figure(
                    outdir / "nic.png", band[0], band[1], band[2], band[3]
                )

        manifest = {
            "config": dataclasses.asdict(config),
            "seeds": seeds,
            "versions": _versions(),
            "artifacts": sorted(str(p.name) for p in artifacts.values()) + ["manifest.json"],
            "n_insample": len(y_in),
            "n_outsample": len(y_out),
        }
        artifacts["manifest.json"] = outdir / "manifest.json"
        with open(artifacts["manifest.json"], "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return outdir, artifacts

    outdir, artifacts = stage("export", do_export)
    stage(
        "validate",
        validate_artifacts,
        outdir,
        fit_spec.nic.variant == "spline",
        config.figures,
    )

    return PipelineResult(
        config=config,
        outdir=outdir,
        summary=summary,
        nu=nu,
        backtest=report,
        fit=fit,
        risk=risk,
        artifacts=artifacts,
    )


def run_batch(
    base: RunConfig, inputs, out_root, max_workers: int | None = None
) -> list[PipelineResult]:
    """Run several series concurrently with isolated derived seeds.

    Child seed i comes from SeedSequence(base.seed).spawn(n)[i]; each run
    writes under out_root/<input stem>.
    """
    inputs = [str(p) for p in inputs]
    children = np.random.SeedSequence(base.seed).spawn(len(inputs))
    configs = []
    for path, child in zip(inputs, children):
        configs.append(
            dataclasses.replace(
                base,
                input=path,
                seed=int(child.generate_state(1)[0]),
                out=str(Path(out_root) / Path(path).stem),
            )
        )
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run_pipeline, configs))


def insample_risk(fit_spec: ModelSpec, fit: PosteriorDraws, y_in, tau: float, nu=None):
    """In-sample VaR series at the posterior-mean parameters.

    Convenience used by reports and tests; returns the RiskSeries plus the
    raw violation proportion of the model-space path.
    """
    path = recurse_g(fit_spec, fit.mean_params(), y_in)
    prop = violation_proportion(y_in, path)
    return RiskSeries(tau=tau, var=-path, nu=nu), prop
