"""Command-line entry point.

Usage:

    carisk --input returns.csv --split 2500 --out results \\
           --model sav --alpha 1 --tau 0.05 --seed 7

Options may also come from a config file (--config run.cfg) holding one
``key = value`` pair per line; blank lines and ``#`` comments are ignored,
keys match the long flag names with either hyphens or underscores, and
values use the same syntax as the command line (booleans: true/false).
Precedence: command-line flag, then config file, then built-in default.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .pipeline import MODEL_ALIASES, PipelineError, RunConfig, run_pipeline

_INT_KEYS = {
    "alpha", "iters", "burnin", "thin", "seed", "knots", "degree",
    "dq_lags", "calib_iters", "calib_burnin", "bootstrap_draws",
}
_FLOAT_KEYS = {"tau", "threshold"}
_BOOL_KEYS = {"figures"}
_STR_KEYS = {
    "input", "mode", "split", "model", "out",
    "date_column", "value_column", "date_format",
}

_FIELD_FOR_KEY = {
    "iters": "iterations",
    "calib_iters": "calib_iterations",
    "calib_burnin": "calib_burnin",
}


def _field_name(key: str) -> str:
    return _FIELD_FOR_KEY.get(key, key)


def _parse_value(key: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            lowered = raw.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as exc:
        raise ValueError(f"{where}: bad value for {key!r}: {exc}") from exc


def parse_config_file(path) -> dict:
    """Read the flat key = value grammar into a field dict."""
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(
                    f"{path}:{line_no}: expected 'key = value', got {stripped!r}"
                )
            key, _, raw = stripped.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS:
                raise ValueError(f"{path}:{line_no}: unknown key {key!r}")
            values[_field_name(key)] = _parse_value(
                key, raw, f"{path}:{line_no}"
            )
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carisk",
        description="Bayesian conditional autoregressive VaR/ES modelling",
    )
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--input", help="input CSV path")
    parser.add_argument("--mode", choices=["price", "return"],
                        help="interpret values as prices or returns")
    parser.add_argument("--split", help="in-sample size or first out-of-sample date")
    parser.add_argument("--model", choices=sorted(MODEL_ALIASES),
                        help="news-impact-curve family")
    parser.add_argument("--alpha", type=int, choices=[1, 2],
                        help="1 quantile (VaR), 2 expectile (VaR+ES)")
    parser.add_argument("--tau", type=float, help="coverage level in (0, 1)")
    parser.add_argument("--threshold", type=float,
                        help="threshold value for model=threshold")
    parser.add_argument("--iters", type=int, help="total MCMC iterations")
    parser.add_argument("--burnin", type=int, help="burn-in iterations")
    parser.add_argument("--thin", type=int, help="thinning stride")
    parser.add_argument("--calib-iters", type=int,
                        help="iterations per calibration candidate (alpha=2)")
    parser.add_argument("--calib-burnin", type=int,
                        help="burn-in per calibration candidate (alpha=2)")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--knots", type=int, help="interior knots for model=spline")
    parser.add_argument("--degree", type=int, help="spline degree")
    parser.add_argument("--dq-lags", dest="dq_lags", type=int,
                        help="lag order of the dynamic quantile test")
    parser.add_argument("--bootstrap-draws", dest="bootstrap_draws", type=int,
                        help="resamples for the ES bootstrap test")
    parser.add_argument("--date-column", dest="date_column", help="date column name")
    parser.add_argument("--value-column", dest="value_column",
                        help="value column name")
    parser.add_argument("--date-format", dest="date_format",
                        help="strptime date format (default ISO-8601)")
    parser.add_argument("--no-figures", dest="figures", action="store_false",
                        default=None, help="skip PNG rendering")
    parser.add_argument("--out", help="output directory")
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    fields = {f.name: f.default for f in dataclasses.fields(RunConfig)}
    if args.config:
        fields.update(parse_config_file(args.config))
    flag_fields = {
        "input", "mode", "split", "model", "alpha", "tau", "threshold",
        "iterations", "burnin", "thin", "calib_iterations", "calib_burnin",
        "seed", "knots", "degree", "dq_lags", "bootstrap_draws",
        "date_column", "value_column", "date_format", "figures", "out",
    }
    namespace = vars(args)
    rename = {"iterations": "iters", "calib_iterations": "calib_iters"}
    for field in flag_fields:
        value = namespace.get(rename.get(field, field))
        if value is not None:
            fields[field] = value
    missing = [k for k in ("input", "split", "out")
               if fields[k] is dataclasses.MISSING or fields[k] is None]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join(missing)}")
    return RunConfig(**fields)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = build_config(args)
    except (ValueError, OSError) as exc:
        print(f"carisk: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_pipeline(config)
    except PipelineError as exc:
        print(f"carisk: {exc}", file=sys.stderr)
        return 1
    report = result.backtest
    print(f"wrote {result.outdir}")
    nu = "" if result.nu is None else f" nu={result.nu:.3f}"
    print(
        f"tau={report.tau:g}{nu} n={report.n_obs} violations={report.n_violations} "
        f"A/E={report.actual_over_expected:.4f} zone={report.traffic_light}"
    )
    dq = "n/a" if report.dq_p is None else f"{report.dq_p:.4f}"
    es = "n/a" if report.es_p is None else f"{report.es_p:.4f}"
    print(
        f"kupiec p={report.kupiec_p:.4f} christoffersen p={report.christoffersen_p:.4f} "
        f"dq p={dq} es p={es}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
