"""Command-line front end.

    aparchpiv --input prices.csv --command full --out report.json

Exit codes: 0 success, 1 domain or usage error, 2 convergence failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data_io, diagnostics, risk
from ._errors import ConvergenceError, DomainError
from .aparch import (PARAM_NAMES, AparchParams, FitOptions, aparch_filter, aparch_fit,
                     aparch_simulate)

logger = logging.getLogger("aparchpiv")

COMMANDS = ("stats", "fit", "backtest", "simulate", "full")
EXIT_OK, EXIT_DOMAIN, EXIT_CONVERGENCE, EXIT_IO = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    out: str | None = None
    quantiles: list = field(default_factory=lambda: list(risk.DEFAULT_LEVELS))
    dq_lags: int = 5
    opportunity_cost: float = 0.0
    seed: int = 0
    params: str | None = None
    max_iter: int = 5000
    tol: float = 1e-8
    multi_start: int = 1
    acf_lags: int = 50
    n: int = 5000
    burn_in: int = 1000
    save_params: str | None = None
    var_ref: str = "mean"

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        if not self.quantiles:
            raise DomainError("at least one quantile is required")
        for q in self.quantiles:
            if not 0.0 < q < 1.0 or q == 0.5:
                raise DomainError(f"quantile {q} must lie in (0, 1) and differ from 0.5")
        if self.dq_lags < 1:
            raise DomainError("--dq-lags must be at least 1")
        if self.opportunity_cost < 0:
            raise DomainError("--opportunity-cost must be nonnegative")
        if self.max_iter < 1 or self.multi_start < 1 or not self.tol > 0:
            raise DomainError("--max-iter and --multi-start must be >= 1 and --tol > 0")
        if self.command != "simulate" and not self.input:
            raise DomainError(f"command {self.command!r} needs --input PRICES.csv")
        if self.command == "backtest" and not self.params:
            raise DomainError("backtest needs model parameters: pass --params FILE "
                              "(key=value lines for " + ", ".join(PARAM_NAMES) + "), "
                              "e.g. one written by 'fit --save-params FILE', "
                              "or run --command full to fit and backtest in one go")
        if self.command == "simulate" and not (self.params and self.out):
            raise DomainError("simulate needs --params FILE and --out PRICES.csv")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DOMAIN, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad quantile list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aparchpiv", description="APARCH(1,1)-SPIV volatility and VaR backtests")
    p.add_argument("--input", help="price CSV with header date,price")
    p.add_argument("--command", choices=COMMANDS, default="full")
    p.add_argument("--quantiles", type=_float_list,
                   help="comma-separated VaR levels; <0.5 long, >0.5 short")
    p.add_argument("--dq-lags", type=int, default=5)
    p.add_argument("--opportunity-cost", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report (or price CSV for simulate)")
    p.add_argument("--params", help="key=value parameter file")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--multi-start", type=int, default=1)
    p.add_argument("--acf-lags", type=int, default=50)
    p.add_argument("--n", type=int, default=5000, help="simulated sample size")
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--save-params", help="write fitted parameters as key=value")
    p.add_argument("--var-ref", choices=("mean", "quantile"), default="mean",
                   help="VaR reference in the expected-shortfall correction")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command, input=args.input, out=args.out,
                    dq_lags=args.dq_lags, opportunity_cost=args.opportunity_cost,
                    seed=args.seed, params=args.params, max_iter=args.max_iter, tol=args.tol,
                    multi_start=args.multi_start, acf_lags=args.acf_lags, n=args.n,
                    burn_in=args.burn_in, save_params=args.save_params, var_ref=args.var_ref)
    if args.quantiles is not None:
        cfg.quantiles = args.quantiles
    return cfg


# ----------------------------------------------------------------------
# Parameter files
# ----------------------------------------------------------------------
def read_params(path) -> AparchParams:
    values = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in PARAM_NAMES:
                raise DomainError(f"{path}:{lineno}: unknown parameter {key!r}")
            try:
                values[key] = float(value)
            except ValueError:
                raise DomainError(f"{path}:{lineno}: bad value {value!r}") from None
    return AparchParams.from_mapping(values)


def write_params(path, params: AparchParams) -> None:
    lines = [f"{k} = {v:.17g}" for k, v in params.as_dict().items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ----------------------------------------------------------------------
# Side outputs
# ----------------------------------------------------------------------
def _sidecar(out: str | None, suffix: str) -> Path | None:
    if not out:
        return None
    path = Path(out)
    return path.with_name(path.stem + suffix)


def write_acf_csv(path: Path, returns, lags: int) -> None:
    r = np.asarray(returns, dtype=float)
    series = {"returns": r, "abs_returns": np.abs(r), "sq_returns": r * r}
    cols = {}
    for name, x in series.items():
        acf, pacf = diagnostics.acf_pacf(x, lags)
        cols[f"{name}_acf"] = acf
        cols[f"{name}_pacf"] = pacf
    band = 1.96 / math.sqrt(r.size)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("lag," + ",".join(cols) + ",band\n")
        for k in range(lags):
            row = ",".join(f"{cols[c][k]:.17g}" for c in cols)
            fh.write(f"{k + 1},{row},{band:.17g}\n")


def write_var_bands_csv(path: Path, dates, returns, mu, sigma, spiv, levels) -> None:
    bands = [risk.var_series(mu, sigma, spiv, q).values for q in levels]
    with path.open("w", encoding="utf-8") as fh:
        fh.write("date,return,sigma," + ",".join(f"var_{q:g}" for q in levels) + "\n")
        for t, day in enumerate(dates):
            vals = ",".join(f"{b[t]:.17g}" for b in bands)
            fh.write(f"{day.isoformat()},{returns[t]:.17g},{sigma[t]:.17g},{vals}\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.6f}"
    return str(x)


def text_tables(report: dict) -> str:
    """Aligned plain-text rendering of the report tables."""
    out = []
    if "summary_statistics" in report:
        out.append("Summary statistics")
        out += [f"  {k:<22}{_fmt(v)}" for k, v in report["summary_statistics"].items()]
    if "fit" in report:
        fit = report["fit"]
        out.append(f"Fit (loglik {_fmt(fit['loglik'])}, persistence {_fmt(fit['persistence'])})")
        out.append(f"  {'param':<8}{'estimate':>14}{'robust se':>14}{'t':>12}{'p':>12}")
        for k, v in fit["params"].items():
            out.append(f"  {k:<8}{v:>14.6f}{fit['robust_se'][k]:>14.6f}"
                       f"{fit['t_stats'][k]:>12.4f}{fit['p_values'][k]:>12.6f}")
    if "volatility_losses" in report:
        out.append("Volatility losses")
        out += [f"  {k:<10}{_fmt(v)}" for k, v in report["volatility_losses"].items()]
    if "var_backtest" in report:
        out.append("VaR backtest")
        head = ("level", "ratio", "x", "kupiec_p", "indep_p", "cc_p", "dq_p", "lopez",
                "sarma_reg", "sarma_firm")
        out.append("  " + "".join(f"{h:>12}" for h in head))
        for row in report["var_backtest"]:
            vals = (row["level"], row["ratio"], row["violations"], row["kupiec_p"],
                    row["independence_p"], row["conditional_p"], row["dq_p"], row["lopez"],
                    row["sarma_regulatory"], row["sarma_firm"])
            out.append("  " + "".join(f"{_fmt(v):>12}" for v in vals))
    if "tail_measures" in report:
        out.append("Tail measures")
        head = ("level", "var", "tce1", "tce2", "es", "lambda", "var_mean", "var_emp")
        out.append("  " + "".join(f"{h:>12}" for h in head))
        for row in report["tail_measures"]:
            vals = (row["level"], row["var"], row["tce1"], row["tce2"], row["es"], row["lam"],
                    row["var_mean"], row["var_empirical"])
            out.append("  " + "".join(f"{_fmt(v):>12}" for v in vals))
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------
def _fit(cfg: RunConfig, returns, flags: list):
    options = FitOptions(max_iter=cfg.max_iter, tol=cfg.tol, multi_start=cfg.multi_start,
                         seed=cfg.seed)
    fit = aparch_fit(returns, options)
    flags += [f"fit: {f}" for f in fit.flags]
    if cfg.save_params:
        write_params(cfg.save_params, fit.params)
    return fit


def _backtest(cfg: RunConfig, series, params: AparchParams, flags: list, out_path):
    state = aparch_filter(params, series.returns)
    rows, tails = risk.backtest(series.returns, params.mu, state.sigma, params.spiv,
                                levels=cfg.quantiles, dq_lags=cfg.dq_lags,
                                opportunity_cost=cfg.opportunity_cost, var_ref=cfg.var_ref)
    for row in rows:
        flags += [f"level {row.level:g}: {f}" for f in row.flags]
    for tail in tails:
        if not tail.defined:
            flags.append(f"level {tail.level:g}: no violations, tail measures undefined")
    bands = _sidecar(out_path, "_var_bands.csv")
    if bands is not None:
        write_var_bands_csv(bands, series.dates, series.returns, params.mu, state.sigma,
                            params.spiv, cfg.quantiles)
    return rows, tails


def _simulate(cfg: RunConfig) -> int:
    params = read_params(cfg.params)
    r = aparch_simulate(params, cfg.n, burn_in=cfg.burn_in, seed=cfg.seed)
    prices = data_io.prices_from_returns(r)
    dates = data_io.business_days(dt.date(2000, 1, 3), prices.size)
    data_io.write_prices_csv(cfg.out, dates, prices)
    logger.info("wrote %d simulated prices to %s", prices.size, cfg.out)
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    cfg.validate()
    if cfg.command == "simulate":
        return _simulate(cfg)

    dates, prices = data_io.load_prices_csv(cfg.input)
    series = data_io.to_returns(dates, prices, source_label=Path(cfg.input).name)
    flags = []
    sections = {}
    exit_code = EXIT_OK

    if cfg.command in ("stats", "full"):
        sections["summary"] = diagnostics.summary_stats(series.returns)
        acf_path = _sidecar(cfg.out, "_acf.csv")
        if acf_path is not None:
            write_acf_csv(acf_path, series.returns, min(cfg.acf_lags, len(series) - 1))

    params = None
    if cfg.command in ("fit", "full"):
        fit = _fit(cfg, series.returns, flags)
        sections["fit"] = fit
        params = fit.params
        eps_sq = fit.state.residuals ** 2
        losses = diagnostics.loss_functions(eps_sq, fit.state.sigma ** 2)
        if losses.excluded:
            flags.append(f"losses: {losses.excluded} zero residuals excluded from MedAPE and LL")
        sections["losses"] = losses
        if not fit.converged:
            exit_code = EXIT_CONVERGENCE
    elif cfg.command == "backtest":
        params = read_params(cfg.params)

    if cfg.command in ("backtest", "full"):
        rows, tails = _backtest(cfg, series, params, flags, cfg.out)
        sections["backtest"] = rows
        sections["tails"] = tails
        if cfg.command == "backtest":
            sections["params"] = params.as_dict()

    config = asdict(cfg)
    config["n_returns"] = len(series)
    config["first_date"] = series.dates[0].isoformat()
    config["last_date"] = series.dates[-1].isoformat()
    if "params" in sections:
        config["pinned_params"] = sections["params"]
    report = data_io.build_report(
        config=config, input_fingerprint=data_io.file_fingerprint(cfg.input),
        summary=sections.get("summary"), fit=sections.get("fit"),
        losses=sections.get("losses"), backtest=sections.get("backtest"),
        tails=sections.get("tails"), flags=flags)
    if cfg.out:
        data_io.write_report(report, cfg.out)
        table_path = _sidecar(cfg.out, ".txt")
        table_path.write_text(text_tables(data_io.to_plain(report)), encoding="utf-8")
    sys.stdout.write(text_tables(data_io.to_plain(report)))
    return exit_code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return run(config_from_args(args))
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
