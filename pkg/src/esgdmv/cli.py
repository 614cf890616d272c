"""Command-line front end.

Every subcommand writes CSV outputs plus ``manifest.txt`` into the output
directory. Configuration is an INI file; command-line flags override it.
Exit codes: 1 configuration error, 2 data error, 3 numerical error. Errors
are reported as a single ``error code=<n> kind=<kind> message=<json string>``
line on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import backtest as bt
from .capm import AgentPopulation, AssetUniverse, aggregate_no_uncertainty, capm_no_uncertainty, capm_with_uncertainty
from .dmv import DEFAULT_B_GRID, DEFAULT_GAMMA, DEFAULT_THETA, GridRow, MarketParams, solve_grid
from .ensemble import EnsembleMethod, ensemble, parse_spec
from .errors import ConfigError, DataError, EsgDmvError
from .market_env import RewardKind, read_price_csv, write_price_csv
from .policy import SearchConfig
from .ratings import (
    format_float,
    rater_correlation,
    read_matrix_csv,
    read_panel_csv,
    standardize,
    write_matrix_csv,
    write_panel_csv,
)
from .synthgen import TABLE1_CORR, TABLE1_RATERS, Marginal, SynthConfig, copula_correlation, default_return_cov, gen_esg_panel, gen_prices

log = logging.getLogger("esgdmv")

STOCHASTIC = {"synth", "backtest"}


# ---------------------------------------------------------------- config


# options holding file paths; relative values are taken relative to the config file
PATH_OPTIONS = {("capm", "universe"), ("capm", "sigma_m"), ("capm", "sigma_g"), ("capm", "agents"), ("synth", "corr")}
PATH_SECTIONS = {"inputs", "assets"}
NON_PATH_VALUES = {("synth", "corr"): {"table1", "identity"}}


class RunConfig:
    """Effective configuration: INI files (later ones win) overridden by flags."""

    def __init__(self, paths: str | Sequence[str] | None = None, overrides: Sequence[str] = ()):
        self.parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        self.parser.optionxform = str  # keep key case (asset symbols, mu_M)
        self.paths: list[Path] = []
        if isinstance(paths, (str, Path)):
            paths = [paths]
        for path in paths or ():
            self._read(Path(path))
        for item in overrides:
            self.set_override(item)

    def _read(self, p: Path) -> None:
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        one = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        one.optionxform = str
        try:
            one.read(p)
        except configparser.Error as exc:
            raise ConfigError(f"{p}: {exc}") from None
        for section in one.sections():
            for key, value in one.items(section):
                if _is_path_option(section, key, value) and not Path(value).is_absolute():
                    value = (p.parent / value).as_posix()
                self.set(section, key, value)
        self.paths.append(p)

    def set_override(self, item: str) -> None:
        key, sep, value = item.partition("=")
        section, dot, option = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        self.set(section.strip(), option.strip(), value.strip())

    def set(self, section: str, option: str, value) -> None:
        if value is None:
            return
        if not self.parser.has_section(section):
            self.parser.add_section(section)
        self.parser.set(section, option, str(value))

    def get(self, section: str, option: str, default=None, required: bool = False) -> str | None:
        if self.parser.has_option(section, option):
            return self.parser.get(section, option)
        if required:
            raise ConfigError(f"missing config value [{section}] {option}")
        return default

    def getfloat(self, section, option, default=None, required=False) -> float | None:
        v = self.get(section, option, None, required)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"[{section}] {option}: not a number: {v!r}") from None

    def getint(self, section, option, default=None, required=False) -> int | None:
        v = self.get(section, option, None, required)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"[{section}] {option}: not an integer: {v!r}") from None

    def getlist(self, section, option, default=()) -> list[str]:
        v = self.get(section, option)
        if v is None:
            return list(default)
        return [x.strip() for x in v.split(",") if x.strip()]

    def floats(self, section, option, default=()) -> list[float]:
        try:
            return [float(x) for x in self.getlist(section, option, default)]
        except ValueError:
            raise ConfigError(f"[{section}] {option}: expected comma-separated numbers") from None

    def getbool(self, section, option, default=False) -> bool:
        v = self.get(section, option)
        if v is None:
            return default
        if v.lower() in ("1", "true", "yes", "on", "daily"):
            return True
        if v.lower() in ("0", "false", "no", "off", "none", "static"):
            return False
        raise ConfigError(f"[{section}] {option}: not a boolean: {v!r}")

    def input_path(self, section, option, required=True) -> Path | None:
        v = self.get(section, option, required=required)
        if v is None:
            return None
        p = Path(v)
        if not p.exists():
            raise ConfigError(f"input file not found: {p}")
        return p

    def canonical(self) -> str:
        buf = []
        for section in sorted(self.parser.sections()):
            for key in sorted(self.parser.options(section)):
                if (section, key) == ("run", "output"):
                    continue  # where results land does not affect them
                buf.append(f"{section}.{key}={self.parser.get(section, key)}")
        return "\n".join(buf) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, command: str, cfg: RunConfig, inputs: Sequence[Path], outputs: Sequence[Path]) -> Path:
    lines = [
        f"command={command}",
        f"package_version={__version__}",
        f"config_sha256={cfg.digest()}",
        f"seed={cfg.get('run', 'seed', '')}",
    ]
    for p in sorted(set(inputs), key=str):
        lines.append(f"input.{p.as_posix()}={sha256_file(p)}")
    for p in sorted(outputs, key=lambda q: q.name):
        rel = p.relative_to(out).as_posix() if p.is_relative_to(out) else p.as_posix()
        lines.append(f"output.{rel}={sha256_file(p)}")
    path = out / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        k, _, v = line.partition("=")
        out[k] = v
    return out


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.get("run", "output", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_float(x) if isinstance(x, (float, np.floating)) else x for x in r])
    return path


# ---------------------------------------------------------------- commands


def cmd_harmonize(cfg: RunConfig) -> tuple[list[Path], list[Path]]:
    src = cfg.input_path("inputs", "panel")
    panel = read_panel_csv(src)
    out = _out_dir(cfg)
    a, b = out / "harmonized.csv", out / "standardized.csv"
    write_panel_csv(panel, a)
    write_panel_csv(standardize(panel), b)
    return [src], [a, b]


def cmd_corr(cfg: RunConfig):
    src = cfg.input_path("inputs", "panel")
    panel = read_panel_csv(src)
    out = _out_dir(cfg)
    path = out / "corr.csv"
    write_matrix_csv(panel.raters, rater_correlation(panel), path, corner="rater")
    return [src], [path]


def cmd_ensemble(cfg: RunConfig):
    src = cfg.input_path("inputs", "panel")
    panel = read_panel_csv(src)
    methods = cfg.getlist("ensemble", "methods", [m.value for m in EnsembleMethod])
    alpha = cfg.getfloat("ensemble", "alpha", None)
    specs = []
    for token in methods:
        spec = parse_spec(token)
        if alpha is not None and spec.method is EnsembleMethod.ALPHA_MAXMIN and ":" not in token:
            spec = type(spec)(spec.method, alpha)
        specs.append(spec)
    out = _out_dir(cfg)
    outputs = []
    results = [ensemble(panel, s) for s in specs]
    firms = results[0].firms if results else ()
    rows = [[f, *(dict(zip(r.firms, r.scores))[f] for r in results)] for f in firms]
    outputs.append(_write_rows(out / "ensemble.csv", ["firm", *(s.name for s in specs)], rows))
    diag = [[s.name, r.dropped, r.explained_variance_ratio if r.explained_variance_ratio is not None else ""]
            for s, r in zip(specs, results)]
    outputs.append(_write_rows(out / "ensemble_diagnostics.csv", ["method", "dropped", "explained_variance_ratio"], diag))
    for s, r in zip(specs, results):
        if r.loadings is not None:
            outputs.append(_write_rows(out / "pca_loadings.csv", ["rater", "loading"], zip(r.raters, r.loadings)))
    return [src], outputs


def market_params(cfg: RunConfig) -> MarketParams:
    return MarketParams(
        mu_f=cfg.getfloat("market", "mu_f", required=True),
        mu_M=cfg.getfloat("market", "mu_M", required=True),
        sigma2_M=cfg.getfloat("market", "sigma2_M", required=True),
        mu_g=cfg.getfloat("market", "mu_g", required=True),
        sigma2_g=cfg.getfloat("market", "sigma2_g", required=True),
    )


def cmd_dmv(cfg: RunConfig):
    m = market_params(cfg)
    rows = solve_grid(
        m,
        gamma=cfg.getfloat("profiles", "gamma", DEFAULT_GAMMA),
        theta=cfg.getfloat("profiles", "theta", DEFAULT_THETA),
        b_grid=cfg.floats("profiles", "b", DEFAULT_B_GRID),
        kinds=cfg.getlist("profiles", "types", ["I", "N", "U"]),
    )
    out = _out_dir(cfg)
    path = _write_rows(out / "dmv.csv", GridRow.FIELDS, [r.values() for r in rows])
    return [], [path]


def read_vector_csv(path: Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """``asset,mu_r,mu_gM`` rows."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        assets = [r["asset"] for r in rows]
        mu = np.array([float(r["mu_r"]) for r in rows])
        mg = np.array([float(r["mu_gM"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: expected columns asset,mu_r,mu_gM ({exc})") from None
    return assets, mu, mg


def read_agents_csv(path: Path) -> AgentPopulation:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        cols = {k: np.array([float(r[k]) for r in rows]) for k in ("weight", "gamma", "b", "theta")}
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: expected columns weight,gamma,b,theta ({exc})") from None
    return AgentPopulation(cols["weight"], cols["gamma"], cols["b"], cols["theta"])


def cmd_capm(cfg: RunConfig):
    vec = cfg.input_path("capm", "universe")
    sm = cfg.input_path("capm", "sigma_m")
    sg = cfg.input_path("capm", "sigma_g")
    ag = cfg.input_path("capm", "agents")
    assets, mu, mg = read_vector_csv(vec)
    la, S = read_matrix_csv(sm)
    lg, Sg = read_matrix_csv(sg)
    if la != assets or lg != assets:
        raise DataError("covariance matrix labels must match universe asset order")
    u = AssetUniverse(mu, S, mg, Sg, tuple(assets))
    pop = read_agents_csv(ag)
    out = _out_dir(cfg)
    res_n = capm_no_uncertainty(u, pop)
    res_u = capm_with_uncertainty(u, pop)
    outputs = [
        _write_rows(out / "capm_no_uncertainty.csv", ["asset", "beta", "alpha", "x_m"],
                    zip(assets, res_n.beta, res_n.alpha, res_n.X_M)),
        _write_rows(out / "capm_with_uncertainty.csv", ["asset", "beta", "alpha", "x_m", "beta_market"],
                    zip(assets, res_u.beta, res_u.alpha, res_u.X_M, res_u.beta_market)),
    ]
    gamma_M, b_M = aggregate_no_uncertainty(pop)
    agg = [
        ["gamma_M", gamma_M], ["b_M", b_M],
        ["mu_M_no_uncertainty", res_n.mu_M], ["mu_g_no_uncertainty", res_n.mu_g], ["sigma2_M_no_uncertainty", res_n.sigma2_M],
        ["mu_M_with_uncertainty", res_u.mu_M], ["mu_g_with_uncertainty", res_u.mu_g], ["sigma2_M_with_uncertainty", res_u.sigma2_M],
    ]
    outputs.append(_write_rows(out / "capm_aggregates.csv", ["name", "value"], agg))
    for name, mat in (("Gamma_MU", res_u.Gamma_MU), ("B_MU", res_u.B_MU)):
        p = out / f"{name}.csv"
        write_matrix_csv(assets, mat, p, corner="asset")
        outputs.append(p)
    return [vec, sm, sg, ag], outputs


def synth_config(cfg: RunConfig) -> SynthConfig:
    seed = cfg.getint("run", "seed", required=True)
    n_assets = cfg.getint("synth", "n_assets", 8)
    corr_src = cfg.get("synth", "corr", "table1")
    if corr_src == "table1":
        raters, corr = TABLE1_RATERS, TABLE1_CORR
    elif corr_src == "identity":
        k = cfg.getint("synth", "n_raters", 4)
        raters, corr = tuple(f"R{i + 1}" for i in range(k)), np.eye(k)
    else:
        labels, corr = read_matrix_csv(cfg.input_path("synth", "corr"))
        raters = tuple(labels)
    mean = cfg.floats("synth", "return_mean")
    return SynthConfig(
        seed=seed,
        n_firms=cfg.getint("synth", "n_firms", n_assets),
        n_assets=n_assets,
        n_bars=cfg.getint("synth", "n_bars", 3915),
        rater_corr_target=corr,
        raters=tuple(raters),
        return_mean=np.array(mean) if len(mean) == n_assets else np.full(n_assets, mean[0] if mean else 2e-4),
        return_cov=default_return_cov(n_assets, cfg.getfloat("synth", "vol", 0.015), cfg.getfloat("synth", "rho", 0.3)),
        esg_marginal=Marginal(cfg.get("synth", "marginal", "uniform")),
        start_date=cfg.get("synth", "start", "2007-06-29"),
    )


def cmd_synth(cfg: RunConfig):
    sc = synth_config(cfg)
    out = _out_dir(cfg)
    panel = gen_esg_panel(sc)
    _, shift = copula_correlation(sc)
    outputs = []
    esg = out / "esg.csv"
    write_panel_csv(panel, esg)
    outputs.append(esg)
    pdir = out / "prices"
    pdir.mkdir(exist_ok=True)
    asset_lines = []
    for s in gen_prices(sc):
        p = pdir / f"{s.symbol}.csv"
        write_price_csv(s, p)
        outputs.append(p)
        asset_lines.append(f"{s.symbol} = prices/{s.symbol}.csv")
    portfolio = out / "portfolio.ini"
    portfolio.write_text(
        "[inputs]\npanel = esg.csv\n\n[assets]\n" + "\n".join(asset_lines) + "\n"
    )
    outputs.append(portfolio)
    outputs.append(_write_rows(out / "synth_diagnostics.csv", ["name", "value"], [["psd_repair_max_shift", shift]]))
    return [], outputs


def _strategies(cfg: RunConfig, panel) -> list[bt.Strategy]:
    sources = cfg.getlist("strategies", "sources", [*panel.raters, *(m.value for m in EnsembleMethod)])
    kind = RewardKind(cfg.get("strategies", "reward", RewardKind.LINEAR_ESG.value))
    search = SearchConfig(
        population=cfg.getint("strategies", "population", 64),
        elite_fraction=cfg.getfloat("strategies", "elite_fraction", 0.125),
        iterations=cfg.getint("strategies", "iterations", 200),
        initial_sd=cfg.getfloat("strategies", "initial_sd", 1.0),
    )
    params = dict(
        alpha_r=cfg.getfloat("strategies", "alpha_r", 1.0),
        gamma=cfg.getfloat("strategies", "gamma", DEFAULT_GAMMA),
        b=cfg.getfloat("strategies", "b", 1.0),
        theta=cfg.getfloat("strategies", "theta", DEFAULT_THETA),
    )
    optimizer = cfg.get("strategies", "optimizer", "closed-form")
    out = []
    for token in sources:
        if token in panel.raters:
            out.append(bt.Strategy(token, token, kind, optimizer=optimizer, search=search, **params))
        else:
            spec = parse_spec(token)
            out.append(bt.Strategy(spec.name, spec, kind, optimizer=optimizer, search=search, **params))
    return out


def cmd_backtest(cfg: RunConfig):
    seed = cfg.getint("run", "seed", required=True)
    panel_path = cfg.input_path("inputs", "panel")
    panel = read_panel_csv(panel_path)
    if not cfg.parser.has_section("assets") or not cfg.parser.options("assets"):
        raise ConfigError("config needs an [assets] section mapping symbols to price CSVs")
    inputs = [panel_path]
    prices = []
    for sym in cfg.parser.options("assets"):
        p = cfg.input_path("assets", sym)
        inputs.append(p)
        prices.append(read_price_csv(p, sym))
    schedule = bt.rolling_schedule(
        cfg.get("schedule", "start", "2007-06-30"),
        cfg.get("schedule", "end", "2022-06-30"),
        cfg.get("schedule", "train", "3y"),
        cfg.get("schedule", "test", "1y"),
        cfg.get("schedule", "stride", "1y"),
    )
    settings = bt.BacktestSettings(
        rf=cfg.getfloat("backtest", "rf", 0.0),
        periods_per_year=cfg.getint("backtest", "periods_per_year", bt.PERIODS_PER_YEAR),
        cost=cfg.getfloat("backtest", "cost", 0.0),
        rebalance=cfg.getbool("backtest", "rebalance", False),
        seed=seed,
    )
    report = bt.run_comparison(prices, panel, _strategies(cfg, panel), schedule, settings)
    out = _out_dir(cfg)
    outputs = report.write(out, [p.symbol for p in prices])
    return inputs, outputs


COMMANDS = {
    "harmonize": cmd_harmonize,
    "corr": cmd_corr,
    "ensemble": cmd_ensemble,
    "dmv": cmd_dmv,
    "capm": cmd_capm,
    "synth": cmd_synth,
    "backtest": cmd_backtest,
}


# ---------------------------------------------------------------- argparse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="esgdmv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", action="append", help="INI configuration file (repeatable; later files win)")
        p.add_argument("-o", "--out", help="output directory ([run] output)")
        p.add_argument("--seed", type=int, help="[run] seed")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    for name in ("harmonize", "corr", "ensemble"):
        p = common(sub.add_parser(name))
        p.add_argument("--panel", help="ESG panel CSV ([inputs] panel)")
        if name == "ensemble":
            p.add_argument("--method", action="append", help="centroid, median, pca, alpha_maxmin[:alpha]")
            p.add_argument("--alpha", type=float, help="alpha for alpha_maxmin")

    p_dmv = sub.add_parser("dmv")
    dmv_sub = p_dmv.add_subparsers(dest="action", required=True)
    common(dmv_sub.add_parser("solve"))

    p = common(sub.add_parser("capm"))
    for flag in ("universe", "sigma-m", "sigma-g", "agents"):
        p.add_argument(f"--{flag}")

    p = common(sub.add_parser("synth"))
    p.add_argument("--n-firms", type=int)
    p.add_argument("--n-assets", type=int)
    p.add_argument("--n-bars", type=int)

    p = common(sub.add_parser("backtest"))
    p.add_argument("--panel")
    p.add_argument("--optimizer", choices=("closed-form", "cem"))
    p.add_argument("--population", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--reward", choices=[k.value for k in RewardKind])
    p.add_argument("--rebalance", choices=("static", "daily"))
    p.add_argument("--cost", type=float)
    return ap


def _apply_flags(cfg: RunConfig, args: argparse.Namespace) -> None:
    # file values < flags
    if args.out:
        cfg.set("run", "output", args.out)
    cfg.set("run", "seed", args.seed)
    for attr, section, key in (
        ("panel", "inputs", "panel"),
        ("alpha", "ensemble", "alpha"),
        ("universe", "capm", "universe"),
        ("sigma_m", "capm", "sigma_m"),
        ("sigma_g", "capm", "sigma_g"),
        ("agents", "capm", "agents"),
        ("n_firms", "synth", "n_firms"),
        ("n_assets", "synth", "n_assets"),
        ("n_bars", "synth", "n_bars"),
        ("optimizer", "strategies", "optimizer"),
        ("population", "strategies", "population"),
        ("iterations", "strategies", "iterations"),
        ("reward", "strategies", "reward"),
        ("rebalance", "backtest", "rebalance"),
        ("cost", "backtest", "cost"),
    ):
        val = getattr(args, attr, None)
        if val is not None:
            cfg.set(section, key, val)
    if getattr(args, "method", None):
        cfg.set("ensemble", "methods", ",".join(args.method))


def _is_path_option(section: str, key: str, value: str) -> bool:
    if value in NON_PATH_VALUES.get((section, key), ()):
        return False
    return section in PATH_SECTIONS or (section, key) in PATH_OPTIONS


def _diagnostic(exc: BaseException, code: int, kind: str) -> str:
    return f"error code={code} kind={kind} message={json.dumps(str(exc))}"


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    command = args.command
    try:
        cfg = RunConfig(args.config, args.set)
        _apply_flags(cfg, args)
        if command in STOCHASTIC and cfg.get("run", "seed") is None:
            raise ConfigError(f"{command} needs a seed ([run] seed or --seed)")
        inputs, outputs = COMMANDS[command](cfg)
        out = _out_dir(cfg)
        inputs = [*cfg.paths, *inputs]
        write_manifest(out, command if command != "dmv" else "dmv solve", cfg, inputs, outputs)
    except EsgDmvError as exc:
        print(_diagnostic(exc, exc.exit_code, exc.kind), file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(_diagnostic(exc, 1, "config"), file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(_diagnostic(exc, 3, "numerical"), file=sys.stderr)
        return 3
    except ValueError as exc:
        # enum lookups and literal parsing of config values
        print(_diagnostic(exc, 1, "config"), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
