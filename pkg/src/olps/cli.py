"""Command-line front end.

    olps list
    olps run --synthetic cg86 --n 100 --strategy ucrp
    olps run --data prices.csv --format prices --strategy meta:bah --experts pamr,olmar
    olps run --synthetic iid --m 5 --n 200 --seed 3 --all --output table
    olps generate --synthetic iid --m 3 --n 50 --seed 1 --out market.csv

Exit codes: 0 ok, 2 unknown strategy or bad parameters, 3 data error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import registry
from .benchmarks import bcrp
from .engine import ContractViolation, CostSpec, report_json, run_backtest, summarize, write_wealth_csv
from .market import (MarketDataError, PriceRelativeSequence, load_price_relatives,
                     synthetic_cg86, synthetic_iid, write_price_relatives)
from .params import ParamError, parse_kv
from .simplex import ConvergenceError, crp_wealth

log = logging.getLogger("olps")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    strategy: str
    data: Optional[str] = None
    format: str = "relatives"
    header: Optional[bool] = None
    synthetic: Optional[str] = None
    n: int = 100
    m: int = 3
    seed: int = 0
    params: dict = field(default_factory=dict)
    experts: List[str] = field(default_factory=list)
    meta_params: dict = field(default_factory=dict)
    gamma_b: float = 0.0
    gamma_s: float = 0.0
    output: str = "json"


def load_market(cfg: RunConfig) -> PriceRelativeSequence:
    try:
        if cfg.data:
            return load_price_relatives(cfg.data, cfg.format, cfg.header)
        if cfg.synthetic == "cg86":
            return synthetic_cg86(cfg.n)
        if cfg.synthetic == "iid":
            return synthetic_iid(cfg.m, cfg.n, seed=cfg.seed)
    except (MarketDataError, OSError, ValueError) as exc:
        raise CliError(f"data error: {exc}", EXIT_DATA) from exc
    raise CliError("need --data or --synthetic", EXIT_DATA)


def build(cfg: RunConfig, name: Optional[str] = None):
    name = name or cfg.strategy
    try:
        if name in registry.META:
            return registry.create(name, experts=cfg.experts, meta_params={**cfg.meta_params, **cfg.params})
        return registry.create(name, cfg.params)
    except registry.UnknownStrategy as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    except (ParamError, TypeError, ValueError) as exc:
        raise CliError(f"bad parameters for {name}: {exc}", EXIT_USAGE) from exc


def execute(cfg: RunConfig, seq: PriceRelativeSequence, strategy, bcrp_wealth: Optional[float]):
    costs = CostSpec(cfg.gamma_b, cfg.gamma_s)
    try:
        result = run_backtest(strategy, seq, costs)
    except (ConvergenceError, ContractViolation, FloatingPointError, ArithmeticError) as exc:
        raise CliError(f"numeric failure in {strategy.name}: {exc}", EXIT_NUMERIC) from exc
    return result, summarize(result, bcrp_wealth)


def _bcrp_wealth(seq):
    try:
        return crp_wealth(bcrp(seq), seq)
    except ConvergenceError as exc:
        raise CliError(f"numeric failure computing BCRP: {exc}", EXIT_NUMERIC) from exc


def run(cfg: RunConfig, wealth_csv: Optional[str] = None, run_all: bool = False):
    """Returns (exit code, list of reports)."""
    try:
        CostSpec(cfg.gamma_b, cfg.gamma_s)
    except ValueError as exc:
        raise CliError(f"bad cost rates: {exc}", EXIT_USAGE) from exc
    if run_all:
        strategies = [build(cfg, name) for name in registry.names()]
    else:
        strategies = [build(cfg)]
    seq = load_market(cfg)
    ref = _bcrp_wealth(seq)
    if run_all:
        # each strategy owns its state, so they can run side by side
        with ThreadPoolExecutor() as pool:
            out = list(pool.map(lambda s: execute(cfg, seq, s, ref), strategies))
    else:
        out = [execute(cfg, seq, strategies[0], ref)]
    if wealth_csv and not run_all:
        write_wealth_csv(out[0][0], wealth_csv, seq.asset_names)
    return [rep for _, rep in out]


def format_reports(reports, output: str) -> str:
    if output == "json":
        return report_json(reports[0] if len(reports) == 1 else reports)
    if output == "csv":
        cols = ["strategy", "n", "m", "final_wealth", "growth_rate", "regret", "cost_fraction"]
        lines = [",".join(cols)]
        for r in reports:
            lines.append(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols))
        return "\n".join(lines)
    head = f"{'strategy':<16}{'final_wealth':>16}{'growth_rate':>14}{'regret':>12}"
    rows = [head, "-" * len(head)]
    for r in reports:
        rows.append(f"{r['strategy']:<16}{r['final_wealth']:>16.6g}{r['growth_rate']:>14.6f}{r['regret']:>12.6f}")
    return "\n".join(rows)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="olps", description="Online portfolio selection backtester")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    ls = sub.add_parser("list", help="list registered strategies with their parameters")
    ls.add_argument("--output", choices=("json", "table"), default="table")

    def data_args(sp):
        sp.add_argument("--data", help="CSV file of price relatives or prices")
        sp.add_argument("--format", choices=("relatives", "prices"), default="relatives")
        sp.add_argument("--header", choices=("auto", "yes", "no"), default="auto")
        sp.add_argument("--synthetic", choices=("cg86", "iid"))
        sp.add_argument("--n", type=int, default=100, help="periods for synthetic data")
        sp.add_argument("--m", type=int, default=3, help="assets for --synthetic iid")
        sp.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("run", help="backtest one strategy (or all with --all)")
    data_args(r)
    r.add_argument("--strategy", default="ucrp")
    r.add_argument("--all", action="store_true", help="run every registered strategy")
    r.add_argument("--params", default="", help="k=v,k=v")
    r.add_argument("--experts", default="", help="for meta strategies: name,name[k=v;k=v],...")
    r.add_argument("--meta-params", default="", help="k=v,k=v for the meta layer")
    r.add_argument("--tc-buy", type=float, default=0.0)
    r.add_argument("--tc-sell", type=float, default=0.0)
    r.add_argument("--output", choices=("json", "csv", "table"), default="json")
    r.add_argument("--wealth-csv", help="write the per-period wealth path here")

    g = sub.add_parser("generate", help="write a synthetic market to CSV")
    data_args(g)
    g.add_argument("--out", required=True)
    return p


def _config(args) -> RunConfig:
    header = {"auto": None, "yes": True, "no": False}[args.header]
    try:
        params = parse_kv(args.params)
        meta_params = parse_kv(args.meta_params)
    except ParamError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    return RunConfig(strategy=args.strategy, data=args.data, format=args.format, header=header,
                     synthetic=args.synthetic, n=args.n, m=args.m, seed=args.seed, params=params,
                     experts=registry.split_experts(args.experts), meta_params=meta_params,
                     gamma_b=args.tc_buy, gamma_s=args.tc_sell, output=args.output)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        if args.command == "list":
            cat = registry.catalog()
            if args.output == "json":
                print(json.dumps(cat, sort_keys=True, indent=2))
            else:
                for e in cat:
                    ps = ", ".join(f"{p['name']}={p['default']}" for p in e["params"]) or "-"
                    print(f"{e['name']:<16}{e['category']:<30}{ps}")
            return EXIT_OK
        if args.command == "generate":
            cfg = RunConfig(strategy="", synthetic=args.synthetic, n=args.n, m=args.m, seed=args.seed,
                            data=args.data, format=args.format,
                            header={"auto": None, "yes": True, "no": False}[args.header])
            write_price_relatives(load_market(cfg), args.out)
            return EXIT_OK
        cfg = _config(args)
        reports = run(cfg, args.wealth_csv, args.all)
        print(format_reports(reports, cfg.output))
        return EXIT_OK
    except CliError as exc:
        print(f"olps: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
