"""Experiment runner and command-line interface.

``run_scenario`` turns a validated :class:`~shillbench.config.ExperimentConfig`
into an :class:`ExperimentResult`: a revenue table, one deviation report per
(check, mechanism) pair, and any requested analysis tables. Results write to
JSON and CSV; CSV cells carry 12 significant digits and are byte-stable
across replays with the same seeds.

The ``main`` entry point exposes the subcommands ``bid``, ``revenue``,
``check-ic``, ``posted-price``, ``reserve``, and ``reproduce``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, defaults, identity as idm
from .config import (
    CheckSpec,
    ExperimentConfig,
    config_from_dict,
    load_config,
    tolerance_snapshot,
)
from .distributions import (
    FiniteTypeModel,
    PopulationModel,
    population_from_json,
    uniform_model,
    optimal_reserve,
)
from .equilibrium import (
    BidFunction,
    dark_first_price_bid,
    lit_first_price_bid,
    tie_corrected_fp_payment,
)
from .errors import ConfigurationError, ShillbenchError
from .mechanisms import Mechanism, induce_dark, mechanism_from_json, mechanism_to_json
from .numerics import integrate
from .revenue import (
    dark_revenue_formula,
    expected_revenue_exact,
    expected_revenue_mc,
    optimal_posted_price,
)

__all__ = [
    "ExperimentResult",
    "Table",
    "run_scenario",
    "write_table",
    "read_table",
    "main",
]


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


@dataclass
class Table:
    columns: Tuple[str, ...]
    rows: List[Tuple]

    def to_json(self) -> Dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}


def _cell(x) -> str:
    """Render one CSV cell with a fixed significant-digit budget."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{defaults.GOLDEN_SIG_DIGITS}g}"
    return str(x)


def write_table(table: Table, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(x) for x in row])


def _parse_cell(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_table(path) -> Table:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [tuple(_parse_cell(c) for c in row) for row in reader]
    return Table(tuple(header), rows)


# ---------------------------------------------------------------------------
# analyses
# ---------------------------------------------------------------------------


def _theta_lattice(model, points: int) -> np.ndarray:
    return np.linspace(float(model.lo), float(model.hi), points)


def _analysis_lit_fp_bid_curve(config: ExperimentConfig, params: Dict) -> Table:
    counts = params.get("counts", [2, 3])
    points = int(params.get("points", 101))
    rho = float(params.get("rho", config.mechanisms[0].reserve))
    rows = []
    for n in counts:
        for theta in _theta_lattice(config.model, points):
            rows.append((int(n), float(theta), lit_first_price_bid(config.model, n, theta, rho)))
    return Table(("n", "theta", "bid"), rows)


def _analysis_dark_fp_bid_curve(config: ExperimentConfig, params: Dict) -> Table:
    points = int(params.get("points", 101))
    rho = float(params.get("rho", config.mechanisms[0].reserve))
    model, pop = config.model, config.pop
    sizes = [(n, float(w)) for n, w in pop.p_map.items()]
    rows = []
    for theta in _theta_lattice(model, points):
        theta = float(theta)
        bid = dark_first_price_bid(model, pop, theta, rho)
        if theta < rho:
            rows.append((theta, bid, 0.0))
            continue
        # pay-your-bid premise: bid * P(win) equals the mixture of
        # price-statistic payments at the same allocation
        win = sum(w * model.cdf(theta) ** (n - 1) for n, w in sizes)
        rhs = 0.0
        for n, w in sizes:
            if n == 1:
                rhs += w * rho
                continue
            below = rho * model.cdf(rho) ** (n - 1)
            gain = integrate(
                lambda x, n=n: x * (n - 1) * model.cdf(x) ** (n - 2) * model.pdf(x),
                rho,
                theta,
            )
            rhs += w * (below + gain)
        rows.append((theta, bid, bid * win - rhs))
    return Table(("theta", "bid", "residual"), rows)


def _analysis_tc_fp_payments(config: ExperimentConfig, params: Dict) -> Table:
    model = config.model
    if not isinstance(model, FiniteTypeModel):
        raise ConfigurationError("tc-fp payments need a finite grid")
    max_n = int(params.get("max_n", 20))
    k = int(params.get("k", model.K))
    rho = config.mechanisms[0].reserve
    rows = [(n, float(tie_corrected_fp_payment(model, n, k, rho=rho))) for n in range(1, max_n + 1)]
    return Table(("n", "payment"), rows)


def _rival_multisets(model: FiniteTypeModel, n: int):
    if n == 0:
        yield (), Fraction(1) if model.is_exact else 1.0
        return
    for combo in itertools.combinations_with_replacement(range(model.K), n):
        counts = [0] * model.K
        for i in combo:
            counts[i] += 1
        coef = math.factorial(n)
        for c in counts:
            coef //= math.factorial(c)
        w = Fraction(coef) if model.is_exact else float(coef)
        for i, c in enumerate(counts):
            if c:
                w = w * model.masses[i] ** c
        yield tuple(model.grid[i] for i in combo), w


def interim_misreport_utility(mech: Mechanism, theta, report, n: int):
    """Expected payoff of one report against n - 1 truthful rivals."""
    total = None
    for rivals, w in _rival_multisets(mech.model, n - 1):
        q, t = mech.rule((report,) + rivals)
        u = w * (theta * q[0] - t[0])
        total = u if total is None else total + u
    return total


def _analysis_binding_indifference(config: ExperimentConfig, params: Dict) -> Table:
    model = config.model
    if not isinstance(model, FiniteTypeModel):
        raise ConfigurationError("binding indifference needs a finite grid")
    max_n = int(params.get("max_n", 4))
    mech = config.mechanisms[0]
    rows = []
    for n in range(1, max_n + 1):
        bound = Mechanism(
            mech.format,
            model,
            pop=PopulationModel.degenerate(n),
            reserve=mech.reserve,
        )
        for k in range(2, model.K + 1):
            own = interim_misreport_utility(bound, model.grid[k - 1], model.grid[k - 1], n)
            down = interim_misreport_utility(bound, model.grid[k - 1], model.grid[k - 2], n)
            rows.append((n, k, float(abs(own - down))))
    return Table(("n", "k", "residual"), rows)


def _analysis_cross_engine_revenue(config: ExperimentConfig, params: Dict) -> Table:
    rows = []
    for mech in config.mechanisms:
        enum = expected_revenue_exact(mech, budget=config.budget).value
        formula = dark_revenue_formula(mech, config.model, config.pop)
        rows.append((mech.label, float(enum), float(formula), float(abs(enum - formula))))
    return Table(("mechanism", "enumeration", "formula", "abs_diff"), rows)


def _analysis_partitional_equivalence(config: ExperimentConfig, params: Dict) -> Table:
    if config.policy is None:
        raise ConfigurationError("partitional equivalence needs a 'signals' block")
    model = config.model
    if not isinstance(model, FiniteTypeModel):
        raise ConfigurationError("partitional equivalence enumerates finite grids")
    max_n = int(params.get("max_n", 4))
    induced = induce_dark(config.policy)
    rows = []
    for n in range(1, max_n + 1):
        direct = config.policy.signal_for(n).mechanism
        checked = mismatches = 0
        for profile in itertools.product(model.grid, repeat=n):
            checked += 1
            if induced.rule(profile) != direct.rule(profile):
                mismatches += 1
        rows.append((n, checked, mismatches))
    return Table(("n", "profiles", "mismatches"), rows)


def _analysis_optimal_posted_price(config: ExperimentConfig, params: Dict) -> Table:
    pops = params.get("pops")
    rows = []
    if pops:
        resolved = [(d.get("label", f"pop{i}"), population_from_json(d)) for i, d in enumerate(pops)]
    else:
        resolved = [("config", config.pop)]
    for label, pop in resolved:
        price, rev = optimal_posted_price(config.model, pop)
        rows.append((label, float(price), float(rev)))
    return Table(("population", "price", "revenue"), rows)


def _analysis_identity_sweep(config: ExperimentConfig, params: Dict) -> Table:
    counts = tuple(params.get("counts", defaults.IDENTITY_SWEEP))
    base = config.mechanisms[0]
    mech = mechanism_from_json(
        mechanism_to_json(base),
        config.model,
        pop=config.pop,
        n_max=max(counts) + config.pop.max_n + 2,
    )
    gains = idm.identity_count_sweep(mech, counts=counts, budget=config.budget)
    return Table(("identities", "gain"), [(m, float(g)) for m, g in sorted(gains.items())])


_ANALYSES: Dict[str, Callable[[ExperimentConfig, Dict], Table]] = {
    "lit-fp-bid-curve": _analysis_lit_fp_bid_curve,
    "dark-fp-bid-curve": _analysis_dark_fp_bid_curve,
    "tc-fp-payments": _analysis_tc_fp_payments,
    "binding-indifference": _analysis_binding_indifference,
    "cross-engine-revenue": _analysis_cross_engine_revenue,
    "partitional-equivalence": _analysis_partitional_equivalence,
    "optimal-posted-price": _analysis_optimal_posted_price,
    "identity-sweep": _analysis_identity_sweep,
}


# ---------------------------------------------------------------------------
# scenario execution
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: Dict
    revenue: List[Dict]
    reports: List[Dict]
    analyses: Dict[str, Table]
    provenance: Dict
    deviation_reports: List[idm.DeviationReport] = field(default_factory=list, repr=False)

    def to_json(self) -> Dict:
        return {
            "config": self.config,
            "revenue": self.revenue,
            "reports": self.reports,
            "analyses": {name: t.to_json() for name, t in self.analyses.items()},
            "provenance": self.provenance,
        }

    def tables(self) -> Dict[str, Table]:
        out = dict(self.analyses)
        if self.revenue:
            cols = ("mechanism", "engine", "value", "se", "samples", "seed")
            out["revenue"] = Table(
                cols, [tuple(row[c] for c in cols) for row in self.revenue]
            )
        return out

    def write(self, out_dir, fmt: str = "json") -> List[str]:
        os.makedirs(out_dir, exist_ok=True)
        scenario = self.config["scenario"]
        outputs = self.config.get("outputs", {})
        written = []
        if fmt in ("json", "both"):
            path = os.path.join(out_dir, outputs.get("json", f"{scenario}.json"))
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(self.to_json(), fh, indent=2, sort_keys=False)
                fh.write("\n")
            written.append(path)
        if fmt in ("csv", "both"):
            prefix = outputs.get("csv_prefix", scenario)
            for name, table in sorted(self.tables().items()):
                path = os.path.join(out_dir, f"{prefix}-{name}.csv")
                write_table(table, path)
                written.append(path)
        return written


def _run_check(
    mech: Mechanism, spec: CheckSpec, config: ExperimentConfig, budget: int
) -> idm.DeviationReport:
    kw: Dict = {}
    if spec.notion in ("bidding-zero", "bayes-seller", "expost-seller", "expost-auctioneer"):
        if spec.max_shills is not None:
            kw["max_shills"] = spec.max_shills
    else:
        if spec.max_identities is not None:
            kw["max_identities"] = spec.max_identities
    if spec.lattice_step is not None and spec.notion != "bidding-zero":
        kw["lattice_step"] = spec.lattice_step

    if spec.notion == "bidding-zero":
        method = spec.method or ("mc" if config.engine.mode == "mc" else "exact")
        if method == "mc":
            kw["samples"] = spec.samples or config.engine.samples
            kw["seed"] = spec.seed if spec.seed is not None else config.engine.seed
        return idm.bidding_zero_test(mech, method=method, **kw)
    if spec.notion == "bayes-seller":
        return idm.bayesian_seller_ic(mech, **kw)
    if spec.notion == "expost-seller":
        return idm.expost_seller_ic(mech, budget=budget, **kw)
    if spec.notion == "expost-auctioneer":
        return idm.expost_auctioneer_ic(mech, budget=budget, **kw)
    if spec.notion == "bayes-buyer":
        return idm.bayesian_buyer_ic(mech, **kw)
    if spec.notion == "expost-buyer":
        return idm.expost_buyer_ic(mech, budget=budget, **kw)
    raise ConfigurationError(f"unknown check notion {spec.notion!r}")


def run_scenario(
    config: ExperimentConfig,
    out_dir=None,
    fmt: str = "json",
    budget: Optional[int] = None,
    seed: Optional[int] = None,
) -> ExperimentResult:
    """Execute one experiment configuration end to end.

    ``seed`` overrides the engine seed from the config; ``budget`` caps exact
    enumeration. Outputs are written only when ``out_dir`` is given.
    """
    t0 = time.perf_counter()
    budget = budget if budget is not None else config.budget
    engine_seed = seed if seed is not None else config.engine.seed

    revenue_rows: List[Dict] = []
    for mech in config.mechanisms:
        if config.engine.mode == "mc":
            est = expected_revenue_mc(mech, samples=config.engine.samples, seed=engine_seed)
        elif config.model.kind != "finite":
            # exact enumeration needs a grid; continuous scenarios carry
            # their numbers in checks and analyses instead
            continue
        else:
            est = expected_revenue_exact(mech, budget=budget)
        revenue_rows.append(
            {
                "mechanism": mech.label,
                "engine": est.engine,
                "value": float(est.value),
                "value_exact": str(est.value) if isinstance(est.value, Fraction) else "",
                "se": est.se,
                "samples": est.samples,
                "seed": est.seed if est.seed is not None else "",
            }
        )

    report_rows: List[Dict] = []
    report_objs: List[idm.DeviationReport] = []
    for spec in config.checks:
        for mech in config.mechanisms:
            report = _run_check(mech, spec, config, budget)
            report_objs.append(report)
            if spec.notion == "bidding-zero":
                method = spec.method or ("mc" if config.engine.mode == "mc" else "exact")
            else:
                method = "exact"
            row = {"mechanism": mech.label, "method": method, **report.to_json()}
            report_rows.append(row)

    analyses: Dict[str, Table] = {}
    for name, params in config.analyses:
        analyses[name] = _ANALYSES[name](config, params)

    provenance = {
        "package": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "engine": {
            "mode": config.engine.mode,
            "samples": config.engine.samples,
            "seed": engine_seed,
        },
        "budget": budget,
        "tolerances": tolerance_snapshot(),
        "wall_time_s": round(time.perf_counter() - t0, 6),
    }
    result = ExperimentResult(
        config=config.raw,
        revenue=revenue_rows,
        reports=report_rows,
        analyses=analyses,
        provenance=provenance,
        deviation_reports=report_objs,
    )
    if out_dir is not None:
        result.write(out_dir, fmt=fmt)
    return result


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def _add_global_flags(parser: argparse.ArgumentParser, *, toplevel: bool) -> None:
    # The same flags hang off the main parser and every subparser so users
    # can write them on either side of the subcommand. Subparser copies
    # default to SUPPRESS; otherwise their unset defaults would overwrite
    # values parsed before the subcommand name.
    flags = (
        (("--config",), {"metavar": "PATH", "help": "experiment config JSON"}),
        (("--out",), {"metavar": "DIR", "help": "directory for JSON/CSV outputs"}),
        (("--seed",), {"type": int, "metavar": "U64", "help": "override the engine seed"}),
        (("--budget",), {"type": int, "metavar": "N", "help": "exact-enumeration profile cap"}),
        (
            ("--format",),
            {
                "choices": ("json", "csv", "both"),
                "dest": "fmt",
                "help": "output format for written artifacts",
            },
        ),
    )
    for names, kwargs in flags:
        kwargs = dict(kwargs)
        if toplevel:
            if kwargs.get("dest") == "fmt":
                kwargs["default"] = "json"
        else:
            kwargs["default"] = argparse.SUPPRESS
        parser.add_argument(*names, **kwargs)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shillbench",
        description="Auction bid and revenue engines with identity-compatibility checks.",
    )
    _add_global_flags(parser, toplevel=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bid = sub.add_parser("bid", help="tabulate an equilibrium bid function")
    p_bid.add_argument("--kind", choices=("lit-fp", "dark-fp", "tc-fp"), default="lit-fp")
    p_bid.add_argument("--n", type=int, help="bidder count (lit-fp, tc-fp)")
    p_bid.add_argument("--rho", default="0", help="reserve, number or 'optimal'")
    p_bid.add_argument("--points", type=int, default=101)
    p_bid.add_argument("--theta", type=float, help="evaluate at a single type instead")

    p_rev = sub.add_parser("revenue", help="expected revenue per mechanism in a config")
    p_rev.add_argument("--samples", type=int, help="override MC sample count")

    p_ic = sub.add_parser("check-ic", help="run the identity checks in a config")
    p_ic.add_argument("--notion", action="append", help="restrict to this notion (repeatable)")

    p_pp = sub.add_parser("posted-price", help="revenue-maximizing posted price")
    p_pp.add_argument("--pop", help="designer prior as 'n=w,n=w' when no config is given")

    p_res = sub.add_parser("reserve", help="optimal reserve price for the type model")

    p_rep = sub.add_parser("reproduce", help="run the bundled acceptance scenarios")
    p_rep.add_argument("--only", metavar="NAME", help="run a single scenario by name")
    p_rep.add_argument("--golden", metavar="DIR", help="override the golden table directory")
    p_rep.add_argument(
        "--parallel", action="store_true",
        help=f"run scenarios concurrently (capped by ${defaults.ENV_THREADS})",
    )
    for p in (p_bid, p_rev, p_ic, p_pp, p_res, p_rep):
        _add_global_flags(p, toplevel=False)
    return parser


def _load_cli_config(args) -> Optional[ExperimentConfig]:
    if args.config is None:
        return None
    return load_config(args.config)


def _emit(args, payload: Dict, tables: Dict[str, Table], stem: str) -> None:
    """Print a payload and optionally write it under --out."""
    print(json.dumps(payload, indent=2, sort_keys=False))
    if args.out is None:
        return
    os.makedirs(args.out, exist_ok=True)
    if args.fmt in ("json", "both"):
        with open(os.path.join(args.out, f"{stem}.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    if args.fmt in ("csv", "both"):
        for name, table in tables.items():
            write_table(table, os.path.join(args.out, f"{stem}-{name}.csv"))


def _parse_pop_flag(text: str) -> PopulationModel:
    from .distributions import json_number

    pi = {}
    for part in text.split(","):
        n, _, w = part.partition("=")
        if not _:
            raise ConfigurationError("--pop expects 'n=weight,n=weight'")
        pi[int(n)] = json_number(w)
    return PopulationModel(pi)


def _cmd_bid(args) -> int:
    config = _load_cli_config(args)
    model = config.model if config else uniform_model()
    pop = config.pop if config else None
    rho = optimal_reserve(model) if args.rho == "optimal" else float(Fraction(args.rho))
    if args.kind in ("lit-fp", "tc-fp") and args.n is None:
        raise ConfigurationError(f"--kind {args.kind} needs --n")
    if args.kind == "dark-fp" and pop is None:
        raise ConfigurationError("--kind dark-fp needs --config with a population")
    fn = BidFunction(args.kind, model, rho=rho, n=args.n, pop=pop)
    if args.theta is not None:
        rows = [(args.theta, float(fn(args.theta)))]
    elif model.kind == "finite":
        rows = [(float(t), float(b)) for t, b in fn.table()]
    else:
        xs = np.linspace(float(model.lo), float(model.hi), args.points)
        rows = [(float(x), float(fn(float(x)))) for x in xs]
    table = Table(("theta", "bid"), rows)
    payload = {"kind": args.kind, "n": args.n, "rho": float(rho)}
    if isinstance(rho, Fraction):
        payload["rho_exact"] = str(rho)
    payload["table"] = table.to_json()
    _emit(args, payload, {"bid": table}, "bid")
    return 0


def _cmd_revenue(args) -> int:
    config = _load_cli_config(args)
    if config is None:
        raise ConfigurationError("revenue needs --config")
    if args.samples is not None:
        raw = dict(config.raw)
        raw["engine"] = {
            "mode": "mc",
            "samples": args.samples,
            **({"seed": args.seed} if args.seed is not None else {}),
        }
        config = config_from_dict(raw)
    result = run_scenario(config, out_dir=args.out, fmt=args.fmt,
                          budget=args.budget, seed=args.seed)
    print(json.dumps({"scenario": config.scenario, "revenue": result.revenue}, indent=2))
    return 0


def _cmd_check_ic(args) -> int:
    config = _load_cli_config(args)
    if config is None:
        raise ConfigurationError("check-ic needs --config")
    if not config.checks:
        raise ConfigurationError("the config lists no checks")
    if args.notion:
        wanted = set(args.notion)
        unknown = wanted - set(idm.NOTIONS)
        if unknown:
            raise ConfigurationError(f"unknown notion(s): {', '.join(sorted(unknown))}")
        kept = tuple(c for c in config.checks if c.notion in wanted)
        if not kept:
            raise ConfigurationError("no configured check matches --notion")
        config = dataclasses.replace(config, checks=kept)
    result = run_scenario(config, out_dir=args.out, fmt=args.fmt,
                          budget=args.budget, seed=args.seed)
    print(json.dumps({"scenario": config.scenario, "reports": result.reports}, indent=2))
    codes = [r.exit_code for r in result.deviation_reports]
    if 2 in codes:
        return 2
    if 3 in codes:
        return 3
    return 0


def _cmd_posted_price(args) -> int:
    config = _load_cli_config(args)
    if config is not None:
        model, pop = config.model, config.pop
    else:
        model = uniform_model()
        if args.pop is None:
            raise ConfigurationError("posted-price needs --config or --pop")
        pop = _parse_pop_flag(args.pop)
    price, rev = optimal_posted_price(model, pop)
    table = Table(("price", "revenue"), [(float(price), float(rev))])
    _emit(args, {"price": float(price), "revenue": float(rev)}, {"posted-price": table},
          "posted-price")
    return 0


def _cmd_reserve(args) -> int:
    config = _load_cli_config(args)
    model = config.model if config else uniform_model()
    rho = optimal_reserve(model)
    _emit(args, {"reserve": float(rho)}, {}, "reserve")
    return 0


def _cmd_reproduce(args) -> int:
    from .acceptance import reproduce_all

    workers = None
    if args.parallel:
        env = os.environ.get(defaults.ENV_THREADS)
        workers = max(1, int(env)) if env else (os.cpu_count() or 1)
    summary, ok = reproduce_all(
        only=args.only,
        golden_dir=args.golden,
        out_dir=args.out,
        budget=args.budget,
        seed=args.seed,
        workers=workers,
    )
    return 0 if ok else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "bid": _cmd_bid,
        "revenue": _cmd_revenue,
        "check-ic": _cmd_check_ic,
        "posted-price": _cmd_posted_price,
        "reserve": _cmd_reserve,
        "reproduce": _cmd_reproduce,
    }
    try:
        return handlers[args.command](args)
    except ShillbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
