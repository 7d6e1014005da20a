"""Identity-compatibility verifiers.

Each check constructs the deviator's strategy space explicitly, evaluates
the deviation payoff with the same engine used for the equilibrium value,
and reports the maximal gain together with a witness strategy. Search
spaces always contain the null deviation (no shills, or one truthful
identity), so a reported gain is never negative and a gain of exactly zero
certifies compatibility up to the stated caps.

Finite grids are searched exhaustively in exact arithmetic. Continuous
models are handled two ways: Bayesian notions reduce the opponent side to
one-dimensional integrals over the rival order statistic, while ex-post
notions run on a declared discretization lattice; passing verdicts from a
lattice carry a "grid-certified" qualifier (refutations remain conclusive).
"""

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import defaults
from .distributions import (
    ContinuousTypeModel,
    FiniteTypeModel,
    Num,
    PopulationModel,
    discretize,
)
from .equilibrium import lit_first_price_bid
from .errors import BudgetExceededError, ConfigurationError, UnsupportedFormatError
from .mechanisms import ANONYMOUS_FORMATS, Mechanism
from .numerics import integrate
from ._speed import row_top_two_f64

__all__ = [
    "DeviationSpec",
    "DeviationReport",
    "bidding_zero_test",
    "bayesian_seller_ic",
    "expost_seller_ic",
    "expost_auctioneer_ic",
    "bayesian_buyer_ic",
    "expost_buyer_ic",
    "identity_count_sweep",
    "NOTIONS",
]

NOTIONS = (
    "bidding-zero",
    "bayes-seller",
    "expost-seller",
    "expost-auctioneer",
    "bayes-buyer",
    "expost-buyer",
)


@dataclass(frozen=True)
class DeviationSpec:
    """What was searched: who deviates, how hard, and in which regime."""

    deviator: str
    regime: str
    max_identities: int
    domain: str
    lattice_step: Optional[float] = None


@dataclass
class DeviationReport:
    notion: str
    spec: DeviationSpec
    equilibrium_value: Num
    best_value: Num
    gain: Num
    witness: Optional[Dict]
    epsilon: float
    qualifier: Optional[str] = None
    per_type: Dict = field(default_factory=dict)
    infeasible_profiles: int = 0

    @property
    def verdict(self) -> str:
        return "violated" if float(self.gain) > self.epsilon else "compatible"

    @property
    def exit_code(self) -> int:
        if self.verdict == "violated":
            return 2
        return 3 if self.qualifier else 0

    def to_json(self) -> Dict:
        return {
            "notion": self.notion,
            "deviator": self.spec.deviator,
            "regime": self.spec.regime,
            "max_identities": self.spec.max_identities,
            "search_space": self.spec.domain,
            "lattice_step": self.spec.lattice_step,
            "equilibrium_value": float(self.equilibrium_value),
            "best_value": float(self.best_value),
            "gain": float(self.gain),
            "gain_exact": str(self.gain),
            "witness": self.witness,
            "verdict": self.verdict,
            "exit_code": self.exit_code,
            "qualifier": self.qualifier,
            "epsilon": self.epsilon,
            "infeasible_profiles": self.infeasible_profiles,
            "per_type": {str(k): float(v) for k, v in self.per_type.items()},
        }


# ---------------------------------------------------------------------------
# shared enumeration helpers
# ---------------------------------------------------------------------------


def _require_pop(mech) -> PopulationModel:
    if not isinstance(mech, Mechanism):
        raise UnsupportedFormatError("identity checks run on directly bound mechanisms")
    if mech.pop is None:
        raise ConfigurationError("identity checks need a population model on the mechanism")
    return mech.pop


def _is_anonymous(mech: Mechanism) -> bool:
    return mech.format in ANONYMOUS_FORMATS


def _buyer_multisets(model: FiniteTypeModel, n: int, anonymous: bool):
    """(value profile, weight) pairs for n i.i.d. buyers."""
    if n == 0:
        yield (), (Fraction(1) if model.is_exact else 1.0)
        return
    grid = model.grid
    if anonymous:
        for combo in itertools.combinations_with_replacement(range(model.K), n):
            counts = [0] * model.K
            for j in combo:
                counts[j] += 1
            coef = math.factorial(n)
            for c in counts:
                coef //= math.factorial(c)
            w: Num = coef
            for c, m in zip(counts, model.masses):
                if c:
                    w = w * m**c
            yield tuple(grid[j] for j in combo), w
    else:
        for combo in itertools.product(range(model.K), repeat=n):
            w = model.masses[combo[0]]
            for j in combo[1:]:
                w = w * model.masses[j]
            yield tuple(grid[j] for j in combo), w


def _strategies(values: Sequence[Num], max_count: int, anonymous: bool, include_empty=True):
    """All shill/identity report tuples up to the cap, smallest blocks first."""
    out: List[Tuple[Num, ...]] = []
    if include_empty:
        out.append(())
    for m in range(1, max_count + 1):
        if anonymous:
            out.extend(itertools.combinations_with_replacement(values, m))
        else:
            out.extend(itertools.product(values, repeat=m))
    return out


def _profile_space_size(model: FiniteTypeModel, n: int, anonymous: bool) -> int:
    return math.comb(n + model.K - 1, n) if anonymous else model.K**n


def _buyer_payment_total(t: Sequence[Num], nb: int) -> Num:
    total = t[0] - t[0] if t else 0
    for x in t[:nb]:
        total = total + x
    return total


def _as_lattice(mech: Mechanism, step: float) -> Tuple[Mechanism, str]:
    """Project a continuous mechanism onto a declared type lattice."""
    model: ContinuousTypeModel = mech.model
    points = int(round((model.hi - model.lo) / step)) + 1
    grid = discretize(model, points, label=f"{model.label}-lattice")
    kwargs = dict(pop=mech.pop, disclosure=mech.disclosure, label=f"{mech.label}-lattice")
    if mech.format == "posted-price":
        kwargs["price"] = float(mech.price)
    else:
        kwargs["reserve"] = float(mech.reserve)
    if mech.priority is not None:
        kwargs["priority"] = mech.priority
    return Mechanism(mech.format, grid, **kwargs), "grid-certified"


def _zero_for(mech) -> Num:
    return Fraction(0) if (mech.model.is_exact and mech.pop.is_exact) else 0.0


# ---------------------------------------------------------------------------
# bidding-zero test
# ---------------------------------------------------------------------------


def bidding_zero_test(
    mech: Mechanism,
    max_shills: int = defaults.MAX_SHILLS,
    method: str = "exact",
    samples: int = defaults.MC_DEFAULT_SAMPLES,
    seed: Optional[int] = None,
) -> DeviationReport:
    """Expected-revenue effect of seller shills that all report the lowest type.

    A bottom report never beats a live bid, so the only channel is the
    visible participation count. Formats whose payments do not react to
    that count pass with gain exactly zero.
    """
    _require_pop(mech)
    spec = DeviationSpec(
        deviator="seller",
        regime="bayesian",
        max_identities=max_shills,
        domain=f"all-zero shill blocks, |S| <= {max_shills}",
    )
    if method == "mc":
        return _bidding_zero_mc(mech, max_shills, samples, seed, spec)
    if method != "exact":
        raise ConfigurationError(f"unknown method {method!r}")
    if isinstance(mech.model, FiniteTypeModel):
        bottom = mech.model.grid[0]
        values = {
            s: _revenue_with_shills_exact(mech, (bottom,) * s) for s in range(max_shills + 1)
        }
    else:
        values = {s: _revenue_with_zero_shills_continuous(mech, s) for s in range(max_shills + 1)}
    eq = values[0]
    best_s = max(values, key=lambda s: (values[s], -s))
    best = values[best_s]
    return DeviationReport(
        notion="bidding-zero",
        spec=spec,
        equilibrium_value=eq,
        best_value=best,
        gain=best - eq,
        witness={"shills": best_s, "per_shill_report": "lowest type"} if best_s else None,
        epsilon=defaults.IC_EPS_EXACT,
    )


def _revenue_with_shills_exact(mech: Mechanism, shills: Tuple[Num, ...]) -> Num:
    """Expected payment collected from real buyers, shill reports appended."""
    model: FiniteTypeModel = mech.model
    pop = mech.pop
    anonymous = _is_anonymous(mech)
    total = _zero_for(mech)
    for n in pop.support:
        if n < 1:
            continue
        sub = total - total
        for buyers, w in _buyer_multisets(model, n, anonymous):
            _, t = mech.rule(buyers + shills)
            sub = sub + w * _buyer_payment_total(t, n)
        total = total + pop.pi(n) * sub
    return total


def _revenue_with_zero_shills_continuous(mech: Mechanism, s: int) -> float:
    """Buyer-payment expectation with s bottom-report shills, by quadrature.

    Bottom shills lose almost surely, so only the count channel is active:
    count-aware first-price bids shift from the n-bidder to the
    (n + s)-bidder schedule while second-price and posted payments, like
    anything concealed-count, are unchanged profile by profile.
    """
    model: ContinuousTypeModel = mech.model
    pop = mech.pop
    fmt = mech.format
    rho = float(mech.cutoff)
    F = model.cdf
    f = model.pdf
    total = 0.0
    for n in pop.support:
        if n < 1:
            continue
        if fmt == "posted-price":
            price = float(mech.price)
            contrib = price * (1.0 - F(price) ** n)
        elif fmt == "lit-second-price":
            contrib = n * integrate(
                lambda x: (x * F(x) ** (n - 1) - integrate(lambda y: F(y) ** (n - 1), rho, x))
                * f(x),
                rho,
                model.hi,
            )
        elif fmt == "lit-first-price":
            m = n + s
            contrib = integrate(
                lambda x: float(lit_first_price_bid(model, m, x, rho))
                * n
                * F(x) ** (n - 1)
                * f(x),
                rho,
                model.hi,
            )
        elif fmt == "dark-first-price":
            contrib = integrate(
                lambda x: float(mech.dark_bid(x)) * n * F(x) ** (n - 1) * f(x),
                rho,
                model.hi,
            )
        else:
            raise UnsupportedFormatError(f"{fmt} has no continuous shill reduction")
        total += float(pop.pi(n)) * contrib
    return total


def _bidding_zero_mc(mech, max_shills, samples, seed, spec) -> DeviationReport:
    """Paired simulation: every shill count is scored on the same profiles."""
    if samples < 1:
        raise ConfigurationError("need at least one sample")
    _require_pop(mech)
    if seed is None:
        seed = int(np.random.SeedSequence().entropy) % (2**63)
    model = mech.model
    pop = mech.pop
    finite = isinstance(model, FiniteTypeModel)
    rho = float(mech.cutoff)
    fmt = mech.format
    counts = list(range(max_shills + 1))

    lattices: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def fp_lattice(m: int) -> Tuple[np.ndarray, np.ndarray]:
        if m not in lattices:
            if finite:
                xs = model.float_grid()
                ys = np.array([float(mech.lit_bid(m, g)) for g in model.grid])
            else:
                xs = np.linspace(rho, model.hi, defaults.BID_LATTICE_POINTS)
                ys = np.array([float(lit_first_price_bid(model, m, float(x), rho)) for x in xs])
            lattices[m] = (xs, ys)
        return lattices[m]

    def dark_lattice() -> Tuple[np.ndarray, np.ndarray]:
        if -1 not in lattices:
            if finite:
                xs = model.float_grid()
                ys = np.array([float(mech.dark_bid(g)) for g in model.grid])
            else:
                xs = np.linspace(rho, model.hi, defaults.BID_LATTICE_POINTS)
                ys = np.array([float(mech.dark_bid(float(x))) for x in xs])
            lattices[-1] = (xs, ys)
        return lattices[-1]

    ns, ws = pop.pi_arrays()
    base_sum = 0.0
    diff_sum = np.zeros(max_shills + 1)
    diff_sq = np.zeros(max_shills + 1)
    done = 0
    c = 0
    while done < samples:
        m = min(defaults.MC_CHUNK, samples - done)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        n_draw = rng.choice(ns, p=ws, size=m).astype(np.int64)
        vals = model.sample(rng, int(n_draw.sum()))
        lengths = n_draw[n_draw > 0]
        offsets = np.concatenate(([0], np.cumsum(lengths)))
        top, second, tied = row_top_two_f64(np.asarray(vals, dtype=np.float64), offsets)
        sold = top >= rho

        if fmt == "posted-price":
            price = float(mech.price)
            base = np.where(top >= price, price, 0.0)
            per_s = {s: base for s in counts}
        elif fmt == "lit-second-price":
            pay = np.where(tied >= 2, top, np.maximum(second, rho))
            base = np.where(sold, pay, 0.0)
            per_s = {s: base for s in counts}
        elif fmt == "dark-first-price":
            xs, ys = dark_lattice()
            base = np.where(sold, np.interp(np.clip(top, rho, None), xs, ys), 0.0)
            per_s = {s: base for s in counts}
        elif fmt == "lit-first-price":
            per_s = {}
            for s in counts:
                pay = np.zeros(len(top))
                for n in np.unique(lengths):
                    xs, ys = fp_lattice(int(n) + s)
                    mask = lengths == n
                    pay[mask] = np.interp(np.clip(top[mask], rho, None), xs, ys)
                per_s[s] = np.where(sold, pay, 0.0)
            base = per_s[0]
        else:
            raise UnsupportedFormatError(f"{fmt} has no paired shill simulation")

        pad = np.zeros(m)
        pad[n_draw > 0] = base
        base_sum += pad.sum()
        for s in counts:
            d = per_s[s] - base
            diff_sum[s] += d.sum()
            diff_sq[s] += (d * d).sum()
        done += m
        c += 1

    eq = base_sum / samples
    mean_diff = diff_sum / samples
    best_s = int(np.argmax(mean_diff))
    if mean_diff[best_s] <= 0:
        best_s = 0
    gain = mean_diff[best_s]
    var = max(diff_sq[best_s] - samples * gain * gain, 0.0) / max(samples - 1, 1)
    se = math.sqrt(var / samples)
    return DeviationReport(
        notion="bidding-zero",
        spec=spec,
        equilibrium_value=eq,
        best_value=eq + gain,
        gain=gain,
        witness={"shills": best_s, "se": se, "seed": seed, "samples": samples},
        epsilon=defaults.IC_SE_MULTIPLIER * se if se > 0 else defaults.IC_EPS_EXACT,
    )


# ---------------------------------------------------------------------------
# Bayesian seller
# ---------------------------------------------------------------------------


def bayesian_seller_ic(
    mech: Mechanism,
    max_shills: int = defaults.MAX_SHILLS,
    lattice_step: float = defaults.LATTICE_STEP,
) -> DeviationReport:
    """Best committed shill-type assignment versus the honest expected revenue.

    A count-revealing mechanism lets the assignment differ for every
    realized buyer count; a concealed-count mechanism forces one assignment
    across counts. The no-shill assignment is always in the space.
    """
    pop = _require_pop(mech)
    dark = mech.disclosure == "dark"
    finite = isinstance(mech.model, FiniteTypeModel)
    if finite:
        candidates = _strategies(mech.model.grid, max_shills, _is_anonymous(mech))
        cache = None
        qualifier = None
    else:
        steps = int(round((mech.model.hi - mech.model.lo) / lattice_step))
        lattice = tuple(mech.model.lo + i * lattice_step for i in range(steps + 1))
        candidates = _strategies(lattice, max_shills, True)
        cache = _ShillRevenueCache(mech)
        qualifier = "grid-certified"

    sizes = [n for n in pop.support if n >= 1]
    table: Dict[Tuple, Dict[int, Num]] = {}
    for s in candidates:
        if finite:
            table[s] = {n: _seller_value_finite(mech, n, s) for n in sizes}
        else:
            table[s] = {n: cache.value(n, s) for n in sizes}

    def mixed(per_n: Dict[int, Num]) -> Num:
        total: Num = 0
        for n in sizes:
            total = total + pop.pi(n) * per_n[n]
        return total

    eq = mixed(table[()])
    if dark:
        best, best_value = (), eq
        for s in candidates:
            v = mixed(table[s])
            if v > best_value:
                best, best_value = s, v
        witness = {"assignment": [float(x) for x in best]} if best else None
    else:
        best_value = eq - eq
        witness_by_n = {}
        for n in sizes:
            bn, bv = (), table[()][n]
            for s in candidates:
                if table[s][n] > bv:
                    bn, bv = s, table[s][n]
            best_value = best_value + pop.pi(n) * bv
            if bn:
                witness_by_n[n] = [float(x) for x in bn]
        witness = {"assignment_by_count": witness_by_n} if witness_by_n else None

    gain = best_value - eq
    spec = DeviationSpec(
        deviator="seller",
        regime="bayesian",
        max_identities=max_shills,
        domain=(
            f"shill type assignments, |S| <= {max_shills}, "
            + ("one assignment across counts" if dark else "per-count assignments")
        ),
        lattice_step=None if finite else lattice_step,
    )
    return DeviationReport(
        notion="bayes-seller",
        spec=spec,
        equilibrium_value=eq,
        best_value=best_value,
        gain=gain,
        witness=witness,
        epsilon=defaults.IC_EPS_EXACT,
        qualifier=qualifier if float(gain) <= defaults.IC_EPS_EXACT else None,
    )


def _seller_value_finite(mech: Mechanism, n: int, shills: Tuple[Num, ...]) -> Num:
    model: FiniteTypeModel = mech.model
    anonymous = _is_anonymous(mech)
    sub = _zero_for(mech)
    for buyers, w in _buyer_multisets(model, n, anonymous):
        _, t = mech.rule(buyers + shills)
        sub = sub + w * _buyer_payment_total(t, n)
    return sub


class _ShillRevenueCache:
    """Expected buyer payments against fixed shill reports, continuous model.

    Payments depend on the shill block only through a small statistic (the
    highest shill, or for posted prices the accepting count), so values are
    memoized on that statistic and each distinct one costs a single
    one-dimensional integral over the top buyer type.
    """

    def __init__(self, mech: Mechanism):
        self.mech = mech
        self.model: ContinuousTypeModel = mech.model
        self.rho = float(mech.cutoff)
        self._memo: Dict[Tuple, float] = {}
        self._bid_tables: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def _bids(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        if count not in self._bid_tables:
            model = self.model
            xs = np.linspace(self.rho, model.hi, defaults.BID_LATTICE_POINTS)
            if self.mech.format == "dark-first-price":
                ys = np.array([float(self.mech.dark_bid(float(x))) for x in xs])
            else:
                ys = np.array(
                    [float(lit_first_price_bid(model, count, float(x), self.rho)) for x in xs]
                )
            self._bid_tables[count] = (xs, ys)
        return self._bid_tables[count]

    def value(self, n: int, shills: Tuple[float, ...]) -> float:
        fmt = self.mech.format
        model = self.model
        F, f = model.cdf, model.pdf
        if fmt == "posted-price":
            price = float(self.mech.price)
            k = sum(1 for x in shills if x >= price)
            key = (n, k)
            if key not in self._memo:
                s = 1.0 - F(price)
                total = 0.0
                for j in range(1, n + 1):
                    pj = math.comb(n, j) * s**j * (1.0 - s) ** (n - j)
                    total += pj * j / (j + k)
                self._memo[key] = price * total
            return self._memo[key]

        c = max([self.rho] + [float(x) for x in shills])
        if fmt == "lit-second-price":
            key = (n, round(c, 12))
            if key not in self._memo:
                self._memo[key] = n * integrate(
                    lambda x: (x * F(x) ** (n - 1) - integrate(lambda y: F(y) ** (n - 1), c, x))
                    * f(x),
                    c,
                    model.hi,
                )
            return self._memo[key]
        if fmt in ("lit-first-price", "dark-first-price"):
            count = 0 if fmt == "dark-first-price" else n + len(shills)
            key = (n, count, round(c, 12))
            if key not in self._memo:
                xs, ys = self._bids(count)
                self._memo[key] = integrate(
                    lambda x: float(np.interp(x, xs, ys)) * n * F(x) ** (n - 1) * f(x),
                    c,
                    model.hi,
                )
            return self._memo[key]
        raise UnsupportedFormatError(f"{fmt} has no continuous shill reduction")


# ---------------------------------------------------------------------------
# ex-post seller and auctioneer coalition
# ---------------------------------------------------------------------------


def expost_seller_ic(
    mech: Mechanism,
    max_shills: int = defaults.MAX_SHILLS,
    lattice_step: float = defaults.LATTICE_STEP,
    budget: int = defaults.EXACT_ENUM_BUDGET,
) -> DeviationReport:
    """Profile-by-profile best shill response, in expectation over profiles."""
    qualifier = None
    work = mech
    if isinstance(mech.model, ContinuousTypeModel):
        work, qualifier = _as_lattice(mech, lattice_step)
    pop = _require_pop(work)
    model: FiniteTypeModel = work.model
    anonymous = _is_anonymous(work)
    strategies = _strategies(model.grid, max_shills, anonymous)
    sizes = [n for n in pop.support if n >= 1]
    visits = sum(_profile_space_size(model, n, anonymous) for n in sizes) * len(strategies)
    if visits > budget:
        raise BudgetExceededError(f"ex-post seller search needs {visits} rule evaluations")

    zero = _zero_for(work)
    eq = zero
    best = zero
    top_gain = None
    witness = None
    for n in sizes:
        for buyers, w in _buyer_multisets(model, n, anonymous):
            _, t0 = work.rule(buyers)
            base = _buyer_payment_total(t0, n)
            sup = base
            sup_s: Tuple[Num, ...] = ()
            for s in strategies:
                if not s:
                    continue
                _, t = work.rule(buyers + s)
                v = _buyer_payment_total(t, n)
                if v > sup:
                    sup, sup_s = v, s
            eq = eq + pop.pi(n) * w * base
            best = best + pop.pi(n) * w * sup
            local = sup - base
            if sup_s and (top_gain is None or local > top_gain):
                top_gain = local
                witness = {
                    "profile": [float(x) for x in buyers],
                    "shill_reports": [float(x) for x in sup_s],
                    "profile_gain": float(local),
                }
    gain = best - eq
    spec = DeviationSpec(
        deviator="seller",
        regime="ex-post",
        max_identities=max_shills,
        domain=f"per-profile shill reports on a {model.K}-point grid, |S| <= {max_shills}",
        lattice_step=lattice_step if qualifier else None,
    )
    return DeviationReport(
        notion="expost-seller",
        spec=spec,
        equilibrium_value=eq,
        best_value=best,
        gain=gain,
        witness=witness,
        epsilon=defaults.IC_EPS_EXACT,
        qualifier=qualifier if float(gain) <= defaults.IC_EPS_EXACT else None,
    )


def expost_auctioneer_ic(
    mech: Mechanism,
    max_shills: int = defaults.MAX_SHILLS,
    lattice_step: float = defaults.LATTICE_STEP,
    budget: int = defaults.EXACT_ENUM_BUDGET,
) -> DeviationReport:
    """Best per-unit payment a seller-auctioneer coalition can extract.

    For every buyer profile the coalition picks a candidate winner i and
    shill reports; the extracted rate is the candidate's expected payment
    over its expected win probability in the deviated outcome. Profiles
    admitting no positive-probability buyer win contribute their honest
    revenue and are counted in the report.
    """
    qualifier = None
    work = mech
    if isinstance(mech.model, ContinuousTypeModel):
        work, qualifier = _as_lattice(mech, lattice_step)
    pop = _require_pop(work)
    model: FiniteTypeModel = work.model
    anonymous = _is_anonymous(work)
    strategies = _strategies(model.grid, max_shills, anonymous)
    sizes = [n for n in pop.support if n >= 1]
    visits = sum(_profile_space_size(model, n, anonymous) for n in sizes) * len(strategies)
    if visits > budget:
        raise BudgetExceededError(f"ex-post auctioneer search needs {visits} rule evaluations")

    zero = _zero_for(work)
    eq = zero
    best = zero
    infeasible = 0
    top_gain = None
    witness = None
    for n in sizes:
        for buyers, w in _buyer_multisets(model, n, anonymous):
            _, t0 = work.rule(buyers)
            base = _buyer_payment_total(t0, n)
            sup = None
            sup_w = None
            for s in strategies:
                q, t = work.rule(buyers + s)
                for i in range(n):
                    if q[i] > 0:
                        rate = t[i] / q[i]
                        if sup is None or rate > sup:
                            sup, sup_w = rate, (i, s)
            eq = eq + pop.pi(n) * w * base
            if sup is None:
                infeasible += 1
                best = best + pop.pi(n) * w * base
                continue
            best = best + pop.pi(n) * w * sup
            local = sup - base
            if sup_w[1] and (top_gain is None or local > top_gain):
                top_gain = local
                witness = {
                    "profile": [float(x) for x in buyers],
                    "winner_slot": sup_w[0],
                    "shill_reports": [float(x) for x in sup_w[1]],
                    "rate": float(sup),
                }
    gain = best - eq
    spec = DeviationSpec(
        deviator="auctioneer-coalition",
        regime="ex-post",
        max_identities=max_shills,
        domain=(
            f"winner choice and shill reports on a {model.K}-point grid, |S| <= {max_shills}"
        ),
        lattice_step=lattice_step if qualifier else None,
    )
    return DeviationReport(
        notion="expost-auctioneer",
        spec=spec,
        equilibrium_value=eq,
        best_value=best,
        gain=gain,
        witness=witness,
        epsilon=defaults.IC_EPS_EXACT,
        qualifier=qualifier if float(gain) <= defaults.IC_EPS_EXACT else None,
        infeasible_profiles=infeasible,
    )


# ---------------------------------------------------------------------------
# buyers
# ---------------------------------------------------------------------------


def bayesian_buyer_ic(
    mech: Mechanism,
    max_identities: int = defaults.MAX_IDENTITIES,
    lattice_step: float = defaults.LATTICE_STEP,
) -> DeviationReport:
    """Multi-identity interim payoff versus truthful single-identity payoff.

    The deviator fixes its identity reports before types are drawn; rivals
    follow the participant prior. Count-revealing formats let the block
    vary with the rival count, concealed-count formats do not.
    """
    _require_pop(mech)
    if isinstance(mech.model, FiniteTypeModel):
        return _bayes_buyer_finite(mech, max_identities)
    return _bayes_buyer_continuous(mech, max_identities, lattice_step)


def _bayes_buyer_finite(mech: Mechanism, max_identities: int) -> DeviationReport:
    model: FiniteTypeModel = mech.model
    pop = mech.pop
    anonymous = _is_anonymous(mech)
    dark = mech.disclosure == "dark"
    strategies = _strategies(model.grid, max_identities, anonymous, include_empty=False)
    sizes = list(pop.participant_support)
    zero = _zero_for(mech)

    def payoff(theta: Num, n: int, reports: Tuple[Num, ...]) -> Num:
        m = len(reports)
        val = zero
        for rivals, w in _buyer_multisets(model, n - 1, anonymous):
            q, t = mech.rule(reports + rivals)
            val = val + w * (theta * sum(q[:m]) - sum(t[:m]))
        return val

    per_type: Dict[Num, Num] = {}
    witness = None
    top_gain = None
    for theta in model.grid:
        eq_theta = zero
        for n in sizes:
            eq_theta = eq_theta + pop.p(n) * payoff(theta, n, (theta,))
        best_s: Union[Tuple, Dict, None] = None
        if dark:
            best_theta = eq_theta
            for s in strategies:
                v = zero
                for n in sizes:
                    v = v + pop.p(n) * payoff(theta, n, s)
                if v > best_theta:
                    best_theta, best_s = v, s
        else:
            best_theta = zero
            by_n: Dict[int, Tuple] = {}
            for n in sizes:
                bn, bv = None, payoff(theta, n, (theta,))
                for s in strategies:
                    v = payoff(theta, n, s)
                    if v > bv:
                        bn, bv = s, v
                best_theta = best_theta + pop.p(n) * bv
                if bn is not None:
                    by_n[n] = bn
            best_s = by_n or None
        g = best_theta - eq_theta
        per_type[theta] = g
        if top_gain is None or g > top_gain:
            top_gain = g
            if best_s is not None:
                witness = {
                    "theta": float(theta),
                    "reports": _jsonable_strategy(best_s),
                    "gain": float(g),
                }
    gain = max(per_type.values())
    spec = DeviationSpec(
        deviator="buyer",
        regime="bayesian",
        max_identities=max_identities,
        domain=f"identity report blocks on the {model.K}-point grid",
    )
    return DeviationReport(
        notion="bayes-buyer",
        spec=spec,
        equilibrium_value=zero,
        best_value=gain,
        gain=gain,
        witness=witness if float(gain) > 0 else None,
        epsilon=defaults.IC_EPS_EXACT,
        per_type=per_type,
    )


def _jsonable_strategy(s) -> object:
    if isinstance(s, dict):
        return {int(k): [float(x) for x in v] for k, v in s.items()}
    return [float(x) for x in s]


def _bayes_buyer_continuous(
    mech: Mechanism, max_identities: int, lattice_step: float
) -> DeviationReport:
    """Identity-block search on a declared lattice with closed rival reductions.

    A block matters only through a small statistic: its top report (plus,
    for second-price rules, the runner-up, which can set the price), its
    size when bids are count-aware, and its accepting count under a posted
    price. Candidate blocks are encoded as (size, top report, rest report).
    """
    model: ContinuousTypeModel = mech.model
    pop = mech.pop
    fmt = mech.format
    rho = float(mech.cutoff)
    steps = int(round((model.hi - model.lo) / lattice_step))
    lattice = [model.lo + i * lattice_step for i in range(steps + 1)]
    sizes = list(pop.participant_support)
    dark = mech.disclosure == "dark"
    F = model.cdf

    bid_memo: Dict[Tuple[int, float], float] = {}
    cum_memo: Dict[Tuple[int, float], float] = {}

    def fp_bid(count: int, x: float) -> float:
        key = (count, round(x, 12))
        if key not in bid_memo:
            if fmt == "dark-first-price":
                bid_memo[key] = float(mech.dark_bid(x))
            else:
                bid_memo[key] = float(lit_first_price_bid(model, count, x, rho))
        return bid_memo[key]

    def cum_rival_cdf(n: int, x: float) -> float:
        """Integral of F^(n-1) from the support bottom up to x."""
        key = (n, round(x, 12))
        if key not in cum_memo:
            cum_memo[key] = integrate(lambda y: F(y) ** (n - 1), model.lo, x)
        return cum_memo[key]

    def per_n_payoff(theta: float, n: int, m: int, x1: float, x2: float) -> float:
        if fmt == "posted-price":
            price = float(mech.price)
            acc = (1 if x1 >= price else 0) + (m - 1) * (1 if x2 >= price else 0)
            if acc == 0:
                return 0.0
            s = 1.0 - F(price)
            share = 0.0
            for j in range(n):
                pj = math.comb(n - 1, j) * s**j * (1.0 - s) ** (n - 1 - j)
                share += pj * acc / (acc + j)
            return share * (theta - price)
        if x1 < rho:
            return 0.0
        win = F(x1) ** (n - 1)
        if fmt == "lit-first-price":
            return win * (theta - fp_bid(n - 1 + m, x1))
        if fmt == "dark-first-price":
            return win * (theta - fp_bid(0, x1))
        if fmt == "lit-second-price":
            floor = max(x2, rho)
            pay = x1 * win - (cum_rival_cdf(n, x1) - cum_rival_cdf(n, min(floor, x1)))
            return theta * win - pay
        raise UnsupportedFormatError(f"{fmt} has no closed rival reduction")

    candidates: List[Tuple[int, float, float]] = []
    for m in range(1, max_identities + 1):
        for x1 in lattice:
            if fmt == "lit-second-price" and m > 1:
                for x2 in lattice:
                    if x2 <= x1:
                        candidates.append((m, x1, x2))
            else:
                candidates.append((m, x1, x1 if m > 1 else model.lo))

    per_type: Dict[float, float] = {}
    witness = None
    top_gain = None
    for theta in lattice:
        eq_theta = sum(
            float(pop.p(n)) * per_n_payoff(theta, n, 1, theta, model.lo) for n in sizes
        )
        best_c = None
        if dark:
            best_theta = eq_theta
            for cand in candidates:
                v = sum(float(pop.p(n)) * per_n_payoff(theta, n, *cand) for n in sizes)
                if v > best_theta:
                    best_theta, best_c = v, cand
        else:
            best_theta = 0.0
            for n in sizes:
                bv = per_n_payoff(theta, n, 1, theta, model.lo)
                for cand in candidates:
                    v = per_n_payoff(theta, n, *cand)
                    if v > bv:
                        bv, best_c = v, cand
                best_theta += float(pop.p(n)) * bv
        g = best_theta - eq_theta
        per_type[theta] = g
        if top_gain is None or g > top_gain:
            top_gain = g
            if best_c is not None:
                witness = {
                    "theta": theta,
                    "identities": best_c[0],
                    "top_report": best_c[1],
                    "rest_report": best_c[2],
                    "gain": g,
                }
    gain = max(per_type.values())
    eps = 1e-6
    spec = DeviationSpec(
        deviator="buyer",
        regime="bayesian",
        max_identities=max_identities,
        domain="identity blocks on the declared type lattice",
        lattice_step=lattice_step,
    )
    return DeviationReport(
        notion="bayes-buyer",
        spec=spec,
        equilibrium_value=0.0,
        best_value=gain,
        gain=gain,
        witness=witness if gain > eps else None,
        epsilon=eps,
        qualifier="grid-certified" if gain <= eps else None,
        per_type=per_type,
    )


def expost_buyer_ic(
    mech: Mechanism,
    max_identities: int = defaults.MAX_IDENTITIES,
    lattice_step: float = defaults.LATTICE_STEP,
    budget: int = defaults.EXACT_ENUM_BUDGET,
) -> DeviationReport:
    """Per-profile best identity block, averaged over own type and rivals."""
    qualifier = None
    work = mech
    if isinstance(mech.model, ContinuousTypeModel):
        work, qualifier = _as_lattice(mech, lattice_step)
    pop = _require_pop(work)
    model: FiniteTypeModel = work.model
    anonymous = _is_anonymous(work)
    strategies = _strategies(model.grid, max_identities, anonymous, include_empty=False)
    sizes = list(pop.participant_support)
    visits = (
        model.K
        * sum(_profile_space_size(model, n - 1, anonymous) for n in sizes)
        * len(strategies)
    )
    if visits > budget:
        raise BudgetExceededError(f"ex-post buyer search needs {visits} rule evaluations")

    zero = _zero_for(work)
    gain = zero
    per_type: Dict[Num, Num] = {g: zero for g in model.grid}
    witness = None
    top_local = None
    for n in sizes:
        for ti, theta in enumerate(model.grid):
            f_theta = model.masses[ti]
            for rivals, w in _buyer_multisets(model, n - 1, anonymous):
                q0, t0 = work.rule((theta,) + rivals)
                base = theta * q0[0] - t0[0]
                sup = base
                sup_s: Optional[Tuple[Num, ...]] = None
                for s in strategies:
                    m = len(s)
                    q, t = work.rule(s + rivals)
                    v = theta * sum(q[:m]) - sum(t[:m])
                    if v > sup:
                        sup, sup_s = v, s
                local = sup - base
                gain = gain + pop.p(n) * f_theta * w * local
                per_type[theta] = per_type[theta] + pop.p(n) * w * local
                if sup_s and (top_local is None or local > top_local):
                    top_local = local
                    witness = {
                        "theta": float(theta),
                        "rivals": [float(x) for x in rivals],
                        "reports": [float(x) for x in sup_s],
                        "profile_gain": float(local),
                    }
    spec = DeviationSpec(
        deviator="buyer",
        regime="ex-post",
        max_identities=max_identities,
        domain=f"per-profile identity blocks on a {model.K}-point grid",
        lattice_step=lattice_step if qualifier else None,
    )
    return DeviationReport(
        notion="expost-buyer",
        spec=spec,
        equilibrium_value=zero,
        best_value=gain,
        gain=gain,
        witness=witness,
        epsilon=defaults.IC_EPS_EXACT,
        qualifier=qualifier if float(gain) <= defaults.IC_EPS_EXACT else None,
        per_type=per_type,
    )


def identity_count_sweep(
    mech: Mechanism,
    counts: Iterable[int] = defaults.IDENTITY_SWEEP,
    budget: int = defaults.EXACT_ENUM_BUDGET,
) -> Dict[int, Num]:
    """Ex-post buyer gain restricted to uniform identity blocks of given sizes.

    Every identity in a block files one common report, the binding
    direction for share and threshold rules, which keeps very large blocks
    enumerable. Returns the best aggregate gain per block size.
    """
    pop = _require_pop(mech)
    model = mech.model
    if not isinstance(model, FiniteTypeModel):
        raise UnsupportedFormatError("the identity sweep runs on finite grids")
    counts = list(counts)
    anonymous = _is_anonymous(mech)
    sizes = list(pop.participant_support)
    visits = (
        model.K
        * sum(_profile_space_size(model, n - 1, anonymous) for n in sizes)
        * model.K
        * len(counts)
    )
    if visits > budget:
        raise BudgetExceededError(f"identity sweep needs {visits} rule evaluations")
    out: Dict[int, Num] = {}
    for m in counts:
        total = _zero_for(mech)
        for n in sizes:
            for ti, theta in enumerate(model.grid):
                f_theta = model.masses[ti]
                for rivals, w in _buyer_multisets(model, n - 1, anonymous):
                    q0, t0 = mech.rule((theta,) + rivals)
                    base = theta * q0[0] - t0[0]
                    sup = base
                    for x in model.grid:
                        block = (x,) * m
                        q, t = mech.rule(block + rivals)
                        v = theta * sum(q[:m]) - sum(t[:m])
                        if v > sup:
                            sup = v
                    total = total + pop.p(n) * f_theta * w * (sup - base)
        out[m] = total
    return out
