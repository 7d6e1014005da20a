"""Revenue engines and payoff accounting.

Three independent routes to the same number, kept deliberately separate so
they can cross-check each other:

* :func:`expected_revenue_exact` enumerates every profile of a finite grid,
  in rational arithmetic when the inputs are rational;
* :func:`expected_revenue_mc` simulates, with deterministic per-chunk
  substreams so a (seed, chunk size) pair pins the estimate bit-for-bit;
* :func:`dark_revenue_formula` evaluates the virtual-value expression that
  the theory says both of the above must equal.

Also here: interim win/payment curves and the posted-price optimizer.
"""

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from . import defaults
from ._speed import row_top_two_f64, row_top_two_i64
from .distributions import (
    ContinuousTypeModel,
    FiniteTypeModel,
    Num,
    PopulationModel,
    TypeModel,
    exactify,
)
from .equilibrium import dark_first_price_bid, lit_first_price_bid
from .errors import (
    BudgetExceededError,
    ConfigurationError,
    DomainError,
    RegularityError,
    UnsupportedFormatError,
)
from .mechanisms import ANONYMOUS_FORMATS, InducedDarkMechanism, Mechanism
from .numerics import integrate

__all__ = [
    "RevenueEstimate",
    "InterimQuantities",
    "expected_revenue_exact",
    "expected_revenue_mc",
    "interim_quantities",
    "dark_revenue_formula",
    "optimal_posted_price",
]


@dataclass(frozen=True)
class RevenueEstimate:
    """A point estimate of expected seller revenue.

    Exact-engine estimates carry a standard error of exactly zero and count
    the profiles enumerated as ``samples``.
    """

    value: Num
    se: float
    samples: int
    engine: str
    seed: Optional[int] = None
    per_n: Dict[int, Num] = field(default_factory=dict, compare=False)

    def agrees_with(self, other: "RevenueEstimate", multiplier: float = 3.0) -> bool:
        """Whether the two estimates differ by at most ``multiplier`` combined s.e."""
        spread = multiplier * math.hypot(self.se, other.se)
        return abs(float(self.value) - float(other.value)) <= max(spread, 1e-15)


@dataclass(frozen=True)
class InterimQuantities:
    """Interim win probability and payment for one type, with the payoff they imply."""

    theta: Num
    Q: Num
    T: Num
    U: Num
    per_n_Q: Dict[int, Num]
    per_n_T: Dict[int, Num]
    per_n_U: Dict[int, Num]
    method: str
    se_Q: float = 0.0
    se_T: float = 0.0


def _require_pop(mech: Mechanism) -> PopulationModel:
    if mech.pop is None:
        raise ConfigurationError("this computation needs a population model on the mechanism")
    return mech.pop


def _multiset_weight(counts: Sequence[int], masses: Sequence[Num]) -> Num:
    """Probability of drawing a given multiset of grid indices i.i.d."""
    n = sum(counts)
    coef = math.factorial(n)
    for c in counts:
        coef //= math.factorial(c)
    w: Num = coef
    for c, m in zip(counts, masses):
        if c:
            w = w * m**c
    return w


def _profiles_with_weights(model: FiniteTypeModel, n: int, anonymous: bool):
    """Yield (index profile, probability) pairs covering all of Theta^n."""
    K = model.K
    if anonymous:
        for combo in itertools.combinations_with_replacement(range(1, K + 1), n):
            counts = [0] * K
            for k in combo:
                counts[k - 1] += 1
            yield combo, _multiset_weight(counts, model.masses)
    else:
        for combo in itertools.product(range(1, K + 1), repeat=n):
            w: Num = model.masses[combo[0] - 1]
            for k in combo[1:]:
                w = w * model.masses[k - 1]
            yield combo, w


def _profile_count(K: int, n: int, anonymous: bool) -> int:
    return math.comb(n + K - 1, n) if anonymous else K**n


def _is_anonymous(mech) -> bool:
    if isinstance(mech, InducedDarkMechanism):
        return all(s.mechanism.format in ANONYMOUS_FORMATS for s in mech.policy.signals)
    return mech.format in ANONYMOUS_FORMATS


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------


def expected_revenue_exact(
    mech: Union[Mechanism, InducedDarkMechanism],
    budget: int = defaults.EXACT_ENUM_BUDGET,
) -> RevenueEstimate:
    """Expected total payment under the designer's population prior.

    Enumerates the full profile space for every population size in the
    prior's support. Anonymous formats are enumerated over multisets with
    multinomial weights, which is exact and exponentially cheaper.
    """
    model = mech.model
    if not isinstance(model, FiniteTypeModel):
        raise UnsupportedFormatError("exact enumeration needs a finite type grid")
    pop = _require_pop(mech)
    anonymous = _is_anonymous(mech)

    sizes = [n for n in pop.support if n >= 1]
    visits = sum(_profile_count(model.K, n, anonymous) for n in sizes)
    if visits > budget:
        raise BudgetExceededError(
            f"exact enumeration needs {visits} profiles, budget is {budget}"
        )

    grid = model.grid
    zero: Num = Fraction(0) if (model.is_exact and pop.is_exact) else 0.0
    total = zero
    per_n: Dict[int, Num] = {}
    for n in sizes:
        sub = zero
        for combo, w in _profiles_with_weights(model, n, anonymous):
            _, t = mech.rule(tuple(grid[k - 1] for k in combo))
            sub = sub + w * sum(t)
        contribution = pop.pi(n) * sub
        per_n[n] = contribution
        total = total + contribution
    return RevenueEstimate(value=total, se=0.0, samples=visits, engine="exact", per_n=per_n)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def _bid_lattice(fn: Callable[[float], float], lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    xs = np.linspace(lo, hi, defaults.BID_LATTICE_POINTS)
    ys = np.array([fn(float(x)) for x in xs])
    return xs, ys


class _FiniteSampler:
    """Draws (n, type-index) chunks and reduces them to per-sample revenue."""

    def __init__(self, mech: Mechanism):
        self.mech = mech
        self.model: FiniteTypeModel = mech.model
        self.pop = _require_pop(mech)
        self.ns, self.ws = self.pop.pi_arrays()
        self.grid = self.model.float_grid()
        self.cum = np.cumsum(self.model.float_masses())
        self.K = self.model.K
        self.k0 = mech._k0
        self.n_cap = int(self.ns.max())
        self._tables: Dict[str, np.ndarray] = {}

    def _fp_table(self) -> np.ndarray:
        if "fp" not in self._tables:
            tab = np.zeros((self.n_cap + 1, self.K + 1))
            for n in range(1, self.n_cap + 1):
                for k in range(self.k0, self.K + 1):
                    tab[n, k] = float(self.mech.lit_bid(n, self.model.grid[k - 1]))
            self._tables["fp"] = tab
        return self._tables["fp"]

    def _tcfp_table(self) -> np.ndarray:
        if "tcfp" not in self._tables:
            tab = np.zeros((self.n_cap + 1, self.K + 1))
            for n in range(1, self.n_cap + 1):
                for k in range(self.k0, self.K + 1):
                    tab[n, k] = float(self.mech.tc_payment(n, k))
            self._tables["tcfp"] = tab
        return self._tables["tcfp"]

    def _dark_table(self) -> np.ndarray:
        if "dark" not in self._tables:
            tab = np.zeros(self.K + 1)
            for k in range(self.k0, self.K + 1):
                tab[k] = float(self.mech.dark_bid(self.model.grid[k - 1]))
            self._tables["dark"] = tab
        return self._tables["dark"]

    def _reduce(self, flat: np.ndarray, offsets: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        mech = self.mech
        fmt = mech.format
        grid = self.grid
        k0 = self.k0
        top, second, tied = row_top_two_i64(flat, offsets)
        sold = top >= k0
        top_val = np.where(sold, grid[np.maximum(top, 1) - 1], 0.0)

        if fmt == "posted-price":
            return np.where(sold, float(mech.price), 0.0)

        if fmt == "lit-second-price":
            second_val = np.where(second >= 1, grid[np.maximum(second, 1) - 1], -np.inf)
            unique_pay = np.maximum(second_val, float(mech.reserve))
            return np.where(sold, np.where(tied >= 2, top_val, unique_pay), 0.0)

        if fmt == "lit-first-price":
            tab = self._fp_table()
            return np.where(sold, tab[lengths, np.where(sold, top, k0)], 0.0)

        if fmt == "dark-first-price":
            tab = self._dark_table()
            return np.where(sold, tab[np.where(sold, top, k0)], 0.0)

        if fmt == "tie-corrected-second-price":
            k_t = np.maximum(second, k0)
            at_kt = np.add.reduceat(
                (flat == np.repeat(k_t, lengths)).astype(np.int64), offsets[:-1]
            )
            c = at_kt - (top == k_t)
            theta_t = grid[np.maximum(k_t, 1) - 1]
            theta_w = grid[np.minimum(k_t, self.K - 1)]
            blend = (theta_t + c * theta_w) / (c + 1)
            unique_pay = np.where(c == 0, theta_t, blend)
            return np.where(sold, np.where(tied >= 2, top_val, unique_pay), 0.0)

        if fmt == "tie-corrected-first-price":
            tab = self._tcfp_table()
            unique_pay = tab[lengths, np.where(sold, top, k0)]
            return np.where(sold, np.where(tied >= 2, top_val, unique_pay), 0.0)

        if fmt == "fixed-priority-second-price":
            return self._fixed_priority_rows(flat, offsets)

        raise UnsupportedFormatError(fmt)  # pragma: no cover

    def _fixed_priority_rows(self, flat: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        mech = self.mech
        rows = len(offsets) - 1
        out = np.zeros(rows)
        ranks = [mech._rank(s) for s in range(self.n_cap)]
        flat_l = flat.tolist()
        k0, K = self.k0, self.K
        for r in range(rows):
            row = flat_l[offsets[r] : offsets[r + 1]]
            top = max(row)
            if top < k0:
                continue
            winner = min((i for i, k in enumerate(row) if k == top), key=lambda i: ranks[i])
            rival_top = max((k for i, k in enumerate(row) if i != winner), default=0)
            for k in range(k0, K + 1):
                if k > rival_top:
                    out[r] = self.grid[k - 1]
                    break
                if k == rival_top:
                    best_rival_rank = min(
                        ranks[i] for i, kk in enumerate(row) if kk == k and i != winner
                    )
                    if ranks[winner] < best_rival_rank:
                        out[r] = self.grid[k - 1]
                        break
        return out


class _ContinuousSampler:
    """Chunk sampler for continuous models, with memoized bid lattices."""

    def __init__(self, mech: Mechanism):
        self.mech = mech
        self.model: ContinuousTypeModel = mech.model
        self.pop = _require_pop(mech)
        self.ns, self.ws = self.pop.pi_arrays()
        self.rho = float(mech.cutoff)
        self._lattices: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def _lit_lattice(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        if n not in self._lattices:
            model, rho = self.model, self.rho
            self._lattices[n] = _bid_lattice(
                lambda x: float(lit_first_price_bid(model, n, x, rho)), rho, model.hi
            )
        return self._lattices[n]

    def _dark_lattice(self) -> Tuple[np.ndarray, np.ndarray]:
        if 0 not in self._lattices:
            model, rho = self.model, self.rho
            self._lattices[0] = _bid_lattice(
                lambda x: float(dark_first_price_bid(model, self.pop, x, rho)), rho, model.hi
            )
        return self._lattices[0]


def _thread_count() -> int:
    raw = os.environ.get(defaults.ENV_THREADS, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def expected_revenue_mc(
    mech: Union[Mechanism, InducedDarkMechanism],
    samples: int = defaults.MC_DEFAULT_SAMPLES,
    seed: Optional[int] = None,
    chunk: int = defaults.MC_CHUNK,
) -> RevenueEstimate:
    """Simulated expected revenue with a standard error.

    Sampling is split into fixed-size chunks; chunk ``c`` uses the random
    substream ``SeedSequence(seed, spawn_key=(c,))``, so the estimate depends
    only on (seed, chunk size), not on thread count. Mechanisms sharing a
    seed and population see identical profiles, which gives common random
    numbers across estimates for free.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    if isinstance(mech, InducedDarkMechanism):
        sampler = _InducedSampler(mech)
    elif isinstance(mech.model, FiniteTypeModel):
        sampler = _FiniteSampler(mech)
    else:
        sampler = _ContinuousSampler(mech)
    if seed is None:
        seed = int(np.random.SeedSequence().entropy) % (2**63)

    sizes = [chunk] * (samples // chunk)
    if samples % chunk:
        sizes.append(samples % chunk)

    per_n_sums: Dict[int, float] = {}

    def run_chunk(c: int) -> Tuple[float, float, Dict[int, float]]:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        rev, n_draw = _chunk_revenue(sampler, rng, sizes[c])
        by_n: Dict[int, float] = {}
        for n in np.unique(n_draw):
            by_n[int(n)] = float(rev[n_draw == n].sum())
        return float(rev.sum()), float((rev * rev).sum()), by_n

    threads = _thread_count()
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_chunk, range(len(sizes))))
    else:
        results = [run_chunk(c) for c in range(len(sizes))]

    s1 = 0.0
    s2 = 0.0
    for a, b, by_n in results:
        s1 += a
        s2 += b
        for n, v in by_n.items():
            per_n_sums[n] = per_n_sums.get(n, 0.0) + v
    mean = s1 / samples
    if samples > 1:
        var = max(s2 - samples * mean * mean, 0.0) / (samples - 1)
        se = math.sqrt(var / samples)
    else:
        se = 0.0
    per_n = {n: v / samples for n, v in sorted(per_n_sums.items())}
    return RevenueEstimate(value=mean, se=se, samples=samples, engine="mc", seed=seed, per_n=per_n)


def _chunk_revenue(sampler, rng: np.random.Generator, m: int):
    """Chunk evaluation returning (revenue array, population size array).

    Population sizes are drawn first and types second, in a fixed order, so
    two mechanisms over the same model and population consume identical
    random streams (the common-random-numbers contract).
    """
    n_draw = rng.choice(sampler.ns, p=sampler.ws, size=m)
    if isinstance(sampler, _InducedSampler):
        return sampler.revenue_with_sizes(rng, n_draw)
    if isinstance(sampler, _FiniteSampler):
        flat_u = rng.random(int(n_draw.sum()))
        idx = np.minimum(
            np.searchsorted(sampler.cum, flat_u, side="right") + 1, sampler.K
        ).astype(np.int64)
        reduce = lambda off, lens: sampler._reduce(idx, off, lens)
    else:
        types = sampler.model.sample(rng, int(n_draw.sum()))
        reduce = lambda off, lens: _continuous_reduce(sampler, types, off, lens)
    rev = np.zeros(m)
    live = n_draw > 0
    if live.any():
        lengths = n_draw[live].astype(np.int64)
        offsets = np.concatenate(([0], np.cumsum(lengths)))
        rev[live] = reduce(offsets, lengths)
    return rev, n_draw


def _continuous_reduce(sampler: _ContinuousSampler, types, offsets, lengths) -> np.ndarray:
    top, second, tied = row_top_two_f64(types, offsets)
    fmt = sampler.mech.format
    if fmt == "posted-price":
        price = float(sampler.mech.price)
        return np.where(top >= price, price, 0.0)
    sold = top >= sampler.rho
    if fmt == "lit-second-price":
        pay = np.where(tied >= 2, top, np.maximum(second, sampler.rho))
    elif fmt == "lit-first-price":
        pay = np.zeros(len(top))
        for n in np.unique(lengths):
            xs, ys = sampler._lit_lattice(int(n))
            mask = lengths == n
            pay[mask] = np.interp(np.clip(top[mask], sampler.rho, None), xs, ys)
    elif fmt == "dark-first-price":
        xs, ys = sampler._dark_lattice()
        pay = np.interp(np.clip(top, sampler.rho, None), xs, ys)
    else:
        raise UnsupportedFormatError(f"{fmt} has no continuous sampler")
    return np.where(sold, pay, 0.0)


class _InducedSampler:
    """Samples a disclosure-policy composite by routing each size to its block."""

    def __init__(self, mech: InducedDarkMechanism):
        self.mech = mech
        self.model = mech.model
        self.pop = _require_pop(mech)
        self.ns, self.ws = self.pop.pi_arrays()
        if not isinstance(self.model, FiniteTypeModel):
            raise UnsupportedFormatError("induced mechanisms simulate on finite grids only")
        self._by_n: Dict[int, _FiniteSampler] = {}

    def _sampler_for(self, n: int) -> _FiniteSampler:
        if n not in self._by_n:
            self._by_n[n] = _FiniteSampler(self.mech.policy.signal_for(n).mechanism)
        return self._by_n[n]

    def revenue_with_sizes(self, rng: np.random.Generator, n_draw):
        m = len(n_draw)
        model = self.model
        flat_u = rng.random(int(n_draw.sum()))
        cum = np.cumsum(model.float_masses())
        idx = np.minimum(np.searchsorted(cum, flat_u, side="right") + 1, model.K).astype(np.int64)
        rev = np.zeros(m)
        live = n_draw > 0
        if not live.any():
            return rev, n_draw
        lengths = n_draw[live].astype(np.int64)
        offsets = np.concatenate(([0], np.cumsum(lengths)))
        out = np.zeros(len(lengths))
        for n in np.unique(lengths):
            sub = self._sampler_for(int(n))
            mask = lengths == n
            starts = offsets[:-1][mask]
            rows = np.concatenate([idx[s : s + n] for s in starts]) if mask.any() else idx[:0]
            sub_offsets = np.arange(0, (mask.sum() + 1) * n, n, dtype=np.int64)
            out[mask] = sub._reduce(rows, sub_offsets, np.full(int(mask.sum()), n, dtype=np.int64))
        rev[live] = out
        return rev, n_draw


# ---------------------------------------------------------------------------
# interim quantities
# ---------------------------------------------------------------------------


def interim_quantities(
    mech: Mechanism,
    theta: Num,
    method: str = "auto",
    samples: int = 100_000,
    seed: Optional[int] = None,
    budget: int = defaults.EXACT_ENUM_BUDGET,
) -> InterimQuantities:
    """Win probability and expected payment for a report from the inside view.

    The participant knows it is present, so opponents are distributed by the
    participant prior p(n) with n - 1 i.i.d. rivals. Finite grids enumerate
    rivals exactly; continuous models use the closed opponent reduction per
    format; ``method="mc"`` forces the sampling fallback.
    """
    pop = _require_pop(mech)
    if method not in ("auto", "exact", "closed", "mc"):
        raise ConfigurationError(f"unknown interim method {method!r}")
    if method == "mc":
        return _interim_mc(mech, theta, samples, seed)
    if isinstance(mech.model, FiniteTypeModel):
        if method == "closed":
            raise ConfigurationError("closed-form interim reduction applies to continuous models")
        return _interim_exact_finite(mech, theta, budget)
    if method == "exact":
        raise ConfigurationError("exact interim enumeration applies to finite grids")
    return _interim_closed_continuous(mech, theta)


def _aggregate_interim(theta, per_q, per_t, pop, method, se_q=0.0, se_t=0.0):
    per_u = {n: theta * per_q[n] - per_t[n] for n in per_q}
    Q = sum(pop.p(n) * per_q[n] for n in per_q)
    T = sum(pop.p(n) * per_t[n] for n in per_t)
    return InterimQuantities(
        theta=theta,
        Q=Q,
        T=T,
        U=theta * Q - T,
        per_n_Q=per_q,
        per_n_T=per_t,
        per_n_U=per_u,
        method=method,
        se_Q=se_q,
        se_T=se_t,
    )


def _interim_exact_finite(mech: Mechanism, theta: Num, budget: int) -> InterimQuantities:
    model: FiniteTypeModel = mech.model
    pop = mech.pop
    theta = exactify(theta) if model.is_exact else theta
    model.index_of(theta)  # raises DomainError off the grid
    anonymous = _is_anonymous(mech)
    sizes = list(pop.participant_support)
    visits = sum(_profile_count(model.K, n - 1, anonymous) for n in sizes)
    if visits > budget:
        raise BudgetExceededError(f"interim enumeration needs {visits} rival profiles")

    grid = model.grid
    per_q: Dict[int, Num] = {}
    per_t: Dict[int, Num] = {}
    zero: Num = Fraction(0) if (model.is_exact and pop.is_exact) else 0.0
    for n in sizes:
        qn = zero
        tn = zero
        for combo, w in _profiles_with_weights(model, n - 1, anonymous):
            profile = (theta,) + tuple(grid[k - 1] for k in combo)
            q, t = mech.rule(profile)
            qn = qn + w * q[0]
            tn = tn + w * t[0]
        per_q[n] = qn
        per_t[n] = tn
    return _aggregate_interim(theta, per_q, per_t, pop, "exact")


def _interim_closed_continuous(mech: Mechanism, theta: Num) -> InterimQuantities:
    model: ContinuousTypeModel = mech.model
    pop = mech.pop
    x = float(theta)
    if not model.lo <= x <= model.hi:
        raise DomainError(f"type {x} outside support")
    fmt = mech.format
    per_q: Dict[int, float] = {}
    per_t: Dict[int, float] = {}

    if fmt == "posted-price":
        price = float(mech.price)
        s = 1.0 - model.cdf(price)
        for n in pop.participant_support:
            if x < price:
                per_q[n] = per_t[n] = 0.0
                continue
            qn = (1.0 - (1.0 - s) ** n) / (n * s) if s > 0 else 1.0
            per_q[n] = qn
            per_t[n] = price * qn
        return _aggregate_interim(x, per_q, per_t, pop, "closed")

    if fmt not in ("lit-second-price", "lit-first-price", "dark-first-price"):
        raise UnsupportedFormatError(f"{fmt} has no closed interim reduction")

    rho = float(mech.reserve)
    for n in pop.participant_support:
        if x < rho:
            per_q[n] = per_t[n] = 0.0
            continue
        win = model.cdf(x) ** (n - 1)
        per_q[n] = win
        if fmt == "lit-second-price":
            shade = integrate(lambda y: model.cdf(y) ** (n - 1), rho, x)
            per_t[n] = x * win - shade
        elif fmt == "lit-first-price":
            per_t[n] = win * float(lit_first_price_bid(model, n, x, rho))
        else:
            per_t[n] = win * float(dark_first_price_bid(model, pop, x, rho))
    return _aggregate_interim(x, per_q, per_t, pop, "closed")


def _interim_mc(mech: Mechanism, theta: Num, samples: int, seed: Optional[int]) -> InterimQuantities:
    pop = mech.pop
    model = mech.model
    if seed is None:
        seed = int(np.random.SeedSequence().entropy) % (2**63)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    sizes = sorted(pop.participant_support)
    weights = np.array([float(pop.p(n)) for n in sizes])
    weights = weights / weights.sum()
    finite = isinstance(model, FiniteTypeModel)
    theta_val = exactify(theta) if (finite and model.is_exact) else float(theta)

    draws = rng.choice(np.array(sizes), p=weights, size=samples)
    q_sum: Dict[int, float] = {n: 0.0 for n in sizes}
    t_sum: Dict[int, float] = {n: 0.0 for n in sizes}
    counts: Dict[int, int] = {n: 0 for n in sizes}
    q_all = np.zeros(samples)
    t_all = np.zeros(samples)
    for i, n in enumerate(draws):
        n = int(n)
        rivals = model.sample(rng, n - 1)
        profile = (theta_val,) + tuple(
            model.grid[model.index_of(float(r)) - 1] if (finite and model.is_exact) else float(r)
            for r in rivals
        )
        q, t = mech.rule(profile)
        q_all[i] = float(q[0])
        t_all[i] = float(t[0])
        q_sum[n] += float(q[0])
        t_sum[n] += float(t[0])
        counts[n] += 1
    per_q = {n: (q_sum[n] / counts[n] if counts[n] else 0.0) for n in sizes}
    per_t = {n: (t_sum[n] / counts[n] if counts[n] else 0.0) for n in sizes}
    agg = _aggregate_interim(float(theta), per_q, per_t, pop, "mc")
    se_q = float(q_all.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    se_t = float(t_all.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return InterimQuantities(
        theta=agg.theta,
        Q=float(q_all.mean()),
        T=float(t_all.mean()),
        U=float(theta) * float(q_all.mean()) - float(t_all.mean()),
        per_n_Q=per_q,
        per_n_T=per_t,
        per_n_U=agg.per_n_U,
        method="mc",
        se_Q=se_q,
        se_T=se_t,
    )


# ---------------------------------------------------------------------------
# the virtual-value revenue formula
# ---------------------------------------------------------------------------


def dark_revenue_formula(
    allocation: Union[Mechanism, InducedDarkMechanism, Callable, None],
    model: TypeModel,
    pop: PopulationModel,
    T0: Num = 0,
) -> Num:
    """Expected revenue as expected virtual surplus plus zero-type transfers.

    ``allocation`` may be a mechanism (its allocation part is used), a
    callable mapping a type profile to an allocation vector, or ``None`` for
    the no-sale allocation. ``T0`` is the payment collected from a zero-type
    participant and must be non-positive under ex-post participation.
    """
    if not model.regular:
        raise RegularityError("the revenue formula requires a regular type model")
    T0 = exactify(T0)
    if T0 > 0:
        raise DomainError("a positive zero-type payment violates participation")
    transfer = pop.mean_n * T0

    if allocation is None:
        return transfer

    if isinstance(model, FiniteTypeModel):
        return _formula_finite(allocation, model, pop) + transfer
    return _formula_continuous(allocation, model, pop) + transfer


def _formula_finite(allocation, model: FiniteTypeModel, pop: PopulationModel) -> Num:
    if isinstance(allocation, (Mechanism, InducedDarkMechanism)):
        anonymous = _is_anonymous(allocation)
        fn = lambda profile: allocation.rule(profile)[0]
    else:
        anonymous = False
        fn = allocation
    sizes = [n for n in pop.support if n >= 1]
    visits = sum(_profile_count(model.K, n, anonymous) for n in sizes)
    if visits > defaults.EXACT_ENUM_BUDGET:
        raise BudgetExceededError(f"formula enumeration needs {visits} profiles")
    vv = model.virtual_values()
    grid = model.grid
    zero: Num = Fraction(0) if (model.is_exact and pop.is_exact) else 0.0
    total = zero
    for n in sizes:
        sub = zero
        for combo, w in _profiles_with_weights(model, n, anonymous):
            q = fn(tuple(grid[k - 1] for k in combo))
            sub = sub + w * sum(qi * vv[k - 1] for qi, k in zip(q, combo))
        total = total + pop.pi(n) * sub
    return total


def _formula_continuous(allocation, model: ContinuousTypeModel, pop: PopulationModel) -> float:
    if not isinstance(allocation, Mechanism):
        raise UnsupportedFormatError(
            "the continuous formula supports mechanism allocations only"
        )
    fmt = allocation.format
    if fmt == "posted-price":
        price = float(allocation.price)
        s = 1.0 - model.cdf(price)
        if s <= 0.0:
            return 0.0
        cond = integrate(lambda x: model.virtual_value(x) * model.pdf(x), price, model.hi)
        total = 0.0
        for n in pop.support:
            if n < 1:
                continue
            total += float(pop.pi(n)) * (1.0 - (1.0 - s) ** n) / s * cond
        return total
    if fmt not in ("lit-second-price", "lit-first-price", "dark-first-price"):
        raise UnsupportedFormatError(f"{fmt} is not an above-reserve allocation")
    rho = float(allocation.cutoff)
    total = 0.0
    for n in pop.support:
        if n < 1:
            continue
        contrib = integrate(
            lambda x: model.virtual_value(x) * n * model.cdf(x) ** (n - 1) * model.pdf(x),
            rho,
            model.hi,
        )
        total += float(pop.pi(n)) * contrib
    return total


# ---------------------------------------------------------------------------
# posted-price optimization
# ---------------------------------------------------------------------------


def optimal_posted_price(model: TypeModel, pop: PopulationModel) -> Tuple[Num, Num]:
    """The revenue-maximizing take-it-or-leave-it price and its revenue.

    Acceptance is weak (a type equal to the price accepts). Revenue ties
    between candidate prices resolve to the lower price.
    """
    if isinstance(model, FiniteTypeModel):
        best_price: Num = model.grid[0]
        best_rev: Num = Fraction(0) if (model.is_exact and pop.is_exact) else 0.0
        for k in range(1, model.K + 1):
            price = model.grid[k - 1]
            below = model.cum(k - 1)
            rev = price * sum(
                pop.pi(n) * (1 - below**n) for n in pop.support if n >= 1
            )
            if rev > best_rev:
                best_rev = rev
                best_price = price
        return best_price, best_rev

    from .numerics import golden_section_max

    sizes = [n for n in pop.support if n >= 1]
    weights = [float(pop.pi(n)) for n in sizes]

    def objective(p: float) -> float:
        miss = model.cdf(p)
        return p * sum(w * (1.0 - miss**n) for w, n in zip(weights, sizes))

    return golden_section_max(
        objective, model.lo, model.hi, tol=defaults.GOLDEN_TOL, scan_points=defaults.GOLDEN_SCAN_POINTS
    )
