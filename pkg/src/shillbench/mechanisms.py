"""Mechanism rules: report profiles in, allocations and payments out.

Every format is anonymous except fixed-priority-second-price, which is the
deterministic building block whose uniform mixture over priority orders
reproduces the tie-corrected second-price payments. On finite grids all tie
logic works on grid indices, never on float equality; on continuous models
ties are events of measure zero but are still resolved analytically (shares
are split, outcomes are never sampled).

Formats
-------
lit-first-price            pay your own bid, bid table depends on the count n
lit-second-price           pay max(second report, reserve), symmetric tie split
posted-price               accepters split the good at the posted price
dark-first-price           pay your own bid, count-independent bid table
tie-corrected-second-price unique winner pays the priority-averaged threshold
tie-corrected-first-price  unique winner pays g^n, tied winners pay own report
fixed-priority-second-price deterministic priority, winner pays their threshold
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from . import defaults
from .distributions import (
    FiniteTypeModel,
    Num,
    PopulationModel,
    TypeModel,
    optimal_reserve,
)
from .equilibrium import (
    BidFunction,
    chain_bid_table,
    k0_for_reserve,
    tie_corrected_fp_payment,
)
from .errors import (
    ConfigurationError,
    DomainError,
    NonPartitionalError,
    UnsupportedFormatError,
)

FORMATS = (
    "lit-first-price",
    "lit-second-price",
    "posted-price",
    "dark-first-price",
    "tie-corrected-second-price",
    "tie-corrected-first-price",
    "fixed-priority-second-price",
)

TIE_RULES = ("symmetric-random", "priority-uniform", "tie-corrected")

_DEFAULT_TIE_RULE = {
    "lit-first-price": "symmetric-random",
    "lit-second-price": "symmetric-random",
    "posted-price": "symmetric-random",
    "dark-first-price": "symmetric-random",
    "tie-corrected-second-price": "tie-corrected",
    "tie-corrected-first-price": "tie-corrected",
    "fixed-priority-second-price": "priority-uniform",
}

ANONYMOUS_FORMATS = tuple(f for f in FORMATS if f != "fixed-priority-second-price")
FINITE_ONLY_FORMATS = (
    "tie-corrected-second-price",
    "tie-corrected-first-price",
    "fixed-priority-second-price",
)


@dataclass(frozen=True)
class TypeProfile:
    """Reported types: the buyer block plus an optional shill/identity block."""

    buyers: Tuple[Num, ...]
    shills: Tuple[Num, ...] = ()

    @property
    def reports(self) -> Tuple[Num, ...]:
        return self.buyers + self.shills

    def __len__(self) -> int:
        return len(self.buyers) + len(self.shills)


@dataclass(frozen=True)
class Outcome:
    """Allocation shares and payments, aligned with the report order."""

    q: Tuple[Num, ...]
    t: Tuple[Num, ...]

    def total_payment(self) -> Num:
        return sum(self.t)

    def validate(self, reports: Sequence[Num]) -> None:
        tol = defaults.FEASIBILITY_TOL
        if len(self.q) != len(reports) or len(self.t) != len(reports):
            raise ConfigurationError("outcome length does not match the profile")
        if float(sum(self.q)) > 1.0 + tol:
            raise ConfigurationError("allocation shares exceed one unit")
        for theta, qi, ti in zip(reports, self.q, self.t):
            if not -tol <= float(qi) <= 1.0 + tol:
                raise ConfigurationError(f"share {qi} outside [0, 1]")
            if float(theta) * float(qi) - float(ti) < -defaults.IR_TOL:
                raise ConfigurationError("outcome violates ex-post participation")
            if qi == 0 and ti != 0:
                raise ConfigurationError("a loser is being charged")


def outcomes_equal(a: Outcome, b: Outcome, tol: float = 0.0) -> bool:
    if len(a.q) != len(b.q):
        return False
    pairs = list(zip(a.q + a.t, b.q + b.t))
    if tol == 0.0:
        return all(x == y for x, y in pairs)
    return all(abs(float(x) - float(y)) <= tol for x, y in pairs)


class Mechanism:
    """A bound mechanism: format, reserve, tie rule, and any bid tables it needs.

    Parameters
    ----------
    format : str
        One of FORMATS (the descriptor alias "dark-second-price" normalizes
        to lit-second-price with dark disclosure before reaching here).
    model : TypeModel
        Type distribution the bid tables are computed against.
    pop : PopulationModel, optional
        Required by dark-first-price (the bids average over the participant
        prior) and used to size lazy bid tables elsewhere.
    reserve : number
        Weak reserve: a report equal to the reserve can win.
    price : number
        Posted-price formats only.
    priority : tuple of slot indices, optional
        fixed-priority-second-price only; earlier entries win ties. Defaults
        to ascending slot order.
    n_max : int, optional
        Largest profile size the mechanism will accept. Defaults to the
        population's maximum plus a headroom allowance for manipulation
        searches (or the headroom alone without a population).
    """

    def __init__(
        self,
        format: str,
        model: TypeModel,
        pop: Optional[PopulationModel] = None,
        reserve: Num = 0,
        price: Optional[Num] = None,
        priority: Optional[Tuple[int, ...]] = None,
        tie_rule: Optional[str] = None,
        disclosure: Optional[str] = None,
        n_max: Optional[int] = None,
        label: Optional[str] = None,
    ):
        if format not in FORMATS:
            raise ConfigurationError(f"unknown mechanism format {format!r}")
        if format in FINITE_ONLY_FORMATS and model.kind != "finite":
            raise UnsupportedFormatError(f"{format} is defined on finite grids only")
        if format == "dark-first-price" and pop is None:
            raise ConfigurationError("dark-first-price needs a population model")
        if format == "posted-price":
            if price is None:
                raise ConfigurationError("posted-price needs a price")
            if reserve not in (0, price):
                raise ConfigurationError("posted-price takes its cutoff from the price")
        elif price is not None:
            raise ConfigurationError(f"{format} does not take a price")
        if tie_rule is None:
            tie_rule = _DEFAULT_TIE_RULE[format]
        if tie_rule not in TIE_RULES:
            raise ConfigurationError(f"unknown tie rule {tie_rule!r}")
        if tie_rule != _DEFAULT_TIE_RULE[format]:
            raise ConfigurationError(f"{format} requires tie rule {_DEFAULT_TIE_RULE[format]!r}")
        if disclosure is None:
            disclosure = "dark" if format == "dark-first-price" else "lit"
        if disclosure not in ("lit", "dark"):
            raise ConfigurationError(f"unknown disclosure {disclosure!r}")
        if disclosure == "dark" and format == "lit-first-price":
            raise ConfigurationError("count-dependent bids cannot be run under concealment")
        if priority is not None and format != "fixed-priority-second-price":
            raise ConfigurationError(f"{format} does not take a priority order")

        self.format = format
        self.model = model
        self.pop = pop
        self.reserve = reserve
        self.price = price
        self.priority = tuple(priority) if priority is not None else None
        self.tie_rule = tie_rule
        self.disclosure = disclosure
        self.label = label or format
        if n_max is None:
            base = pop.max_n if pop is not None else 0
            n_max = max(base, 1) + defaults.BID_TABLE_HEADROOM
        self.n_max = n_max

        self._lit_bids: Dict[int, Union[Tuple[Num, ...], BidFunction]] = {}
        self._tc_tables: Dict[int, Tuple[Num, ...]] = {}
        self._dark_bids: Optional[Union[Tuple[Num, ...], BidFunction]] = None
        if model.kind == "finite":
            self._k0 = k0_for_reserve(model, self.cutoff)
        else:
            self._k0 = None

    # -- bookkeeping ------------------------------------------------------

    @property
    def cutoff(self) -> Num:
        """The participation threshold: the price for posted formats, else the reserve."""
        return self.price if self.format == "posted-price" else self.reserve

    @property
    def is_exact(self) -> bool:
        if self.model.kind != "finite" or not self.model.is_exact:
            return False
        vals = [self.cutoff] + ([self.price] if self.price is not None else [])
        return all(isinstance(v, (int, Fraction)) for v in vals)

    def _zero(self) -> Num:
        return Fraction(0) if self.is_exact else 0.0

    def _check_size(self, n: int) -> None:
        if n > self.n_max:
            raise ConfigurationError(
                f"profile of size {n} exceeds this mechanism's bound of {self.n_max}"
            )

    def lit_bid(self, n: int, report: Num) -> Num:
        if n not in self._lit_bids:
            self._check_size(n)
            if self.model.kind == "finite":
                self._lit_bids[n] = chain_bid_table(self.model, rho=self.reserve, n=n)
            else:
                self._lit_bids[n] = BidFunction("lit-fp", self.model, rho=self.reserve, n=n)
        bids = self._lit_bids[n]
        if self.model.kind == "finite":
            return bids[self.model.index_of(report) - 1]
        return bids(report)

    def dark_bid(self, report: Num) -> Num:
        if self._dark_bids is None:
            if self.model.kind == "finite":
                self._dark_bids = chain_bid_table(self.model, rho=self.reserve, pop=self.pop)
            else:
                self._dark_bids = BidFunction("dark-fp", self.model, rho=self.reserve, pop=self.pop)
        if self.model.kind == "finite":
            return self._dark_bids[self.model.index_of(report) - 1]
        return self._dark_bids(report)

    def tc_payment(self, n: int, k: int) -> Num:
        if n not in self._tc_tables:
            self._check_size(n)
            table = tuple(
                tie_corrected_fp_payment(self.model, n, kk, rho=self.reserve)
                for kk in range(self._k0, self.model.K + 1)
            )
            self._tc_tables[n] = table
        return self._tc_tables[n][k - self._k0]

    # -- the rule ---------------------------------------------------------

    def rule(self, reports: Sequence[Num]) -> Tuple[Tuple[Num, ...], Tuple[Num, ...]]:
        """(q, t) for a full, anonymous report vector."""
        n = len(reports)
        self._check_size(n)
        if n == 0:
            return (), ()
        if self.model.kind == "finite":
            idx = [self.model.index_of(r) for r in reports]
            return self._rule_finite(tuple(idx))
        return self._rule_continuous(tuple(float(r) for r in reports))

    # finite grids: everything in index space

    def _rule_finite(self, idx: Tuple[int, ...]):
        grid = self.model.grid
        n = len(idx)
        zero = self._zero()
        q: List[Num] = [zero] * n
        t: List[Num] = [zero] * n
        k0 = self._k0

        if self.format == "posted-price":
            acc = [i for i in range(n) if idx[i] >= k0]
            if acc:
                share = Fraction(1, len(acc)) if self.is_exact else 1.0 / len(acc)
                for i in acc:
                    q[i] = share
                    t[i] = share * self.price
            return tuple(q), tuple(t)

        top = max(idx)
        if grid[top - 1] < self.cutoff:
            return tuple(q), tuple(t)
        winners = [i for i in range(n) if idx[i] == top]

        if self.format == "fixed-priority-second-price":
            return self._rule_fixed_priority(idx, winners)

        share = Fraction(1, len(winners)) if self.is_exact else 1.0 / len(winners)
        if self.format in ("lit-first-price", "dark-first-price"):
            for i in winners:
                bid = self.lit_bid(n, grid[idx[i] - 1]) if self.format == "lit-first-price" else self.dark_bid(grid[idx[i] - 1])
                q[i] = share
                t[i] = share * bid
            return tuple(q), tuple(t)

        if self.format == "lit-second-price":
            for i in winners:
                if len(winners) > 1:
                    q[i] = share
                    t[i] = share * grid[top - 1]
                else:
                    others = [idx[j] for j in range(n) if j != i]
                    second = grid[max(others) - 1] if others else self.reserve
                    q[i] = share
                    t[i] = max(second, self.reserve)
            return tuple(q), tuple(t)

        if self.format == "tie-corrected-second-price":
            for i in winners:
                q[i] = share
                if len(winners) > 1:
                    t[i] = share * grid[idx[i] - 1]
                else:
                    t[i] = self._tc_sp_unique_payment(idx, i)
            return tuple(q), tuple(t)

        if self.format == "tie-corrected-first-price":
            for i in winners:
                q[i] = share
                if len(winners) > 1:
                    t[i] = share * grid[idx[i] - 1]
                else:
                    t[i] = self.tc_payment(len(idx), idx[i])
            return tuple(q), tuple(t)

        raise UnsupportedFormatError(self.format)  # pragma: no cover

    def _tc_sp_unique_payment(self, idx: Tuple[int, ...], winner: int) -> Num:
        """Priority-averaged threshold payment for a unique top report.

        With the winner lowered to the highest rival level theta_t, c rivals
        tie there; under a uniform priority draw the winner still wins with
        probability 1/(c+1) and otherwise the price steps to the next grid
        point, so the expected threshold is the blend below.
        """
        grid = self.model.grid
        others = [idx[j] for j in range(len(idx)) if j != winner]
        # the threshold floor is the lowest winning grid index, which equals the
        # reserve whenever the reserve sits on the grid
        k_t = max([self._k0] + others)
        theta_t = grid[k_t - 1]
        c = sum(1 for k in others if k == k_t)
        if c == 0:
            return theta_t
        theta_w = grid[k_t]  # the winner's report sits strictly above k_t
        w = Fraction(1, c + 1) if self.is_exact else 1.0 / (c + 1)
        return w * theta_t + (1 - w) * theta_w

    def _rule_fixed_priority(self, idx: Tuple[int, ...], winners: List[int]):
        grid = self.model.grid
        n = len(idx)
        zero = self._zero()
        q: List[Num] = [zero] * n
        t: List[Num] = [zero] * n
        winner = min(winners, key=self._rank)
        one = Fraction(1) if self.is_exact else 1.0
        q[winner] = one
        for k in range(self._k0, self.model.K + 1):
            trial = list(idx)
            trial[winner] = k
            top = max(trial)
            tied = [i for i in range(n) if trial[i] == top]
            if min(tied, key=self._rank) == winner:
                t[winner] = grid[k - 1]
                break
        return tuple(q), tuple(t)

    def _rank(self, slot: int) -> int:
        if self.priority is None:
            return slot
        try:
            return self.priority.index(slot)
        except ValueError:
            raise ConfigurationError(
                f"priority order {self.priority} does not cover slot {slot}"
            ) from None

    # continuous models: raw float space

    def _rule_continuous(self, reports: Tuple[float, ...]):
        n = len(reports)
        q = [0.0] * n
        t = [0.0] * n

        if self.format == "posted-price":
            price = float(self.price)
            acc = [i for i in range(n) if reports[i] >= price]
            if acc:
                share = 1.0 / len(acc)
                for i in acc:
                    q[i] = share
                    t[i] = share * price
            return tuple(q), tuple(t)

        rho = float(self.reserve)
        top = max(reports)
        if top < rho:
            return tuple(q), tuple(t)
        winners = [i for i in range(n) if reports[i] == top]
        share = 1.0 / len(winners)

        if self.format == "lit-first-price":
            for i in winners:
                q[i] = share
                t[i] = share * float(self.lit_bid(n, reports[i]))
            return tuple(q), tuple(t)
        if self.format == "dark-first-price":
            for i in winners:
                q[i] = share
                t[i] = share * float(self.dark_bid(reports[i]))
            return tuple(q), tuple(t)
        if self.format == "lit-second-price":
            for i in winners:
                q[i] = share
                if len(winners) > 1:
                    t[i] = share * top
                else:
                    others = [reports[j] for j in range(n) if j != i]
                    t[i] = max(max(others) if others else rho, rho)
            return tuple(q), tuple(t)
        raise UnsupportedFormatError(f"{self.format} has no continuous rule")

    def run(self, profile: Union[TypeProfile, Sequence[Num]]) -> Outcome:
        reports = profile.reports if isinstance(profile, TypeProfile) else tuple(profile)
        q, t = self.rule(reports)
        out = Outcome(q, t)
        out.validate(reports)
        return out

    def __repr__(self) -> str:
        return f"Mechanism({self.label!r}, reserve={self.reserve}, disclosure={self.disclosure})"


def run_mechanism(mech: Mechanism, profile: Union[TypeProfile, Sequence[Num]]) -> Outcome:
    """Evaluate a mechanism on one profile; ties are split analytically."""
    return mech.run(profile)


# ---------------------------------------------------------------------------
# disclosure policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Signal:
    label: str
    preimage: frozenset
    mechanism: Mechanism


class DisclosurePolicy:
    """A partition of participation counts into signals, one mechanism per signal."""

    def __init__(self, signals: Sequence[Signal]):
        if not signals:
            raise ConfigurationError("a disclosure policy needs at least one signal")
        seen: Dict[int, str] = {}
        for sig in signals:
            if not sig.preimage:
                raise NonPartitionalError(f"signal {sig.label!r} has an empty preimage")
            for n in sig.preimage:
                if n in seen:
                    raise NonPartitionalError(
                        f"count {n} belongs to both {seen[n]!r} and {sig.label!r}"
                    )
                seen[int(n)] = sig.label
        self.signals = tuple(signals)
        self._by_count = {int(n): sig for sig in signals for n in sig.preimage}

    def signal_for(self, n: int) -> Signal:
        if n not in self._by_count:
            raise ConfigurationError(f"no signal covers a profile of size {n}")
        return self._by_count[n]


class InducedDarkMechanism:
    """The concealed-count mechanism a partitional policy induces.

    On a profile of size n it looks up the covering signal and applies that
    signal's mechanism at exactly that size, so it is outcome-equivalent to
    the policy by construction; the enumeration tests confirm it profilewise.
    """

    format = "induced-dark"
    disclosure = "dark"

    def __init__(self, policy: DisclosurePolicy, label: str = "induced-dark"):
        self.policy = policy
        self.label = label
        models = {id(sig.mechanism.model) for sig in policy.signals}
        if len(models) != 1:
            raise ConfigurationError("all signal mechanisms must share one type model")
        self.model = policy.signals[0].mechanism.model
        self.pop = next(
            (sig.mechanism.pop for sig in policy.signals if sig.mechanism.pop is not None),
            None,
        )

    def rule(self, reports: Sequence[Num]):
        return self.policy.signal_for(len(reports)).mechanism.rule(reports)

    def run(self, profile: Union[TypeProfile, Sequence[Num]]) -> Outcome:
        reports = profile.reports if isinstance(profile, TypeProfile) else tuple(profile)
        q, t = self.rule(reports)
        out = Outcome(q, t)
        out.validate(reports)
        return out


def induce_dark(policy: DisclosurePolicy, label: str = "induced-dark") -> InducedDarkMechanism:
    """Collapse a partitional disclosure policy into a single dark mechanism."""
    return InducedDarkMechanism(policy, label=label)


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------


def mechanism_from_json(
    d: Mapping,
    model: TypeModel,
    pop: Optional[PopulationModel] = None,
    n_max: Optional[int] = None,
) -> Mechanism:
    """Build a mechanism from a JSON descriptor against bound models.

    Descriptor fields: format (required); reserve as a number or "optimal";
    price (posted-price) as a number or "optimal"; tie_rule, disclosure,
    priority, label as overrides. The alias format "dark-second-price" means
    lit-second-price run under concealment.
    """
    from .distributions import json_number

    if "format" not in d:
        raise ConfigurationError("mechanism descriptor needs a 'format'")
    fmt = d["format"]
    disclosure = d.get("disclosure")
    if fmt == "dark-second-price":
        fmt = "lit-second-price"
        disclosure = "dark"

    reserve = d.get("reserve", 0)
    if reserve == "optimal":
        reserve = optimal_reserve(model)
    else:
        reserve = json_number(reserve)

    price = d.get("price")
    if price == "optimal":
        from .revenue import optimal_posted_price

        price, _ = optimal_posted_price(model, pop)
    elif price is not None:
        price = json_number(price)

    priority = d.get("priority")
    return Mechanism(
        fmt,
        model,
        pop=pop,
        reserve=reserve,
        price=price,
        priority=tuple(priority) if priority is not None else None,
        tie_rule=d.get("tie_rule"),
        disclosure=disclosure,
        n_max=n_max,
        label=d.get("label"),
    )


def mechanism_to_json(mech: Mechanism) -> Dict:
    enc = lambda v: str(v) if isinstance(v, Fraction) else v
    out: Dict = {"format": mech.format, "tie_rule": mech.tie_rule, "disclosure": mech.disclosure}
    if mech.format == "posted-price":
        out["price"] = enc(mech.price)
    else:
        out["reserve"] = enc(mech.reserve)
    if mech.priority is not None:
        out["priority"] = list(mech.priority)
    if mech.label != mech.format:
        out["label"] = mech.label
    return out
