"""Equilibrium bid functions.

Three families:

* ``lit-fp``: first-price bids when the number of rivals ``n`` is common
  knowledge. Continuous models use the classic integral form
  ``beta(theta) = theta - int_rho^theta F^{n-1} / F^{n-1}(theta)``; finite
  grids use the binding-local-incentive chain described below.
* ``dark-fp``: first-price bids when the count is concealed and bidders hold
  the participant prior ``p``; the opponent distribution becomes the mixture
  ``G(x) = sum_n p(n) F(x)^{n-1}`` and the same formulas apply.
* ``tc-fp``: the tie-corrected first-price payment schedule on finite grids,
  where a unique winner pays ``g^n(theta^k)`` and tied winners pay their own
  reported type. ``g^n`` makes each local downward incentive constraint bind
  exactly.

On finite grids the plain (pay-your-bid, uniform tie split) first-price
formats need a bid table rather than a payment schedule. The table is pinned
down by requiring every local downward incentive constraint to bind:

    (theta^k - b(theta^k)) A(k) = (theta^k - b(theta^{k-1})) A(k-1)

with ``A(k)`` the win probability of reporting ``theta^k`` under a uniform
tie split and ``b`` anchored to the lowest winning type. The resulting
mechanism leaves zero surplus at the bottom, is revenue-equivalent to the
tie-corrected formats, and keeps the winning ratio paid per unit of the good
equal to the winner's own bid at every profile.
"""

from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import defaults
from .distributions import (
    ContinuousTypeModel,
    FiniteTypeModel,
    Num,
    PopulationModel,
    TypeModel,
)
from .errors import ConfigurationError, DomainError, UnsupportedFormatError
from .numerics import integrate


# ---------------------------------------------------------------------------
# finite-grid building blocks
# ---------------------------------------------------------------------------


def k0_for_reserve(model: FiniteTypeModel, rho: Num) -> int:
    """Lowest 1-based grid index that clears the reserve."""
    for k in range(1, model.K + 1):
        if model.grid[k - 1] >= rho:
            return k
    raise DomainError(f"reserve {rho} exceeds the top grid type")


def win_share(model: FiniteTypeModel, k: int, n: int) -> Num:
    """Win probability of reporting theta^k against n-1 i.i.d. rivals, ties split.

    Equals (F_k^n - F_{k-1}^n) / (n f_k): integrating the uniform tie split
    over the number of rivals that land exactly on theta^k.
    """
    if n < 1:
        raise DomainError("need at least one bidder")
    Fk = model.cum(k)
    Fk1 = model.cum(k - 1)
    return (Fk**n - Fk1**n) / (n * model.masses[k - 1])


def _mixture_win_share(model: FiniteTypeModel, pop: PopulationModel, k: int) -> Num:
    return sum(w * win_share(model, k, n) for n, w in pop.p_map.items())


def chain_bid_table(
    model: FiniteTypeModel,
    rho: Num = 0,
    n: Optional[int] = None,
    pop: Optional[PopulationModel] = None,
) -> Tuple[Num, ...]:
    """Pay-your-bid table with every local downward constraint binding.

    Exactly one of ``n`` (count common knowledge) and ``pop`` (count
    concealed, participant prior weights) must be given. Entries below the
    reserve index are 0.
    """
    if (n is None) == (pop is None):
        raise ConfigurationError("specify exactly one of n and pop")
    if pop is not None and not pop.p_map:
        raise ConfigurationError("population has empty participant support")

    def A(k: int) -> Num:
        if n is not None:
            return win_share(model, k, n)
        return _mixture_win_share(model, pop, k)

    k0 = k0_for_reserve(model, rho)
    zero = Fraction(0) if model.is_exact else 0.0
    bids: List[Num] = [zero] * model.K
    bids[k0 - 1] = model.grid[k0 - 1]
    for k in range(k0 + 1, model.K + 1):
        th = model.grid[k - 1]
        bids[k - 1] = th - (th - bids[k - 2]) * A(k - 1) / A(k)
    return tuple(bids)


def tie_corrected_fp_payment(model: FiniteTypeModel, n: int, k: int, rho: Optional[Num] = None) -> Num:
    """g^n(theta^k): what a unique winner pays in the tie-corrected first-price format.

    ``rho=None`` uses the optimal reserve (requires a regular grid). Reports
    below the lowest winning index are off the payment schedule's domain.
    """
    if not isinstance(model, FiniteTypeModel):
        raise UnsupportedFormatError("tie-corrected payments are defined on finite grids only")
    if n < 1:
        raise DomainError("need at least one bidder")
    k0 = model.k_star if rho is None else k0_for_reserve(model, rho)
    if not k0 <= k <= model.K:
        raise DomainError(f"grid index {k} outside the winning range {k0}..{model.K}")
    theta_k = model.grid[k - 1]
    if k == k0:
        return theta_k
    # each term carries (F_{m-1}^n - F_{m-2}^n) / F_{k-1}^{n-1}; distributing the
    # denominator keeps every power a ratio <= 1 so large n cannot underflow
    denom = model.cum(k - 1)
    total = theta_k - theta_k  # typed zero
    for m in range(k0 + 1, k + 1):
        step = model.grid[m - 1] - model.grid[m - 2]
        hi = model.cum(m - 1) * (model.cum(m - 1) / denom) ** (n - 1)
        lo = model.cum(m - 2) * (model.cum(m - 2) / denom) ** (n - 1)
        total += step * (hi - lo) / (n * model.masses[m - 2])
    return theta_k - total


# ---------------------------------------------------------------------------
# continuous building blocks
# ---------------------------------------------------------------------------


def _opponent_cdf(model: ContinuousTypeModel, weights: Sequence[Tuple[int, float]]):
    """G(x) = sum_n w_n F(x)^(n-1) with F^0 = 1."""
    cdf = model.cdf

    def G(x: float) -> float:
        total = 0.0
        Fx = cdf(x)
        for count, w in weights:
            total += w * Fx ** (count - 1)
        return total

    return G

def _continuous_fp_bid(model: ContinuousTypeModel, weights, theta: float, rho: float) -> float:
    if theta < model.lo or theta > model.hi:
        raise DomainError(f"type {theta} outside support")
    if theta < rho:
        return 0.0
    G = _opponent_cdf(model, weights)
    g_theta = G(theta)
    if g_theta <= 0.0:
        # winning is a zero-probability event at this type; shade to the reserve
        return float(rho)
    # integrate the ratio so the absolute tolerance applies to the shade itself
    shade = integrate(lambda x: G(x) / g_theta, float(rho), float(theta))
    return float(theta) - shade


# ---------------------------------------------------------------------------
# public bid functions
# ---------------------------------------------------------------------------


def lit_first_price_bid(model: TypeModel, n: int, theta: Num, rho: Num = 0) -> Num:
    """Equilibrium first-price bid of type ``theta`` against ``n - 1`` known rivals."""
    if n < 1:
        raise DomainError("need at least one bidder")
    if model.kind == "finite":
        table = chain_bid_table(model, rho=rho, n=n)
        return table[model.index_of(theta) - 1]
    return _continuous_fp_bid(model, [(n, 1.0)], float(theta), float(rho))


def dark_first_price_bid(model: TypeModel, pop: PopulationModel, theta: Num, rho: Num = 0) -> Num:
    """Equilibrium first-price bid when the number of rivals is concealed."""
    if not pop.p_map:
        raise ConfigurationError("population has empty participant support")
    if model.kind == "finite":
        table = chain_bid_table(model, rho=rho, pop=pop)
        return table[model.index_of(theta) - 1]
    weights = [(count, float(w)) for count, w in pop.p_map.items()]
    return _continuous_fp_bid(model, weights, float(theta), float(rho))


class BidFunction:
    """A callable bid schedule with a lattice cache.

    ``kind`` is one of ``lit-fp``, ``dark-fp``, ``tc-fp``. For ``lit-fp`` and
    ``tc-fp`` the rival count ``n`` is fixed; ``dark-fp`` carries the
    participant prior instead. ``tc-fp`` is a payment schedule (finite grids
    only), exposed through the same interface for table printing.
    """

    def __init__(
        self,
        kind: str,
        model: TypeModel,
        rho: Num = 0,
        n: Optional[int] = None,
        pop: Optional[PopulationModel] = None,
    ):
        if kind not in ("lit-fp", "dark-fp", "tc-fp"):
            raise ConfigurationError(f"unknown bid function kind {kind!r}")
        if kind in ("lit-fp", "tc-fp") and n is None:
            raise ConfigurationError(f"{kind} needs a bidder count n")
        if kind == "dark-fp" and pop is None:
            raise ConfigurationError("dark-fp needs a population model")
        if kind == "tc-fp" and model.kind != "finite":
            raise UnsupportedFormatError("tc-fp is defined on finite grids only")
        self.kind = kind
        self.model = model
        self.rho = rho
        self.n = n
        self.pop = pop
        self._lattice: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        self._table: Optional[Tuple[Num, ...]] = None
        if model.kind == "finite":
            if kind == "lit-fp":
                self._table = chain_bid_table(model, rho=rho, n=n)
            elif kind == "dark-fp":
                self._table = chain_bid_table(model, rho=rho, pop=pop)
            else:
                k0 = k0_for_reserve(model, rho)
                zero = Fraction(0) if model.is_exact else 0.0
                vals = [
                    tie_corrected_fp_payment(model, n, k, rho=rho) if k >= k0 else zero
                    for k in range(1, model.K + 1)
                ]
                self._table = tuple(vals)

    def __call__(self, theta: Num) -> Num:
        if self.model.kind == "finite":
            return self._table[self.model.index_of(theta) - 1]
        if self.kind == "lit-fp":
            return _continuous_fp_bid(self.model, [(self.n, 1.0)], float(theta), float(self.rho))
        weights = [(count, float(w)) for count, w in self.pop.p_map.items()]
        return _continuous_fp_bid(self.model, weights, float(theta), float(self.rho))

    def table(self) -> Tuple[Tuple[Num, Num], ...]:
        """(type, bid) pairs on the grid (finite) or a default lattice (continuous)."""
        if self.model.kind == "finite":
            return tuple(zip(self.model.grid, self._table))
        xs, ys = self.lattice(101)
        return tuple((float(x), float(y)) for x, y in zip(xs, ys))

    def lattice(self, points: int = 1025) -> Tuple[np.ndarray, np.ndarray]:
        """Evaluate on an equally spaced lattice, cached by point count."""
        if points not in self._lattice:
            if self.model.kind == "finite":
                xs = self.model.float_grid()
                ys = np.array([float(b) for b in self._table])
            else:
                xs = np.linspace(self.model.lo, self.model.hi, points)
                ys = np.array([self(float(x)) for x in xs])
            self._lattice[points] = (xs, ys)
        return self._lattice[points]
