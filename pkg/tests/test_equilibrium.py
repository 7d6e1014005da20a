"""Bid functions: closed forms, chain construction, tie-corrected payments.

Oracles, implemented independently of the module under test:
  * win probabilities by direct binomial enumeration over tied rivals;
  * interim payoffs from those probabilities, so incentive statements are
    checked against first principles rather than against the formulas that
    produced the bids;
  * quadrature for the payment-equating identity of concealed-count bids.
"""

import math
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shillbench.distributions import FiniteTypeModel, PopulationModel, uniform_model
from shillbench.equilibrium import (
    BidFunction,
    chain_bid_table,
    dark_first_price_bid,
    k0_for_reserve,
    lit_first_price_bid,
    tie_corrected_fp_payment,
    win_share,
)
from shillbench.errors import (
    ConfigurationError,
    DomainError,
    RegularityError,
    UnsupportedFormatError,
)
from shillbench.numerics import integrate

UNIT_LATTICE = np.linspace(0.0, 1.0, 101)

GRID_FAMILY = [
    FiniteTypeModel([0, 1], [Fr(1, 2), Fr(1, 2)], label="f2-even"),
    FiniteTypeModel([0, 1], [Fr(1, 4), Fr(3, 4)], label="f2-top"),
    FiniteTypeModel([0, 1], [Fr(1, 10), Fr(9, 10)], label="f2-skew"),
    FiniteTypeModel([0, Fr(1, 2), 1], [Fr(1, 3)] * 3, label="f3-even"),
    FiniteTypeModel([0, Fr(1, 2), 1], [Fr(1, 6), Fr(1, 2), Fr(1, 3)], label="f3-mid"),
    FiniteTypeModel([0, Fr(1, 4), 1], [Fr(1, 5), Fr(2, 5), Fr(2, 5)], label="f3-wide"),
    FiniteTypeModel([0, Fr(1, 4), Fr(1, 2), 1], [Fr(1, 4)] * 4, label="f4-even"),
    FiniteTypeModel([0, Fr(1, 3), Fr(2, 3), 1], [Fr(1, 2), Fr(1, 4), Fr(1, 8), Fr(1, 8)], label="f4-low"),
    FiniteTypeModel([0, Fr(1, 10), Fr(1, 2), Fr(9, 10)], [Fr(1, 10), Fr(2, 5), Fr(1, 4), Fr(1, 4)], label="f4-tight"),
]

NONREGULAR = FiniteTypeModel([0, Fr(1, 10), Fr(1, 2), Fr(9, 10)], [Fr(1, 4)] * 4, label="f4-nonreg")


def k3_uniform():
    return FiniteTypeModel([0, Fr(1, 2), 1], [Fr(1, 3)] * 3, label="k3")


def win_prob_enum(model, k, n):
    """Win probability of report theta^k vs n-1 i.i.d. rivals, ties split evenly."""
    total = Fr(0)
    for tied in range(n):
        total += (
            math.comb(n - 1, tied)
            * model.masses[k - 1] ** tied
            * model.cum(k - 1) ** (n - 1 - tied)
            * Fr(1, tied + 1)
        )
    return total


def payoff_tc(model, n, k0, rep, true, rho):
    """Interim payoff in the tie-corrected first-price format, from first principles."""
    if rep < k0:
        return Fr(0)
    unique = model.cum(rep - 1) ** (n - 1)
    tie = win_prob_enum(model, rep, n) - unique
    pay = tie_corrected_fp_payment(model, n, rep, rho=rho)
    value = model.grid[true - 1]
    return (value - pay) * unique + (value - model.grid[rep - 1]) * tie


def payoff_chain(model, bids, n, rep, true, k0):
    """Interim payoff under pay-your-bid with a uniform tie split."""
    if rep < k0:
        return Fr(0)
    return (model.grid[true - 1] - bids[rep - 1]) * win_prob_enum(model, rep, n)


def reserves_of(model):
    out = [Fr(0)]
    if model.regular:
        out.append(model.rho_star)
    return out


# ---------------------------------------------------------------------------
# win share
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model", GRID_FAMILY, ids=lambda m: m.label)
def test_win_share_matches_enumeration(model):
    for n in range(1, 5):
        for k in range(1, model.K + 1):
            assert win_share(model, k, n) == win_prob_enum(model, k, n)


# ---------------------------------------------------------------------------
# known-count first-price bids, continuous
# ---------------------------------------------------------------------------


class TestLitContinuous:
    @pytest.mark.parametrize("n", [2, 3, 10])
    def test_uniform_closed_form(self, n):
        m = uniform_model()
        for theta in UNIT_LATTICE:
            want = (n - 1) / n * theta
            assert lit_first_price_bid(m, n, float(theta)) == pytest.approx(want, abs=1e-9)

    def test_single_bidder_bids_reserve(self):
        assert lit_first_price_bid(uniform_model(), 1, 0.8, rho=0.5) == pytest.approx(0.5, abs=1e-12)

    def test_reserve_example(self):
        got = lit_first_price_bid(uniform_model(), 2, 0.8, rho=0.5)
        assert got == pytest.approx(0.55625, abs=1e-9)

    def test_zero_below_reserve(self):
        assert lit_first_price_bid(uniform_model(), 3, 0.3, rho=0.5) == 0.0

    def test_never_exceeds_type_and_monotone(self):
        m = uniform_model()
        prev = -1.0
        for theta in UNIT_LATTICE:
            b = lit_first_price_bid(m, 3, float(theta))
            assert b <= theta + 1e-12
            assert b >= prev - 1e-12
            prev = b

    def test_strictly_increasing_in_n(self):
        m = uniform_model()
        bids = [lit_first_price_bid(m, n, 0.8) for n in range(1, 7)]
        assert all(b2 > b1 for b1, b2 in zip(bids, bids[1:]))

    def test_converges_to_type(self):
        m = uniform_model()
        for theta in (0.2, 0.6, 1.0):
            assert theta - lit_first_price_bid(m, 200, theta) < 0.01

    def test_off_support_raises(self):
        with pytest.raises(DomainError):
            lit_first_price_bid(uniform_model(), 2, 1.7)


# ---------------------------------------------------------------------------
# concealed-count first-price bids, continuous
# ---------------------------------------------------------------------------


def mixed_pop():
    # designer prior (2/3, 1/3) size-biases to the even participant prior (1/2, 1/2)
    return PopulationModel({1: Fr(2, 3), 2: Fr(1, 3)})


class TestDarkContinuous:
    def test_uniform_two_rival_mixture_closed_form(self):
        m = uniform_model()
        pop = mixed_pop()
        for theta in UNIT_LATTICE:
            want = theta * theta / (2.0 * (1.0 + theta))
            assert dark_first_price_bid(m, pop, float(theta)) == pytest.approx(want, abs=1e-8)

    def test_value_at_top(self):
        assert dark_first_price_bid(uniform_model(), mixed_pop(), 1.0) == pytest.approx(0.25, abs=1e-8)

    def test_payment_equating_identity(self):
        # bid * P(win) must equal the mixture of expected second-price payments
        m = uniform_model()
        pop = mixed_pop()
        for theta in UNIT_LATTICE:
            theta = float(theta)
            bid = dark_first_price_bid(m, pop, theta)
            lhs = bid * (0.5 + 0.5 * theta)
            rhs = 0.5 * 0.0 + 0.5 * integrate(lambda x: x, 0.0, theta)
            assert lhs == pytest.approx(rhs, abs=1e-8)

    def test_degenerate_population_matches_known_count(self):
        m = uniform_model()
        pop = PopulationModel.degenerate(3)
        for theta in UNIT_LATTICE:
            assert dark_first_price_bid(m, pop, float(theta)) == pytest.approx(
                lit_first_price_bid(m, 3, float(theta)), abs=1e-12
            )

    def test_certain_solo_bidder_bids_zero(self):
        pop = PopulationModel.degenerate(1)
        for theta in (0.0, 0.4, 1.0):
            assert dark_first_price_bid(uniform_model(), pop, theta) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# finite chain bids
# ---------------------------------------------------------------------------


class TestChainBids:
    def test_frozen_k3_values_at_optimal_reserve(self):
        m = k3_uniform()
        rho = m.rho_star
        assert chain_bid_table(m, rho=rho, n=2) == (0, Fr(1, 2), Fr(7, 10))
        assert chain_bid_table(m, rho=rho, n=3) == (0, Fr(1, 2), Fr(31, 38))

    def test_frozen_k3_values_no_reserve(self):
        m = k3_uniform()
        assert chain_bid_table(m, rho=0, n=2) == (0, Fr(1, 3), Fr(3, 5))

    def test_frozen_dark_chain(self):
        m = k3_uniform()
        table = chain_bid_table(m, rho=m.rho_star, pop=mixed_pop())
        assert table == (0, Fr(1, 2), Fr(13, 22))

    @pytest.mark.parametrize("model", GRID_FAMILY, ids=lambda m: m.label)
    def test_downward_constraints_bind_exactly(self, model):
        for rho in reserves_of(model):
            k0 = k0_for_reserve(model, rho)
            for n in range(1, 5):
                bids = chain_bid_table(model, rho=rho, n=n)
                assert bids[k0 - 1] == model.grid[k0 - 1]
                for k in range(k0 + 1, model.K + 1):
                    assert payoff_chain(model, bids, n, k, k, k0) == payoff_chain(
                        model, bids, n, k - 1, k, k0
                    )

    @pytest.mark.parametrize("model", GRID_FAMILY, ids=lambda m: m.label)
    def test_globally_incentive_compatible(self, model):
        for rho in reserves_of(model):
            k0 = k0_for_reserve(model, rho)
            for n in (2, 4):
                bids = chain_bid_table(model, rho=rho, n=n)
                for true in range(1, model.K + 1):
                    truthful = payoff_chain(model, bids, n, true, true, k0) if true >= k0 else Fr(0)
                    for rep in range(k0, model.K + 1):
                        assert payoff_chain(model, bids, n, rep, true, k0) <= truthful

    def test_dark_chain_binds_under_mixture(self):
        m = k3_uniform()
        pop = mixed_pop()
        bids = chain_bid_table(m, rho=m.rho_star, pop=pop)

        def mixture_payoff(rep, true):
            return sum(w * payoff_chain(m, bids, n, rep, true, 2) for n, w in pop.p_map.items())

        assert mixture_payoff(3, 3) == mixture_payoff(2, 3)

    def test_strictly_increasing_in_n(self):
        m = k3_uniform()
        for k in (2, 3):
            vals = [chain_bid_table(m, rho=m.rho_star, n=n)[k - 1] for n in range(1, 6)]
            if k > 2:
                assert all(b < c for b, c in zip(vals, vals[1:]))

    def test_argument_validation(self):
        m = k3_uniform()
        with pytest.raises(ConfigurationError):
            chain_bid_table(m, n=2, pop=mixed_pop())
        with pytest.raises(ConfigurationError):
            chain_bid_table(m)
        with pytest.raises(DomainError):
            chain_bid_table(m, rho=Fr(3, 2), n=2)


# ---------------------------------------------------------------------------
# tie-corrected payments
# ---------------------------------------------------------------------------


class TestTieCorrected:
    def test_frozen_k3_values(self):
        m = k3_uniform()
        assert tie_corrected_fp_payment(m, 2, 3) == Fr(5, 8)
        assert tie_corrected_fp_payment(m, 3, 3) == Fr(17, 24)

    def test_strictly_increasing_in_n(self):
        m = k3_uniform()
        vals = [tie_corrected_fp_payment(m, n, 3) for n in range(1, 21)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_bottom_equals_reserve(self):
        for model in GRID_FAMILY:
            for n in (1, 2, 3):
                assert tie_corrected_fp_payment(model, n, model.k_star) == model.rho_star

    @pytest.mark.parametrize("model", GRID_FAMILY, ids=lambda m: m.label)
    def test_indifference_exact(self, model):
        for rho in reserves_of(model):
            k0 = k0_for_reserve(model, rho)
            for n in range(1, 5):
                for k in range(k0 + 1, model.K + 1):
                    assert payoff_tc(model, n, k0, k, k, rho) == payoff_tc(model, n, k0, k - 1, k, rho)

    @pytest.mark.parametrize("model", GRID_FAMILY, ids=lambda m: m.label)
    def test_globally_incentive_compatible(self, model):
        for rho in reserves_of(model):
            k0 = k0_for_reserve(model, rho)
            for n in (2, 4):
                for true in range(1, model.K + 1):
                    truthful = payoff_tc(model, n, k0, true, true, rho) if true >= k0 else Fr(0)
                    for rep in range(k0, model.K + 1):
                        assert payoff_tc(model, n, k0, rep, true, rho) <= truthful

    def test_nonregular_grid_needs_explicit_reserve(self):
        with pytest.raises(RegularityError):
            tie_corrected_fp_payment(NONREGULAR, 2, 3)
        # with the reserve pinned, the schedule exists and stays incentive compatible
        for n in range(1, 4):
            for k in range(2, NONREGULAR.K + 1):
                assert payoff_tc(NONREGULAR, n, 1, k, k, Fr(0)) == payoff_tc(NONREGULAR, n, 1, k - 1, k, Fr(0))

    def test_converges_to_own_type(self):
        m = FiniteTypeModel([0, 0.5, 1.0], [1 / 3, 1 / 3, 1 / 3], label="k3f")
        assert 1.0 - tie_corrected_fp_payment(m, 10_000, 3, rho=0.5) < 1e-3

    def test_domain_errors(self):
        m = k3_uniform()
        with pytest.raises(DomainError):
            tie_corrected_fp_payment(m, 2, 1)  # below the winning range at rho*
        with pytest.raises(DomainError):
            tie_corrected_fp_payment(m, 0, 3)
        with pytest.raises(DomainError):
            tie_corrected_fp_payment(m, 2, 4)
        with pytest.raises(UnsupportedFormatError):
            tie_corrected_fp_payment(uniform_model(), 2, 3)


@settings(max_examples=40, deadline=None)
@given(
    steps=st.lists(st.fractions(min_value=Fr(1, 20), max_value=1, max_denominator=20), min_size=1, max_size=3),
    weights=st.lists(st.integers(min_value=1, max_value=9), min_size=2, max_size=4),
    n=st.integers(min_value=1, max_value=4),
)
def test_indifference_property_random_grids(steps, weights, n):
    size = min(len(steps) + 1, len(weights))
    grid = [Fr(0)]
    for s in steps[: size - 1]:
        grid.append(grid[-1] + s)
    total = sum(weights[:size])
    masses = [Fr(w, total) for w in weights[:size]]
    model = FiniteTypeModel(grid, masses)
    bids = chain_bid_table(model, rho=0, n=n)
    for k in range(2, model.K + 1):
        assert payoff_tc(model, n, 1, k, k, Fr(0)) == payoff_tc(model, n, 1, k - 1, k, Fr(0))
        assert payoff_chain(model, bids, n, k, k, 1) == payoff_chain(model, bids, n, k - 1, k, 1)


# ---------------------------------------------------------------------------
# BidFunction wrapper
# ---------------------------------------------------------------------------


class TestBidFunction:
    def test_lit_continuous_matches_function(self):
        bf = BidFunction("lit-fp", uniform_model(), n=3)
        assert bf(0.6) == pytest.approx(lit_first_price_bid(uniform_model(), 3, 0.6), abs=1e-12)

    def test_finite_tables(self):
        m = k3_uniform()
        bf = BidFunction("lit-fp", m, rho=m.rho_star, n=2)
        assert bf(Fr(1)) == Fr(7, 10)
        tc = BidFunction("tc-fp", m, rho=m.rho_star, n=2)
        assert tc(Fr(1)) == Fr(5, 8)
        dark = BidFunction("dark-fp", m, rho=m.rho_star, pop=mixed_pop())
        assert dark(Fr(1)) == Fr(13, 22)

    def test_lattice_cache_reused(self):
        bf = BidFunction("dark-fp", uniform_model(), pop=mixed_pop())
        xs1, ys1 = bf.lattice(33)
        xs2, ys2 = bf.lattice(33)
        assert xs1 is xs2 and ys1 is ys2
        assert ys1[-1] == pytest.approx(0.25, abs=1e-8)

    def test_table_rows(self):
        m = k3_uniform()
        rows = BidFunction("lit-fp", m, rho=m.rho_star, n=2).table()
        assert rows == ((0, 0), (Fr(1, 2), Fr(1, 2)), (Fr(1), Fr(7, 10)))
        cont = BidFunction("lit-fp", uniform_model(), n=2).table()
        assert len(cont) == 101 and cont[-1][1] == pytest.approx(0.5, abs=1e-9)

    def test_constructor_validation(self):
        with pytest.raises(ConfigurationError):
            BidFunction("lit-fp", uniform_model())
        with pytest.raises(ConfigurationError):
            BidFunction("dark-fp", uniform_model())
        with pytest.raises(ConfigurationError):
            BidFunction("nonsense", uniform_model(), n=2)
        with pytest.raises(UnsupportedFormatError):
            BidFunction("tc-fp", uniform_model(), n=2)
