"""Identity-compatibility checks against frozen gains and witnesses, plus cross-notion invariants."""

from fractions import Fraction as Fr

import pytest

from shillbench import identity as idm
from shillbench.distributions import FiniteTypeModel, PopulationModel, uniform_model
from shillbench.errors import BudgetExceededError, ConfigurationError, UnsupportedFormatError
from shillbench.mechanisms import DisclosurePolicy, Mechanism, Signal, induce_dark
from shillbench.revenue import expected_revenue_exact

UNI = uniform_model()
PI_1 = PopulationModel({1: 1})
PI_2 = PopulationModel({2: 1})
P_123 = PopulationModel({1: Fr(1, 3), 2: Fr(1, 3), 3: Fr(1, 3)})
P_HALF = PopulationModel.from_participant({1: Fr(1, 2), 2: Fr(1, 2)})
RHO = Fr(1, 2)


def k3() -> FiniteTypeModel:
    return FiniteTypeModel([0, Fr(1, 2), 1], [Fr(1, 3)] * 3)


def nearest(d, x):
    return d[min(d, key=lambda k: abs(k - x))]


class TestBiddingZero:
    def test_count_aware_first_price_one_shill(self):
        mech = Mechanism("lit-first-price", UNI, pop=PI_2, reserve=0)
        r = idm.bidding_zero_test(mech, max_shills=1)
        assert abs(r.gain - Fr(1, 9)) <= 1e-9
        assert r.verdict == "violated"
        assert r.witness["shills"] == 1

    def test_gain_grows_with_the_shill_cap(self):
        mech = Mechanism("lit-first-price", UNI, pop=PI_2, reserve=0)
        gains = [idm.bidding_zero_test(mech, max_shills=s).gain for s in (1, 2, 3)]
        assert gains[0] <= gains[1] <= gains[2]
        assert abs(gains[2] - Fr(1, 5)) <= 1e-9

    def test_price_statistic_formats_are_immune(self):
        msp = Mechanism("lit-second-price", UNI, pop=PI_2, reserve=0)
        assert idm.bidding_zero_test(msp, max_shills=2).gain == 0.0
        mdk = Mechanism("dark-first-price", UNI, pop=P_HALF, reserve=0)
        assert idm.bidding_zero_test(mdk, max_shills=2).gain == 0.0
        mp = Mechanism("posted-price", UNI, pop=PI_2, price=0.5)
        assert idm.bidding_zero_test(mp, max_shills=2).gain == 0.0

    def test_finite_grid_matches_independent_bid_table_oracle(self):
        # E[b3(max)] - E[b2(max)] enumerated straight from the chain tables
        mech = Mechanism("lit-first-price", k3(), pop=PI_2, reserve=0)
        r = idm.bidding_zero_test(mech, max_shills=1)
        assert r.gain == Fr(164, 1197)
        assert isinstance(r.gain, Fr)

    def test_finite_dark_chain_is_immune(self):
        mech = Mechanism("dark-first-price", k3(), pop=P_HALF, reserve=0)
        assert idm.bidding_zero_test(mech, max_shills=3).gain == 0

    def test_zero_cap_reports_null_gain(self):
        mech = Mechanism("lit-first-price", UNI, pop=PI_2, reserve=0)
        r = idm.bidding_zero_test(mech, max_shills=0)
        assert r.gain == 0.0 and r.witness is None

    def test_mc_agrees_with_closed_form(self):
        mech = Mechanism("lit-first-price", UNI, pop=PI_2, reserve=0)
        r = idm.bidding_zero_test(mech, max_shills=1, method="mc", samples=200_000, seed=11)
        se = r.witness["se"]
        assert se < 1e-3
        assert abs(r.gain - 1 / 9) <= 3 * se

    def test_mc_replays_bit_for_bit(self):
        mech = Mechanism("lit-first-price", UNI, pop=PI_2, reserve=0)
        a = idm.bidding_zero_test(mech, max_shills=1, method="mc", samples=50_000, seed=7)
        b = idm.bidding_zero_test(mech, max_shills=1, method="mc", samples=50_000, seed=7)
        assert a.gain == b.gain and a.equilibrium_value == b.equilibrium_value

    def test_unknown_method_rejected(self):
        mech = Mechanism("lit-first-price", UNI, pop=PI_2, reserve=0)
        with pytest.raises(ConfigurationError):
            idm.bidding_zero_test(mech, method="bootstrap")


class TestBayesianSeller:
    def test_single_buyer_no_reserve_is_exploitable(self):
        mech = Mechanism("lit-second-price", UNI, pop=PI_1, reserve=0)
        r = idm.bayesian_seller_ic(mech, max_shills=1)
        assert abs(r.gain - 0.25) <= 1e-9
        assert r.verdict == "violated"
        assert r.witness["assignment_by_count"][1] == [0.5]

    def test_optimal_reserve_already_prices_the_shill(self):
        mech = Mechanism("lit-second-price", UNI, pop=PI_1, reserve=0.5)
        r = idm.bayesian_seller_ic(mech, max_shills=2)
        assert abs(r.gain) <= 1e-9
        assert r.verdict == "compatible"
        assert r.qualifier == "grid-certified"
        assert r.exit_code == 3

    def test_count_aware_first_price_contains_the_all_zero_block(self):
        mech = Mechanism("lit-first-price", UNI, pop=PI_2, reserve=0)
        r = idm.bayesian_seller_ic(mech, max_shills=1)
        assert r.gain >= Fr(1, 9) - 1e-6
        assert r.witness["assignment_by_count"][2] == [0.0]

    def test_finite_count_revealing_assignments_vary_per_count(self):
        mech = Mechanism("lit-second-price", k3(), pop=P_HALF, reserve=0)
        r = idm.bayesian_seller_ic(mech, max_shills=1)
        assert r.gain == Fr(35, 162)
        assert r.witness["assignment_by_count"] == {1: [0.5], 2: [0.5]}

    def test_concealed_count_forces_one_assignment(self):
        mech = Mechanism("dark-first-price", k3(), pop=P_HALF, reserve=0)
        r = idm.bayesian_seller_ic(mech, max_shills=2)
        assert r.gain == 0
        assert r.witness is None
        assert "one assignment across counts" in r.spec.domain

    def test_posted_price_never_benefits(self):
        mech = Mechanism("posted-price", UNI, pop=PI_2, price=0.5)
        assert idm.bayesian_seller_ic(mech, max_shills=2).gain == 0.0


class TestExpostSeller:
    def test_no_reserve_second_price_profile_witness(self):
        mech = Mechanism("lit-second-price", k3(), pop=PI_2, reserve=0)
        r = idm.expost_seller_ic(mech, max_shills=1)
        assert r.gain == Fr(1, 6)
        assert r.witness["profile"] == [0.0, 1.0]
        assert r.witness["shill_reports"] == [0.5]
        assert r.witness["profile_gain"] == 0.5

    def test_posted_price_passes_exactly(self):
        mech = Mechanism("posted-price", k3(), pop=PI_2, price=RHO)
        r = idm.expost_seller_ic(mech, max_shills=2)
        assert r.gain == 0 and r.exit_code == 0

    def test_concealed_pay_your_bid_passes(self):
        mech = Mechanism("dark-first-price", k3(), pop=P_HALF, reserve=RHO)
        assert idm.expost_seller_ic(mech, max_shills=2).gain == 0

    def test_priority_order_top_shill_raises_the_threshold(self):
        mech = Mechanism("fixed-priority-second-price", k3(), pop=PI_2, reserve=RHO)
        r = idm.expost_seller_ic(mech, max_shills=1)
        assert r.gain == Fr(1, 6)
        assert r.witness["shill_reports"] == [1.0]

    def test_continuous_optimal_formats_are_refuted_on_the_lattice(self):
        for fmt in ("lit-first-price", "lit-second-price"):
            mech = Mechanism(fmt, UNI, pop=PI_2, reserve=0.5)
            r = idm.expost_seller_ic(mech, max_shills=1)
            assert r.gain >= 0.01, fmt
            assert r.verdict == "violated"
            assert r.qualifier is None  # refutations carry no certification caveat

    def test_budget_guard(self):
        mech = Mechanism("lit-second-price", UNI, pop=PI_2, reserve=0.5)
        with pytest.raises(BudgetExceededError):
            idm.expost_seller_ic(mech, max_shills=3, budget=10_000)


class TestExpostAuctioneer:
    def test_posted_price_rate_is_pinned(self):
        mech = Mechanism("posted-price", k3(), pop=PI_2, price=RHO)
        r = idm.expost_auctioneer_ic(mech, max_shills=2)
        assert r.gain == 0
        assert r.infeasible_profiles == 1  # both buyers below the price
        assert r.exit_code == 0

    def test_posted_price_with_up_to_three_buyers(self):
        mech = Mechanism("posted-price", k3(), pop=P_123, price=RHO)
        r = idm.expost_auctioneer_ic(mech, max_shills=2)
        assert r.gain == 0

    def test_second_price_rate_can_be_steered_to_the_top(self):
        mech = Mechanism("lit-second-price", k3(), pop=PI_2, reserve=0)
        r = idm.expost_auctioneer_ic(mech, max_shills=1)
        assert r.gain == Fr(4, 9)
        assert r.witness["rate"] == 1.0
        assert r.witness["shill_reports"] == [1.0]

    def test_reserve_does_not_save_the_second_price_rate(self):
        mech = Mechanism("lit-second-price", k3(), pop=PI_2, reserve=RHO)
        assert idm.expost_auctioneer_ic(mech, max_shills=1).verdict == "violated"

    def test_count_aware_first_price_rate_rises_with_count(self):
        mech = Mechanism("lit-first-price", k3(), pop=PI_2, reserve=RHO)
        assert idm.expost_auctioneer_ic(mech, max_shills=1).verdict == "violated"

    def test_concealed_pay_your_bid_is_pinned_on_the_grid(self):
        mech = Mechanism("dark-first-price", k3(), pop=P_HALF, reserve=RHO)
        r = idm.expost_auctioneer_ic(mech, max_shills=2)
        assert r.gain == 0
        assert r.infeasible_profiles == 2  # no-sale profiles keep their honest revenue

    def test_concealed_pay_your_bid_certified_on_the_continuous_lattice(self):
        mech = Mechanism("dark-first-price", UNI, pop=P_HALF, reserve=0.5)
        r = idm.expost_auctioneer_ic(mech, max_shills=1)
        assert r.gain == 0.0
        assert r.qualifier == "grid-certified"
        assert r.exit_code == 3


class TestBayesianBuyer:
    def test_posted_price_split_identities_documented_type(self):
        mech = Mechanism("posted-price", UNI, pop=PI_2, price=0.5)
        r = idm.bayesian_buyer_ic(mech, max_identities=2)
        assert r.verdict == "violated"
        assert abs(nearest(r.per_type, 0.9) - Fr(1, 30)) <= 1e-9
        assert abs(r.gain - Fr(1, 24)) <= 1e-9  # the top type gains the most
        assert r.witness["identities"] == 2

    def test_posted_price_finite_grid_exact(self):
        mech = Mechanism("posted-price", k3(), pop=PI_2, price=RHO)
        r = idm.bayesian_buyer_ic(mech, max_identities=2)
        assert r.per_type == {Fr(0): 0, RHO: 0, Fr(1): Fr(1, 18)}

    def test_concealed_pay_your_bid_certified(self):
        mech = Mechanism("dark-first-price", UNI, pop=P_HALF, reserve=0.5)
        r = idm.bayesian_buyer_ic(mech, max_identities=3)
        assert r.gain <= 1e-6
        assert r.verdict == "compatible"
        assert r.qualifier == "grid-certified"

    def test_count_aware_first_price_blocks_backfire(self):
        # extra identities inflate every rival bid, so the block never pays
        mech = Mechanism("lit-first-price", UNI, pop=PI_2, reserve=0)
        r = idm.bayesian_buyer_ic(mech, max_identities=3)
        assert r.gain == 0.0

    def test_tie_corrected_second_price_interim_block(self):
        mech = Mechanism("tie-corrected-second-price", k3(), pop=PI_2, reserve=RHO)
        r = idm.bayesian_buyer_ic(mech, max_identities=3)
        assert r.gain == Fr(1, 24)
        assert r.verdict == "violated"

    def test_symmetric_second_price_passes_exactly(self):
        mech = Mechanism("lit-second-price", k3(), pop=PI_2, reserve=RHO)
        assert idm.bayesian_buyer_ic(mech, max_identities=3).gain == 0


class TestExpostBuyer:
    def test_symmetric_second_price_passes_exactly(self):
        mech = Mechanism("lit-second-price", k3(), pop=PI_2, reserve=RHO)
        r = idm.expost_buyer_ic(mech, max_identities=3)
        assert r.gain == 0
        assert r.verdict == "compatible"

    def test_tie_corrected_witness_profile(self):
        mech = Mechanism("tie-corrected-second-price", k3(), pop=PI_2, reserve=RHO)
        r = idm.expost_buyer_ic(mech, max_identities=3)
        assert r.gain == Fr(1, 72)
        assert r.per_type[Fr(1)] == Fr(1, 24)
        assert r.witness["theta"] == 1.0
        assert r.witness["rivals"] == [0.5]
        assert r.witness["reports"] == [0.5, 0.5, 0.5]
        assert r.witness["profile_gain"] == 0.125

    def test_gain_monotone_in_the_identity_cap(self):
        mech = Mechanism("tie-corrected-second-price", k3(), pop=PI_2, reserve=RHO)
        gains = [idm.expost_buyer_ic(mech, max_identities=m).gain for m in (1, 2, 3)]
        assert gains == [0, Fr(1, 108), Fr(1, 72)]

    def test_concealed_pay_your_bid_fails_by_plain_misreport(self):
        mech = Mechanism("dark-first-price", k3(), pop=P_HALF, reserve=0)
        r = idm.expost_buyer_ic(mech, max_identities=1)
        assert r.gain == Fr(289, 3564)
        assert r.verdict == "violated"

    def test_posted_price_share_grabbing(self):
        mech = Mechanism("posted-price", k3(), pop=PI_2, price=RHO)
        r = idm.expost_buyer_ic(mech, max_identities=3)
        assert r.gain == Fr(1, 36)
        assert r.verdict == "violated"

    def test_budget_guard_on_the_continuous_lattice(self):
        mech = Mechanism("posted-price", UNI, pop=PI_2, price=0.5)
        with pytest.raises(BudgetExceededError):
            idm.expost_buyer_ic(mech, max_identities=2)

    def test_rejects_induced_mechanisms(self):
        base = Mechanism("lit-second-price", k3(), pop=PI_2, reserve=RHO)
        policy = DisclosurePolicy([Signal("all", frozenset({1, 2}), base)])
        with pytest.raises(UnsupportedFormatError):
            idm.expost_buyer_ic(induce_dark(policy))


class TestMetaInvariants:
    """Cross-check relationships between the notions rather than single gains."""

    def _mechs(self, pop):
        grid = k3()
        return {
            "lit-second-price": Mechanism("lit-second-price", grid, pop=pop, reserve=RHO),
            "lit-first-price": Mechanism("lit-first-price", grid, pop=pop, reserve=RHO),
            "tie-corrected-second-price": Mechanism(
                "tie-corrected-second-price", grid, pop=pop, reserve=RHO
            ),
            "tie-corrected-first-price": Mechanism(
                "tie-corrected-first-price", grid, pop=pop, reserve=RHO
            ),
            "fixed-priority-second-price": Mechanism(
                "fixed-priority-second-price", grid, pop=pop, reserve=RHO
            ),
            "dark-first-price": Mechanism("dark-first-price", grid, pop=P_HALF, reserve=RHO),
            "posted-price": Mechanism("posted-price", grid, pop=pop, price=RHO),
        }

    def test_single_identity_report_equals_a_direct_misreport_search(self):
        for name, mech in self._mechs(P_123).items():
            r = idm.expost_buyer_ic(mech, max_identities=1)
            direct = self._direct_misreport_gain(mech)
            assert r.gain == direct, name

    @staticmethod
    def _direct_misreport_gain(mech):
        pop, model = mech.pop, mech.model
        total = Fr(0)
        for n in pop.participant_support:
            for ti, theta in enumerate(model.grid):
                for rivals, w in idm._buyer_multisets(model, n - 1, idm._is_anonymous(mech)):
                    q0, t0 = mech.rule((theta,) + rivals)
                    base = theta * q0[0] - t0[0]
                    sup = base
                    for x in model.grid:
                        q, t = mech.rule((x,) + rivals)
                        sup = max(sup, theta * q[0] - t[0])
                    total += pop.p(n) * model.masses[ti] * w * (sup - base)
        return total

    def test_interim_gain_never_exceeds_the_per_profile_gain(self):
        # same caps on both sides; the committed block is one feasible
        # per-profile response, so the bound holds type by type
        for name, mech in self._mechs(PI_2).items():
            b = idm.bayesian_buyer_ic(mech, max_identities=2)
            e = idm.expost_buyer_ic(mech, max_identities=2)
            for g in k3().grid:
                assert b.per_type[g] <= e.per_type[g], name

    def test_no_revenue_optimal_format_passes_both_expost_checks(self):
        grid = k3()
        optimal = {
            "lit-first-price": Mechanism("lit-first-price", grid, pop=PI_2, reserve=RHO),
            "tie-corrected-second-price": Mechanism(
                "tie-corrected-second-price", grid, pop=PI_2, reserve=RHO
            ),
            "tie-corrected-first-price": Mechanism(
                "tie-corrected-first-price", grid, pop=PI_2, reserve=RHO
            ),
            "fixed-priority-second-price": Mechanism(
                "fixed-priority-second-price", grid, pop=PI_2, reserve=RHO
            ),
            "dark-first-price": Mechanism("dark-first-price", grid, pop=P_HALF, reserve=RHO),
            "posted-price": Mechanism("posted-price", grid, pop=PI_2, price=RHO),
        }
        for name, mech in optimal.items():
            buyer_ok = idm.expost_buyer_ic(mech, max_identities=2).verdict == "compatible"
            seller_ok = idm.expost_seller_ic(mech, max_shills=2).verdict == "compatible"
            assert not (buyer_ok and seller_ok), name

    def test_symmetric_tie_second_price_passes_both_but_leaks_revenue(self):
        # the coarse grid shields it from shills, yet it is not optimal,
        # so it does not contradict the impossibility pattern above
        grid = k3()
        mech = Mechanism("lit-second-price", grid, pop=PI_2, reserve=RHO)
        assert idm.expost_buyer_ic(mech, max_identities=2).verdict == "compatible"
        assert idm.expost_seller_ic(mech, max_shills=2).verdict == "compatible"
        best = Mechanism("tie-corrected-second-price", grid, pop=PI_2, reserve=RHO)
        assert expected_revenue_exact(mech).value < expected_revenue_exact(best).value

    def test_second_price_tops_every_anonymous_efficient_passer(self):
        grid = k3()
        efficient = {
            "lit-second-price": Mechanism("lit-second-price", grid, pop=PI_2, reserve=RHO),
            "lit-first-price": Mechanism("lit-first-price", grid, pop=PI_2, reserve=RHO),
            "tie-corrected-second-price": Mechanism(
                "tie-corrected-second-price", grid, pop=PI_2, reserve=RHO
            ),
            "tie-corrected-first-price": Mechanism(
                "tie-corrected-first-price", grid, pop=PI_2, reserve=RHO
            ),
            "dark-first-price": Mechanism("dark-first-price", grid, pop=P_HALF, reserve=RHO),
        }
        passers = {
            name: mech
            for name, mech in efficient.items()
            if idm.expost_buyer_ic(mech, max_identities=3).verdict == "compatible"
        }
        assert set(passers) == {"lit-second-price"}
        sp_rev = expected_revenue_exact(efficient["lit-second-price"]).value
        assert all(expected_revenue_exact(m).value <= sp_rev for m in passers.values())

    def test_identity_sweep_second_price_flat_posted_growing(self):
        grid = k3()
        msp = Mechanism("lit-second-price", grid, pop=PI_2, reserve=RHO, n_max=105)
        assert idm.identity_count_sweep(msp, counts=(1, 10, 100)) == {1: 0, 10: 0, 100: 0}
        mp = Mechanism("posted-price", grid, pop=PI_2, price=RHO, n_max=105)
        sweep = idm.identity_count_sweep(mp, counts=(1, 10, 100))
        assert sweep[1] == 0
        assert 0 < sweep[10] < sweep[100]
        assert sweep[100] == Fr(11, 202)

    def test_sweep_requires_a_finite_grid(self):
        mech = Mechanism("posted-price", UNI, pop=PI_2, price=0.5, n_max=105)
        with pytest.raises(UnsupportedFormatError):
            idm.identity_count_sweep(mech, counts=(1, 10))

    def test_report_serialization_round_trip(self):
        mech = Mechanism("tie-corrected-second-price", k3(), pop=PI_2, reserve=RHO)
        r = idm.expost_buyer_ic(mech, max_identities=3)
        d = r.to_json()
        assert d["verdict"] == "violated"
        assert d["gain_exact"] == "1/72"
        assert d["notion"] == "expost-buyer"
        assert d["witness"]["profile_gain"] == 0.125
