"""Type models, population priors, virtual valuations.

Independent oracles used here:
  * mean-virtual-value identity: sum_k f_k v(theta^k) = theta^1 = 0 for any
    grid (summation by parts), checked exactly on hand grids and by hypothesis;
  * uniform closed forms v(x) = 2x - 1 and reserve 1/2.
"""

from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shillbench.distributions import (
    ContinuousTypeModel,
    FiniteTypeModel,
    PopulationModel,
    discretize,
    json_number,
    optimal_reserve,
    participant_prior,
    population_from_json,
    population_to_json,
    type_model_from_json,
    type_model_to_json,
    uniform_model,
    virtual_valuation,
)
from shillbench.errors import (
    ConfigurationError,
    DomainError,
    RegularityError,
    UnsupportedDistributionError,
)


def k3_uniform():
    return FiniteTypeModel([0, Fr(1, 2), 1], [Fr(1, 3)] * 3, label="k3")


# ---------------------------------------------------------------------------
# continuous models
# ---------------------------------------------------------------------------


class TestUniform:
    def test_cdf_pdf_ppf(self):
        m = uniform_model()
        assert m.cdf(0.3) == 0.3
        assert m.pdf(0.7) == 1.0
        assert m.ppf(0.25) == 0.25
        assert m.cdf(-1.0) == 0.0 and m.cdf(2.0) == 1.0

    def test_virtual_value_closed_form(self):
        m = uniform_model()
        for x in (0.0, 0.25, 0.5, 1.0):
            assert virtual_valuation(m, x) == pytest.approx(2.0 * x - 1.0, abs=1e-12)

    def test_regular_and_reserve(self):
        m = uniform_model()
        assert m.regular
        assert optimal_reserve(m) == pytest.approx(0.5, abs=1e-9)

    def test_outside_support_raises(self):
        with pytest.raises(DomainError):
            virtual_valuation(uniform_model(), 1.5)


def test_zero_density_raises():
    tri = ContinuousTypeModel(pdf=lambda x: 2.0 * x, cdf=lambda x: x * x, label="triangular")
    with pytest.raises(UnsupportedDistributionError):
        virtual_valuation(tri, 0.0)
    assert virtual_valuation(tri, 1.0) == 1.0


def test_nonregular_continuous_reserve_raises():
    # piecewise density that makes the virtual value dip
    def pdf(x):
        return 1.9 if x < 0.5 else 0.1

    def cdf(x):
        return 1.9 * x if x < 0.5 else 0.95 + 0.1 * (x - 0.5)

    m = ContinuousTypeModel(pdf=pdf, cdf=cdf, label="kinked")
    assert not m.regular
    with pytest.raises(RegularityError):
        optimal_reserve(m)


def test_generic_ppf_bisection():
    tri = ContinuousTypeModel(pdf=lambda x: 2.0 * x, cdf=lambda x: x * x, label="triangular")
    assert tri.ppf(0.25) == pytest.approx(0.5, abs=1e-9)


# ---------------------------------------------------------------------------
# finite models
# ---------------------------------------------------------------------------


class TestFiniteGrid:
    def test_k3_virtual_values_exact(self):
        m = k3_uniform()
        assert m.virtual_values() == (Fr(-1), Fr(0), Fr(1))
        assert m.regular
        assert m.k_star == 2
        assert m.rho_star == Fr(1, 2)
        assert optimal_reserve(m) == Fr(1, 2)

    def test_top_type_virtual_value_is_itself(self):
        m = FiniteTypeModel([0, Fr(2, 5), 1], [Fr(1, 6), Fr(1, 2), Fr(1, 3)])
        assert m.virtual_value_at(m.K) == 1

    def test_index_lookup(self):
        m = k3_uniform()
        assert m.index_of(Fr(1, 2)) == 2
        assert m.index_of(0.5) == 2
        assert m.index_of(1) == 3

    def test_off_grid_raises(self):
        m = k3_uniform()
        with pytest.raises(DomainError):
            virtual_valuation(m, 0.3)
        with pytest.raises(DomainError):
            m.index_of(Fr(1, 3))

    def test_mean_virtual_value_is_zero(self):
        m = FiniteTypeModel([0, Fr(1, 4), Fr(2, 3), 1], [Fr(1, 5), Fr(3, 10), Fr(1, 4), Fr(1, 4)])
        mean = sum(f * v for f, v in zip(m.masses, m.virtual_values()))
        assert mean == 0

    def test_nonregular_grid_flagged(self):
        m = FiniteTypeModel([0, Fr(1, 10), 1], [Fr(3, 5), Fr(1, 10), Fr(3, 10)])
        assert not m.regular
        with pytest.raises(RegularityError):
            _ = m.k_star
        with pytest.raises(RegularityError):
            optimal_reserve(m)

    @pytest.mark.parametrize(
        "grid,masses",
        [
            ([0.1, 0.5, 1.0], [Fr(1, 3)] * 3),      # lowest type must be 0
            ([0, 0.5, 0.5], [Fr(1, 3)] * 3),        # not strictly increasing
            ([0, 0.5, 1.0], [Fr(1, 2), Fr(1, 2), Fr(0)]),  # zero mass
            ([0, 0.5, 1.0], [0.3, 0.3, 0.3]),       # masses do not sum to 1
            ([0, 0.5], [Fr(1, 3)] * 3),             # length mismatch
        ],
    )
    def test_validation_errors(self, grid, masses):
        with pytest.raises(ConfigurationError):
            FiniteTypeModel(grid, masses)

    def test_ppf_steps(self):
        m = k3_uniform()
        assert m.ppf(0.0) == 0.0
        assert m.ppf(0.4) == 0.5
        assert m.ppf(0.9) == 1.0
        assert m.ppf(1.0) == 1.0

    def test_sampling_matches_masses(self):
        m = k3_uniform()
        rng = np.random.default_rng(7)
        draws = m.sample(rng, 20000)
        freq = np.mean(draws == 0.5)
        assert abs(freq - 1.0 / 3.0) < 0.02


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=2, max_value=5).flatmap(
        lambda k: st.tuples(
            st.lists(
                st.fractions(min_value=Fr(1, 50), max_value=1, max_denominator=50),
                min_size=k - 1,
                max_size=k - 1,
            ),
            st.lists(
                st.fractions(min_value=Fr(1, 50), max_value=1, max_denominator=50),
                min_size=k,
                max_size=k,
            ),
        )
    )
)
def test_mean_virtual_value_zero_property(grid_and_weights):
    steps, weights = grid_and_weights
    grid = [Fr(0)]
    for s in steps:
        grid.append(grid[-1] + s)
    total = sum(weights)
    masses = [w / total for w in weights]
    m = FiniteTypeModel(grid, masses)
    assert sum(f * v for f, v in zip(m.masses, m.virtual_values())) == 0


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("K", [3, 5, 11])
def test_uniform_discretization_stays_regular(K):
    m = discretize(uniform_model(), K)
    assert m.regular


@pytest.mark.parametrize("K", [3, 5, 11, 101])
def test_uniform_discretization_reserve(K):
    m = discretize(uniform_model(), K)
    assert float(m.rho_star) == 0.5


def test_discretize_masses_are_cells():
    m = discretize(uniform_model(), 5)
    np.testing.assert_allclose(m.float_masses(), [0.125, 0.25, 0.25, 0.25, 0.125])
    assert m.float_grid()[0] == 0.0 and m.float_grid()[-1] == 1.0


# ---------------------------------------------------------------------------
# population models
# ---------------------------------------------------------------------------


class TestPopulation:
    def test_binomial_exact(self):
        pop = PopulationModel.binomial(3, Fr(1, 2))
        assert pop.pi_map == {0: Fr(1, 8), 1: Fr(3, 8), 2: Fr(3, 8), 3: Fr(1, 8)}
        assert pop.p_map == {1: Fr(1, 4), 2: Fr(1, 2), 3: Fr(1, 4)}
        assert pop.is_size_consistent
        assert pop.is_exact

    def test_size_biasing_from_designer_prior(self):
        pop = PopulationModel({1: Fr(2, 3), 2: Fr(1, 3)})
        assert pop.p_map == {1: Fr(1, 2), 2: Fr(1, 2)}

    def test_inverse_size_biasing(self):
        pop = PopulationModel.from_participant({1: Fr(1, 2), 2: Fr(1, 2)})
        assert pop.pi_map == {1: Fr(2, 3), 2: Fr(1, 3)}
        assert pop.is_size_consistent

    def test_participant_prior_zero_outside_support(self):
        pop = PopulationModel.binomial(3, Fr(1, 2))
        assert participant_prior(pop, 5) == 0
        assert participant_prior(pop, 0) == 0
        assert participant_prior(pop, 2) == Fr(1, 2)

    def test_solo_entry_flag(self):
        assert PopulationModel.binomial(2, Fr(1, 2)).satisfies_solo_entry
        assert not PopulationModel.degenerate(2).satisfies_solo_entry

    def test_inconsistent_pair_is_flagged_not_rejected(self):
        pop = PopulationModel({1: Fr(1, 2), 2: Fr(1, 2)}, p={1: Fr(1, 2), 2: Fr(1, 2)})
        assert not pop.is_size_consistent

    @pytest.mark.parametrize(
        "bad",
        [
            {},                                  # empty
            {0: 1},                              # all mass on zero buyers
            {1: Fr(1, 2)},                       # does not sum to 1
            {-1: Fr(1, 2), 1: Fr(1, 2)},         # negative count
        ],
    )
    def test_invalid_designer_priors(self, bad):
        with pytest.raises(ConfigurationError):
            PopulationModel(bad)

    def test_binomial_bounds(self):
        with pytest.raises(ConfigurationError):
            PopulationModel.binomial(3, 0)
        with pytest.raises(ConfigurationError):
            PopulationModel.binomial(0, Fr(1, 2))

    def test_pi_arrays_for_sampling(self):
        ns, ws = PopulationModel.binomial(3, Fr(1, 2)).pi_arrays()
        assert list(ns) == [0, 1, 2, 3]
        assert ws.sum() == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------


def test_json_number_parsing():
    assert json_number(0.5) == Fr(1, 2)
    assert json_number("1/3") == Fr(1, 3)
    assert json_number(2) == Fr(2)
    with pytest.raises(ConfigurationError):
        json_number(True)


def test_type_model_json_round_trip():
    m = type_model_from_json({"kind": "finite", "grid": [0, "1/2", 1], "masses": ["1/3", "1/3", "1/3"]})
    assert isinstance(m, FiniteTypeModel)
    assert m.is_exact and m.rho_star == Fr(1, 2)
    again = type_model_from_json(type_model_to_json(m))
    assert again.grid == m.grid and again.masses == m.masses

    u = type_model_from_json({"kind": "uniform"})
    assert u.kind == "continuous"
    assert type_model_to_json(u) == {"kind": "uniform"}


def test_population_json_round_trip():
    pop = population_from_json({"mode": "binomial", "k": 3, "q": 0.5})
    assert pop.pi_map[2] == Fr(3, 8)
    again = population_from_json(population_to_json(pop))
    assert again.pi_map == pop.pi_map

    exp = population_from_json({"mode": "explicit", "pi": {"1": 0.5, "2": 0.5}})
    assert exp.p_map == {1: Fr(1, 3), 2: Fr(2, 3)}
    only_p = population_from_json({"mode": "explicit", "p": {"1": 0.5, "2": 0.5}})
    assert only_p.pi_map == {1: Fr(2, 3), 2: Fr(1, 3)}


def test_json_errors():
    with pytest.raises(ConfigurationError):
        type_model_from_json({"kind": "beta"})
    with pytest.raises(ConfigurationError):
        type_model_from_json({})
    with pytest.raises(ConfigurationError):
        population_from_json({"mode": "explicit"})
    with pytest.raises(ConfigurationError):
        population_from_json({"mode": "poisson"})
