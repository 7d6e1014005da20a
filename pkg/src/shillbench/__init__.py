"""Auction mechanisms under population uncertainty.

Bid functions for auctions where the number of rivals may be concealed,
exact and Monte Carlo revenue engines on finite grids and the uniform model,
and a battery of manipulation checks (seller shills, auctioneer shills,
multi-identity buyers).
"""

__version__ = "0.1.0"

from .distributions import (
    ContinuousTypeModel,
    FiniteTypeModel,
    PopulationModel,
    discretize,
    optimal_reserve,
    participant_prior,
    uniform_model,
    virtual_valuation,
)
from .equilibrium import (
    BidFunction,
    chain_bid_table,
    dark_first_price_bid,
    lit_first_price_bid,
    tie_corrected_fp_payment,
)
from .mechanisms import (
    DisclosurePolicy,
    InducedDarkMechanism,
    Mechanism,
    Outcome,
    Signal,
    TypeProfile,
    induce_dark,
    run_mechanism,
)
from .revenue import (
    InterimQuantities,
    RevenueEstimate,
    dark_revenue_formula,
    expected_revenue_exact,
    expected_revenue_mc,
    interim_quantities,
    optimal_posted_price,
)
from .identity import (
    NOTIONS,
    DeviationReport,
    DeviationSpec,
    bayesian_buyer_ic,
    bayesian_seller_ic,
    bidding_zero_test,
    expost_auctioneer_ic,
    expost_buyer_ic,
    expost_seller_ic,
    identity_count_sweep,
)
from .config import ExperimentConfig, config_from_dict, load_config
from .cli import ExperimentResult, run_scenario
from .acceptance import reproduce_all, run_criterion

__all__ = [
    "ContinuousTypeModel",
    "FiniteTypeModel",
    "PopulationModel",
    "discretize",
    "optimal_reserve",
    "participant_prior",
    "uniform_model",
    "virtual_valuation",
    "BidFunction",
    "chain_bid_table",
    "dark_first_price_bid",
    "lit_first_price_bid",
    "tie_corrected_fp_payment",
    "DisclosurePolicy",
    "InducedDarkMechanism",
    "Mechanism",
    "Outcome",
    "Signal",
    "TypeProfile",
    "induce_dark",
    "run_mechanism",
    "InterimQuantities",
    "RevenueEstimate",
    "dark_revenue_formula",
    "expected_revenue_exact",
    "expected_revenue_mc",
    "interim_quantities",
    "optimal_posted_price",
    "NOTIONS",
    "DeviationReport",
    "DeviationSpec",
    "bayesian_buyer_ic",
    "bayesian_seller_ic",
    "bidding_zero_test",
    "expost_auctioneer_ic",
    "expost_buyer_ic",
    "expost_seller_ic",
    "identity_count_sweep",
    "ExperimentConfig",
    "config_from_dict",
    "load_config",
    "ExperimentResult",
    "run_scenario",
    "reproduce_all",
    "run_criterion",
    "__version__",
]
