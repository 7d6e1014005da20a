"""Bundled experiment configurations, one per acceptance criterion.

Each entry is a plain JSON-able dictionary that ``config_from_dict`` accepts
unchanged, so every bundled scenario can also be dumped to a file, edited,
and rerun through the CLI. The registry order follows the criterion numbers
used by ``shillbench.acceptance``.
"""

import copy
from typing import Dict, Tuple

from .errors import ConfigurationError

__all__ = ["bundled", "scenario", "names", "criterion_of"]

_UNIFORM = {"kind": "uniform"}
_K3 = {
    "kind": "finite",
    "grid": [0, "1/2", 1],
    "masses": ["1/3", "1/3", "1/3"],
    "label": "k3",
}
_PI_1 = {"mode": "explicit", "pi": {"1": 1}}
_PI_2 = {"mode": "explicit", "pi": {"2": 1}}
_P_123 = {"mode": "explicit", "pi": {"1": "1/3", "2": "1/3", "3": "1/3"}}
_P_HALF = {"mode": "explicit", "p": {"1": "1/2", "2": "1/2"}}
_P_1234 = {"mode": "explicit", "pi": {"1": "1/4", "2": "1/4", "3": "1/4", "4": "1/4"}}

_MC_SEED = 20240814

# (criterion number, scenario name, config) in criterion order
_REGISTRY: Tuple[Tuple[int, str, Dict], ...] = (
    (
        1,
        "lit-fp-bid-closed-form",
        {
            "scenario": "lit-fp-bid-closed-form",
            "type_model": _UNIFORM,
            "population": _PI_2,
            "mechanisms": [{"format": "lit-first-price", "reserve": 0}],
            "analyses": [
                {"name": "lit-fp-bid-curve", "params": {"counts": [2, 3, 10], "points": 101}}
            ],
        },
    ),
    (
        2,
        "dark-fp-bid-closed-form",
        {
            "scenario": "dark-fp-bid-closed-form",
            "type_model": _UNIFORM,
            "population": _P_HALF,
            "mechanisms": [{"format": "dark-first-price", "reserve": 0}],
            "analyses": [{"name": "dark-fp-bid-curve", "params": {"points": 101}}],
        },
    ),
    (
        3,
        "tc-fp-monotone",
        {
            "scenario": "tc-fp-monotone",
            "type_model": _K3,
            "population": _PI_2,
            "mechanisms": [{"format": "tie-corrected-first-price", "reserve": "optimal"}],
            "analyses": [{"name": "tc-fp-payments", "params": {"max_n": 20}}],
        },
    ),
    (
        4,
        "tc-fp-binding-indifference",
        {
            "scenario": "tc-fp-binding-indifference",
            "type_model": _K3,
            "population": _PI_2,
            "mechanisms": [{"format": "tie-corrected-first-price", "reserve": "optimal"}],
            "analyses": [{"name": "binding-indifference", "params": {"max_n": 4}}],
        },
    ),
    (
        5,
        "lit-fp-shill-gain",
        {
            "scenario": "lit-fp-shill-gain",
            "type_model": _UNIFORM,
            "population": _PI_2,
            "mechanisms": [{"format": "lit-first-price", "reserve": 0}],
            "engine": {"mode": "mc", "samples": 1_000_000, "seed": _MC_SEED},
            "checks": [
                {"notion": "bidding-zero", "max_shills": 1, "method": "exact"},
                {"notion": "bidding-zero", "max_shills": 1, "method": "mc"},
            ],
        },
    ),
    (
        6,
        "bayes-seller-optimal-reserve",
        {
            "scenario": "bayes-seller-optimal-reserve",
            "type_model": _UNIFORM,
            "population": _PI_1,
            "mechanisms": [{"format": "lit-second-price", "reserve": "optimal"}],
            "checks": [{"notion": "bayes-seller", "max_shills": 2, "lattice_step": 0.01}],
        },
    ),
    (
        7,
        "expost-seller-lit-witnesses",
        {
            "scenario": "expost-seller-lit-witnesses",
            "type_model": _UNIFORM,
            "population": _PI_2,
            "mechanisms": [
                {"format": "lit-first-price", "reserve": "optimal"},
                {"format": "lit-second-price", "reserve": "optimal"},
            ],
            "checks": [{"notion": "expost-seller", "max_shills": 1, "lattice_step": 0.01}],
        },
    ),
    (
        8,
        "posted-auctioneer-immunity",
        {
            "scenario": "posted-auctioneer-immunity",
            "type_model": _K3,
            "population": _P_123,
            "mechanisms": [
                {"format": "posted-price", "price": "1/2"},
                {"format": "lit-second-price", "reserve": "optimal"},
                {"format": "lit-first-price", "reserve": "optimal"},
            ],
            "checks": [{"notion": "expost-auctioneer", "max_shills": 2}],
        },
    ),
    (
        9,
        "dark-auctioneer-buyer-certified",
        {
            "scenario": "dark-auctioneer-buyer-certified",
            "type_model": _UNIFORM,
            "population": _P_HALF,
            "mechanisms": [{"format": "dark-first-price", "reserve": "optimal"}],
            "checks": [
                {"notion": "expost-auctioneer", "max_shills": 1, "lattice_step": 0.01},
                {"notion": "bayes-buyer", "max_identities": 3, "lattice_step": 0.01},
            ],
        },
    ),
    (
        10,
        "expost-buyer-second-price",
        {
            "scenario": "expost-buyer-second-price",
            "type_model": _K3,
            "population": _PI_2,
            "mechanisms": [
                {"format": "lit-second-price", "reserve": "optimal"},
                {"format": "tie-corrected-second-price", "reserve": "optimal"},
            ],
            "checks": [{"notion": "expost-buyer", "max_identities": 3}],
        },
    ),
    (
        11,
        "revenue-equivalence-uniform",
        {
            "scenario": "revenue-equivalence-uniform",
            "type_model": _UNIFORM,
            "population": _P_HALF,
            "mechanisms": [
                {"format": "lit-second-price", "reserve": "optimal"},
                {"format": "lit-first-price", "reserve": "optimal"},
                {"format": "dark-first-price", "reserve": "optimal"},
            ],
            "engine": {"mode": "mc", "samples": 1_000_000, "seed": _MC_SEED},
        },
    ),
    (
        12,
        "revenue-cross-engine",
        {
            "scenario": "revenue-cross-engine",
            "type_model": _K3,
            "population": _PI_2,
            "mechanisms": [
                {"format": "lit-second-price", "reserve": "1/2"},
                {"format": "lit-first-price", "reserve": "1/2"},
                {"format": "tie-corrected-second-price", "reserve": "1/2"},
                {"format": "tie-corrected-first-price", "reserve": "1/2"},
                {"format": "fixed-priority-second-price", "reserve": "1/2"},
                {"format": "dark-first-price", "reserve": "1/2"},
                {"format": "posted-price", "price": "1/2"},
            ],
            "analyses": [{"name": "cross-engine-revenue"}],
        },
    ),
    (
        13,
        "partitional-outcome-equivalence",
        {
            "scenario": "partitional-outcome-equivalence",
            "type_model": _K3,
            "population": _P_1234,
            "mechanisms": [
                {"format": "lit-second-price", "reserve": "1/2"},
                {"format": "lit-first-price", "reserve": "1/2"},
            ],
            "signals": [
                {"label": "small", "counts": [1, 2], "mechanism": 0},
                {"label": "large", "counts": [3, 4], "mechanism": 1},
            ],
            "analyses": [{"name": "partitional-equivalence", "params": {"max_n": 4}}],
        },
    ),
    (
        14,
        "posted-buyer-split-gain",
        {
            "scenario": "posted-buyer-split-gain",
            "type_model": _UNIFORM,
            "population": _PI_2,
            "mechanisms": [{"format": "posted-price", "price": 0.5}],
            "checks": [{"notion": "bayes-buyer", "max_identities": 2}],
        },
    ),
    (
        15,
        "optimal-posted-prices",
        {
            "scenario": "optimal-posted-prices",
            "type_model": _UNIFORM,
            "population": _PI_1,
            "mechanisms": [{"format": "posted-price", "price": "optimal"}],
            "analyses": [
                {
                    "name": "optimal-posted-price",
                    "params": {
                        "pops": [
                            {"label": "pi1", "mode": "explicit", "pi": {"1": 1}},
                            {"label": "pi2", "mode": "explicit", "pi": {"2": 1}},
                        ]
                    },
                }
            ],
        },
    ),
)

_BY_NAME = {name: (num, cfg) for num, name, cfg in _REGISTRY}


def names() -> Tuple[str, ...]:
    """Scenario names in criterion order."""
    return tuple(name for _, name, _ in _REGISTRY)


def bundled() -> Dict[str, Dict]:
    """Deep copies of every bundled configuration, keyed by scenario name."""
    return {name: copy.deepcopy(cfg) for _, name, cfg in _REGISTRY}


def scenario(name: str) -> Dict:
    if name not in _BY_NAME:
        known = ", ".join(names())
        raise ConfigurationError(f"unknown scenario {name!r}; bundled scenarios: {known}")
    return copy.deepcopy(_BY_NAME[name][1])


def criterion_of(name: str) -> int:
    if name not in _BY_NAME:
        raise ConfigurationError(f"unknown scenario {name!r}")
    return _BY_NAME[name][0]
