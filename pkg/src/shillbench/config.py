"""Experiment configuration: schema validation and descriptor resolution.

A configuration is plain JSON. ``load_config`` validates it against the
published schema (``schemas/experiment.schema.json``) before touching any
numbers, then resolves the descriptors into bound model, population, and
mechanism objects. The validated raw dictionary rides along so reports can
embed exactly what was run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, Mapping, Optional, Sequence, Tuple

import jsonschema

from . import defaults
from .distributions import (
    PopulationModel,
    TypeModel,
    population_from_json,
    type_model_from_json,
)
from .errors import ConfigurationError
from .mechanisms import (
    DisclosurePolicy,
    Mechanism,
    Signal,
    mechanism_from_json,
)

__all__ = [
    "CheckSpec",
    "EngineSpec",
    "ExperimentConfig",
    "config_from_dict",
    "load_config",
    "load_schema",
]

_SCHEMA_CACHE: Optional[Dict] = None


def load_schema() -> Dict:
    """The experiment JSON schema bundled with the package."""
    global _SCHEMA_CACHE
    if _SCHEMA_CACHE is None:
        text = resources.files("shillbench.schemas").joinpath("experiment.schema.json").read_text()
        _SCHEMA_CACHE = json.loads(text)
    return _SCHEMA_CACHE


@dataclass(frozen=True)
class EngineSpec:
    mode: str = "exact"
    samples: int = defaults.MC_DEFAULT_SAMPLES
    seed: Optional[int] = None


@dataclass(frozen=True)
class CheckSpec:
    """One identity-compatibility check request against every mechanism."""

    notion: str
    method: Optional[str] = None
    max_shills: Optional[int] = None
    max_identities: Optional[int] = None
    lattice_step: Optional[float] = None
    samples: Optional[int] = None
    seed: Optional[int] = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    model: TypeModel
    pop: PopulationModel
    mechanisms: Tuple[Mechanism, ...]
    engine: EngineSpec
    checks: Tuple[CheckSpec, ...]
    analyses: Tuple[Tuple[str, Dict], ...]
    policy: Optional[DisclosurePolicy]
    outputs: Dict[str, str]
    budget: int
    raw: Dict = field(compare=False, repr=False, default_factory=dict)


def _validate(d: Mapping) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(d), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise ConfigurationError(f"config invalid at {where}: {first.message}")


def config_from_dict(d: Mapping) -> ExperimentConfig:
    """Validate a raw config dictionary and bind its descriptors."""
    _validate(d)
    model = type_model_from_json(d["type_model"])
    pop = population_from_json(d["population"])

    mechanisms = []
    for spec in d["mechanisms"]:
        mechanisms.append(mechanism_from_json(spec, model, pop=pop))
    labels = [m.label for m in mechanisms]
    if len(set(labels)) != len(labels):
        raise ConfigurationError(
            "mechanism labels must be unique; set 'label' on duplicated formats"
        )

    policy = None
    if "signals" in d:
        sigs = []
        for s in d["signals"]:
            idx = s["mechanism"]
            if idx >= len(mechanisms):
                raise ConfigurationError(f"signal {s['label']!r} points past the mechanism list")
            sigs.append(Signal(s["label"], frozenset(s["counts"]), mechanisms[idx]))
        policy = DisclosurePolicy(sigs)

    eng = d.get("engine", {"mode": "exact"})
    engine = EngineSpec(
        mode=eng["mode"],
        samples=int(eng.get("samples", defaults.MC_DEFAULT_SAMPLES)),
        seed=eng.get("seed"),
    )

    checks = tuple(CheckSpec(**c) for c in d.get("checks", ()))
    analyses = tuple((a["name"], dict(a.get("params", {}))) for a in d.get("analyses", ()))

    return ExperimentConfig(
        scenario=d["scenario"],
        model=model,
        pop=pop,
        mechanisms=tuple(mechanisms),
        engine=engine,
        checks=checks,
        analyses=analyses,
        policy=policy,
        outputs=dict(d.get("outputs", {})),
        budget=int(d.get("budget", defaults.EXACT_ENUM_BUDGET)),
        raw=json.loads(json.dumps(d)),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(d)


def tolerance_snapshot() -> Dict[str, object]:
    """The tolerance and budget constants a report should cite."""
    return {
        "ic_eps_exact": defaults.IC_EPS_EXACT,
        "ic_se_multiplier": defaults.IC_SE_MULTIPLIER,
        "lattice_step": defaults.LATTICE_STEP,
        "mc_chunk": defaults.MC_CHUNK,
        "exact_enum_budget": defaults.EXACT_ENUM_BUDGET,
        "golden_sig_digits": defaults.GOLDEN_SIG_DIGITS,
        "quad_abs_tol": defaults.QUAD_ABS_TOL,
    }
