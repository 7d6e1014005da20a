"""Type distributions, population priors, and virtual valuations.

Two kinds of type model are supported: continuous densities on an interval
(only the uniform model is built in, anything else plugs in through the same
class) and finite grids with point masses. Population uncertainty is captured
by a pair of priors: the designer's prior ``pi`` over the number of
participating buyers and the participants' own prior ``p``, which for a
binomial arrival process is the size-biased version of ``pi``.
"""

import math
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import defaults
from .errors import (
    ConfigurationError,
    DomainError,
    RegularityError,
    UnsupportedDistributionError,
)

Num = Union[int, float, Fraction]


def exactify(x: Union[Num, str]) -> Num:
    """Coerce a scalar toward exact arithmetic where that is faithful.

    Integers and fraction strings ("1/3", "0.5") become Fractions, Fractions
    pass through, floats stay floats (the caller chose inexact input).
    """
    if isinstance(x, bool):
        raise ConfigurationError(f"expected a number, got {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigurationError(f"cannot parse number {x!r}") from exc
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ConfigurationError(f"non-finite number {x!r}")
        return x
    raise ConfigurationError(f"expected a number, got {type(x).__name__}")


def json_number(x) -> Num:
    """Parse a number from JSON: floats are read as their decimal literal.

    JSON carries no rational type, so 0.5 arrives as a float; taking the
    decimal string keeps configs exact (0.1 -> 1/10, not the binary float).
    Strings like "1/3" are accepted for true rationals.
    """
    if isinstance(x, bool):
        raise ConfigurationError(f"expected a number, got {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ConfigurationError(f"non-finite number {x!r}")
        return Fraction(str(x))
    if isinstance(x, str):
        return exactify(x)
    raise ConfigurationError(f"expected a number, got {type(x).__name__}")


def _is_exact(values: Iterable[Num]) -> bool:
    return all(isinstance(v, Fraction) for v in values)


# ---------------------------------------------------------------------------
# continuous models
# ---------------------------------------------------------------------------


class ContinuousTypeModel:
    """A continuous type distribution on ``[lo, hi]``.

    Parameters
    ----------
    pdf, cdf : callables
        Density and distribution function on the support.
    lo, hi : float
        Support endpoints.
    ppf : callable, optional
        Exact quantile function; when omitted, quantiles are found by
        bisection on ``cdf`` to the configured tolerance.
    label : str
        Name used in reports and provenance.
    """

    kind = "continuous"

    def __init__(
        self,
        pdf: Callable[[float], float],
        cdf: Callable[[float], float],
        lo: float = 0.0,
        hi: float = 1.0,
        ppf: Optional[Callable[[float], float]] = None,
        label: str = "continuous",
    ):
        if not hi > lo:
            raise ConfigurationError("support must satisfy hi > lo")
        self._pdf = pdf
        self._cdf = cdf
        self._ppf = ppf
        self.lo = float(lo)
        self.hi = float(hi)
        self.label = label
        self._regular: Optional[bool] = None

    def __repr__(self) -> str:
        return f"ContinuousTypeModel({self.label!r}, [{self.lo}, {self.hi}])"

    def pdf(self, x: float) -> float:
        return float(self._pdf(x))

    def cdf(self, x: float) -> float:
        if x <= self.lo:
            return 0.0
        if x >= self.hi:
            return 1.0
        return float(self._cdf(x))

    def ppf(self, u: float) -> float:
        if not 0.0 <= u <= 1.0:
            raise DomainError(f"quantile level {u} outside [0, 1]")
        if self._ppf is not None:
            return float(self._ppf(u))
        from .numerics import bisect_threshold

        return bisect_threshold(lambda x: self.cdf(x) >= u, self.lo, self.hi)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        u = rng.random(size)
        if self._ppf is not None and _is_identity(self._ppf):
            return u
        fn = self._ppf if self._ppf is not None else self.ppf
        return np.vectorize(fn, otypes=[float])(u)

    def virtual_value(self, theta: float) -> float:
        if not self.lo <= theta <= self.hi:
            raise DomainError(f"type {theta} outside support [{self.lo}, {self.hi}]")
        dens = self.pdf(theta)
        if dens <= 0.0:
            raise UnsupportedDistributionError(
                f"virtual valuation undefined where the density vanishes (theta={theta})"
            )
        return theta - (1.0 - self.cdf(theta)) / dens

    @property
    def regular(self) -> bool:
        """Strict monotonicity of the virtual valuation, certified on a lattice."""
        if self._regular is None:
            n = defaults.REGULARITY_LATTICE_N
            xs = np.linspace(self.lo, self.hi, n)
            try:
                vals = [self.virtual_value(float(x)) for x in xs]
            except UnsupportedDistributionError:
                self._regular = False
                return self._regular
            self._regular = all(b > a for a, b in zip(vals, vals[1:]))
        return self._regular


def _is_identity(fn) -> bool:
    return getattr(fn, "_identity_ppf", False)


def _uniform_ppf(u: float) -> float:
    return u


_uniform_ppf._identity_ppf = True  # type: ignore[attr-defined]


def uniform_model() -> ContinuousTypeModel:
    """The uniform distribution on [0, 1] (the one continuous model required)."""
    return ContinuousTypeModel(
        pdf=lambda x: 1.0,
        cdf=lambda x: x,
        lo=0.0,
        hi=1.0,
        ppf=_uniform_ppf,
        label="uniform",
    )


# ---------------------------------------------------------------------------
# finite models
# ---------------------------------------------------------------------------


class FiniteTypeModel:
    """A finite type grid ``0 = theta^1 < ... < theta^K`` with point masses.

    Grid values and masses may be Fractions (exact engines stay exact) or
    floats. Comparisons between grid types are always done by index.
    """

    kind = "finite"

    def __init__(self, grid: Sequence[Num], masses: Sequence[Num], label: str = "finite"):
        grid_t = tuple(exactify(g) for g in grid)
        masses_t = tuple(exactify(m) for m in masses)
        if len(grid_t) < 1:
            raise ConfigurationError("grid must be nonempty")
        if len(grid_t) != len(masses_t):
            raise ConfigurationError("grid and masses must have equal length")
        if grid_t[0] != 0:
            raise ConfigurationError("the lowest grid type must be 0")
        for a, b in zip(grid_t, grid_t[1:]):
            if not b > a:
                raise ConfigurationError("grid values must be strictly increasing")
        if any(m <= 0 for m in masses_t):
            raise ConfigurationError("all masses must be positive")
        total = sum(masses_t)
        if abs(float(total) - 1.0) > defaults.MASS_SUM_TOL:
            raise ConfigurationError(f"masses sum to {float(total)}, not 1")
        self.grid: Tuple[Num, ...] = grid_t
        self.masses: Tuple[Num, ...] = masses_t
        self.label = label
        self.is_exact = _is_exact(grid_t) and _is_exact(masses_t)
        zero = Fraction(0) if self.is_exact else 0.0
        cum: List[Num] = [zero]
        for m in masses_t:
            cum.append(cum[-1] + m)
        self._cum = tuple(cum)  # _cum[k] = F_k, k = 0..K
        self._float_grid = np.array([float(g) for g in grid_t])
        self._float_cum = np.array([float(c) for c in cum])
        self._vv: Optional[Tuple[Num, ...]] = None

    def __repr__(self) -> str:
        return f"FiniteTypeModel({self.label!r}, K={self.K})"

    @property
    def K(self) -> int:
        return len(self.grid)

    def cum(self, k: int) -> Num:
        """F_k, the total mass of the lowest k grid types (F_0 = 0)."""
        return self._cum[k]

    def index_of(self, theta: Num) -> int:
        """1-based grid index of ``theta``; DomainError if it is off-grid."""
        if isinstance(theta, (int, Fraction)):
            target = Fraction(theta)
            for i, g in enumerate(self.grid):
                if Fraction(g) == target:
                    return i + 1
        else:
            diffs = np.abs(self._float_grid - float(theta))
            i = int(np.argmin(diffs))
            if diffs[i] <= defaults.GRID_LOOKUP_TOL:
                return i + 1
        raise DomainError(f"type {theta} is not a grid point of {self.label}")

    def virtual_values(self) -> Tuple[Num, ...]:
        """v(theta^k) for every k, with the top type's virtual value equal to itself."""
        if self._vv is None:
            vals: List[Num] = []
            K = self.K
            for k in range(1, K + 1):
                if k == K:
                    vals.append(self.grid[K - 1])
                else:
                    step = self.grid[k] - self.grid[k - 1]
                    vals.append(self.grid[k - 1] - step * (1 - self.cum(k)) / self.masses[k - 1])
            self._vv = tuple(vals)
        return self._vv

    def virtual_value_at(self, k: int) -> Num:
        if not 1 <= k <= self.K:
            raise DomainError(f"grid index {k} outside 1..{self.K}")
        return self.virtual_values()[k - 1]

    def virtual_value(self, theta: Num) -> Num:
        return self.virtual_value_at(self.index_of(theta))

    @property
    def regular(self) -> bool:
        vv = self.virtual_values()
        return all(b > a for a, b in zip(vv, vv[1:]))

    @property
    def k_star(self) -> int:
        """Smallest grid index whose virtual value is nonnegative."""
        if not self.regular:
            raise RegularityError(f"{self.label}: virtual values are not strictly increasing")
        for k, v in enumerate(self.virtual_values(), start=1):
            if v >= 0:
                return k
        return self.K  # unreachable: v(theta^K) = theta^K >= 0

    @property
    def rho_star(self) -> Num:
        return self.grid[self.k_star - 1]

    def ppf(self, u: float) -> float:
        idx = int(np.searchsorted(self._float_cum[1:], u, side="left"))
        return float(self._float_grid[min(idx, self.K - 1)])

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        u = rng.random(size)
        idx = np.searchsorted(self._float_cum[1:], u, side="left")
        return self._float_grid[np.minimum(idx, self.K - 1)]

    def float_grid(self) -> np.ndarray:
        return self._float_grid

    def float_masses(self) -> np.ndarray:
        return np.diff(self._float_cum)


TypeModel = Union[ContinuousTypeModel, FiniteTypeModel]


def discretize(model: ContinuousTypeModel, K: int, label: Optional[str] = None) -> FiniteTypeModel:
    """Uniform-lattice finite approximation of a continuous model.

    Grid points are equally spaced across the support; each carries the mass
    of its midpoint cell, so the two end points carry half cells.
    """
    if K < 2:
        raise ConfigurationError("discretization needs at least two grid points")
    lo, hi = model.lo, model.hi
    h = (hi - lo) / (K - 1)
    grid = [lo + j * h for j in range(K)]
    grid[-1] = hi
    edges = [lo] + [lo + (j + 0.5) * h for j in range(K - 1)] + [hi]
    masses = [model.cdf(edges[j + 1]) - model.cdf(edges[j]) for j in range(K)]
    return FiniteTypeModel(grid, masses, label=label or f"{model.label}-K{K}")


# ---------------------------------------------------------------------------
# population models
# ---------------------------------------------------------------------------


def _normalize_prior(prior: Mapping[int, Num], name: str, min_n: int) -> Dict[int, Num]:
    out: Dict[int, Num] = {}
    for n, w in prior.items():
        n = int(n)
        if n < min_n:
            raise ConfigurationError(f"{name} support must be >= {min_n}, got {n}")
        w = exactify(w)
        if w < 0:
            raise ConfigurationError(f"{name}({n}) is negative")
        if w > 0:
            out[n] = w
    if not out:
        raise ConfigurationError(f"{name} has empty support")
    total = sum(out.values())
    if abs(float(total) - 1.0) > defaults.MASS_SUM_TOL:
        raise ConfigurationError(f"{name} sums to {float(total)}, not 1")
    return dict(sorted(out.items()))


class PopulationModel:
    """Designer prior ``pi`` over the number of buyers and participant prior ``p``.

    ``pi`` may put mass on n = 0 (no buyer shows up); ``p`` lives on n >= 1,
    being the belief of a buyer who knows they themselves arrived. When only
    one of the two is supplied the other is derived by (inverse) size-biasing,
    the relation that an i.i.d. arrival process imposes.
    """

    def __init__(
        self,
        pi: Mapping[int, Num],
        p: Optional[Mapping[int, Num]] = None,
        mode: str = "explicit",
        meta: Optional[Dict] = None,
    ):
        self.pi_map = _normalize_prior(pi, "pi", min_n=0)
        if not any(n >= 1 for n in self.pi_map):
            raise ConfigurationError("pi must put positive mass on some n >= 1")
        if p is None:
            self.p_map = self._size_biased(self.pi_map)
            self.is_size_consistent = True
        else:
            self.p_map = _normalize_prior(p, "p", min_n=1)
            self.is_size_consistent = self.p_map == self._size_biased(self.pi_map)
        self.mode = mode
        self.meta = meta or {}

    @staticmethod
    def _size_biased(pi_map: Dict[int, Num]) -> Dict[int, Num]:
        mean = sum(n * w for n, w in pi_map.items())
        return {n: n * w / mean for n, w in sorted(pi_map.items()) if n >= 1}

    @classmethod
    def from_participant(cls, p: Mapping[int, Num], mode: str = "explicit") -> "PopulationModel":
        """Build from ``p`` alone: pi_n proportional to p(n)/n on n >= 1."""
        p_norm = _normalize_prior(p, "p", min_n=1)
        raw = {n: w / n for n, w in p_norm.items()}
        total = sum(raw.values())
        pi = {n: w / total for n, w in raw.items()}
        return cls(pi, p=p_norm, mode=mode)

    @classmethod
    def binomial(cls, k: int, q: Union[Num, str]) -> "PopulationModel":
        """Each of ``k`` potential buyers arrives independently with chance ``q``."""
        if k < 1:
            raise ConfigurationError("binomial population needs k >= 1")
        q = exactify(q)
        if not 0 < q < 1:
            raise ConfigurationError("binomial arrival chance must be strictly inside (0, 1)")
        one = Fraction(1) if isinstance(q, Fraction) else 1.0
        pi = {n: math.comb(k, n) * q**n * (one - q) ** (k - n) for n in range(k + 1)}
        p = {n: math.comb(k - 1, n - 1) * q ** (n - 1) * (one - q) ** (k - n) for n in range(1, k + 1)}
        return cls(pi, p=p, mode="binomial", meta={"k": k, "q": q})

    @classmethod
    def degenerate(cls, n: int) -> "PopulationModel":
        """Exactly ``n`` buyers, common knowledge of the count aside."""
        return cls({n: Fraction(1)}, mode="explicit")

    def pi(self, n: int) -> Num:
        return self.pi_map.get(n, Fraction(0) if self.is_exact else 0.0)

    def p(self, n: int) -> Num:
        return self.p_map.get(n, Fraction(0) if self.is_exact else 0.0)

    @property
    def is_exact(self) -> bool:
        return _is_exact(self.pi_map.values()) and _is_exact(self.p_map.values())

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(self.pi_map)

    @property
    def participant_support(self) -> Tuple[int, ...]:
        return tuple(self.p_map)

    @property
    def max_n(self) -> int:
        return max(self.support)

    @property
    def mean_n(self) -> Num:
        return sum(n * w for n, w in self.pi_map.items())

    @property
    def satisfies_solo_entry(self) -> bool:
        """Whether a lone buyer occurs with positive probability (pi_1 > 0)."""
        return self.pi(1) > 0

    def pi_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        ns = np.array(sorted(self.pi_map), dtype=np.int64)
        ws = np.array([float(self.pi_map[int(n)]) for n in ns])
        ws = ws / ws.sum()
        return ns, ws

    def __repr__(self) -> str:
        return f"PopulationModel({self.mode}, pi={ {n: str(w) for n, w in self.pi_map.items()} })"


# ---------------------------------------------------------------------------
# module-level operations (the public verbs)
# ---------------------------------------------------------------------------


def virtual_valuation(model: TypeModel, theta: Num) -> Num:
    """v(theta) for either model kind; off-grid finite types raise DomainError."""
    return model.virtual_value(theta)


def optimal_reserve(model: TypeModel) -> Num:
    """The revenue-optimal reserve: the lowest type with nonnegative virtual value."""
    if model.kind == "finite":
        return model.rho_star
    if not model.regular:
        raise RegularityError(f"{model.label}: optimal reserve requires a regular distribution")
    from .numerics import bisect_threshold

    return bisect_threshold(lambda x: model.virtual_value(x) >= 0.0, model.lo, model.hi)


def participant_prior(pop: PopulationModel, n: int) -> Num:
    """p(n), the belief a participating buyer holds over how many buyers arrived."""
    if n < 1:
        return Fraction(0) if pop.is_exact else 0.0
    return pop.p(n)


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------


def type_model_from_json(d: Mapping) -> TypeModel:
    if not isinstance(d, Mapping) or "kind" not in d:
        raise ConfigurationError("type_model needs a 'kind' field")
    kind = d["kind"]
    if kind == "uniform":
        return uniform_model()
    if kind == "finite":
        try:
            grid = [json_number(x) for x in d["grid"]]
            masses = [json_number(x) for x in d["masses"]]
        except KeyError as exc:
            raise ConfigurationError(f"finite type_model missing field {exc}") from exc
        return FiniteTypeModel(grid, masses, label=d.get("label", "finite"))
    raise ConfigurationError(f"unknown type_model kind {kind!r}")


def type_model_to_json(model: TypeModel) -> Dict:
    if model.kind == "continuous":
        if model.label != "uniform":
            raise ConfigurationError("only the uniform continuous model serializes to JSON")
        return {"kind": "uniform"}
    return {
        "kind": "finite",
        "grid": [str(g) if isinstance(g, Fraction) else g for g in model.grid],
        "masses": [str(m) if isinstance(m, Fraction) else m for m in model.masses],
        "label": model.label,
    }


def population_from_json(d: Mapping) -> PopulationModel:
    if not isinstance(d, Mapping) or "mode" not in d:
        raise ConfigurationError("population needs a 'mode' field")
    mode = d["mode"]
    if mode == "binomial":
        try:
            return PopulationModel.binomial(int(d["k"]), json_number(d["q"]))
        except KeyError as exc:
            raise ConfigurationError(f"binomial population missing field {exc}") from exc
    if mode == "explicit":
        pi = d.get("pi")
        p = d.get("p")
        if pi is None and p is None:
            raise ConfigurationError("explicit population needs 'pi' or 'p'")
        if pi is None:
            return PopulationModel.from_participant({int(n): json_number(w) for n, w in p.items()})
        pi_map = {int(n): json_number(w) for n, w in pi.items()}
        p_map = {int(n): json_number(w) for n, w in p.items()} if p is not None else None
        return PopulationModel(pi_map, p=p_map, mode="explicit")
    raise ConfigurationError(f"unknown population mode {mode!r}")


def population_to_json(pop: PopulationModel) -> Dict:
    if pop.mode == "binomial":
        q = pop.meta["q"]
        return {"mode": "binomial", "k": pop.meta["k"], "q": str(q) if isinstance(q, Fraction) else q}
    enc = lambda w: str(w) if isinstance(w, Fraction) else w
    return {
        "mode": "explicit",
        "pi": {str(n): enc(w) for n, w in pop.pi_map.items()},
        "p": {str(n): enc(w) for n, w in pop.p_map.items()},
    }
