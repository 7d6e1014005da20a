"""Every numeric tolerance and runtime knob in one place.

Nothing else in the package hard-codes a tolerance; tests and the CLI report
these values in provenance blocks so a run can be reproduced from its output.
"""

# ---------------------------------------------------------------------------
# quadrature / root finding
# ---------------------------------------------------------------------------
QUAD_ABS_TOL = 1e-10          # adaptive Simpson absolute tolerance
QUAD_MAX_INTERVALS = 10_000   # hard cap on Simpson subdivisions per integral
BISECT_TOL = 1e-10            # bisection interval width for reserve / ppf
GOLDEN_TOL = 1e-8             # golden-section interval width (posted price)
GOLDEN_SCAN_POINTS = 64       # coarse bracket scan before golden section

# ---------------------------------------------------------------------------
# model validation
# ---------------------------------------------------------------------------
MASS_SUM_TOL = 1e-12          # |sum of masses - 1| allowed for finite grids
GRID_LOOKUP_TOL = 1e-12       # locating a float type on a grid (else DomainError)
REGULARITY_LATTICE_N = 1001   # lattice used to certify continuous regularity

# ---------------------------------------------------------------------------
# outcomes
# ---------------------------------------------------------------------------
FEASIBILITY_TOL = 1e-12       # sum(q) <= 1 + tol, q_i in [-tol, 1+tol]
IR_TOL = 1e-12                # theta_i q_i - t_i >= -tol

# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------
IC_EPS_EXACT = 1e-9           # compatibility threshold for exact engines
IC_SE_MULTIPLIER = 3.0        # Monte Carlo threshold: gain <= mult * s.e.
MAX_SHILLS = 3                # default seller/auctioneer shill cap
MAX_IDENTITIES = 3            # default buyer identity cap
LATTICE_STEP = 0.01           # continuous-model certification lattice step
IDENTITY_SWEEP = (1, 10, 100)  # |N_i| values for the identity-count sweep

# ---------------------------------------------------------------------------
# revenue engines
# ---------------------------------------------------------------------------
EXACT_ENUM_BUDGET = 10_000_000  # max profiles expected_revenue_exact visits
MC_DEFAULT_SAMPLES = 1_000_000
MC_CHUNK = 65_536             # fixed chunk size; substream per chunk index
BID_TABLE_HEADROOM = 16       # lazy bid tables allow n up to pop max + this
BID_LATTICE_POINTS = 1001     # memoized bid lattice for continuous simulation

# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------
GOLDEN_SIG_DIGITS = 12        # significant digits in golden CSV files
POSTED_TIE_RULE = "lower"     # revenue ties between candidate prices

# ---------------------------------------------------------------------------
# environment variables
# ---------------------------------------------------------------------------
ENV_THREADS = "SHILLBENCH_THREADS"        # caps opt-in scenario parallelism
ENV_PURE_PYTHON = "SHILLBENCH_PURE_PYTHON"  # "1" forces the numpy kernel lane
