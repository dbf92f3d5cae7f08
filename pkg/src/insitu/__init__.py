"""Probabilistic cost analysis of MacLeod's in-situ permutation algorithm."""

__version__ = "0.1.0"

from .algorithm import (  # noqa: E402
    CostRecord,
    Permutation,
    cost_distribution_bruteforce,
    cost_sample,
    permute_in_place,
)
from .limit import (  # noqa: E402
    LimitConstants,
    LimitPool,
    limit_constants,
    simulate_limit,
    simulate_Yn,
    toll_C,
)
from .metrics import (  # noqa: E402
    RatePoint,
    lp_distance_empirical,
    rate_series,
    zeta3_lower_bound,
    zeta3_upper_bound,
)
from .recurrence import (  # noqa: E402
    ExactDistribution,
    MomentTable,
    asymptotic_residuals,
    exact_distribution,
    moments_exact,
)
