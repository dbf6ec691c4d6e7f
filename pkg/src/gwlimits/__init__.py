"""gwlimits: exact and asymptotic limit theory for supercritical Galton-Watson processes.

The library computes exact finite-horizon distributions of the
generation sizes Z_n (by two independent paths), the Schroeder/Boettcher
asymptotic functionals that govern their local limit behavior, the
associated conditional large-deviation rate functions, and seeded Monte
Carlo estimates against which all of it is verified.
"""

from .asymptotics import (
    GSeriesEval,
    QCoefficients,
    QEvaluation,
    ScaleSequence,
    a_scale,
    boettcher_G,
    km_function,
    local_limit_ratio,
    log_pgf_iterate,
    q_coefficients,
    q_limit,
    q_n,
    scale_sequence,
    sup_tail_local,
    w_laplace,
    w_second_moment,
)
from .gen_dist import (
    GenerationPmf,
    TruncSeries,
    compose_poly,
    conditional_laplace,
    default_cap,
    series_mul,
    tail_probability,
    zn_pmf_compose,
    zn_pmf_dft,
)
from .ldp import (
    RateRegime,
    RateTable,
    cumulant,
    legendre,
    make_regime,
    path_rate,
    rate_boettcher,
    rate_conditional,
    rate_conditional_w,
    rate_table,
    w_cumulant,
    w_legendre,
)
from .montecarlo import (
    McEstimate,
    SimConfig,
    WSample,
    empirical_ak,
    empirical_conditional_pmf,
    empirical_w,
    estimate_conditional_ldp,
    estimate_rn_tail,
    exact_rn_tail,
    sample_rn_path,
    simulate_trajectory,
)
from .offspring import (
    Classification,
    OffspringLaw,
    Regime,
    classify,
    extinction_probability,
    make_law,
    pgf,
    pgf_derivative,
    pgf_iterate,
)

__version__ = "0.1.0"
