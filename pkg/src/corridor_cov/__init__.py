"""Coverage probability of UAV corridor-assisted downlink networks.

Analytic engine (order statistics, conditional interference Laplace
transforms, dominant-interferer approximations) for 1D BPP and finite HPPP
spatial models with inverse-gamma shadowing and Nakagami-m fading, plus an
independent Monte Carlo simulator that validates every analytic expression,
a 2D-disc baseline, variable-height studies and measurement-trace replay.
"""

from .core import (
    BPP,
    ChannelParams,
    CorridorGeometry,
    Disc2D,
    FiniteHPPP,
    FixedHeight,
    InverseGammaShadowing,
    LinkDistanceDistribution,
    NakagamiFadingPower,
    NormalHeight,
    ParameterError,
    UniformHeight,
    carrier_factor_from_frequency,
    db_to_linear,
    fading_distribution,
    linear_to_db,
    link_distance_cdf,
    link_distance_pdf,
    path_loss,
    pathloss_value_cdf,
    pathloss_value_pdf,
    shadowing_distribution,
)
from .quadrature import (
    IntegralResult,
    QuadratureConfig,
    QuadratureError,
    SemiInfiniteMap,
    integrate,
    nested_integrate_2d,
    nested_integrate_3d,
)
from .analytic import (
    BppCoverageModel,
    CoverageQuery,
    HpppCoverageModel,
    InterferenceLaplaceBPP,
    InterferenceLaplaceHPPP,
    ReceivedPowerDistribution,
    bpp_model,
    coverage_bpp,
    coverage_dominant_bpp,
    coverage_hppp,
    coverage_probability,
    coverage_single_dominant_bpp,
    hppp_model,
    joint_top_two_pdf,
    laplace_bpp,
    laplace_bpp_derivative,
    laplace_hppp,
    laplace_hppp_derivative,
    max_power_pdf_bpp,
    max_power_pdf_hppp,
    received_power_pdf,
    residual_mean_interference,
)
from .simulator import (
    CoverageCurve,
    EmpiricalDistribution,
    EmptyNetworkError,
    GridMismatchError,
    HeightStudyResult,
    MappingError,
    NetworkRealization,
    ReplayResult,
    SirSample,
    Trace,
    TraceFormatError,
    associate,
    coverage_from_sirs,
    empirical_coverage,
    fit_normal_height,
    fit_uniform_height,
    height_model_kl_study,
    HeightKlResult,
    kl_divergence,
    sir_distribution,
    sample_network,
    simulate_sir,
    simulate_sir_paired,
    sir_sample,
    synthesize_trace,
    trace_replay,
    variable_height_study,
)

__version__ = "0.1.0"
