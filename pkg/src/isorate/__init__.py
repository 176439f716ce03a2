"""Market-implied ratemaking: infer compound risk models from observed premiums."""

from .abc_engine import (
    AbcConfig,
    EpsilonSelection,
    KdeProposal,
    ParticleCloud,
    PriorSpec,
    RunResult,
    build_kde,
    ess,
    map_estimate,
    mode_estimate,
    posterior_loss_ratio,
    predictive_summaries,
    run_pmc_abc,
    select_epsilon,
    simulate_distance,
)
from .artifacts import build_fit_artifact, load_json, save_json, to_jsonable
from .discrepancy import (
    Corridor,
    DistanceBreakdown,
    DistanceWeights,
    distance_breakdown,
    reg_high,
    reg_low,
    rmse,
    total_distance,
)
from .errors import (
    ConfigError,
    DegenerateWeightsError,
    DomainError,
    QuoteParseError,
    StallError,
)
from .isotonic import IsotonicFit, loading_apply, pava_fit
from .market_data import (
    CoverageSampler,
    GompertzLoading,
    LinearFit,
    LinearLoading,
    Quote,
    RiskClass,
    SyntheticSpec,
    generate_synthetic,
    group_risk_classes,
    linear_baseline_fit,
    load_quotes,
    preset_grid_example,
    preset_link_comparison,
    preset_market_study,
    save_quotes,
)
from .risk_models import (
    Binomial,
    CoverageArrays,
    CoverageSpec,
    Gamma,
    LogNormal,
    LossSample,
    NegBinomial,
    Poisson,
    RiskModel,
    coverage_arrays,
    coverage_payout,
    pure_premiums,
    sample_aggregate_losses,
)

__version__ = "0.1.0"
