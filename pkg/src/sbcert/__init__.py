"""Data-driven synthesis of barrier certificates for interconnected
stochastic agents, with scenario-optimization confidence accounting."""

from .certificate import (
    DETERMINISTIC_RELAXED,
    DETERMINISTIC_SMALLGAIN,
    MODES,
    STOCHASTIC_RELAXED,
    STOCHASTIC_SMALLGAIN,
    Candidate,
    CertificateTemplate,
    RelaxParams,
    SbcSolution,
    evaluate,
    residuals,
)
from .complexity import (
    ConfidenceBudget,
    LipschitzBounds,
    binomial_tail,
    empirical_batch_size,
    epsilon2,
    lipschitz_linear,
    lipschitz_nonlinear,
    min_samples,
)
from .composition import (
    GainMatrices,
    RiskCertificate,
    compose,
    deterministic_compose,
    deterministic_horizon,
    deterministic_infinite,
    relaxed_agent_risk,
    relaxed_compose,
    risk_bound,
    small_gain_check,
)
from .errors import CompositionError, DatasetParseError, InputError
from .sampling import Dataset, SamplePoint, draw_dataset, load_dataset, save_dataset
from .scenario import (
    ScenarioVerdict,
    SubBarrierEstimator,
    build_sop,
    solve_lp,
    synthesize,
)
from .simplex import LinearProgram, LpResult
from .streams import RandomStreams
from .system import (
    Edge,
    LinearAgent,
    NetworkTopology,
    NoiseSpec,
    NonlinearAgent,
    RegionSpec,
    build_platoon,
    simulate,
    step,
)
from .validate import MonteCarloReport, grid_check, monte_carlo_risk

__version__ = "0.1.0"
