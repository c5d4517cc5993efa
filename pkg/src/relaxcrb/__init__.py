"""Cramer-Rao bound analysis, max-min design and Monte Carlo validation of
MRI relaxometry protocols."""

from .errors import (
    AllTrialsFailed,
    CollinearVectors,
    ConfigError,
    DegenerateStep,
    FitDiverged,
    MissingField,
    NoFeasiblePoint,
    NonFiniteModel,
    PhysicalPlausibilityWarning,
    ProtocolError,
    RelaxCrbError,
    SingularInformation,
    UnitError,
)
from .estimation import (
    CrbReport,
    EfficiencyMap,
    FisherInfo,
    NoiseModel,
    crb_geometric,
    crb_matrix,
    efficiency_map,
    equivalent_snr,
    evaluate_point,
    fisher_information,
    jacobian,
    pcrb,
    range_map,
    tnr_efficiency,
)
from .montecarlo import TrialConfig, TrialReport, nlse_fit, run_trials, simulate_acquisition
from .nelder_mead import nelder_mead_minimize
from .optimizer import DesignSpec, OptimizationResult, optimize_protocol, worst_case_efficiency
from .presets import BRAIN_PROTOCOLS
from .sequences import (
    CIR,
    DESPOT,
    FIR1,
    FIR2,
    LL,
    SEIR,
    SR,
    Sequence,
    protocol_from_dict,
    sensitivity_numeric,
    sequence_time,
    weighting_vector,
)
from .tissue import TissueParams, TissueRange

__version__ = "0.1.0"
