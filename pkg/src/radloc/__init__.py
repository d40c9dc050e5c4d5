"""Maximum-likelihood localization of a radiation point source of unknown
intensity from N+1 Poisson count sensors in R^N (N = 1, 2, 3)."""

__version__ = "0.1.0"

from radloc._backend import BACKEND
from radloc.errors import (
    ConfigurationError,
    ContractError,
    DegenerateArrayError,
    DegenerateMeasurementError,
    RadlocError,
    SingularityError,
)
from radloc.estimator import (
    EstimateTrace,
    EstimatorConfig,
    MeasurementStream,
    TerminationReason,
    ascend,
    estimate_from_measurement,
    estimate_once,
)
from radloc.geometry import SensorArray, barycentric, contains_open, sample_interior
from radloc.harness import ExperimentResult, ExperimentSpec, run_experiment, solve_noise_for_snr
from radloc.likelihood import LikelihoodContext, concentrated_gradient, intensity_mle, profit
from radloc.model import Measurement, NoiseParams, SourceParams, mean_rates, sample_measurement, snr_db
from radloc.oracle import GridSpec, grid_argmax, verify_uniqueness
