"""Causal discovery among time series by testing forecast-model invariance
under knockoff interventions."""

from .core import (CausalGraph, DataError, MultivariateTimeSeries, RngSeed, StandardizationParams,
                   load_csv, split_train_forecast, standardize, unstandardize, write_csv)
from .synthgen import ScmDataset, ScmSpec, sample_spec, simulate
from .knockoff import (KnockoffModel, compute_equicorrelated_s, diagnose_exchangeability, fit_gaussian,
                       fit_gmm, sample_gmm_knockoffs, sample_knockoffs)
from .forecaster import ForecastConfig, ForecastModel
from .interventions import InterventionKind
from .inference import DiscoveryConfig, WindowScheme, discover_graph, ks_two_sample, test_edge
from .baseline import fit_var, granger_graph
from .eval import GraphMetrics, run_benchmark, score

__version__ = "0.1.0"
