"""Latent role detection in longitudinal networks.

Pipeline: ingest dyad-year edge data into an annual network series, partition
it into historical periods, extract per-actor ego-networks, cluster the egos
with a finite mixture of TERGM pseudolikelihoods (role count chosen by BIC
under a hard cap), and characterize each role with a pooled TERGM whose
confidence intervals come from a percentile bootstrap.  A Metropolis ERGM
sampler provides synthetic populations with known structure for validation.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .changestats import (
    DesignMatrix,
    ModelSpec,
    TermSpec,
    change_stat,
    change_stat_matrix,
    design_matrix,
    global_stat,
    parse_term,
)
from .errors import (
    ConfigError,
    DataError,
    EgoTergmError,
    EstimationError,
    IdentifiabilityError,
    MissingAttributeError,
    UnsupportedFeatureError,
)
from .estimator import (
    BootstrapResult,
    ParameterEstimate,
    bootstrap_tergm,
    fit_mple,
    pooled_role_tergm,
    render_coef_text,
    write_coef_csv,
)
from .mixture import (
    MixtureFit,
    RoleAssignment,
    assignment_matrix,
    fit_ego_tergm,
    initialize,
    select_roles,
)
from .netdata import (
    DyadYearRecord,
    EgoExtraction,
    EgoSeries,
    GraphSlice,
    LongitudinalNetwork,
    NodeYearAttrs,
    PeriodDef,
    extract_egos,
    ingest_dyad_years,
    partition,
)
from .sampler import SamplerConfig, plant_population, population_records, sample_ergm

__all__ = [
    "__version__",
    "BootstrapResult",
    "ConfigError",
    "DataError",
    "DesignMatrix",
    "DyadYearRecord",
    "EgoExtraction",
    "EgoSeries",
    "EgoTergmError",
    "EstimationError",
    "GraphSlice",
    "IdentifiabilityError",
    "LongitudinalNetwork",
    "MissingAttributeError",
    "MixtureFit",
    "ModelSpec",
    "NodeYearAttrs",
    "ParameterEstimate",
    "PeriodDef",
    "RoleAssignment",
    "SamplerConfig",
    "TermSpec",
    "UnsupportedFeatureError",
    "assignment_matrix",
    "bootstrap_tergm",
    "change_stat",
    "change_stat_matrix",
    "design_matrix",
    "extract_egos",
    "fit_ego_tergm",
    "fit_mple",
    "global_stat",
    "ingest_dyad_years",
    "initialize",
    "parse_term",
    "partition",
    "plant_population",
    "pooled_role_tergm",
    "population_records",
    "render_coef_text",
    "sample_ergm",
    "select_roles",
    "write_coef_csv",
]
