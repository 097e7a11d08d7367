"""Estimation and order selection for semiparametric functional factor models."""

from ._backend import BACKEND
from .core import (
    EigenSystem,
    FactorEstimate,
    KernelFamily,
    KernelSpec,
    PanelData,
    SmoothedSurface,
    SmootherWeights,
    bandwidth_cv,
    bandwidth_rule_of_thumb,
    center_columns,
    covariance_of_smoothed,
    eigendecompose,
    estimate_factors,
    kernel_pdf,
    local_linear_smooth,
)
from .io import (
    IngestResult,
    IngestSpec,
    MethodResult,
    RunReport,
    ingest_csv,
    read_report,
    write_report,
)
from .selectors import (
    FtcvConfig,
    LadleConfig,
    SelectionReport,
    ftcv_select,
    icp_penalty,
    icp_select,
    ladle_select,
    residual_variance,
)
from .simlab import (
    CellResult,
    GridResult,
    ScenarioSpec,
    TruthRecord,
    emit_frequency_curves,
    gen_errors,
    gen_scenario1,
    gen_scenario2,
    run_grid,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CellResult",
    "EigenSystem",
    "FactorEstimate",
    "FtcvConfig",
    "GridResult",
    "IngestResult",
    "IngestSpec",
    "KernelFamily",
    "KernelSpec",
    "LadleConfig",
    "MethodResult",
    "PanelData",
    "RunReport",
    "ScenarioSpec",
    "SelectionReport",
    "SmoothedSurface",
    "SmootherWeights",
    "TruthRecord",
    "bandwidth_cv",
    "bandwidth_rule_of_thumb",
    "center_columns",
    "covariance_of_smoothed",
    "eigendecompose",
    "emit_frequency_curves",
    "estimate_factors",
    "ftcv_select",
    "gen_errors",
    "gen_scenario1",
    "gen_scenario2",
    "icp_penalty",
    "icp_select",
    "ingest_csv",
    "kernel_pdf",
    "ladle_select",
    "read_report",
    "residual_variance",
    "run_grid",
    "write_report",
    "__version__",
]
