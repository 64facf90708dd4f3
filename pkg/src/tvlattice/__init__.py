"""Bayesian circular lattice filters for time-varying VAR models."""

from .dlm import (
    DiscountPair,
    DlmPriors,
    discount_grid,
    dlm_filter,
    dlm_smooth,
    grid_search,
)
from .errors import (
    DimensionError,
    DomainError,
    FilterDivergenceError,
    GridSearchError,
    InsufficientDataError,
    NotPositiveDefiniteError,
    SingularityError,
    StateError,
    TvLatticeError,
)
from .forecast import ForecastResult, LatticeState, forecast, rolling_mspe
from .lattice import (
    BclfFit,
    FitConfig,
    LatticeFit,
    fit,
    levinson_periodic,
    parcor_to_ar,
    run_lattice,
)
from .periodic import TvVarModel, assemble_tvvar, deinterlace, interlace, ldl_decompose
from .selection import OrderReport, bic, dic, waic
from .simlab import SimSpec, generate, run_experiment
from .spectral import SpectralField, ase, spectral_field

__version__ = "0.1.0"

__all__ = [
    "BclfFit",
    "DimensionError",
    "DiscountPair",
    "DlmPriors",
    "DomainError",
    "FilterDivergenceError",
    "FitConfig",
    "ForecastResult",
    "GridSearchError",
    "InsufficientDataError",
    "LatticeFit",
    "LatticeState",
    "NotPositiveDefiniteError",
    "OrderReport",
    "SimSpec",
    "SingularityError",
    "SpectralField",
    "StateError",
    "TvLatticeError",
    "TvVarModel",
    "ase",
    "assemble_tvvar",
    "bic",
    "deinterlace",
    "dic",
    "discount_grid",
    "dlm_filter",
    "dlm_smooth",
    "fit",
    "forecast",
    "generate",
    "grid_search",
    "interlace",
    "ldl_decompose",
    "levinson_periodic",
    "parcor_to_ar",
    "rolling_mspe",
    "run_experiment",
    "run_lattice",
    "spectral_field",
    "waic",
]
