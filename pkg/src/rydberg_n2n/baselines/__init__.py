"""Classical comparison methods and their grid-search tuner."""

from .averaging import average
from .gridsearch import (
    DEFAULT_GRIDS,
    GridSearchResult,
    GridSearchSpec,
    apply_baseline,
    grid_search,
)
from .kalman import KalmanConfig, kalman_filter, kalman_gains
from .wavelet import (
    COIF4_SCALING,
    COIF4_WAVELET,
    WaveletConfig,
    dwt,
    filter_identities,
    idwt,
    threshold,
    wavelet_denoise,
)

__all__ = [
    "COIF4_SCALING",
    "COIF4_WAVELET",
    "DEFAULT_GRIDS",
    "GridSearchResult",
    "GridSearchSpec",
    "KalmanConfig",
    "WaveletConfig",
    "apply_baseline",
    "average",
    "dwt",
    "filter_identities",
    "grid_search",
    "idwt",
    "kalman_filter",
    "kalman_gains",
    "threshold",
    "wavelet_denoise",
]
