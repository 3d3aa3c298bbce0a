"""Absorption-based pathloss modelling for in-body optical wireless links."""
from .spectra import (
    CONSTITUENTS,
    REGISTRY,
    DomainError,
    FourierSeriesModel,
    GaussianSumModel,
    PowerLawModel,
    Spectrum,
    constituent_mu_a,
    constituent_spectrum,
    eval_fourier_series,
    eval_gaussian_sum,
    eval_power_law,
    load_model,
)
from .tissue import PRESETS, TissueComposition, parse_composition, preset, tissue_mu_a, tissue_spectrum
from .channel import (
    LinkGeometry,
    optimal_wavelength,
    parse_distance,
    pathloss,
    pathloss_spectrum,
    penetration_depth,
    transmission_windows,
    transmittance,
)
from .fitting import Dataset, ModelSpec, evaluate_fit, fit, initialize

__version__ = "0.1.0"
