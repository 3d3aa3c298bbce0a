"""Absorption-only link quantities for an in-body optical path.

Pathloss over a homogeneous slab of thickness ``delta`` is
``L = exp(mu_a * delta)`` and transmittance its reciprocal. Geometric
spreading, misalignment and scattering losses are not modelled.

Distances are stored in cm; construct them with :meth:`LinkGeometry.from_mm`,
:meth:`LinkGeometry.from_cm` or :func:`parse_distance` (which insists on an
explicit unit).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .spectra import DEFAULT_DOMAIN, wavelength_grid
from .tissue import TissueComposition, tissue_mu_a

DB_PER_NEPER = 10.0 * math.log10(math.e)  # 4.342944819...
OPAQUE_EXPONENT = 700.0
DEFAULT_THRESHOLD_DB = 6.0
DEFAULT_BAND = DEFAULT_DOMAIN
DEFAULT_STEP = 1.0
REFINE_TOL_NM = 0.1

_UNITS_TO_CM = {"mm": 0.1, "cm": 1.0}


@dataclass(frozen=True)
class LinkGeometry:
    """Transmission distance, held in cm."""

    delta_cm: float

    def __post_init__(self):
        if not (math.isfinite(self.delta_cm) and self.delta_cm > 0):
            raise ValueError(f"transmission distance must be > 0, got {self.delta_cm!r} cm")

    @classmethod
    def from_mm(cls, mm: float) -> "LinkGeometry":
        return cls(float(mm) * 0.1)

    @classmethod
    def from_cm(cls, cm: float) -> "LinkGeometry":
        return cls(float(cm))

    @property
    def delta_mm(self) -> float:
        return self.delta_cm * 10.0


def parse_distance(text: str) -> LinkGeometry:
    """Parse ``"1mm"``, ``"0.3 cm"`` ... A unit suffix is mandatory."""
    m = re.fullmatch(r"\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(mm|cm)\s*", text)
    if not m:
        raise ValueError(f"cannot parse distance {text!r}; expected a number with an mm or cm suffix")
    return LinkGeometry(float(m.group(1)) * _UNITS_TO_CM[m.group(2)])


@dataclass(frozen=True)
class Loss:
    loss_linear: float
    loss_db: float
    opaque: bool = False


@dataclass(frozen=True)
class PathlossPoint:
    lam: float
    mu_a: float
    loss_linear: float
    loss_db: float
    opaque: bool = False


def _optical_depth(mu_a, geometry):
    x = np.asarray(mu_a, dtype=np.float64) * geometry.delta_cm
    if not np.all(np.isfinite(x)):
        raise ValueError("absorption coefficient must be finite")
    return x


def pathloss(mu_a, geometry: LinkGeometry) -> Loss:
    """Linear and dB pathloss for scalar ``mu_a`` (cm^-1).

    Optical depths beyond 700 nepers saturate the linear loss at ``exp(700)``
    and set ``opaque``; the dB value is always exact.
    """
    x = float(_optical_depth(mu_a, geometry))
    opaque = x > OPAQUE_EXPONENT
    return Loss(math.exp(min(x, OPAQUE_EXPONENT)), DB_PER_NEPER * x, opaque)


def transmittance(mu_a, geometry: LinkGeometry) -> float:
    """Surviving intensity fraction ``exp(-mu_a * delta)``; saturates like :func:`pathloss`."""
    x = float(_optical_depth(mu_a, geometry))
    return math.exp(-min(x, OPAQUE_EXPONENT))


def is_opaque(mu_a, geometry: LinkGeometry) -> bool:
    return float(_optical_depth(mu_a, geometry)) > OPAQUE_EXPONENT


def loss_db(mu_a, geometry: LinkGeometry):
    """Vectorised dB pathloss."""
    return DB_PER_NEPER * _optical_depth(mu_a, geometry)


@dataclass(frozen=True)
class PathlossSpectrum:
    """Pathloss sampled on a wavelength grid; iterates as :class:`PathlossPoint`."""

    wavelength: np.ndarray
    mu_a: np.ndarray
    loss_linear: np.ndarray
    loss_db: np.ndarray
    opaque: np.ndarray
    geometry: LinkGeometry

    def __len__(self):
        return self.wavelength.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield PathlossPoint(
                float(self.wavelength[i]), float(self.mu_a[i]), float(self.loss_linear[i]),
                float(self.loss_db[i]), bool(self.opaque[i]),
            )


def pathloss_spectrum(composition: TissueComposition, geometry: LinkGeometry,
                      band=DEFAULT_BAND, step=DEFAULT_STEP) -> PathlossSpectrum:
    grid = wavelength_grid(band[0], band[1], step)
    mu = np.asarray(tissue_mu_a(composition, grid), dtype=np.float64)
    x = _optical_depth(mu, geometry)
    opaque = x > OPAQUE_EXPONENT
    lin = np.exp(np.minimum(x, OPAQUE_EXPONENT))
    return PathlossSpectrum(grid, mu, lin, DB_PER_NEPER * x, opaque, geometry)


@dataclass(frozen=True)
class TransmissionWindow:
    lo: float
    hi: float
    threshold_db: float


def _bisect_edge(inside, outside, passes):
    """Shrink [inside, outside] to REFINE_TOL_NM; return the side that passes."""
    while abs(outside - inside) > REFINE_TOL_NM:
        mid = 0.5 * (inside + outside)
        if passes(mid):
            inside = mid
        else:
            outside = mid
    return inside


def _extremum(f, a, b, sign):
    """Location and value of the maximum (sign=+1) or minimum (sign=-1) of ``f`` on [a, b]."""
    res = minimize_scalar(lambda x: -sign * f(x), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-3})
    return float(res.x), f(float(res.x))


def _subgrid_samples(grid, db, ok, db_at, threshold_db):
    """Extra samples where the loss curve changes side of the threshold between grid points.

    A passing grid-level peak may hide a narrow excursion above the threshold,
    and a failing grid-level dip may hide a narrow passing band. Each such
    extremum is refined on its two neighbouring grid intervals.
    """
    extra = []
    if len(grid) < 3:
        return extra
    mid = slice(1, -1)
    peak = (db[mid] > db[:-2]) & (db[mid] >= db[2:]) & ok[mid]
    dip = (db[mid] < db[:-2]) & (db[mid] <= db[2:]) & ~ok[mid]
    for i in np.flatnonzero(peak) + 1:
        x, v = _extremum(db_at, float(grid[i - 1]), float(grid[i + 1]), 1.0)
        if v > threshold_db:
            extra.append((x, False))
    for i in np.flatnonzero(dip) + 1:
        x, v = _extremum(db_at, float(grid[i - 1]), float(grid[i + 1]), -1.0)
        if v <= threshold_db:
            extra.append((x, True))
    return extra


def transmission_windows(composition: TissueComposition, geometry: LinkGeometry,
                         band=DEFAULT_BAND, step=DEFAULT_STEP,
                         threshold_db=DEFAULT_THRESHOLD_DB) -> list:
    """Maximal wavelength intervals where pathloss stays at or below ``threshold_db``.

    Runs of passing grid points are found first, after grid-level peaks and
    dips have been refined so that crossings narrower than one step are not
    lost. Each interior edge is then bisected against the continuous loss
    curve until the bracket is no wider than 0.1 nm. The refined endpoint is
    the passing side of the final bracket, so every reported endpoint
    satisfies the threshold.
    """
    if not threshold_db >= 0:
        raise ValueError("threshold_db must be >= 0")
    grid = wavelength_grid(band[0], band[1], step)
    db = loss_db(tissue_mu_a(composition, grid), geometry)
    ok = db <= threshold_db

    def db_at(lam):
        return float(loss_db(tissue_mu_a(composition, lam), geometry))

    def passes(lam):
        return db_at(lam) <= threshold_db

    extra = _subgrid_samples(grid, db, ok, db_at, threshold_db)
    if extra:
        xs = np.concatenate([grid, [x for x, _ in extra]])
        flags = np.concatenate([ok, [f for _, f in extra]])
        order = np.argsort(xs, kind="stable")
        grid, ok = xs[order], flags[order]

    windows = []
    edges = np.diff(ok.astype(np.int8))
    starts = list(np.flatnonzero(edges == 1) + 1)
    stops = list(np.flatnonzero(edges == -1))
    if ok[0]:
        starts.insert(0, 0)
    if ok[-1]:
        stops.append(len(grid) - 1)
    for i, j in zip(starts, stops):
        lo = float(grid[i]) if i == 0 else _bisect_edge(float(grid[i]), float(grid[i - 1]), passes)
        hi = float(grid[j]) if j == len(grid) - 1 else _bisect_edge(float(grid[j]), float(grid[j + 1]), passes)
        windows.append(TransmissionWindow(lo, hi, float(threshold_db)))
    return windows


def penetration_depth(composition: TissueComposition, lam: float,
                      threshold_db=DEFAULT_THRESHOLD_DB) -> float:
    """Largest thickness (cm) whose pathloss at ``lam`` stays within ``threshold_db``.

    Returns ``math.inf`` for a non-absorbing tissue.
    """
    return depth_for_mu_a(float(tissue_mu_a(composition, lam)), threshold_db)


def depth_for_mu_a(mu_a: float, threshold_db=DEFAULT_THRESHOLD_DB) -> float:
    if mu_a < 0 or not math.isfinite(mu_a):
        raise ValueError("absorption coefficient must be finite and >= 0")
    if mu_a == 0:
        return math.inf
    return threshold_db / (DB_PER_NEPER * mu_a)


def optimal_wavelength(composition: TissueComposition, geometry: LinkGeometry,
                       band=DEFAULT_BAND, step=DEFAULT_STEP) -> tuple:
    """Grid wavelength of minimum pathloss and that loss in dB (ties go to the shorter wavelength)."""
    grid = wavelength_grid(band[0], band[1], step)
    db = loss_db(tissue_mu_a(composition, grid), geometry)
    i = int(np.argmin(db))
    return float(grid[i]), float(db[i])
