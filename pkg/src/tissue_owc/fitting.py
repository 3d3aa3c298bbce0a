"""Nonlinear least-squares fitting of absorption spectra.

Fits the three model families used for the built-in constituents
(Gaussian sum, Fourier series, power law) to measured ``(wavelength, mu_a)``
data, so that parameter sets like the shipped ones can be regenerated from
new measurements.

The optimiser is a damped Gauss-Newton (Levenberg-Marquardt) loop with
Marquardt diagonal scaling and analytic Jacobians:

* a trial step solves ``(J'J + damping * diag(J'J)) dp = J'r``;
* the step is accepted iff the sum of squares does not increase, after which
  damping is divided by 10; a rejected step multiplies damping by 10;
* iteration stops when the relative decrease of the objective stays below
  1e-10 for 3 consecutive accepted steps, when ``max|J'r| < 1e-10``, when
  damping exceeds 1e20 (no descent step is representable), or after 500
  iterations. Only the last case reports ``converged = False``.

Parameters with declared bounds are projected back into their box after
every trial step.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .spectra import (
    FourierSeriesModel,
    GaussianSumModel,
    PowerLawModel,
    model_to_record,
)

MAX_ITER = 500
REL_TOL = 1e-10
REL_TOL_STREAK = 3
COLUMN_RTOL = 1e-20
FALLBACK_HEIGHT_FLOOR = 1e-3
GRAD_TOL = 1e-10
DAMPING_INIT = 1e-3
DAMPING_MAX = 1e20
SMOOTH_WIDTH = 5
SCAN_BASINS = 8

DATASET_HEADER = ("wavelength_nm", "mu_a_cm1")


class DatasetFormatError(ValueError):
    """Malformed dataset file; carries 1-based ``line`` and ``column``."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class FitConditioningError(ArithmeticError):
    """The normal equations are singular (a free parameter has no effect)."""


# ---------------------------------------------------------------- data

@dataclass(frozen=True)
class Dataset:
    wavelength: np.ndarray
    mu_a: np.ndarray
    weight: np.ndarray | None = None
    provenance: str = ""

    def __post_init__(self):
        lam = np.asarray(self.wavelength, dtype=np.float64).ravel()
        mu = np.asarray(self.mu_a, dtype=np.float64).ravel()
        if lam.shape != mu.shape:
            raise ValueError("wavelength and mu_a must have the same length")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu))):
            raise ValueError("dataset values must be finite")
        order = np.argsort(lam, kind="stable")
        lam, mu = lam[order], mu[order]
        if lam.size > 1 and np.any(np.diff(lam) <= 0):
            raise ValueError("duplicate wavelengths in dataset")
        w = self.weight
        if w is not None:
            w = np.asarray(w, dtype=np.float64).ravel()
            if w.shape != lam.shape or not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("weights must be finite, >= 0 and one per point")
            w = w[order]
        object.__setattr__(self, "wavelength", lam)
        object.__setattr__(self, "mu_a", mu)
        object.__setattr__(self, "weight", w)

    def __len__(self):
        return self.wavelength.shape[0]


def parse_dataset_csv(text: str, provenance: str = "") -> Dataset:
    """Parse ``wavelength_nm,mu_a_cm1[,weight]`` CSV text (``#`` comments allowed)."""
    rows = []
    header = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if header is None:
            if tuple(cells[:2]) != DATASET_HEADER or len(cells) > 3 or (len(cells) == 3 and cells[2] != "weight"):
                col = next((i + 1 for i, (got, want) in enumerate(zip(cells, DATASET_HEADER + ("weight",)))
                            if got != want), min(len(cells), 3) + 1)
                raise DatasetFormatError(
                    f"bad header {','.join(cells)!r}; expected 'wavelength_nm,mu_a_cm1[,weight]'",
                    lineno, col)
            header = cells
            continue
        if len(cells) != len(header):
            raise DatasetFormatError(f"expected {len(header)} fields, got {len(cells)}", lineno)
        values = []
        for col, cell in enumerate(cells, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise DatasetFormatError(f"cannot parse {cell!r} as a number", lineno, col) from None
            if not math.isfinite(v):
                raise DatasetFormatError(f"non-finite value {cell!r}", lineno, col)
            values.append(v)
        rows.append(values)
    if header is None:
        raise DatasetFormatError("missing header 'wavelength_nm,mu_a_cm1'", 1, 1)
    if not rows:
        raise DatasetFormatError("no data rows")
    arr = np.array(rows, dtype=np.float64)
    weight = arr[:, 2] if arr.shape[1] == 3 else None
    return Dataset(arr[:, 0], arr[:, 1], weight, provenance)


def read_dataset_csv(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset_csv(fh.read(), provenance=str(path))


# ---------------------------------------------------------------- model specs

KINDS = ("gaussian-sum", "fourier", "power-law")


@dataclass(frozen=True)
class ModelSpec:
    """What to fit.

    ``w`` and ``exponent`` are held fixed when given and fitted when ``None``;
    ``lambda_ref`` is always fixed. ``bounds`` maps parameter names
    (``a1``, ``b1``, ``c1``, ..., ``a0``, ``w``, ``mu_ref``, ``exponent``)
    to ``(lo, hi)`` pairs, either side may be ``None``.
    """

    kind: str
    n_terms: int = 1
    order: int = 7
    w: float | None = None
    lambda_ref: float = 550.0
    exponent: float | None = -3.0
    bounds: Mapping = field(default_factory=dict)
    init: Sequence[float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "gaussian-sum" and self.n_terms < 1:
            raise ValueError("a Gaussian sum needs at least one term")
        if self.kind == "fourier" and self.order < 0:
            raise ValueError("Fourier order must be >= 0")
        if self.w is not None and not self.w > 0:
            raise ValueError("fixed w must be > 0")
        names = self.param_names()
        for key, (lo, hi) in self.bounds.items():
            if key not in names:
                raise ValueError(f"bound on unknown parameter {key!r}")
            if lo is not None and hi is not None and lo > hi:
                raise ValueError(f"bounds for {key} are not ordered")
        if self.init is not None and len(self.init) != len(names):
            raise ValueError(f"init must have {len(names)} values ({', '.join(names)})")

    @classmethod
    def gaussian_sum(cls, n_terms, **kw):
        return cls("gaussian-sum", n_terms=n_terms, **kw)

    @classmethod
    def fourier(cls, order=7, w=None, **kw):
        return cls("fourier", order=order, w=w, **kw)

    @classmethod
    def power_law(cls, lambda_ref=550.0, exponent=-3.0, **kw):
        return cls("power-law", lambda_ref=lambda_ref, exponent=exponent, **kw)

    def param_names(self) -> list:
        if self.kind == "gaussian-sum":
            return [f"{p}{i}" for i in range(1, self.n_terms + 1) for p in "abc"]
        if self.kind == "fourier":
            n = self.order
            return ["a0"] + [f"a{i}" for i in range(1, n + 1)] + [f"b{i}" for i in range(1, n + 1)] + ["w"]
        return ["mu_ref", "lambda_ref", "exponent"]

    def free_mask(self) -> np.ndarray:
        names = self.param_names()
        free = np.ones(len(names), dtype=bool)
        if self.kind == "fourier" and (self.w is not None or self.order == 0):
            free[-1] = False
        if self.kind == "power-law":
            free[1] = False
            free[2] = self.exponent is None
        return free

    def bound_arrays(self):
        names = self.param_names()
        lo = np.full(len(names), -np.inf)
        hi = np.full(len(names), np.inf)
        if self.kind == "power-law":
            lo[0] = 0.0  # mu_ref is a physical coefficient
        for key, (a, b) in self.bounds.items():
            i = names.index(key)
            if a is not None:
                lo[i] = a
            if b is not None:
                hi[i] = b
        return lo, hi


def _model_fn(spec: ModelSpec):
    """Return (f(lam, p), jac(lam, p)) for the spec's packed parameter vector."""
    if spec.kind == "gaussian-sum":
        def f(lam, p):
            return _kernels.gaussian_sum(lam, p[0::3].copy(), p[1::3].copy(), p[2::3].copy())

        def jac(lam, p):
            return _kernels.gaussian_sum_jac(lam, p[0::3].copy(), p[1::3].copy(), p[2::3].copy())
    elif spec.kind == "fourier":
        n = spec.order

        def f(lam, p):
            return _kernels.fourier_series(lam, p[0], p[1:n + 1].copy(), p[n + 1:2 * n + 1].copy(), p[-1])

        def jac(lam, p):
            return _kernels.fourier_series_jac(lam, p[0], p[1:n + 1].copy(), p[n + 1:2 * n + 1].copy(), p[-1])
    else:
        def f(lam, p):
            return _kernels.power_law(lam, p[0], p[1], p[2])

        def jac(lam, p):
            return _kernels.power_law_jac(lam, p[0], p[1], p[2])
    return f, jac


def params_to_model(spec: ModelSpec, p, domain=None):
    p = np.asarray(p, dtype=np.float64)
    if spec.kind == "gaussian-sum":
        terms = sorted(
            ((float(a), float(b), abs(float(c))) for a, b, c in p.reshape(-1, 3)),
            key=lambda t: t[1],
        )
        return GaussianSumModel(terms, domain=domain)
    if spec.kind == "fourier":
        n = spec.order
        harmonics = list(zip(p[1:n + 1].tolist(), p[n + 1:2 * n + 1].tolist()))
        return FourierSeriesModel(float(p[0]), harmonics, float(p[-1]), domain=domain)
    # a power law is defined for every positive wavelength
    return PowerLawModel(float(p[0]), float(p[1]), float(p[2]))


def _canonical(spec: ModelSpec, p):
    """Gaussian terms sorted by centre with positive widths."""
    if spec.kind != "gaussian-sum":
        return p
    t = p.reshape(-1, 3).copy()
    t[:, 2] = np.abs(t[:, 2])
    return t[np.argsort(t[:, 1], kind="stable")].ravel()


# ---------------------------------------------------------------- initialization

@dataclass(frozen=True)
class InitialGuess:
    params: np.ndarray
    fallback: bool = False  # True when peak picking fell back to uniform spacing


def smooth(y: np.ndarray, width: int = SMOOTH_WIDTH) -> np.ndarray:
    """Centred moving average; edges are padded with the end values."""
    half = width // 2
    padded = np.concatenate([np.full(half, y[0]), y, np.full(half, y[-1])])
    return np.convolve(padded, np.ones(width) / width, mode="valid")


def local_maxima(y: np.ndarray) -> np.ndarray:
    """Indices of interior points higher than the left and not lower than the right neighbour."""
    if y.size < 3:
        return np.empty(0, dtype=int)
    mid = y[1:-1]
    return np.flatnonzero((mid > y[:-2]) & (mid >= y[2:])) + 1


def initialize(dataset: Dataset, spec: ModelSpec) -> InitialGuess:
    """Starting point for :func:`fit`.

    Gaussian sums take the ``n`` tallest local maxima of the 5-point smoothed
    data (height, position, and half the gap to the nearest neighbouring peak
    or band edge as width). With fewer maxima than terms the centres are
    spaced uniformly over the band instead and ``fallback`` is set. Fourier
    series start from the data mean with zero harmonics; power laws from the
    sample nearest ``lambda_ref``.
    """
    lam, y = dataset.wavelength, dataset.mu_a
    lo_b, hi_b = spec.bound_arrays()
    if spec.init is not None:
        p = np.array(spec.init, dtype=np.float64)
        _apply_fixed(spec, p)
        return InitialGuess(np.clip(p, lo_b, hi_b))
    span = float(lam[-1] - lam[0]) if len(lam) > 1 else 1.0
    fallback = False
    if spec.kind == "gaussian-sum":
        n = spec.n_terms
        peaks = local_maxima(smooth(y))
        if len(peaks) >= n:
            s = smooth(y)
            chosen = np.sort(peaks[np.argsort(s[peaks], kind="stable")[::-1][:n]])
            centres = lam[chosen]
            heights = y[chosen]
            widths = []
            for i, b in enumerate(centres):
                gaps = [b - lam[0], lam[-1] - b]
                if i > 0:
                    gaps.append(b - centres[i - 1])
                if i < n - 1:
                    gaps.append(centres[i + 1] - b)
                gap = min(g for g in gaps if g > 0) if any(g > 0 for g in gaps) else span
                widths.append(0.5 * gap)
        else:
            fallback = True
            centres = lam[0] + (np.arange(n) + 0.5) * span / n
            heights = np.interp(centres, lam, y)
            # a term started at zero height has no gradient in b or c
            floor = FALLBACK_HEIGHT_FLOOR * float(np.max(np.abs(y)))
            heights = np.where(np.abs(heights) < floor, floor, heights)
            widths = np.full(n, span / (2 * n))
        p = np.column_stack([heights, centres, widths]).ravel()
    elif spec.kind == "fourier":
        n = spec.order
        p = np.zeros(2 * n + 2)
        p[0] = float(np.mean(y))
        p[-1] = spec.w if spec.w is not None else 2 * math.pi / span
    else:
        i = int(np.argmin(np.abs(lam - spec.lambda_ref)))
        exponent = spec.exponent
        if exponent is None:
            pos = (y > 0)
            if np.count_nonzero(pos) >= 2:
                exponent = float(np.polyfit(np.log(lam[pos] / spec.lambda_ref), np.log(y[pos]), 1)[0])
            else:
                exponent = -3.0
        p = np.array([y[i], spec.lambda_ref, exponent], dtype=np.float64)
    _apply_fixed(spec, p)
    return InitialGuess(np.clip(p, lo_b, hi_b), fallback)


def _apply_fixed(spec, p):
    if spec.kind == "fourier" and spec.w is not None:
        p[-1] = spec.w
    if spec.kind == "power-law":
        p[1] = spec.lambda_ref
        if spec.exponent is not None:
            p[2] = spec.exponent


def _fourier_linear_solve(lam, y, sw, n, w):
    basis = np.empty((lam.size, 2 * n + 1))
    basis[:, 0] = 1.0
    for k in range(1, n + 1):
        basis[:, k] = np.cos(k * w * lam)
        basis[:, n + k] = np.sin(k * w * lam)
    coef, *_ = np.linalg.lstsq(basis * sw[:, None], y * sw, rcond=None)
    res = sw * (y - basis @ coef)
    return float(res @ res), coef


def _bounded_min(fun, a, b):
    """Bounded scalar minimum of ``fun`` on [a, b]; returns (value, x)."""
    res = minimize_scalar(fun, bounds=(a, b), method="bounded", options={"xatol": 1e-12 * (b - a)})
    return float(res.fun), float(res.x)


def _fourier_frequency_scan(dataset: Dataset, spec: ModelSpec, sw: np.ndarray) -> np.ndarray:
    """Best (a0, a_i, b_i, w) with the linear coefficients solved exactly per w.

    A log grid of w locates candidate basins; the deepest few are refined by
    golden-section search between their neighbouring grid points. Over spans
    shorter than a period several frequencies fit almost equally well and the
    true basin can be narrower than the grid spacing, hence more than one.
    With zero harmonics the objective is flat in w, so the free-frequency fit
    needs this global look before the local optimiser takes over.
    """
    lam, y = dataset.wavelength, dataset.mu_a
    n = spec.order
    span = float(lam[-1] - lam[0])
    w_lo = 2 * math.pi / (4 * span)
    # keep the top harmonic below the sampling Nyquist limit
    w_hi = min(2 * math.pi / (span / 8), 0.9 * math.pi / (n * float(np.median(np.diff(lam)))))
    lo_b, hi_b = spec.bound_arrays()
    w_lo, w_hi = max(w_lo, lo_b[-1]), min(w_hi, hi_b[-1])
    grid = np.geomspace(w_lo, w_hi, 800) if w_hi > w_lo else np.array([w_lo])
    objs = np.array([_fourier_linear_solve(lam, y, sw, n, w)[0] for w in grid])
    interior = np.flatnonzero((objs[1:-1] <= objs[:-2]) & (objs[1:-1] <= objs[2:])) + 1
    basins = np.concatenate([interior, [int(np.argmin(objs))]])
    basins = np.unique(basins)[np.argsort(objs[np.unique(basins)], kind="stable")][:SCAN_BASINS]
    best = (float(objs[basins[0]]), float(grid[basins[0]]))
    for k in basins:
        cand = _bounded_min(lambda w: _fourier_linear_solve(lam, y, sw, n, w)[0],
                           grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)])
        if cand[0] < best[0]:
            best = cand
    w = best[1]
    return np.concatenate([_fourier_linear_solve(lam, y, sw, n, w)[1], [w]])


def _with_halfmax_widths(dataset, p):
    """Copy of a Gaussian start with widths read off the half-maximum crossings."""
    lam, y = dataset.wavelength, smooth(dataset.mu_a)
    q = p.copy().reshape(-1, 3)
    for t in q:
        i = int(np.argmin(np.abs(lam - t[1])))
        half = 0.5 * y[i]
        sides = []
        for direction in (-1, 1):
            j = i
            while 0 <= j + direction < lam.size and y[j + direction] > half and y[j + direction] <= y[j]:
                j += direction
            if 0 <= j + direction < lam.size and y[j + direction] <= half:
                sides.append(abs(lam[j] - lam[i]) + 0.5 * abs(lam[j + direction] - lam[j]))
        if sides and y[i] > 0:
            # exp(-(x/c)^2) = 1/2 at x = c * sqrt(ln 2)
            t[2] = min(sides) / np.sqrt(np.log(2.0))
    return q.ravel()


def _greedy_gaussian_start(dataset, spec, sw, max_iter):
    """Fit the visible peaks, then add one term at a time at the largest residual.

    Used as an extra start when peak picking finds fewer maxima than terms
    (weak components riding on the shoulder of a strong one).
    """
    lam, y = dataset.wavelength, dataset.mu_a
    n = spec.n_terms
    m = min(len(local_maxima(smooth(y))), n)
    if m == 0:
        m = 1
    p = initialize(dataset, ModelSpec.gaussian_sum(m)).params
    lo, hi = ModelSpec.gaussian_sum(n, bounds=spec.bounds).bound_arrays()
    while True:
        k = p.size // 3
        sub = ModelSpec.gaussian_sum(k)
        f, jac = _model_fn(sub)
        try:
            run = _levenberg_marquardt(f, jac, lam, y, sw, p, np.ones(p.size, bool),
                                       lo[:p.size], hi[:p.size], max_iter)
        except FitConditioningError:
            return None
        p = run.params
        if k == n:
            return p
        res = smooth(y - f(lam, p))
        i = int(np.argmax(res))
        centres = p[1::3]
        gaps = [lam[i] - lam[0], lam[-1] - lam[i]] + [abs(lam[i] - b) for b in centres]
        gap = min(g for g in gaps if g > 0) if any(g > 0 for g in gaps) else float(lam[-1] - lam[0])
        # narrower than a few samples and the new term has no usable gradient
        width = max(0.5 * gap, 3.0 * float(np.median(np.diff(lam))))
        p = np.concatenate([p, [res[i], lam[i], width]])


# ---------------------------------------------------------------- optimiser

@dataclass
class _Run:
    params: np.ndarray
    objective: float
    iterations: int
    converged: bool
    stop_reason: str
    history: list


def _levenberg_marquardt(f, jac, lam, y, sw, p0, free, lo, hi, max_iter=MAX_ITER) -> _Run:
    p = np.clip(np.array(p0, dtype=np.float64), lo, hi)
    r = sw * (y - f(lam, p))
    obj = float(r @ r)
    if not math.isfinite(obj):
        raise FitConditioningError("objective is not finite at the initial parameters")
    history = [obj]
    damping = DAMPING_INIT
    streak = 0
    it = 0
    J = g = A = D = None
    first = True
    while it < max_iter:
        if obj == 0.0:
            return _Run(p, obj, it, True, "exact", history)
        if J is None:
            J = sw[:, None] * jac(lam, p)[:, free]
            g = J.T @ r
            if float(np.max(np.abs(g))) < GRAD_TOL:
                return _Run(p, obj, it, True, "gradient", history)
            A = J.T @ J
            D = np.diag(A).copy()
            # a column this small next to the largest one is numerically zero
            dead = D <= COLUMN_RTOL * float(D.max())
            if first and np.any(dead):
                names = np.flatnonzero(free)[dead]
                raise FitConditioningError(
                    f"singular normal equations: free parameter index(es) {names.tolist()} "
                    "have no effect on the model at the initial point")
            first = False
            D = np.maximum(D, np.finfo(float).eps * float(D.max()))
        it += 1
        # solve in Marquardt-scaled variables: unit diagonal plus damping
        s = 1.0 / np.sqrt(D)
        try:
            step = s * np.linalg.solve(A * np.outer(s, s) + damping * np.eye(len(D)), s * g)
        except np.linalg.LinAlgError as exc:
            raise FitConditioningError(f"normal equations could not be solved: {exc}") from None
        if not np.all(np.isfinite(step)):
            raise FitConditioningError("normal equations produced a non-finite step")
        trial = p.copy()
        trial[free] += step
        np.clip(trial, lo, hi, out=trial)
        r_new = sw * (y - f(lam, trial))
        obj_new = float(r_new @ r_new)
        if math.isfinite(obj_new) and obj_new <= obj:
            rel = (obj - obj_new) / obj
            streak = streak + 1 if rel < REL_TOL else 0
            p, r, obj = trial, r_new, obj_new
            history.append(obj)
            damping = max(damping / 10.0, 1e-12)
            J = None
            if streak >= REL_TOL_STREAK:
                return _Run(p, obj, it, True, "relative-decrease", history)
        else:
            damping *= 10.0
            if damping > DAMPING_MAX:
                return _Run(p, obj, it, True, "damping-limit", history)
    return _Run(p, obj, it, False, "max-iterations", history)


# ---------------------------------------------------------------- results

@dataclass(frozen=True)
class Diagnostics:
    rmse: float
    r_squared: float
    max_abs_residual: float


@dataclass
class FitResult:
    model: object
    spec: ModelSpec
    params: dict
    rmse: float
    r_squared: float
    max_abs_residual: float
    iterations: int
    converged: bool
    stop_reason: str
    residuals: np.ndarray
    objective: float
    history: list
    init_fallback: bool = False
    restart: int = 0
    seed: int | None = None
    provenance: str = ""


def _diagnostics(y, fitted) -> tuple:
    res = y - fitted
    ss_res = float(res @ res)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else -math.inf
    else:
        r2 = 1.0 - ss_res / ss_tot
    rmse = math.sqrt(ss_res / y.size)
    return Diagnostics(rmse, r2, float(np.max(np.abs(res)))), res


def evaluate_fit(result, dataset: Dataset) -> Diagnostics:
    """RMSE, R^2 and max |residual| of a fit result (or bare model) on ``dataset``.

    R^2 is 1 when both the residual and total sums of squares vanish.
    """
    if not isinstance(dataset, Dataset):
        raise TypeError("evaluate_fit expects a Dataset")
    model = result.model if isinstance(result, FitResult) else result
    if not hasattr(model, "raw"):
        raise TypeError("evaluate_fit expects a FitResult or a constituent model")
    return _diagnostics(dataset.mu_a, model.raw(dataset.wavelength))[0]


def _jitter(spec: ModelSpec, p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    q = p.copy()
    if spec.kind == "gaussian-sum":
        t = q.reshape(-1, 3)
        k = t.shape[0]
        t[:, 0] *= 1.0 + 0.2 * rng.standard_normal(k)
        t[:, 1] += 0.25 * np.abs(t[:, 2]) * rng.standard_normal(k)
        t[:, 2] *= np.exp(0.2 * rng.standard_normal(k))
    elif spec.kind == "fourier":
        q[:-1] *= 1.0 + 0.1 * rng.standard_normal(q.size - 1)
        q[-1] *= 1.0 + 0.01 * rng.standard_normal()
    else:
        q[0] *= 1.0 + 0.2 * rng.standard_normal()
        q[2] += 0.2 * rng.standard_normal()
    _apply_fixed(spec, q)
    return q


def fit(dataset: Dataset, spec: ModelSpec, *, restarts: int = 0, seed: int | None = 0,
        max_iter: int = MAX_ITER) -> FitResult:
    """Least-squares fit of ``spec`` to ``dataset``.

    ``restarts`` extra starts are drawn by jittering the initial guess with
    ``numpy.random.default_rng(seed)``; all jitters are drawn up front, and
    the winner is the lowest objective, ties going to the lowest start index,
    so the result depends only on ``seed``.
    """
    free = spec.free_mask()
    if len(dataset) < 2 * int(free.sum()):
        raise ValueError(
            f"need at least {2 * int(free.sum())} points for {int(free.sum())} free parameters, "
            f"got {len(dataset)}")
    lam, y = dataset.wavelength, dataset.mu_a
    sw = np.ones_like(y) if dataset.weight is None else np.sqrt(dataset.weight)
    lo, hi = spec.bound_arrays()
    f, jac = _model_fn(spec)

    guess = initialize(dataset, spec)
    p0 = guess.params
    if spec.kind == "fourier" and free[-1] and spec.init is None:
        p0 = np.clip(_fourier_frequency_scan(dataset, spec, sw), lo, hi)

    rng = np.random.default_rng(seed)
    starts = [p0] + [np.clip(_jitter(spec, p0, rng), lo, hi) for _ in range(restarts)]
    gaussian_auto = spec.kind == "gaussian-sum" and spec.init is None
    if gaussian_auto and not guess.fallback:
        starts.append(np.clip(_with_halfmax_widths(dataset, p0), lo, hi))

    best = None

    def run_from(idx, start):
        nonlocal best
        try:
            run = _levenberg_marquardt(f, jac, lam, y, sw, start, free, lo, hi, max_iter)
        except FitConditioningError:
            if idx == 0:
                raise
            return
        if best is None or run.objective < best[1].objective:
            best = (idx, run)

    for idx, start in enumerate(starts):
        run_from(idx, start)
    scale = float(np.sum((sw * y) ** 2))
    if gaussian_auto and spec.n_terms > 1 and best[1].objective > 1e-20 * scale:
        greedy = _greedy_gaussian_start(dataset, spec, sw, max_iter)
        if greedy is not None:
            run_from(len(starts), np.clip(greedy, lo, hi))
    idx, run = best

    p = _canonical(spec, run.params)
    domain = (float(lam[0]), float(lam[-1]))
    model = params_to_model(spec, p, domain=domain)
    diag, res = _diagnostics(y, model.raw(lam))
    return FitResult(
        model=model,
        spec=spec,
        params=dict(zip(spec.param_names(), p.tolist())),
        rmse=diag.rmse,
        r_squared=diag.r_squared,
        max_abs_residual=diag.max_abs_residual,
        iterations=run.iterations,
        converged=run.converged,
        stop_reason=run.stop_reason,
        residuals=res,
        objective=run.objective,
        history=run.history,
        init_fallback=guess.fallback,
        restart=idx,
        seed=seed,
        provenance=dataset.provenance,
    )


def result_to_record(result: FitResult) -> dict:
    rec = model_to_record(result.model)
    rec["diagnostics"] = {
        "rmse": result.rmse,
        "r_squared": result.r_squared,
        "max_abs_residual": result.max_abs_residual,
        "n_points": int(result.residuals.size),
    }
    rec["fit"] = {
        "iterations": result.iterations,
        "converged": result.converged,
        "stop_reason": result.stop_reason,
        "init_fallback": result.init_fallback,
        "restart": result.restart,
        "seed": result.seed,
    }
    rec["provenance"] = result.provenance
    return rec


def export_result(result: FitResult) -> str:
    """JSON document loadable by :func:`tissue_owc.spectra.load_model`."""
    return json.dumps(result_to_record(result), indent=2) + "\n"
