"""Constituent absorption models and their evaluation.

Five constituents are built in (deoxygenated blood, oxygenated blood, water,
fat, melanin), each bound to one of three analytic families:

* Gaussian sum   ``sum_i a_i exp(-((lam - b_i) / c_i)**2)``
* Fourier series ``a0 + sum_i a_i cos(i w lam) + b_i sin(i w lam)``
* power law      ``mu_ref (lam / lambda_ref)**exponent``

Wavelengths are in nm and absorption coefficients in cm^-1. The fitted
families are only trusted on their validity domain (400-1000 nm by default);
evaluating outside it raises :class:`DomainError` unless ``extrapolate=True``.
Published values are clamped at zero; every clamped sample bumps a
process-wide diagnostic counter (see :func:`clamped_count`).
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import ClassVar, Mapping, Union

import numpy as np

from . import _kernels

DEFAULT_DOMAIN = (400.0, 1000.0)
CONSTITUENTS = ("deoxy-blood", "oxy-blood", "water", "fat", "melanin")
_EXPECTED_TERMS = {"deoxy-blood": 4, "oxy-blood": 5, "fat": 5}


class DomainError(ValueError):
    """Wavelength outside a model's validity domain."""


class EvaluationError(ArithmeticError):
    """A model produced a non-finite value."""


class UnknownConstituentError(KeyError):
    def __str__(self):
        return (
            f"unknown constituent {self.args[0]!r}; "
            f"valid names: {', '.join(CONSTITUENTS)}"
        )


# ---------------------------------------------------------------- clamping

_clamp_lock = threading.Lock()
_clamp_total = 0


def clamped_count() -> int:
    """Number of samples clamped to zero since start-up (or last reset)."""
    return _clamp_total


def reset_clamped_count() -> None:
    global _clamp_total
    with _clamp_lock:
        _clamp_total = 0


def _clamp(values: np.ndarray) -> np.ndarray:
    global _clamp_total
    neg = values < 0
    n = int(np.count_nonzero(neg))
    if n:
        with _clamp_lock:
            _clamp_total += n
        values = np.where(neg, 0.0, values)
    return values


# ---------------------------------------------------------------- models

def _unclamped(kernel, lam, *args):
    """Run a kernel on a float64 array view of ``lam``; scalars come back as float."""
    x = np.asarray(lam, dtype=np.float64)
    out = kernel(np.atleast_1d(x).ravel(), *args).reshape(x.shape)
    return float(out) if x.ndim == 0 else out


@dataclass(frozen=True)
class GaussianSumModel:
    terms: tuple  # ((a, b, c), ...)
    constituent: str | None = None
    domain: tuple | None = DEFAULT_DOMAIN

    kind: ClassVar[str] = "gaussian-sum"

    def __post_init__(self):
        terms = tuple(tuple(float(v) for v in t) for t in self.terms)
        if not terms or any(len(t) != 3 for t in terms):
            raise ValueError("Gaussian terms must be non-empty (a, b, c) triples")
        if any(t[2] == 0.0 for t in terms):
            raise ValueError("Gaussian width c_i must be non-zero")
        object.__setattr__(self, "terms", terms)

    @property
    def arrays(self):
        p = np.array(self.terms, dtype=np.float64)
        return np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]), np.ascontiguousarray(p[:, 2])

    def raw(self, lam: np.ndarray) -> np.ndarray:
        return _unclamped(_kernels.gaussian_sum, lam, *self.arrays)

    def parameters(self) -> dict:
        out = {}
        for i, (a, b, c) in enumerate(self.terms, start=1):
            out[f"a{i}"], out[f"b{i}"], out[f"c{i}"] = a, b, c
        return out


@dataclass(frozen=True)
class FourierSeriesModel:
    a0: float
    harmonics: tuple  # ((a_i, b_i), ...) for i = 1..n
    w: float
    constituent: str | None = None
    domain: tuple | None = DEFAULT_DOMAIN

    kind: ClassVar[str] = "fourier"

    def __post_init__(self):
        harmonics = tuple((float(a), float(b)) for a, b in self.harmonics)
        if harmonics and not self.w > 0:
            raise ValueError("Fourier fundamental w must be > 0")
        object.__setattr__(self, "harmonics", harmonics)
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "w", float(self.w))

    @property
    def order(self) -> int:
        return len(self.harmonics)

    @property
    def arrays(self):
        h = np.array(self.harmonics, dtype=np.float64).reshape(-1, 2)
        return self.a0, np.ascontiguousarray(h[:, 0]), np.ascontiguousarray(h[:, 1]), self.w

    def raw(self, lam: np.ndarray) -> np.ndarray:
        return _unclamped(_kernels.fourier_series, lam, *self.arrays)

    def parameters(self) -> dict:
        out = {"a0": self.a0}
        for i, (a, _) in enumerate(self.harmonics, start=1):
            out[f"a{i}"] = a
        for i, (_, b) in enumerate(self.harmonics, start=1):
            out[f"b{i}"] = b
        out["w"] = self.w
        return out


@dataclass(frozen=True)
class PowerLawModel:
    mu_ref: float
    lambda_ref: float
    exponent: float = -3.0
    constituent: str | None = None
    domain: tuple | None = None  # globally defined for lam > 0

    kind: ClassVar[str] = "power-law"

    def __post_init__(self):
        if not self.lambda_ref > 0:
            raise ValueError("lambda_ref must be > 0")
        if not self.mu_ref >= 0:
            raise ValueError("mu_ref must be >= 0")

    def raw(self, lam: np.ndarray) -> np.ndarray:
        return _unclamped(_kernels.power_law, lam, self.mu_ref, self.lambda_ref, self.exponent)

    def parameters(self) -> dict:
        return {"mu_ref": self.mu_ref, "lambda_ref": self.lambda_ref, "exponent": self.exponent}


ConstituentModel = Union[GaussianSumModel, FourierSeriesModel, PowerLawModel]


# ---------------------------------------------------------------- records

def model_from_record(record: Mapping) -> ConstituentModel:
    """Build a model from a ``{"kind", "parameters", ...}`` mapping.

    This is the shape of both the shipped parameter file entries and the
    documents written by :func:`tissue_owc.fitting.export_result`.
    """
    kind = record["kind"]
    p = dict(record["parameters"])
    name = record.get("constituent")
    extra = {}
    if "domain" in record:
        extra["domain"] = None if record["domain"] is None else tuple(record["domain"])
    if kind == "gaussian-sum":
        n = _count_indexed(p, "a", start=1)
        terms = [(p[f"a{i}"], p[f"b{i}"], p[f"c{i}"]) for i in range(1, n + 1)]
        return GaussianSumModel(terms, constituent=name, **extra)
    if kind == "fourier":
        n = _count_indexed(p, "a", start=1)
        harmonics = [(p[f"a{i}"], p[f"b{i}"]) for i in range(1, n + 1)]
        return FourierSeriesModel(p["a0"], harmonics, p.get("w", 1.0), constituent=name, **extra)
    if kind == "power-law":
        return PowerLawModel(p["mu_ref"], p["lambda_ref"], p.get("exponent", -3.0), constituent=name, **extra)
    raise ValueError(f"unknown model kind {kind!r}")


def model_to_record(model: ConstituentModel) -> dict:
    rec = {"kind": model.kind, "parameters": model.parameters()}
    if model.constituent is not None:
        rec = {"constituent": model.constituent, **rec}
    rec["domain"] = None if model.domain is None else list(model.domain)
    return rec


def _count_indexed(p: Mapping, prefix: str, start: int) -> int:
    n = 0
    while f"{prefix}{start + n}" in p:
        n += 1
    return n


def load_model(path: str | Path) -> ConstituentModel:
    """Load a single model record (e.g. an exported fit) from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return model_from_record(doc)


def _load_registry() -> Mapping[str, ConstituentModel]:
    text = resources.files("tissue_owc").joinpath("data/constituents.json").read_text("utf-8")
    models = {}
    for rec in json.loads(text)["constituents"]:
        model = model_from_record(rec)
        expected = _EXPECTED_TERMS.get(model.constituent)
        if expected is not None and len(model.terms) != expected:
            raise RuntimeError(f"{model.constituent}: expected {expected} Gaussian terms")
        models[model.constituent] = model
    if set(models) != set(CONSTITUENTS):
        raise RuntimeError("constituent parameter file is incomplete")
    return MappingProxyType(models)


REGISTRY: Mapping[str, ConstituentModel] = _load_registry()


# ---------------------------------------------------------------- evaluation

def _as_wavelength(lam):
    arr = np.ascontiguousarray(np.atleast_1d(np.asarray(lam, dtype=np.float64)))
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("wavelengths must be finite and > 0 nm")
    return arr


def _check_domain(model, lam, extrapolate):
    if extrapolate or model.domain is None:
        return
    lo, hi = model.domain
    if np.any(lam < lo) or np.any(lam > hi):
        bad = lam[(lam < lo) | (lam > hi)][0]
        raise DomainError(
            f"wavelength {bad:g} nm outside the {model.kind} validity domain "
            f"[{lo:g}, {hi:g}] nm (pass extrapolate=True to override)"
        )


def _finish(values, scalar, clamp):
    if not np.all(np.isfinite(values)):
        raise EvaluationError("model evaluation produced a non-finite value")
    if clamp:
        values = _clamp(values)
    return float(values[0]) if scalar else values


def evaluate(model: ConstituentModel, lam, *, extrapolate=False, clamp=True):
    """Evaluate any model at scalar or array wavelength(s) in nm."""
    scalar = np.ndim(lam) == 0
    arr = _as_wavelength(lam)
    _check_domain(model, arr, extrapolate)
    return _finish(model.raw(arr), scalar, clamp)


def eval_gaussian_sum(model: GaussianSumModel, lam, *, extrapolate=False, clamp=True):
    return evaluate(model, lam, extrapolate=extrapolate, clamp=clamp)


def eval_fourier_series(model: FourierSeriesModel, lam, *, extrapolate=False, clamp=True):
    """Fourier-series absorption. The form is periodic in ``2 pi / w``, so it
    is meaningless outside the band it was fitted on; out-of-domain wavelengths
    raise unless ``extrapolate`` is set."""
    return evaluate(model, lam, extrapolate=extrapolate, clamp=clamp)


def eval_power_law(model: PowerLawModel, lam):
    return evaluate(model, lam, clamp=False)


def get_model(constituent) -> ConstituentModel:
    if isinstance(constituent, (GaussianSumModel, FourierSeriesModel, PowerLawModel)):
        return constituent
    try:
        return REGISTRY[constituent]
    except KeyError:
        raise UnknownConstituentError(constituent) from None


def constituent_mu_a(constituent, lam, *, extrapolate=False):
    """Absorption coefficient (cm^-1) of a built-in constituent name or model."""
    return evaluate(get_model(constituent), lam, extrapolate=extrapolate)


# ---------------------------------------------------------------- spectra

@dataclass(frozen=True)
class Spectrum:
    wavelength: np.ndarray
    values: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return self.wavelength.shape[0]

    def __iter__(self):
        return iter(zip(self.wavelength.tolist(), self.values.tolist()))


def wavelength_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Index-generated grid ``lo + k*step`` for every k with the point <= hi."""
    lo, hi, step = float(lo), float(hi), float(step)
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
        raise ValueError("band limits and step must be finite")
    if not step > 0:
        raise ValueError("step must be > 0")
    if hi < lo:
        raise ValueError(f"empty band [{lo:g}, {hi:g}]")
    # tolerance absorbs (hi - lo)/step landing a hair under an integer
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n, dtype=np.float64)


def constituent_spectrum(constituent, band, step, *, extrapolate=False) -> Spectrum:
    model = get_model(constituent)
    grid = wavelength_grid(band[0], band[1], step)
    values = evaluate(model, grid, extrapolate=extrapolate)
    label = model.constituent or model.kind
    return Spectrum(grid, values, label=label)
