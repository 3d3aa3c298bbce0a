"""Tissue compositions and the composite absorption coefficient.

A tissue is a homogeneous mix of blood (split by oxygen saturation), water,
fat and melanin. Its absorption is the volume-fraction-weighted sum of the
constituent coefficients; whatever volume is left over is optically inert.

Compositions are fraction-valued everywhere in the API. Percent values are
accepted only when parsing a composition document, and only with an explicit
``%`` suffix.
"""
from __future__ import annotations

import re
from decimal import Decimal
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .spectra import Spectrum, constituent_mu_a, wavelength_grid

FIELDS = ("B", "S", "W", "F", "M")
_BUDGET_SLACK = 1e-12


class CompositionError(ValueError):
    """Invalid composition; ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class TissueComposition:
    """Volume fractions of a tissue.

    B, W, F, M are blood, water, fat and melanin volume fractions; S is the
    hemoglobin oxygen saturation and only partitions the blood term.
    """

    B: float
    S: float
    W: float
    F: float
    M: float
    name: str = ""

    def __post_init__(self):
        for key in FIELDS:
            value = getattr(self, key)
            if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
                raise CompositionError(f"{key}: expected a number, got {value!r}", key)
            value = float(value)
            if not 0.0 <= value <= 1.0:
                raise CompositionError(f"{key}={value:g} outside [0, 1]", key)
            object.__setattr__(self, key, value)
        total = self.B + self.W + self.F + self.M
        if total > 1.0 + _BUDGET_SLACK:
            raise CompositionError(f"B+W+F+M = {total:g} exceeds 1")

    def weights(self) -> dict:
        """Effective per-constituent weights of the mixing sum."""
        return {
            "oxy-blood": self.B * self.S,
            "deoxy-blood": self.B * (1.0 - self.S),
            "water": self.W,
            "fat": self.F,
            "melanin": self.M,
        }

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in FIELDS}


@dataclass(frozen=True)
class TissuePreset:
    composition: TissueComposition
    provenance: str


PRESETS = MappingProxyType({
    "skin": TissuePreset(
        TissueComposition(0.0041, 0.992, 0.261, 0.225, 0.0115, name="skin"),
        "Tseng2011, Salomatina2006, Sandell2011, Shimojo2020",
    ),
    "breast": TissuePreset(
        TissueComposition(0.005, 0.52, 0.50, 0.13, 0.0, name="breast"),
        "Pifferi2004, Sandell2011, Spinelli2004",
    ),
    "bone": TissuePreset(
        TissueComposition(0.0015, 0.30, 0.30, 0.07, 0.0, name="bone"),
        "Sandell2011, Bashkatov2006, Ugryumova2004",
    ),
    "brain": TissuePreset(
        TissueComposition(0.0171, 0.587, 0.50, 0.20, 0.0, name="brain"),
        "Zhao2005, Yaroslavsky2002, Zee1993",
    ),
})


def preset(name: str) -> TissueComposition:
    try:
        return PRESETS[name].composition
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}") from None


def tissue_mu_a(composition: TissueComposition, lam, *, extrapolate=False):
    """Composite absorption coefficient in cm^-1 at scalar or array ``lam`` (nm)."""
    c = composition
    mu_o = constituent_mu_a("oxy-blood", lam, extrapolate=extrapolate)
    mu_d = constituent_mu_a("deoxy-blood", lam, extrapolate=extrapolate)
    mu_w = constituent_mu_a("water", lam, extrapolate=extrapolate)
    mu_f = constituent_mu_a("fat", lam, extrapolate=extrapolate)
    mu_m = constituent_mu_a("melanin", lam, extrapolate=extrapolate)
    return (
        c.B * c.S * mu_o
        + c.B * (1.0 - c.S) * mu_d
        + c.W * mu_w
        + c.F * mu_f
        + c.M * mu_m
    )


def tissue_spectrum(composition: TissueComposition, band, step, *, extrapolate=False) -> Spectrum:
    grid = wavelength_grid(band[0], band[1], step)
    values = tissue_mu_a(composition, grid, extrapolate=extrapolate)
    return Spectrum(grid, np.asarray(values, dtype=np.float64), label=composition.name or "tissue")


# ---------------------------------------------------------------- documents

_NUMBER = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(%?)\s*$")


def parse_composition(text: str) -> TissueComposition:
    """Parse a composition document.

    Entries are ``key = value`` or ``key: value`` pairs separated by newlines
    or commas; ``#`` starts a comment. Keys are B, S, W, F, M (all required)
    and an optional ``name``. A trailing ``%`` marks a percentage::

        name = breast
        B = 0.5%
        S = 52%
        W = 50%, F = 13%, M = 0
    """
    values = {}
    name = ""
    for raw in re.split(r"[\n,]", text):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"^([A-Za-z_]+)\s*[=:]\s*(.*)$", line)
        if not m:
            raise CompositionError(f"cannot parse entry {line!r}; expected key=value")
        key, value = m.group(1), m.group(2).strip()
        if key == "name":
            name = value
            continue
        if key not in FIELDS:
            raise CompositionError(f"unknown key {key!r}; expected one of B, S, W, F, M, name", key)
        if key in values:
            raise CompositionError(f"{key}: given more than once", key)
        num = _NUMBER.match(value)
        if not num:
            raise CompositionError(f"{key}: cannot parse value {value!r}", key)
        x = float(num.group(1))
        if num.group(2):
            if not 0.0 <= x <= 100.0:
                raise CompositionError(f"{key}={x:g}% outside [0, 100]%", key)
            # decimal division so "0.41%" lands on the same double as 0.0041
            x = float(Decimal(num.group(1)) / 100)
        elif not 0.0 <= x <= 1.0:
            raise CompositionError(f"{key}={x:g} outside [0, 1] (use a % suffix for percentages)", key)
        values[key] = x
    missing = [k for k in FIELDS if k not in values]
    if missing:
        raise CompositionError(f"missing required field(s): {', '.join(missing)}", missing[0])
    return TissueComposition(name=name, **values)


def serialize_composition(composition: TissueComposition) -> str:
    lines = []
    if composition.name:
        lines.append(f"name = {composition.name}")
    lines += [f"{k} = {getattr(composition, k)!r}" for k in FIELDS]
    return "\n".join(lines) + "\n"
