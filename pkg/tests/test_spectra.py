import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tissue_owc import spectra
from tissue_owc.spectra import (
    CONSTITUENTS,
    REGISTRY,
    DomainError,
    EvaluationError,
    FourierSeriesModel,
    GaussianSumModel,
    PowerLawModel,
    UnknownConstituentError,
    constituent_mu_a,
    constituent_spectrum,
    eval_fourier_series,
    eval_gaussian_sum,
    eval_power_law,
    load_model,
    model_from_record,
    model_to_record,
    wavelength_grid,
)

from .test_golden import FAT_411_5

TABLE_I = {
    "deoxy-blood": [(38.63, 423.9, 33.06), (60.18, 31.57, 660.8), (25.11, 559.3, 59.08), (2.988, 664.7, 28.53)],
    "oxy-blood": [(14, 419.7, 16.97), (13.75, 581.5, 11.68), (29.69, 559.9, 46.71),
                  (4.317e15, -25880, 4668), (-34.3, 642.6, 162.5)],
    "fat": [(33.53, 411.5, 38.38), (50.09, 968.7, 525.9), (3.66, 742.9, 80.22),
            (2.5, 671.2, 32.97), (19.86, 513.8, 119.2)],
}
WATER = dict(a0=324.1, a=[102.2, -568, -126.6, 236.8, 73, -40.53, -12.92],
             b=[697.9, 121.7, -395.3, -107.1, 115.6, 35.46, -8.373], w=0.006663)


# ---------------------------------------------------------------- registry

def test_registry_binds_expected_families():
    assert set(REGISTRY) == set(CONSTITUENTS)
    assert isinstance(REGISTRY["deoxy-blood"], GaussianSumModel)
    assert isinstance(REGISTRY["oxy-blood"], GaussianSumModel)
    assert isinstance(REGISTRY["fat"], GaussianSumModel)
    assert isinstance(REGISTRY["water"], FourierSeriesModel)
    assert isinstance(REGISTRY["melanin"], PowerLawModel)


@pytest.mark.parametrize("name", ["deoxy-blood", "oxy-blood", "fat"])
def test_gaussian_parameters_verbatim(name):
    assert REGISTRY[name].terms == tuple(tuple(float(v) for v in t) for t in TABLE_I[name])


def test_water_parameters_verbatim():
    m = REGISTRY["water"]
    assert m.a0 == WATER["a0"] and m.w == WATER["w"] and m.order == 7
    assert [h[0] for h in m.harmonics] == WATER["a"]
    assert [h[1] for h in m.harmonics] == WATER["b"]


def test_melanin_parameters():
    m = REGISTRY["melanin"]
    assert (m.mu_ref, m.lambda_ref, m.exponent) == (519, 550, -3)


def test_registry_is_read_only():
    with pytest.raises(TypeError):
        REGISTRY["fat"] = REGISTRY["water"]


# ---------------------------------------------------------------- Gaussian sum

def test_single_gaussian_peak_and_offset():
    m = GaussianSumModel([(5.0, 500.0, 50.0)])
    assert eval_gaussian_sum(m, 500.0) == 5.0
    assert eval_gaussian_sum(m, 550.0) == pytest.approx(5 * math.exp(-1), rel=1e-15)
    assert eval_gaussian_sum(m, 550.0) == pytest.approx(1.83940, abs=5e-6)


def test_builtin_fat_at_peak():
    assert eval_gaussian_sum(REGISTRY["fat"], 411.5) == pytest.approx(FAT_411_5, rel=1e-12)


def test_gaussian_rejects_zero_width():
    with pytest.raises(ValueError):
        GaussianSumModel([(1.0, 500.0, 0.0)])


def test_gaussian_out_of_domain_needs_opt_in():
    m = GaussianSumModel([(1.0, 500.0, 50.0)])
    with pytest.raises(DomainError):
        eval_gaussian_sum(m, 1200.0)
    assert eval_gaussian_sum(m, 1200.0, extrapolate=True) >= 0


def test_non_finite_result_raises():
    m = GaussianSumModel([(1e308, 500.0, 50.0), (1e308, 500.0, 50.0)])
    with pytest.raises(EvaluationError):
        eval_gaussian_sum(m, 500.0)


def test_oxy_blood_baseline_term_is_finite():
    # huge amplitude far off-band: exp(-(~26300/4668)^2) * 4.3e15 stays finite and small
    v = constituent_mu_a("oxy-blood", np.arange(400.0, 1001.0))
    assert np.all(np.isfinite(v))


@given(a=st.floats(0.1, 100), b=st.floats(400, 1000), c=st.floats(1, 300), x=st.floats(0, 500))
def test_gaussian_symmetry(a, b, c, x):
    m = GaussianSumModel([(a, b, c)])
    left = m.raw(np.array([b - x]))[0]
    right = m.raw(np.array([b + x]))[0]
    assert left == pytest.approx(right, rel=1e-12, abs=1e-300)


@given(a=st.floats(0.1, 100), b=st.integers(400, 1000), c=st.floats(1, 300))
def test_gaussian_peak_on_grid(a, b, c):
    m = GaussianSumModel([(a, float(b), c)])
    grid = np.arange(400.0, 1001.0)
    v = m.raw(grid)
    assert grid[np.argmax(v)] == b
    assert v.max() == a


# ---------------------------------------------------------------- Fourier

def test_constant_fourier():
    m = FourierSeriesModel(7.0, [(0.0, 0.0)] * 7, 0.006663)
    assert eval_fourier_series(m, 612.3) == 7.0


def test_water_periodicity_raw():
    m = REGISTRY["water"]
    period = 2 * math.pi / m.w
    a = eval_fourier_series(m, 550.0, clamp=False)
    b = eval_fourier_series(m, 550.0 + period, clamp=False, extrapolate=True)
    assert b == pytest.approx(a, rel=1e-9)


def test_water_outside_domain_raises():
    with pytest.raises(DomainError):
        constituent_mu_a("water", 350.0)
    with pytest.raises(DomainError):
        eval_fourier_series(REGISTRY["water"], 550.0 + 2 * math.pi / 0.006663, clamp=False)


def test_water_against_independent_sum():
    lam = np.array([412.0, 733.0, 987.0])
    k = np.arange(1, 8)[:, None]
    expected = WATER["a0"] + (np.array(WATER["a"])[:, None] * np.cos(k * WATER["w"] * lam)
                             + np.array(WATER["b"])[:, None] * np.sin(k * WATER["w"] * lam)).sum(axis=0)
    np.testing.assert_allclose(eval_fourier_series(REGISTRY["water"], lam, clamp=False), expected, rtol=1e-12)


# ---------------------------------------------------------------- power law

def test_melanin_anchor_values():
    assert eval_power_law(REGISTRY["melanin"], 550.0) == 519.0
    assert eval_power_law(REGISTRY["melanin"], 1100.0) == pytest.approx(64.875, rel=1e-12)
    assert eval_power_law(PowerLawModel(1.0, 1.0, -3.0), 1.0) == 1.0


def test_power_law_rejects_bad_reference():
    with pytest.raises(ValueError):
        PowerLawModel(1.0, 0.0)
    with pytest.raises(ValueError):
        PowerLawModel(-1.0, 550.0)


@given(l1=st.floats(400, 1000), l2=st.floats(400, 1000))
def test_melanin_monotone(l1, l2):
    if l1 == l2:
        return
    lo, hi = sorted((l1, l2))
    assert constituent_mu_a("melanin", lo) > constituent_mu_a("melanin", hi)


# ---------------------------------------------------------------- dispatch & spectra

def test_dispatch_equivalence():
    assert constituent_mu_a("melanin", 550) == 519.0
    assert constituent_mu_a("fat", 411.5) == eval_gaussian_sum(REGISTRY["fat"], 411.5)


def test_unknown_constituent():
    with pytest.raises(UnknownConstituentError) as err:
        constituent_mu_a("blood", 500)
    assert "melanin" in str(err.value)


def test_nonpositive_wavelength_rejected():
    with pytest.raises(ValueError):
        constituent_mu_a("melanin", 0.0)


def test_registry_totality_and_nonnegativity():
    grid = np.arange(400, 1001).astype(float)
    for name in CONSTITUENTS:
        v = constituent_mu_a(name, grid)
        assert v.shape == grid.shape and np.all(v >= 0)


def test_determinism_bit_identical():
    grid = np.arange(400, 1001).astype(float)
    for name in CONSTITUENTS:
        assert np.array_equal(constituent_mu_a(name, grid), constituent_mu_a(name, grid))


def test_clamp_counter_counts_negative_samples():
    spectra.reset_clamped_count()
    constituent_mu_a("water", np.array([500.0, 600.0]))
    assert spectra.clamped_count() == 2
    constituent_mu_a("melanin", 500.0)
    assert spectra.clamped_count() == 2


def test_spectrum_single_sample():
    s = constituent_spectrum("melanin", (550, 550), 1)
    assert list(s) == [(550.0, 519.0)]


def test_spectrum_melanin_coarse():
    s = constituent_spectrum("melanin", (400, 1000), 200)
    assert s.wavelength.tolist() == [400.0, 600.0, 800.0, 1000.0]
    assert np.all(np.diff(s.values) < 0)


def test_spectrum_water_pointwise():
    s = constituent_spectrum("water", (400, 1000), 1)
    assert len(s) == 601
    for lam in (400.0, 711.0, 1000.0):
        i = int(lam - 400)
        assert s.values[i] == constituent_mu_a("water", lam)


@pytest.mark.parametrize("band,step", [((500, 400), 1), ((400, 500), 0), ((400, 500), -1)])
def test_spectrum_bad_grid(band, step):
    with pytest.raises(ValueError):
        constituent_spectrum("fat", band, step)


def test_grid_is_index_generated():
    g = wavelength_grid(400, 1000, 0.1)
    assert len(g) == 6001 and g[-1] == pytest.approx(1000.0) and g[-1] <= 1000.0 + 1e-9
    assert wavelength_grid(400, 1000, 7)[-1] == 400 + 7 * 85


# ---------------------------------------------------------------- records

@pytest.mark.parametrize("name", CONSTITUENTS)
def test_record_roundtrip(name, tmp_path):
    rec = model_to_record(REGISTRY[name])
    path = tmp_path / "m.json"
    path.write_text(json.dumps(rec))
    assert load_model(path) == REGISTRY[name]
    assert model_from_record(rec) == REGISTRY[name]


def test_unknown_record_kind():
    with pytest.raises(ValueError):
        model_from_record({"kind": "spline", "parameters": {}})


@pytest.mark.parametrize("name", list(REGISTRY))
def test_raw_accepts_scalars_and_shapes(name):
    model = REGISTRY[name]
    grid = np.array([[450.0, 550.0], [650.0, 750.0]])
    out = model.raw(grid)
    assert out.shape == (2, 2)
    assert isinstance(model.raw(550.0), float) and model.raw(550.0) == out[0, 1]
