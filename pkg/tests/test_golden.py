"""Spot values frozen from tests/oracles/golden_oracle.py (pure ``math``, hand-typed constants)."""
import os
import subprocess
import sys
from pathlib import Path

import pytest

from tissue_owc import constituent_mu_a, preset, tissue_mu_a
from tissue_owc.spectra import REGISTRY, eval_fourier_series

FAT_411_5 = 59.33958896390664
WATER_550_RAW = -77.25632234651984
SKIN_550 = 16.251553131551418
OXY_550 = 55.21075425967838
DEOXY_550 = 57.01440851426071

ORACLE = Path(__file__).parent / "oracles" / "golden_oracle.py"


def test_fat_golden():
    assert constituent_mu_a("fat", 411.5) == pytest.approx(FAT_411_5, rel=1e-9)
    assert FAT_411_5 == pytest.approx(59.34, abs=5e-3)


def test_water_golden_raw_and_published():
    raw = eval_fourier_series(REGISTRY["water"], 550.0, clamp=False)
    assert raw == pytest.approx(WATER_550_RAW, rel=1e-9)
    # negative raw value is clamped in published results
    assert constituent_mu_a("water", 550.0) == 0.0


def test_blood_spot_values():
    assert constituent_mu_a("oxy-blood", 550.0) == pytest.approx(OXY_550, rel=1e-9)
    assert constituent_mu_a("deoxy-blood", 550.0) == pytest.approx(DEOXY_550, rel=1e-9)


def test_skin_golden():
    assert tissue_mu_a(preset("skin"), 550.0) == pytest.approx(SKIN_550, rel=1e-9)


def test_oracle_script_reproduces_frozen_values():
    out = subprocess.run([sys.executable, str(ORACLE)], capture_output=True, text=True, check=True).stdout
    values = {line.split()[0]: float(line.split()[1]) for line in out.splitlines()}
    assert values["fat@411.5"] == FAT_411_5
    assert values["water@550"] == WATER_550_RAW
    assert values["skin@550"] == SKIN_550


def test_pure_numpy_path_reproduces_golden_values():
    code = (
        "from tissue_owc import _kernels, constituent_mu_a, tissue_mu_a, preset;"
        "from tissue_owc.spectra import REGISTRY, eval_fourier_series;"
        "print(_kernels.USE_NUMBA);"
        "print(repr(constituent_mu_a('fat', 411.5)));"
        "print(repr(eval_fourier_series(REGISTRY['water'], 550.0, clamp=False)));"
        "print(repr(tissue_mu_a(preset('skin'), 550.0)))"
    )
    env = dict(os.environ, TISSUE_OWC_PURE_NUMPY="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True, env=env)
    lines = out.stdout.split()
    assert lines[0] == "False"
    assert float(lines[1]) == pytest.approx(FAT_411_5, rel=1e-9)
    assert float(lines[2]) == pytest.approx(WATER_550_RAW, rel=1e-9)
    assert float(lines[3]) == pytest.approx(SKIN_550, rel=1e-9)
