"""Compare the numba kernels with the numpy fallback.

Kernel timings run both paths in one process. The end-to-end timings
(tissue sweep, window search, fits) run in a child process per backend, with
TISSUE_OWC_PURE_NUMPY selecting the fallback, so the package-level switch is
what gets measured.

    python benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from tissue_owc import _kernels as K

END_TO_END = r"""
import json, time
import numpy as np
from tissue_owc import _kernels as K, preset, tissue_mu_a
from tissue_owc.channel import LinkGeometry, transmission_windows
from tissue_owc.fitting import Dataset, ModelSpec, fit
lam = np.arange(400.0, 1001.0)
tissue_mu_a(preset("skin"), lam)  # compile outside the timings
fat = Dataset(lam, tissue_mu_a(preset("skin"), lam))
g = K.gaussian_sum_np(lam, np.array([4.0, 2.5, 6.0]), np.array([480.0, 640.0, 820.0]), np.array([30.0, 25.0, 40.0]))
f = K.fourier_series_np(lam, 20.0, np.array([1.0, -2.0, 0.5]), np.array([0.7, 1.5, -1.0]), 0.008)
fit(Dataset(lam, g), ModelSpec.gaussian_sum(3))
cases = {
    "tissue sweep 601 pts": lambda: tissue_mu_a(preset("skin"), lam),
    "windows brain 1 mm": lambda: transmission_windows(preset("brain"), LinkGeometry.from_mm(1)),
    "fit gaussian n=3": lambda: fit(Dataset(lam, g), ModelSpec.gaussian_sum(3)),
    "fit fourier order 3": lambda: fit(Dataset(lam, f), ModelSpec.fourier(3)),
}
out = {}
for name, fn in cases.items():
    t = time.perf_counter(); fn(); out[name] = time.perf_counter() - t
print(json.dumps({"backend": "numba" if K.USE_NUMBA else "numpy", "times": out}))
"""


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    lam = np.arange(400.0, 1001.0, 0.1)
    a, b, c = rng.uniform(1, 10, 5), rng.uniform(450, 950, 5), rng.uniform(10, 40, 5)
    ca, sb = rng.normal(size=7), rng.normal(size=7)
    pairs = [
        ("gaussian_sum", lambda: K.gaussian_sum_nb(lam, a, b, c), lambda: K.gaussian_sum_np(lam, a, b, c)),
        ("gaussian_sum_jac", lambda: K.gaussian_sum_jac_nb(lam, a, b, c), lambda: K.gaussian_sum_jac_np(lam, a, b, c)),
        ("fourier_series", lambda: K.fourier_series_nb(lam, 5.0, ca, sb, 0.0067),
         lambda: K.fourier_series_np(lam, 5.0, ca, sb, 0.0067)),
        ("fourier_series_jac", lambda: K.fourier_series_jac_nb(lam, 5.0, ca, sb, 0.0067),
         lambda: K.fourier_series_jac_np(lam, 5.0, ca, sb, 0.0067)),
    ]
    print(f"kernels on {lam.size} wavelengths, best of {repeat}")
    print(f"{'kernel':<22}{'numba us':>12}{'numpy us':>12}{'speed-up':>10}")
    for name, nb, npy in pairs:
        nb()  # compile
        t_nb = min(timeit.repeat(nb, number=1, repeat=repeat)) * 1e6
        t_np = min(timeit.repeat(npy, number=1, repeat=repeat)) * 1e6
        print(f"{name:<22}{t_nb:>12.1f}{t_np:>12.1f}{t_np / t_nb:>9.1f}x")


def end_to_end():
    rows = {}
    for flag in ("0", "1"):
        env = dict(os.environ, TISSUE_OWC_PURE_NUMPY=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                             text=True, check=True).stdout
        doc = json.loads(out)
        rows[doc["backend"]] = doc["times"]
    print("\nend to end (seconds, single run after warm-up)")
    print(f"{'case':<24}" + "".join(f"{k:>10}" for k in rows))
    for case in next(iter(rows.values())):
        print(f"{case:<24}" + "".join(f"{rows[k][case]:>10.4f}" for k in rows))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not K.NUMBA_AVAILABLE:
        sys.exit("numba is not installed; install the 'accel' extra to compare backends")
    kernel_table(args.repeat)
    end_to_end()


if __name__ == "__main__":
    main()
