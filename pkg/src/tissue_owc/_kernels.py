"""Hot evaluation kernels for the three model families.

Each kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
expression. The numba path is used when numba imports cleanly and the
environment variable ``TISSUE_OWC_PURE_NUMPY`` is unset (or ``0``); set it
to ``1`` to force the numpy path. Both paths agree to rounding error.
"""
import os

import numpy as np

_FORCE_NUMPY = os.environ.get("TISSUE_OWC_PURE_NUMPY", "0") not in ("", "0")

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not _FORCE_NUMPY


# ---------------------------------------------------------------- numpy path

def gaussian_sum_np(lam, a, b, c):
    z = (lam[:, None] - b[None, :]) / c[None, :]
    # overflow to inf matches the loop version; callers check finiteness
    with np.errstate(over="ignore", invalid="ignore"):
        return (a[None, :] * np.exp(-z * z)).sum(axis=1)


def gaussian_sum_jac_np(lam, a, b, c):
    """Jacobian columns ordered (a1, b1, c1, a2, b2, c2, ...)."""
    z = (lam[:, None] - b[None, :]) / c[None, :]
    e = np.exp(-z * z)
    jac = np.empty((lam.shape[0], 3 * a.shape[0]))
    jac[:, 0::3] = e
    jac[:, 1::3] = a * e * 2.0 * z / c
    jac[:, 2::3] = a * e * 2.0 * z * z / c
    return jac


def fourier_series_np(lam, a0, ca, sb, w):
    out = np.full(lam.shape[0], a0, dtype=np.float64)
    for k in range(ca.shape[0]):
        arg = (k + 1) * w * lam
        out += ca[k] * np.cos(arg) + sb[k] * np.sin(arg)
    return out


def fourier_series_jac_np(lam, a0, ca, sb, w):
    """Jacobian columns ordered (a0, a1..an, b1..bn, w)."""
    n = ca.shape[0]
    jac = np.empty((lam.shape[0], 2 * n + 2))
    jac[:, 0] = 1.0
    dw = np.zeros(lam.shape[0])
    for k in range(n):
        i = k + 1
        arg = i * w * lam
        cs, sn = np.cos(arg), np.sin(arg)
        jac[:, 1 + k] = cs
        jac[:, 1 + n + k] = sn
        dw += i * lam * (sb[k] * cs - ca[k] * sn)
    jac[:, 2 * n + 1] = dw
    return jac


# ---------------------------------------------------------------- numba path

if NUMBA_AVAILABLE:

    @njit(cache=True)
    def gaussian_sum_nb(lam, a, b, c):
        out = np.zeros(lam.shape[0])
        for j in range(lam.shape[0]):
            s = 0.0
            for i in range(a.shape[0]):
                z = (lam[j] - b[i]) / c[i]
                s += a[i] * np.exp(-z * z)
            out[j] = s
        return out

    @njit(cache=True)
    def gaussian_sum_jac_nb(lam, a, b, c):
        jac = np.empty((lam.shape[0], 3 * a.shape[0]))
        for j in range(lam.shape[0]):
            for i in range(a.shape[0]):
                z = (lam[j] - b[i]) / c[i]
                e = np.exp(-z * z)
                jac[j, 3 * i] = e
                jac[j, 3 * i + 1] = a[i] * e * 2.0 * z / c[i]
                jac[j, 3 * i + 2] = a[i] * e * 2.0 * z * z / c[i]
        return jac

    # harmonics by angle addition: one cos/sin pair per wavelength, error grows ~k ulp
    @njit(cache=True)
    def fourier_series_nb(lam, a0, ca, sb, w):
        out = np.empty(lam.shape[0])
        for j in range(lam.shape[0]):
            c1 = np.cos(w * lam[j])
            s1 = np.sin(w * lam[j])
            cs, sn = c1, s1
            s = a0
            for k in range(ca.shape[0]):
                s += ca[k] * cs + sb[k] * sn
                cs, sn = cs * c1 - sn * s1, sn * c1 + cs * s1
            out[j] = s
        return out

    @njit(cache=True)
    def fourier_series_jac_nb(lam, a0, ca, sb, w):
        n = ca.shape[0]
        jac = np.empty((lam.shape[0], 2 * n + 2))
        for j in range(lam.shape[0]):
            c1 = np.cos(w * lam[j])
            s1 = np.sin(w * lam[j])
            cs, sn = c1, s1
            jac[j, 0] = 1.0
            dw = 0.0
            for k in range(n):
                jac[j, 1 + k] = cs
                jac[j, 1 + n + k] = sn
                dw += (k + 1) * lam[j] * (sb[k] * cs - ca[k] * sn)
                cs, sn = cs * c1 - sn * s1, sn * c1 + cs * s1
            jac[j, 2 * n + 1] = dw
        return jac


if USE_NUMBA:
    gaussian_sum = gaussian_sum_nb
    gaussian_sum_jac = gaussian_sum_jac_nb
    fourier_series = fourier_series_nb
    fourier_series_jac = fourier_series_jac_nb
else:
    gaussian_sum = gaussian_sum_np
    gaussian_sum_jac = gaussian_sum_jac_np
    fourier_series = fourier_series_np
    fourier_series_jac = fourier_series_jac_np


def power_law(lam, mu_ref, lambda_ref, exponent):
    return mu_ref * (lam / lambda_ref) ** exponent


def power_law_jac(lam, mu_ref, lambda_ref, exponent):
    """Jacobian columns ordered (mu_ref, lambda_ref, exponent)."""
    ratio = lam / lambda_ref
    val = ratio ** exponent
    jac = np.empty((lam.shape[0], 3))
    jac[:, 0] = val
    jac[:, 1] = -mu_ref * exponent * val / lambda_ref
    jac[:, 2] = mu_ref * val * np.log(ratio)
    return jac
