import numpy as np
import pytest

from tissue_owc import _kernels as K

LAM = np.linspace(380.0, 1020.0, 257)
GA = np.array([5.0, -2.0, 3.5])
GB = np.array([450.0, 610.0, 900.0])
GC = np.array([30.0, 80.0, -20.0])
FA = np.array([1.0, -0.5, 0.25])
FB = np.array([-2.0, 0.7, 0.1])


def _fd_jac(fun, p, h=1e-6):
    base = fun(p)
    cols = []
    for i in range(p.size):
        step = h * max(1.0, abs(p[i]))
        q1, q2 = p.copy(), p.copy()
        q1[i] += step
        q2[i] -= step
        cols.append((fun(q1) - fun(q2)) / (2 * step))
    return np.column_stack(cols), base


def test_gaussian_paths_agree():
    np.testing.assert_allclose(K.gaussian_sum_np(LAM, GA, GB, GC), K.gaussian_sum(LAM, GA, GB, GC),
                               rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(K.gaussian_sum_jac_np(LAM, GA, GB, GC), K.gaussian_sum_jac(LAM, GA, GB, GC),
                               rtol=1e-12, atol=1e-13)


def test_fourier_paths_agree():
    np.testing.assert_allclose(K.fourier_series_np(LAM, 3.0, FA, FB, 0.0067),
                               K.fourier_series(LAM, 3.0, FA, FB, 0.0067), rtol=1e-13, atol=1e-12)
    np.testing.assert_allclose(K.fourier_series_jac_np(LAM, 3.0, FA, FB, 0.0067),
                               K.fourier_series_jac(LAM, 3.0, FA, FB, 0.0067), rtol=1e-12, atol=1e-9)


@pytest.mark.skipif(not K.NUMBA_AVAILABLE, reason="numba not installed")
def test_numba_kernels_match_numpy_directly():
    np.testing.assert_allclose(K.gaussian_sum_nb(LAM, GA, GB, GC), K.gaussian_sum_np(LAM, GA, GB, GC),
                               rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(K.fourier_series_nb(LAM, 3.0, FA, FB, 0.0067),
                               K.fourier_series_np(LAM, 3.0, FA, FB, 0.0067), rtol=1e-13, atol=1e-12)


def test_gaussian_jacobian_matches_finite_differences():
    p = np.column_stack([GA, GB, GC]).ravel()
    fun = lambda q: K.gaussian_sum_np(LAM, q[0::3].copy(), q[1::3].copy(), q[2::3].copy())
    fd, _ = _fd_jac(fun, p)
    np.testing.assert_allclose(K.gaussian_sum_jac(LAM, GA, GB, GC), fd, rtol=1e-5, atol=1e-7)


def test_fourier_jacobian_matches_finite_differences():
    p = np.concatenate([[3.0], FA, FB, [0.0067]])
    fun = lambda q: K.fourier_series_np(LAM, q[0], q[1:4].copy(), q[4:7].copy(), q[7])
    fd, _ = _fd_jac(fun, p, h=1e-7)
    np.testing.assert_allclose(K.fourier_series_jac(LAM, *p[:1], FA, FB, 0.0067), fd, rtol=1e-5, atol=1e-5)


def test_power_law_jacobian_matches_finite_differences():
    p = np.array([519.0, 550.0, -3.0])
    fun = lambda q: K.power_law(LAM, *q)
    fd, _ = _fd_jac(fun, p)
    np.testing.assert_allclose(K.power_law_jac(LAM, *p), fd, rtol=1e-6, atol=1e-8)
