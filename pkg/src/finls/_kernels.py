"""Pointwise hot loops of the solver.

Two interchangeable backends are provided: numba ``@njit`` loops and plain
numpy expressions. The numba path is active when numba imports cleanly and the
environment variable ``FINLS_DISABLE_NUMBA`` is unset (or ``0``); both backend
objects stay importable so they can be benchmarked side by side. Both paths
evaluate the same formulas; numba reductions run sequentially, numpy uses its
pairwise summation, so the two agree to rounding and each is reproducible run
to run.

The FFTs themselves are not here: they are delegated to ``scipy.fft``.
"""

import os

import numpy as np

__all__ = [
    "BACKEND",
    "nonlinear_phase",
    "weighted_abs_power_sum",
    "abs_max",
    "power_source",
    "numpy_backend",
    "numba_backend",
]


def _numba_requested():
    flag = os.environ.get("FINLS_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


# ---------------------------------------------------------------- numpy path
#
# Moduli enter only through |u|^2 = re^2 + im^2 raised to half the exponent,
# which avoids hypot and lets the common cases p = 3 (exponent 2, 4) reduce
# to multiplications in both backends.


def _modulus_power(m2, half):
    if half == 1.0:
        return m2
    if half == 2.0:
        return m2 * m2
    return m2**half


def _np_nonlinear_phase(u, w, coef, expo):
    m2 = u.real * u.real + u.imag * u.imag
    theta = coef * w * _modulus_power(m2, 0.5 * expo)
    return u * (np.cos(theta) + 1j * np.sin(theta))


def _np_weighted_abs_power_sum(u, w, q):
    m2 = u.real * u.real + u.imag * u.imag if np.iscomplexobj(u) else u * u
    return float(np.sum(w * _modulus_power(m2, 0.5 * q)))


def _np_abs_max(u):
    if not u.size:
        return 0.0
    m2 = u.real * u.real + u.imag * u.imag if np.iscomplexobj(u) else u * u
    return float(np.sqrt(np.max(m2)))


def _np_power_source(q, w, p):
    if p == 3.0 and not np.iscomplexobj(q):
        return w * (q * q) * q
    return w * np.abs(q) ** (p - 1.0) * q


class _Backend:
    def __init__(self, name, nonlinear_phase, weighted_abs_power_sum, abs_max, power_source):
        self.name = name
        self.nonlinear_phase = nonlinear_phase
        self.weighted_abs_power_sum = weighted_abs_power_sum
        self.abs_max = abs_max
        self.power_source = power_source


numpy_backend = _Backend(
    "numpy",
    _np_nonlinear_phase,
    _np_weighted_abs_power_sum,
    _np_abs_max,
    _np_power_source,
)

numba_backend = None

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

if njit is not None:

    @njit(cache=True, inline="always")
    def _nb_modpow(m2, half):
        if half == 1.0:
            return m2
        if half == 2.0:
            return m2 * m2
        return m2**half

    @njit(cache=True)
    def _nb_nonlinear_phase(u, w, coef, expo):
        uf = u.ravel()
        wf = w.ravel()
        out = np.empty_like(uf)
        half = 0.5 * expo
        for i in range(uf.size):
            re = uf[i].real
            im = uf[i].imag
            theta = coef * wf[i] * _nb_modpow(re * re + im * im, half)
            c = np.cos(theta)
            s = np.sin(theta)
            out[i] = complex(re * c - im * s, re * s + im * c)
        return out.reshape(u.shape)

    @njit(cache=True)
    def _nb_weighted_sum_c(u, w, q):
        uf = u.ravel()
        wf = w.ravel()
        half = 0.5 * q
        acc = 0.0
        for i in range(uf.size):
            re = uf[i].real
            im = uf[i].imag
            acc += wf[i] * _nb_modpow(re * re + im * im, half)
        return acc

    @njit(cache=True)
    def _nb_weighted_sum_r(u, w, q):
        uf = u.ravel()
        wf = w.ravel()
        half = 0.5 * q
        acc = 0.0
        for i in range(uf.size):
            acc += wf[i] * _nb_modpow(uf[i] * uf[i], half)
        return acc

    @njit(cache=True)
    def _nb_abs_max_c(u):
        uf = u.ravel()
        m = 0.0
        for i in range(uf.size):
            a = uf[i].real * uf[i].real + uf[i].imag * uf[i].imag
            if a > m:
                m = a
            elif a != a:
                return np.nan  # propagate NaN like np.max
        return np.sqrt(m)

    @njit(cache=True)
    def _nb_abs_max_r(u):
        uf = u.ravel()
        m = 0.0
        for i in range(uf.size):
            a = uf[i] * uf[i]
            if a > m:
                m = a
            elif a != a:
                return np.nan  # propagate NaN like np.max
        return np.sqrt(m)

    @njit(cache=True)
    def _nb_power_source(q, w, p):
        qf = q.ravel()
        wf = w.ravel()
        out = np.empty_like(qf)
        half = 0.5 * (p - 1.0)
        for i in range(qf.size):
            x = qf[i]
            out[i] = wf[i] * _nb_modpow(x * x, half) * x
        return out.reshape(q.shape)

    _c = np.ascontiguousarray

    def _wrap_sum(u, w, q):
        u = _c(u)
        if np.iscomplexobj(u):
            return float(_nb_weighted_sum_c(u, _c(w), float(q)))
        return float(_nb_weighted_sum_r(u.astype(float, copy=False), _c(w), float(q)))

    def _wrap_phase(u, w, coef, expo):
        return _nb_nonlinear_phase(_c(u, dtype=complex), _c(w), float(coef), float(expo))

    def _wrap_source(q, w, p):
        if np.iscomplexobj(q):
            return _np_power_source(q, w, p)
        return _nb_power_source(_c(q, dtype=float), _c(w), float(p))

    def _wrap_max(u):
        if not u.size:
            return 0.0
        u = _c(u)
        if np.iscomplexobj(u):
            return float(_nb_abs_max_c(u))
        return float(_nb_abs_max_r(u.astype(float, copy=False)))

    numba_backend = _Backend("numba", _wrap_phase, _wrap_sum, _wrap_max, _wrap_source)

_active = numba_backend if (numba_backend is not None and _numba_requested()) else numpy_backend
BACKEND = _active.name


def nonlinear_phase(u, w, coef, expo):
    """Return ``u * exp(i * coef * w * |u|**expo)`` (modulus preserved pointwise)."""
    return _active.nonlinear_phase(u, w, coef, expo)


def weighted_abs_power_sum(u, w, q):
    """Return ``sum(w * |u|**q)`` as a Python float."""
    return _active.weighted_abs_power_sum(u, w, q)


def abs_max(u):
    return _active.abs_max(u)


def power_source(q, w, p):
    """Return ``w * |q|**(p-1) * q``."""
    return _active.power_source(q, w, p)
