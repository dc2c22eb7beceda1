# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_pykernels`` for the state layout."""

import numpy as np

from libc.math cimport erfc, exp, expm1, log1p

cdef double SQRT2 = 1.4142135623730951

BACKEND = "cython"


def ar1_log(const double[::1] z, double m, double sigma, double a1, double innov_std):
    cdef Py_ssize_t n = z.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double c0 = m * (1.0 - a1)
    cdef double x
    cdef Py_ssize_t k
    if n == 0:
        return out
    x = m + sigma * z[0]
    o[0] = x
    for k in range(1, n):
        x = c0 + a1 * x + innov_std * z[k]
        o[k] = x
    return out


def run_block(const double[::1] z, const double[::1] u,
              long long[::1] istate, double[::1] fstate,
              const double[::1] fpar, const long long[::1] ipar,
              const long long[::1] sched, const double[::1] profile):
    cdef double m = fpar[0], sigma = fpar[1], a1 = fpar[2], s = fpar[3]
    cdef double log_snr = fpar[4], bits = fpar[5], pt = fpar[6], pt_max = fpar[7]
    cdef double h_out = fpar[8], pe_adapt = fpar[9], tp = fpar[10], tail = fpar[11]
    cdef double const_pe = fpar[12]
    cdef long long scheme = ipar[0], policy = ipar[1], mode = ipar[2]
    cdef long long block = ipar[3], orient = ipar[4], cap = ipar[5]
    cdef Py_ssize_t nprof = profile.shape[0]
    cdef double c0 = m * (1.0 - a1)

    cdef long long slot = istate[0], remaining = istate[1], dof = istate[2]
    cdef long long rpos = istate[3], rni = istate[4], rok = istate[5]
    cdef long long tx = istate[6], erased = istate[7], silent = istate[8]
    cdef long long status = istate[9]
    cdef double x = fstate[0], energy = fstate[1]

    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t k, used = 0
    cdef bint ok, active
    cdef double power, pe, arg, pb

    for k in range(n):
        if slot >= cap:
            status = 2
            break
        if scheme == 1 and rpos == rni:
            if rok < dof:
                dof -= rok
            else:
                dof = 0
            if dof == 0:
                if block < remaining:
                    remaining -= block
                else:
                    remaining = 0
                if remaining == 0:
                    status = 1
                else:
                    dof = block if block < remaining else remaining
            if status == 0:
                rni = sched[dof]
            rpos = 0
            rok = 0
        else:
            ok = False
            if policy == 1:
                power = pt * h_out / exp(x)
                active = power <= pt_max
            else:
                power = pt
                active = True
            if active:
                if mode == 1:
                    pe = const_pe
                elif mode == 2:
                    pe = profile[slot] if slot < nprof else tail
                elif policy == 1:
                    pe = pe_adapt
                else:
                    if orient == 0:
                        arg = (m - (x - log_snr)) / sigma
                    else:
                        arg = (m - (x + log_snr)) / sigma
                    pb = 0.5 * erfc(arg / SQRT2)
                    if pb >= 1.0:
                        pe = 1.0
                    else:
                        pe = -expm1(bits * log1p(-pb))
                tx += 1
                energy += power * tp
                if u[k] < pe:
                    erased += 1
                else:
                    ok = True
            else:
                silent += 1
            if scheme == 0:
                if ok:
                    remaining -= 1
                    if remaining == 0:
                        status = 1
            else:
                if ok:
                    rok += 1
                rpos += 1
        slot += 1
        x = c0 + a1 * x + s * z[k]
        used = k + 1
        if status != 0:
            break

    istate[0] = slot
    istate[1] = remaining
    istate[2] = dof
    istate[3] = rpos
    istate[4] = rni
    istate[5] = rok
    istate[6] = tx
    istate[7] = erased
    istate[8] = silent
    istate[9] = status
    fstate[0] = x
    fstate[1] = energy
    return used
