# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels.

Replays the numpy backend's draw schedule request-for-request against the
same Philox streams (see pykernels): the raw uniform / exponential / normal
blocks are produced by the identical C fill routines, so the streams match
bit for bit; only the downstream float arithmetic may differ in final ulps.
"""

from libc.math cimport (atan, cos, exp, fmax, fmin, sin, sqrt, tan, tanh,
                        pow as c_pow, M_PI)

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential_fill, random_standard_normal_fill,
    random_standard_uniform_fill)

from ..streams import path_bitgen, ROLE_BASE, ROLE_JUMPS

cnp.import_array()

cdef int KIND_BROWNIAN = 0
cdef int KIND_STABLE = 1
cdef int KIND_SDE = 2
cdef int DRIFT_LINEAR = 0
cdef int DRIFT_TANH = 1
cdef int TAIL_TRUNCATED = 2
cdef int H_NONE = 0
cdef int H_BELOW = 1
cdef int H_INTERVAL = 2
cdef int H_SCALED_BELOW = 3

cdef const char *CAPSULE_NAME = "BitGenerator"


cdef bitgen_t *_bitgen_ptr(object bit_generator) except NULL:
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, CAPSULE_NAME):
        raise ValueError("invalid BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, CAPSULE_NAME)


# ---------------------------------------------------------------------------
# jump-correction stream cursor (mirrors pykernels._Cursor buffering)
# ---------------------------------------------------------------------------

cdef class _JumpCursor:
    cdef object keepalive            # the BitGenerator owning the state
    cdef bitgen_t *rng
    cdef double buf[1024]
    cdef Py_ssize_t i, size

    def __cinit__(self, object bit_generator):
        self.keepalive = bit_generator
        self.rng = _bitgen_ptr(bit_generator)
        random_standard_uniform_fill(self.rng, 256, self.buf)
        self.i = 0
        self.size = 256

    cdef inline double take(self) noexcept nogil:
        cdef double v
        if self.i >= self.size:
            random_standard_uniform_fill(self.rng, 1024, self.buf)
            self.i = 0
            self.size = 1024
        v = self.buf[self.i]
        self.i += 1
        return v


cdef void _sde_jump_corrections(double[:] mp, Py_ssize_t n_sub, double dsub,
                                _JumpCursor cur, long[::1] counts,
                                double[::1] out) noexcept nogil:
    # schedule contract: per part, one Knuth-Poisson count sweep over all
    # substeps, then the rejection-sampled sizes in substep order
    cdef double alpha = mp[0]
    cdef int tail_kind = <int> mp[8]
    cdef double lam_t = mp[9]
    cdef double inv_alpha = 1.0 / alpha
    cdef double lam[4]
    cdef double side[4]
    cdef double sgn[4]
    cdef double c_side[4]
    cdef Py_ssize_t part, k
    cdef long j
    cdef double thresh, p, u1, u2, v, ratio
    lam[0] = mp[12]; side[0] = 1.0;  sgn[0] = -1.0; c_side[0] = mp[10]
    lam[1] = mp[13]; side[1] = -1.0; sgn[1] = -1.0; c_side[1] = mp[11]
    lam[2] = mp[14]; side[2] = 1.0;  sgn[2] = 1.0;  c_side[2] = mp[10]
    lam[3] = mp[15]; side[3] = -1.0; sgn[3] = 1.0;  c_side[3] = mp[11]
    for part in range(4):
        if lam[part] <= 0.0:
            continue
        thresh = exp(-lam[part] * dsub)
        for k in range(n_sub):
            counts[k] = 0
            p = 1.0
            while True:
                p *= cur.take()
                if p <= thresh:
                    break
                counts[k] += 1
        for k in range(n_sub):
            for j in range(counts[k]):
                while True:
                    u1 = cur.take()
                    if u1 < 1e-300:
                        u1 = 1e-300
                    v = c_pow(u1, -inv_alpha)
                    u2 = cur.take()
                    if tail_kind == TAIL_TRUNCATED:
                        break
                    if sgn[part] < 0.0:
                        ratio = fmax(c_side[part] - exp(-lam_t * (v - 1.0)),
                                     0.0) / c_side[part]
                    else:
                        ratio = fmax(exp(-lam_t * (v - 1.0)) - c_side[part],
                                     0.0) / (1.0 - c_side[part])
                    if u2 <= ratio:
                        break
                out[k] += sgn[part] * side[part] * v


cdef inline double _drift_scalar(double[:] mp, double x) noexcept nogil:
    cdef int kind = <int> mp[4]
    cdef double v
    if kind == DRIFT_LINEAR:
        v = mp[5] * x + mp[6]
        return fmin(fmax(v, -mp[7]), mp[7])
    return mp[5] * tanh(mp[6] * x)        # DRIFT_TANH; custom never compiles


cdef void _cms_block(double alpha, double beta, double[::1] u, double[::1] w,
                     double sigma, double shift, double[::1] out) noexcept nogil:
    """out[k] = sigma * CMS(u[k], w[k]) + shift, the unit S1 map."""
    cdef Py_ssize_t k, n = u.shape[0]
    cdef double phi, zeta, theta0, s
    if alpha == 2.0:
        for k in range(n):
            phi = M_PI * (u[k] - 0.5)
            out[k] = sigma * (2.0 * sqrt(w[k]) * sin(phi)) + shift
        return
    if alpha == 1.0:
        for k in range(n):
            phi = M_PI * (u[k] - 0.5)
            out[k] = sigma * tan(phi) + shift
        return
    if beta == 0.0:
        for k in range(n):
            phi = M_PI * (u[k] - 0.5)
            out[k] = sigma * (sin(alpha * phi)
                              / c_pow(cos(phi), 1.0 / alpha)
                              * c_pow(cos((1.0 - alpha) * phi) / w[k],
                                      (1.0 - alpha) / alpha)) + shift
        return
    zeta = beta * tan(M_PI * alpha / 2.0)
    theta0 = atan(zeta) / alpha
    s = c_pow(1.0 + zeta * zeta, 1.0 / (2.0 * alpha))
    for k in range(n):
        phi = M_PI * (u[k] - 0.5)
        out[k] = sigma * (s * sin(alpha * (phi + theta0))
                          / c_pow(cos(phi), 1.0 / alpha)
                          * c_pow(cos(phi - alpha * (phi + theta0)) / w[k],
                                  (1.0 - alpha) / alpha)) + shift


cdef _raw_states(object plan, double x0, double t_final, Py_ssize_t n,
                 long seed, long idx):
    cdef double[:] mp = plan.mp
    cdef int kind = plan.kind
    cdef object bg = path_bitgen(seed, idx, ROLE_BASE)
    cdef bitgen_t *rng = _bitgen_ptr(bg)
    cdef cnp.ndarray[double, ndim=1] states = np.empty(n + 1)
    cdef double[::1] sv = states
    cdef double[::1] inc, u, w, noise
    cdef long[::1] counts
    cdef Py_ssize_t k, n_sub
    cdef long r
    cdef double dt, dsub, sigma, x, acc
    cdef _JumpCursor cur

    if kind == KIND_BROWNIAN:
        dt = t_final / n
        inc = np.empty(n)
        with nogil:
            random_standard_normal_fill(rng, n, &inc[0])
            sigma = sqrt(2.0 * mp[0] * dt)
            acc = 0.0
            sv[0] = x0
            for k in range(n):
                acc += sigma * inc[k]
                sv[k + 1] = acc + x0
        return states

    if kind == KIND_STABLE:
        dt = t_final / n
        u = np.empty(n)
        w = np.empty(n)
        inc = np.empty(n)
        with nogil:
            random_standard_uniform_fill(rng, n, &u[0])
            random_standard_exponential_fill(rng, n, &w[0])
            sigma = c_pow(mp[2] * dt, 1.0 / mp[0])
            _cms_block(mp[0], mp[1], u, w, sigma, mp[3] * dt, inc)
            acc = 0.0
            sv[0] = x0
            for k in range(n):
                acc += inc[k]
                sv[k + 1] = acc + x0
        return states

    if kind != KIND_SDE:
        raise ValueError("unknown model kind %r" % kind)

    r = <long> mp[3]
    n_sub = n * r
    dsub = t_final / n_sub
    u = np.empty(n_sub)
    w = np.empty(n_sub)
    noise = np.empty(n_sub)
    with nogil:
        random_standard_uniform_fill(rng, n_sub, &u[0])
        random_standard_exponential_fill(rng, n_sub, &w[0])
        sigma = c_pow(mp[2] * dsub, 1.0 / mp[0])
        _cms_block(mp[0], mp[1], u, w, sigma, 0.0, noise)
    if mp[12] != 0.0 or mp[13] != 0.0 or mp[14] != 0.0 or mp[15] != 0.0:
        cur = _JumpCursor(path_bitgen(seed, idx, ROLE_JUMPS))
        counts = np.zeros(n_sub, dtype=np.dtype("long"))
        with nogil:
            _sde_jump_corrections(mp, n_sub, dsub, cur, counts, noise)
    with nogil:
        x = x0
        sv[0] = x0
        for k in range(n_sub):
            x = x + _drift_scalar(mp, x) * dsub + noise[k]
            if (k + 1) % r == 0:
                sv[(k + 1) // r] = x
    return states


def simulate_states(plan, double x0, double t_final, Py_ssize_t n,
                    long seed, long path_index):
    """States of path `path_index` on the n-step grid."""
    return _raw_states(plan, x0, t_final, n, seed, path_index)


def functional_batch(plan, double x0, double t_final, Py_ssize_t n_ref,
                     strides, int h_kind, double h0, double h1,
                     long seed, long lo, long hi):
    """Coupled Riemann functionals for paths [lo, hi); see pykernels."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sarr = \
        np.asarray(strides, dtype=np.int64)
    cdef long[::1] sv = sarr.view(np.dtype("long"))
    cdef Py_ssize_t m = hi - lo, n_s = sarr.shape[0]
    cdef cnp.ndarray[double, ndim=1] i_ref = np.empty(m)
    cdef cnp.ndarray[double, ndim=2] i_coarse = np.empty((m, n_s))
    cdef cnp.ndarray[double, ndim=1] x_t = np.empty(m)
    cdef double[::1] rv = i_ref
    cdef double[:, ::1] cv = i_coarse
    cdef double[::1] xv = x_t
    cdef double coef = h1 if h_kind == H_SCALED_BELOW else 1.0
    cdef double dt_ref = t_final / n_ref
    cdef Py_ssize_t j, k, s_idx
    cdef long stride, cnt, cnt_ref, n_c
    cdef double[::1] states
    cdef unsigned char[::1] hv_buf = np.empty(n_ref + 1, dtype=np.uint8)
    for j in range(m):
        states = _raw_states(plan, x0, t_final, n_ref, seed, lo + j)
        xv[j] = states[n_ref]
        if h_kind == H_NONE:
            rv[j] = 0.0
            for s_idx in range(n_s):
                cv[j, s_idx] = 0.0
            continue
        with nogil:
            if h_kind == H_INTERVAL:
                for k in range(n_ref + 1):
                    hv_buf[k] = states[k] >= h0 and states[k] <= h1
            else:
                for k in range(n_ref + 1):
                    hv_buf[k] = states[k] <= h0
            cnt_ref = 0
            for k in range(n_ref):
                cnt_ref += hv_buf[k]
            rv[j] = coef * dt_ref * <double> cnt_ref
            for s_idx in range(n_s):
                stride = sv[s_idx]
                n_c = n_ref // stride
                cnt = 0
                k = 0
                while k < n_ref:
                    cnt += hv_buf[k]
                    k += stride
                cv[j, s_idx] = coef * (t_final / n_c) * <double> cnt
    return i_ref, i_coarse, x_t
