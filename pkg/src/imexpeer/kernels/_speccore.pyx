# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled spectral-radius kernels for stability scans.

Same interface as ``_ref``: rho_pairs and stable_mask.  Each (z0, z1) pair
costs one LAPACK zgesv solve of the s x s system; the spectral radius then
comes from the characteristic polynomial (Newton identities on power traces)
solved with Durand-Kerner iteration, which is several times faster than a
general zgeev call at these sizes.  zgeev remains as a fallback whenever the
root iteration fails to converge.  stable_mask walks the z1 samples per z0
point and bails out at the first violation, which makes scans over
mostly-unstable grids cheap.
"""

import numpy as np

from libc.math cimport INFINITY, atan2, cos, hypot, sin, sqrt
from scipy.linalg.cython_lapack cimport zgeev, zgesv

cdef enum:
    MAXS = 8
    MAXS2 = 64
    LWORK = 1024

cdef double DK_TOL = 1e-13
cdef int DK_MAXIT = 100


cdef double _rho_zgeev(double complex* X, int s, double complex* work,
                       double* rwork) noexcept nogil:
    cdef int n = s, info = 0, lwork = LWORK, i
    cdef double complex w[MAXS]
    cdef double complex vdum[1]
    cdef char nojob = b'N'
    cdef double rho = 0.0, m
    zgeev(&nojob, &nojob, &n, X, &n, w, vdum, &n, vdum, &n, work, &lwork,
          rwork, &info)
    if info != 0:
        return INFINITY
    for i in range(s):
        m = abs(w[i])
        if m > rho:
            rho = m
    return rho


cdef int _char_poly(double complex* X, int s, double complex* coef) noexcept nogil:
    """Monic characteristic polynomial: lambda^s + coef[s-1]*lambda^{s-1} + ... + coef[0].

    Newton identities on the power traces t_k = tr(X^k).  Returns 0, or -1 on
    non-finite input.
    """
    cdef double complex X2[MAXS2]
    cdef double complex X4[MAXS2]
    cdef double complex X6[MAXS2]
    cdef double complex t[MAXS + 1]
    cdef double complex e[MAXS + 1]
    cdef double complex acc
    cdef int i, j, k, n = s
    for i in range(n * n):
        if not (X[i] == X[i]) or abs(X[i].real) > 1e300 or abs(X[i].imag) > 1e300:
            return -1
    # power traces via X^2, X^4 = (X^2)^2, X^6 = X^4 X^2
    t[1] = 0
    for i in range(n):
        t[1] = t[1] + X[i * n + i]
    _matmul(X, X, X2, n)
    t[2] = _trace(X2, n)
    if n >= 3:
        t[3] = _trace_prod(X2, X, n)
    if n >= 4:
        _matmul(X2, X2, X4, n)
        t[4] = _trace(X4, n)
    if n >= 5:
        t[5] = _trace_prod(X4, X, n)
    if n >= 6:
        t[6] = _trace_prod(X4, X2, n)
    if n >= 7:
        _matmul(X4, X2, X6, n)
        t[7] = _trace_prod(X6, X, n)
    if n >= 8:
        t[8] = _trace_prod(X6, X2, n)
    e[0] = 1
    for k in range(1, n + 1):
        acc = 0
        for i in range(1, k + 1):
            if i % 2 == 1:
                acc = acc + e[k - i] * t[i]
            else:
                acc = acc - e[k - i] * t[i]
        e[k] = acc / k
    for k in range(1, n + 1):
        if k % 2 == 1:
            coef[n - k] = -e[k]
        else:
            coef[n - k] = e[k]
    return 0


cdef void _matmul(double complex* A, double complex* B, double complex* C,
                  int n) noexcept nogil:
    cdef int i, j, k
    cdef double complex acc
    for i in range(n):
        for j in range(n):
            acc = 0
            for k in range(n):
                acc = acc + A[i * n + k] * B[k * n + j]
            C[i * n + j] = acc


cdef double complex _trace(double complex* A, int n) noexcept nogil:
    cdef int i
    cdef double complex acc = 0
    for i in range(n):
        acc = acc + A[i * n + i]
    return acc


cdef double complex _trace_prod(double complex* A, double complex* B,
                                int n) noexcept nogil:
    # tr(A B)
    cdef int i, j
    cdef double complex acc = 0
    for i in range(n):
        for j in range(n):
            acc = acc + A[i * n + j] * B[j * n + i]
    return acc


cdef double _rho_roots(double complex* coef, int n) noexcept nogil:
    """Max root modulus of the monic polynomial via Durand-Kerner; -1 on failure."""
    cdef double complex r[MAXS]
    cdef double complex pv, den, delta
    cdef double rad = 0.0, m, change, scale, rho
    cdef int i, j, it
    if n == 1:
        return abs(coef[0])
    if n == 2:
        # stable quadratic formula
        pv = _csqrt(coef[1] * coef[1] - 4.0 * coef[0])
        if (coef[1].conjugate() * pv).real > 0:
            pv = -pv
        den = (-coef[1] + pv) / 2.0
        rho = abs(den)
        if abs(den) > 1e-300:
            m = abs(coef[0] / den)
        else:
            m = abs(-coef[1] - den)
        return rho if rho > m else m
    for i in range(n):
        m = abs(coef[i])
        if m > rad:
            rad = m
    rad = 1.0 + rad
    for i in range(n):
        r[i] = rad * _unit(2.0 * 3.141592653589793 * i / n + 0.4)
    for it in range(DK_MAXIT):
        change = 0.0
        scale = 0.0
        for i in range(n):
            pv = 1.0
            for j in range(n - 1, -1, -1):
                pv = pv * r[i] + coef[j]
            den = 1.0
            for j in range(n):
                if j != i:
                    den = den * (r[i] - r[j])
            if abs(den) < 1e-290:
                r[i] = r[i] * 1.000000001 + 1e-12
                change = 1.0
                continue
            delta = pv / den
            r[i] = r[i] - delta
            change += abs(delta)
            scale += abs(r[i])
        if change <= DK_TOL * (1.0 + scale):
            rho = 0.0
            for i in range(n):
                m = abs(r[i])
                if m > rho:
                    rho = m
            return rho
    return -1.0


cdef double complex _unit(double phi) noexcept nogil:
    cdef double complex j = 1j
    return cos(phi) + j * sin(phi)


cdef double complex _csqrt(double complex w) noexcept nogil:
    cdef double r = hypot(w.real, w.imag)
    cdef double half = 0.5 * atan2(w.imag, w.real)
    return sqrt(r) * _unit(half)


cdef double _rho_one(double complex* P, double complex* Q, double complex* Qh,
                     double complex* R, double complex* Rh, int s,
                     double complex z0, double complex z1,
                     double complex* A, double complex* B,
                     double complex* work, double* rwork, int* ipiv) noexcept nogil:
    """rho(M(z0,z1)); +inf on singular systems or LAPACK failure."""
    cdef int i, j, n = s, nrhs = s, info = 0
    cdef double complex coef[MAXS]
    cdef double rho
    # row-major fill; LAPACK sees the transpose, whose eigenvalues agree
    for i in range(s):
        for j in range(s):
            A[i * s + j] = -z0 * Rh[i * s + j] - z1 * R[i * s + j]
            B[i * s + j] = P[i * s + j] + z0 * Qh[i * s + j] + z1 * Q[i * s + j]
        A[i * s + i] = A[i * s + i] + 1.0
    zgesv(&n, &nrhs, A, &n, ipiv, B, &n, &info)
    if info != 0:
        return INFINITY
    if _char_poly(B, s, coef) != 0:
        return INFINITY
    rho = _rho_roots(coef, s)
    if rho >= 0.0:
        return rho
    return _rho_zgeev(B, s, work, rwork)


def rho_pairs(P, Q, Qhat, R, Rhat, z0s, z1s):
    """Spectral radius of M(z0_k, z1_k) for paired sample arrays."""
    cdef double complex[::1] Pf = np.ascontiguousarray(P, complex).ravel()
    cdef double complex[::1] Qf = np.ascontiguousarray(Q, complex).ravel()
    cdef double complex[::1] Qhf = np.ascontiguousarray(Qhat, complex).ravel()
    cdef double complex[::1] Rf = np.ascontiguousarray(R, complex).ravel()
    cdef double complex[::1] Rhf = np.ascontiguousarray(Rhat, complex).ravel()
    cdef double complex[::1] a0 = np.ascontiguousarray(z0s, complex).ravel()
    cdef double complex[::1] a1 = np.ascontiguousarray(z1s, complex).ravel()
    cdef int s = <int> np.asarray(P).shape[0]
    if s > MAXS:
        raise ValueError(f"stage count {s} exceeds compiled limit {MAXS}")
    if a0.shape[0] != a1.shape[0]:
        raise ValueError("z0s and z1s must have equal length")
    out = np.empty(a0.shape[0])
    cdef double[::1] o = out
    cdef double complex A[MAXS2]
    cdef double complex B[MAXS2]
    cdef double complex work[LWORK]
    cdef double rwork[2 * MAXS]
    cdef int ipiv[MAXS]
    cdef Py_ssize_t k
    with nogil:
        for k in range(a0.shape[0]):
            o[k] = _rho_one(&Pf[0], &Qf[0], &Qhf[0], &Rf[0], &Rhf[0], s,
                            a0[k], a1[k], A, B, work, rwork, ipiv)
    return out


def stable_mask(P, Q, Qhat, R, Rhat, z0s, z1s, double bound):
    """uint8 mask over z0s: 1 where rho(M(z0, z1)) <= bound for every z1."""
    cdef double complex[::1] Pf = np.ascontiguousarray(P, complex).ravel()
    cdef double complex[::1] Qf = np.ascontiguousarray(Q, complex).ravel()
    cdef double complex[::1] Qhf = np.ascontiguousarray(Qhat, complex).ravel()
    cdef double complex[::1] Rf = np.ascontiguousarray(R, complex).ravel()
    cdef double complex[::1] Rhf = np.ascontiguousarray(Rhat, complex).ravel()
    cdef double complex[::1] a0 = np.ascontiguousarray(z0s, complex).ravel()
    cdef double complex[::1] a1 = np.ascontiguousarray(z1s, complex).ravel()
    cdef int s = <int> np.asarray(P).shape[0]
    if s > MAXS:
        raise ValueError(f"stage count {s} exceeds compiled limit {MAXS}")
    out = np.zeros(a0.shape[0], dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef double complex A[MAXS2]
    cdef double complex B[MAXS2]
    cdef double complex work[LWORK]
    cdef double rwork[2 * MAXS]
    cdef int ipiv[MAXS]
    cdef Py_ssize_t k, j
    cdef bint ok
    with nogil:
        for k in range(a0.shape[0]):
            ok = True
            for j in range(a1.shape[0]):
                if _rho_one(&Pf[0], &Qf[0], &Qhf[0], &Rf[0], &Rhf[0], s,
                            a0[k], a1[j], A, B, work, rwork, ipiv) > bound:
                    ok = False
                    break
            o[k] = 1 if ok else 0
    return out
