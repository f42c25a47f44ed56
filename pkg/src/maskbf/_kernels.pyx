# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for batched small Hermitian eigenproblems.

Mirrors :mod:`maskbf._fallback` operation for operation; the two must agree
to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, hypot, NAN

cnp.import_array()

cdef int MAXN = 16

cdef int MAX_SWEEPS = 50
cdef double OFF_TOL = 1e-14
cdef double PIVOT_TOL = 1e-14


cdef inline double cabs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef int _jacobi(double complex[:, ::1] a, double complex[:, ::1] v, int n) nogil:
    """Cyclic Jacobi on Hermitian ``a`` in place; accumulates rotations in ``v``."""
    cdef int sweep, p, q, k
    cdef double off, fro, r, tau, t, c, s, app, aqq
    cdef double complex e, akp, akq, gqp, gqq

    for p in range(n):
        for q in range(n):
            v[p, q] = 1.0 if p == q else 0.0

    fro = 0.0
    for p in range(n):
        for q in range(n):
            fro += cabs2(a[p, q])
    fro = sqrt(fro)
    if fro == 0.0:
        return 0

    for sweep in range(MAX_SWEEPS):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += cabs2(a[p, q])
        if sqrt(off) <= OFF_TOL * fro:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                r = hypot(a[p, q].real, a[p, q].imag)
                if r == 0.0:
                    continue
                e = a[p, q] / r
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                # G = diag(1, conj(e)) @ [[c, s], [-s, c]] on (p, q)
                gqp = -s * e.conjugate()
                gqq = c * e.conjugate()
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = akp * c + akq * gqp
                    a[k, q] = akp * s + akq * gqq
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp + gqp.conjugate() * akq
                    a[q, k] = s * akp + gqq.conjugate() * akq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = akp * c + akq * gqp
                    v[k, q] = akp * s + akq * gqq
    return MAX_SWEEPS


cdef void _sort_ascending(double[::1] w, double complex[:, ::1] v, int n) nogil:
    cdef int i, j, k, best
    cdef double tw
    cdef double complex tv
    for i in range(n - 1):
        best = i
        for j in range(i + 1, n):
            if w[j] < w[best]:
                best = j
        if best != i:
            tw = w[i]
            w[i] = w[best]
            w[best] = tw
            for k in range(n):
                tv = v[k, i]
                v[k, i] = v[k, best]
                v[k, best] = tv


def heev_batch(cnp.ndarray a_in):
    """Eigen-decompose a batch of Hermitian matrices, eigenvalues ascending."""
    cdef double complex[:, :, ::1] a = np.array(a_in, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t nb = a.shape[0]
    cdef int n = a.shape[1]
    if n > MAXN:
        raise ValueError("matrix dimension exceeds kernel limit")
    out_w = np.empty((nb, n), dtype=np.float64)
    out_v = np.empty((nb, n, n), dtype=np.complex128)
    cdef double[:, ::1] w = out_w
    cdef double complex[:, :, ::1] v = out_v
    cdef Py_ssize_t b
    cdef int i, j
    with nogil:
        for b in range(nb):
            # symmetrize before rotating
            for i in range(n):
                a[b, i, i] = a[b, i, i].real
                for j in range(i + 1, n):
                    a[b, i, j] = 0.5 * (a[b, i, j] + a[b, j, i].conjugate())
                    a[b, j, i] = a[b, i, j].conjugate()
            _jacobi(a[b], v[b], n)
            for i in range(n):
                w[b, i] = a[b, i, i].real
            _sort_ascending(w[b], v[b], n)
    return out_w, out_v


cdef int _cholesky_inv(double complex[:, ::1] bmat, double complex[:, ::1] linv,
                       double complex[:, ::1] lmat, int n) nogil:
    """Lower Cholesky factor of ``bmat`` and its inverse; nonzero on failure."""
    cdef int i, j, k
    cdef double d, dmax
    cdef double complex acc
    dmax = 0.0
    for i in range(n):
        if bmat[i, i].real > dmax:
            dmax = bmat[i, i].real
    if not dmax > 0.0:
        return 1
    for i in range(n):
        for j in range(n):
            lmat[i, j] = 0.0
            linv[i, j] = 0.0
    for j in range(n):
        d = bmat[j, j].real
        for k in range(j):
            d -= cabs2(lmat[j, k])
        if not d > PIVOT_TOL * dmax:
            return 1
        lmat[j, j] = sqrt(d)
        for i in range(j + 1, n):
            acc = bmat[i, j]
            for k in range(j):
                acc = acc - lmat[i, k] * lmat[j, k].conjugate()
            lmat[i, j] = acc / lmat[j, j].real
    # forward substitution for L^{-1}
    for j in range(n):
        linv[j, j] = 1.0 / lmat[j, j].real
        for i in range(j + 1, n):
            acc = 0.0
            for k in range(j, i):
                acc = acc + lmat[i, k] * linv[k, j]
            linv[i, j] = -acc / lmat[i, i].real
    return 0


def gev_batch(cnp.ndarray a_in, cnp.ndarray b_in):
    """Solve ``A v = lam B v`` for a batch of Hermitian ``A`` and Hermitian PD ``B``.

    Returns ``(lam, V, status)``: eigenvalues ascending, eigenvectors as the
    columns of ``V`` normalized so that ``V^H B V = I``, and a per-item status
    (0 ok, 1 ``B`` not positive definite; such items are filled with NaN).
    """
    cdef double complex[:, :, ::1] a = np.ascontiguousarray(a_in, dtype=np.complex128)
    cdef double complex[:, :, ::1] bm = np.ascontiguousarray(b_in, dtype=np.complex128)
    cdef Py_ssize_t nb = a.shape[0]
    cdef int n = a.shape[1]
    if n > MAXN:
        raise ValueError("matrix dimension exceeds kernel limit")
    out_w = np.empty((nb, n), dtype=np.float64)
    out_v = np.empty((nb, n, n), dtype=np.complex128)
    out_s = np.zeros(nb, dtype=np.int8)
    cdef double[:, ::1] w = out_w
    cdef double complex[:, :, ::1] v = out_v
    cdef signed char[::1] status = out_s
    cdef double complex[:, ::1] lmat = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] linv = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] c = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] u = np.empty((n, n), dtype=np.complex128)
    cdef Py_ssize_t b
    cdef int i, j, k
    cdef double complex acc
    with nogil:
        for b in range(nb):
            if _cholesky_inv(bm[b], linv, lmat, n) != 0:
                status[b] = 1
                for i in range(n):
                    w[b, i] = NAN
                    for j in range(n):
                        v[b, i, j] = NAN
                continue
            # tmp = Linv A
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(i + 1):
                        acc = acc + linv[i, k] * a[b, k, j]
                    tmp[i, j] = acc
            # C = tmp Linv^H
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(j + 1):
                        acc = acc + tmp[i, k] * linv[j, k].conjugate()
                    c[i, j] = acc
            for i in range(n):
                c[i, i] = c[i, i].real
                for j in range(i + 1, n):
                    c[i, j] = 0.5 * (c[i, j] + c[j, i].conjugate())
                    c[j, i] = c[i, j].conjugate()
            _jacobi(c, u, n)
            for i in range(n):
                w[b, i] = c[i, i].real
            _sort_ascending(w[b], u, n)
            # V = Linv^H U
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(i, n):
                        acc = acc + linv[k, i].conjugate() * u[k, j]
                    v[b, i, j] = acc
    return out_w, out_v, out_s


def weighted_cov(cnp.ndarray x_in, cnp.ndarray m_in):
    """Mask-weighted covariance ``mean_t m[f, t] x[f, t] x[f, t]^H`` per bin.

    ``x`` has shape (F, T, N), ``m`` shape (F, T).
    """
    cdef double complex[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.complex128)
    cdef double[:, ::1] m = np.ascontiguousarray(m_in, dtype=np.float64)
    cdef Py_ssize_t nf = x.shape[0], nt = x.shape[1]
    cdef int n = x.shape[2]
    out = np.zeros((nf, n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] r = out
    cdef Py_ssize_t f, t
    cdef int i, j
    cdef double mt, inv_t
    cdef double complex xi
    if nt == 0:
        return out
    inv_t = 1.0 / nt
    with nogil:
        for f in range(nf):
            for t in range(nt):
                mt = m[f, t]
                if mt == 0.0:
                    continue
                for i in range(n):
                    xi = mt * x[f, t, i]
                    for j in range(i, n):
                        r[f, i, j] = r[f, i, j] + xi * x[f, t, j].conjugate()
            for i in range(n):
                r[f, i, i] = r[f, i, i].real * inv_t
                for j in range(i + 1, n):
                    r[f, i, j] = r[f, i, j] * inv_t
                    r[f, j, i] = r[f, i, j].conjugate()
    return out
