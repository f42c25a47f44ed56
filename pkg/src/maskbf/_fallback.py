"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Every routine is vectorized over the leading batch axis; the Jacobi sweeps run
in lockstep across the batch, with already-converged items receiving identity
rotations.
"""
import numpy as np

MAX_SWEEPS = 50
OFF_TOL = 1e-14
PIVOT_TOL = 1e-14


def _symmetrize(a):
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    idx = np.arange(a.shape[-1])
    a[..., idx, idx] = a[..., idx, idx].real
    return a


def _jacobi(a):
    """Cyclic Jacobi on a batch of Hermitian matrices; ``a`` is overwritten."""
    nb, n, _ = a.shape
    v = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape).copy()
    fro = np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2)))
    offmask = ~np.eye(n, dtype=bool)
    active = fro > 0
    for _ in range(MAX_SWEEPS):
        off = np.sqrt(np.sum(np.abs(a[:, offmask]) ** 2, axis=1))
        active &= off > OFF_TOL * fro
        if not active.any():
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                r = np.abs(apq)
                rot = active & (r > 0)
                if not rot.any():
                    continue
                safe_r = np.where(rot, r, 1.0)
                e = np.where(rot, apq / safe_r, 1.0)
                tau = (a[:, q, q].real - a[:, p, p].real) / (2.0 * safe_r)
                root = np.sqrt(1.0 + tau * tau)
                with np.errstate(divide="ignore"):
                    t = np.where(tau >= 0.0, 1.0 / (tau + root), -1.0 / (-tau + root))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                c = np.where(rot, c, 1.0)
                s = np.where(rot, s, 0.0)
                gqp = -s * np.conj(e)
                gqq = c * np.conj(e)
                gqq = np.where(rot, gqq, 1.0)

                akp = a[:, :, p].copy()
                akq = a[:, :, q].copy()
                a[:, :, p] = akp * c[:, None] + akq * gqp[:, None]
                a[:, :, q] = akp * s[:, None] + akq * gqq[:, None]
                akp = a[:, p, :].copy()
                akq = a[:, q, :].copy()
                a[:, p, :] = c[:, None] * akp + np.conj(gqp)[:, None] * akq
                a[:, q, :] = s[:, None] * akp + np.conj(gqq)[:, None] * akq
                a[rot, p, q] = 0.0
                a[rot, q, p] = 0.0
                a[:, p, p] = a[:, p, p].real
                a[:, q, q] = a[:, q, q].real

                vkp = v[:, :, p].copy()
                vkq = v[:, :, q].copy()
                v[:, :, p] = vkp * c[:, None] + vkq * gqp[:, None]
                v[:, :, q] = vkp * s[:, None] + vkq * gqq[:, None]
    w = np.real(np.diagonal(a, axis1=1, axis2=2)).copy()
    return w, v


def _sort_ascending(w, v):
    # stable argsort keeps the first index among ties, like the compiled selection sort
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w, v


def heev_batch(a):
    a = _symmetrize(np.array(a, dtype=np.complex128))
    w, v = _jacobi(a)
    return _sort_ascending(w, v)


def _cholesky_inv(b):
    nb, n, _ = b.shape
    diag = np.real(np.diagonal(b, axis1=1, axis2=2))
    dmax = diag.max(axis=1)
    ok = dmax > 0
    lmat = np.zeros_like(b)
    for j in range(n):
        d = diag[:, j] - np.sum(np.abs(lmat[:, j, :j]) ** 2, axis=1)
        ok &= d > PIVOT_TOL * np.where(ok, dmax, 1.0)
        ljj = np.sqrt(np.where(ok, d, 1.0))
        lmat[:, j, j] = ljj
        for i in range(j + 1, n):
            acc = b[:, i, j] - np.sum(lmat[:, i, :j] * np.conj(lmat[:, j, :j]), axis=1)
            lmat[:, i, j] = acc / ljj
    linv = np.zeros_like(b)
    for j in range(n):
        linv[:, j, j] = 1.0 / lmat[:, j, j].real
        for i in range(j + 1, n):
            acc = np.sum(lmat[:, i, j:i] * linv[:, j:i, j], axis=1)
            linv[:, i, j] = -acc / lmat[:, i, i].real
    return linv, ok


def gev_batch(a, b):
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    nb, n, _ = a.shape
    linv, ok = _cholesky_inv(b)
    c = _symmetrize(linv @ a @ np.conj(np.swapaxes(linv, 1, 2)))
    w, u = _jacobi(c)
    w, u = _sort_ascending(w, u)
    v = np.conj(np.swapaxes(linv, 1, 2)) @ u
    status = np.where(ok, 0, 1).astype(np.int8)
    w[~ok] = np.nan
    v[~ok] = np.nan
    return w, v, status


def weighted_cov(x, m):
    x = np.asarray(x, dtype=np.complex128)
    m = np.asarray(m, dtype=np.float64)
    nt = x.shape[1]
    if nt == 0:
        return np.zeros((x.shape[0], x.shape[2], x.shape[2]), dtype=np.complex128)
    r = np.einsum("ft,fti,ftj->fij", m, x, np.conj(x)) / nt
    return _symmetrize(r)
