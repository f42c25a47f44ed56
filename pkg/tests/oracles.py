"""Slow, independent reference computations the tests compare against."""
import numpy as np


def naive_covariance(x_tn, mask):
    """Triple loop over frames and channel pairs."""
    t_len, n = x_tn.shape
    out = np.zeros((n, n), dtype=complex)
    for t in range(t_len):
        for i in range(n):
            for j in range(n):
                out[i, j] += mask[t] * x_tn[t, i] * np.conj(x_tn[t, j])
    return out / t_len


def direct_dft(frame):
    n = len(frame)
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    return np.sum(frame[None, :] * np.exp(-2j * np.pi * k * t / n), axis=1)


def lstsq_filter(x_tn, target):
    """``w`` minimizing ``mean |target - w^H x|^2`` by dense least squares."""
    w_conj, *_ = np.linalg.lstsq(x_tn, target, rcond=None)
    return np.conj(w_conj)


def scaled_output_mse(w, x_tn, target):
    """Brute-force ideally scaled MSE: loop over frames."""
    y = np.array([np.vdot(w, x) for x in x_tn])
    den = sum(abs(v) ** 2 for v in y)
    gamma = sum(s * np.conj(v) for s, v in zip(target, y)) / den if den > 0 else 0
    return float(np.mean([abs(s - gamma * v) ** 2 for s, v in zip(target, y)]))


def gev_2x2(a, b):
    """Closed-form eigenvalues of ``det(A - lam B) = 0`` for 2x2 Hermitian ``A`` and PD ``B``."""
    qa = np.linalg.det(b).real
    qb = -(a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1]).real
    qc = np.linalg.det(a).real
    disc = np.sqrt(max(qb * qb - 4 * qa * qc, 0.0))
    return sorted([(-qb - disc) / (2 * qa), (-qb + disc) / (2 * qa)])


def central_difference(fun, m, h):
    g = np.zeros_like(m)
    for idx in np.ndindex(m.shape):
        mp, mm = m.copy(), m.copy()
        mp[idx] += h
        mm[idx] -= h
        g[idx] = (fun(mp) - fun(mm)) / (2 * h)
    return g
