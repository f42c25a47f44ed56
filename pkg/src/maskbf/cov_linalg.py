"""Mask-weighted covariances and small dense Hermitian linear algebra.

Single-matrix functions (``solve_loaded``, ``gev_max``, ``gev_min``) follow
the per-frequency formulation; the ``*_batch`` variants operate on stacks of
matrices with shape ``(F, N, N)`` and are what the beamformers use.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConstraintViolation, InvalidInput, NumericalError

DEFAULT_LOADING = 1e-6


@dataclass(frozen=True)
class GevResult:
    eigenvalue: float
    eigenvector: np.ndarray


@dataclass
class CovarianceSet:
    """Per-frequency covariance stacks; any of them may be absent."""

    phi_x: np.ndarray = None
    phi_s: np.ndarray = None
    phi_n: np.ndarray = None

    def check_psd(self, rtol=1e-10):
        for name in ("phi_x", "phi_s", "phi_n"):
            mats = getattr(self, name)
            if mats is None:
                continue
            lam = np.linalg.eigvalsh(mats)
            tr = np.real(np.trace(mats, axis1=-2, axis2=-1))
            if np.any(lam.min(axis=-1) < -rtol * np.abs(tr)):
                raise NumericalError(f"{name} is not positive semidefinite")


def hermitize(a):
    a = np.asarray(a, dtype=np.complex128)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def load(a, loading):
    """``A + loading * trace(A) / N * I`` on the last two axes."""
    a = np.asarray(a, dtype=np.complex128)
    if loading == 0:
        return a
    n = a.shape[-1]
    tr = np.real(np.trace(a, axis1=-2, axis2=-1))
    return a + (loading * tr / n)[..., None, None] * np.eye(n)


def _check_mask(mask, n_frames):
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape[-1] != n_frames:
        raise InvalidInput(f"mask has {mask.shape[-1]} frames, spectrogram has {n_frames}")
    if np.any(mask < 0):
        raise ConstraintViolation("mask entries must be nonnegative")
    return mask


def weighted_covariance(spec, mask=None, f=0):
    """``<m(t) x(t) x(t)^H>_t`` at frequency bin ``f`` of ``spec``.

    ``mask`` is a per-frame weight vector; ``None`` means unit weights.
    """
    x = spec.bins[:, f, :].T
    if mask is None:
        mask = np.ones(x.shape[0])
    mask = _check_mask(mask, x.shape[0])
    return kernels.weighted_cov(x[None], mask[None])[0]


def covariance_batch(x_ftn, mask=None):
    """Per-bin covariances for ``x_ftn`` of shape (F, T, N) and mask (F, T)."""
    f, t, _ = x_ftn.shape
    if mask is None:
        mask = np.ones((f, t))
    mask = _check_mask(mask, t)
    if mask.shape != (f, t):
        raise InvalidInput(f"mask shape {mask.shape} does not match ({f}, {t})")
    return kernels.weighted_cov(x_ftn, mask)


def cholesky_batch(a):
    """Lower Cholesky factors; returns ``(L, ok)`` with failed items set to identity."""
    a = hermitize(a)
    try:
        return np.linalg.cholesky(a), np.ones(a.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        pass
    n = a.shape[-1]
    out = np.empty_like(a)
    ok = np.ones(a.shape[0], dtype=bool)
    for i, mat in enumerate(a):
        try:
            out[i] = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            out[i] = np.eye(n)
            ok[i] = False
    return out, ok


def solve_loaded_batch(a, b, loading=DEFAULT_LOADING):
    """Solve ``(A + eps tr(A)/N I) x = b`` per item; returns ``(x, ok)``."""
    lmat, ok = cholesky_batch(load(a, loading))
    y = np.linalg.solve(lmat, b[..., None])
    x = np.linalg.solve(np.conj(np.swapaxes(lmat, -1, -2)), y)[..., 0]
    x[~ok] = 0
    return x, ok


def solve_loaded(a, b, loading=DEFAULT_LOADING):
    """Loaded Cholesky solve for a single Hermitian PSD matrix."""
    if loading < 0:
        raise InvalidInput("loading must be nonnegative")
    a = np.asarray(a, dtype=np.complex128)
    x, ok = solve_loaded_batch(a[None], np.asarray(b, dtype=np.complex128)[None], loading)
    if not ok[0]:
        raise NumericalError("matrix is not positive definite after loading")
    return x[0]


def canonicalize(w):
    """Unit Euclidean norm with the largest-magnitude entry real and nonnegative.

    Works on vectors along the last axis; zero vectors are returned unchanged.
    """
    w = np.asarray(w, dtype=np.complex128)
    norm = np.linalg.norm(w, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    w = w / safe
    idx = np.argmax(np.abs(w), axis=-1)[..., None]
    pivot = np.take_along_axis(w, idx, axis=-1)
    mag = np.abs(pivot)
    phase = np.where(mag > 0, np.conj(pivot) / np.where(mag > 0, mag, 1.0), 1.0)
    w = w * phase
    # rounding leaves a ~1e-17 imaginary part on the pivot; make it exactly real
    np.put_along_axis(w, idx, mag.astype(np.complex128), axis=-1)
    return w


@dataclass
class GevDecomposition:
    """Full generalized eigendecomposition of a batch (eigenvalues ascending).

    ``vectors[..., :, j]`` are ``B``-orthonormal; ``ok`` flags items whose
    right-hand matrix factorized.
    """

    values: np.ndarray
    vectors: np.ndarray
    ok: np.ndarray

    def extreme(self, which):
        j = -1 if which == "max" else 0
        return self.values[:, j], self.vectors[:, :, j]


def gev_batch(a, b):
    """Decompose ``A v = lam B v`` for each item (no loading applied here)."""
    a = hermitize(a)
    b = hermitize(b)
    if a.ndim != 3 or a.shape != b.shape or a.shape[1] != a.shape[2]:
        raise InvalidInput("expected matching stacks of square matrices")
    lam, vec, status = kernels.gev_batch(np.ascontiguousarray(a), np.ascontiguousarray(b))
    return GevDecomposition(lam, vec, status == 0)


def _gev_extreme(a, b, loading, which):
    dec = gev_batch(np.asarray(a)[None], load(np.asarray(b)[None], loading))
    if not dec.ok[0]:
        raise NumericalError("right-hand matrix is not positive definite after loading")
    lam, vec = dec.extreme(which)
    return GevResult(float(lam[0]), canonicalize(vec[0]))


def gev_max(a, b, loading=DEFAULT_LOADING):
    """Eigenpair of ``A w = lam B' w`` with the largest eigenvalue."""
    return _gev_extreme(a, b, loading, "max")


def gev_min(a, b, loading=DEFAULT_LOADING):
    """Eigenpair of ``A w = lam B' w`` with the smallest eigenvalue."""
    return _gev_extreme(a, b, loading, "min")
