"""Mask-based beamformers, the ideal MWF, filter application and ideal scaling.

All estimators work on every frequency bin at once. The observation is held
in an :class:`Observation`, which caches ``Phi_x`` and the diagonal-loading
amount so repeated filter estimation (as in mask optimization) only pays for
the masked statistics.

Diagonal loading. Every bin gets ``delta = eps * trace(Phi_x) / N``. The
observation covariance is loaded with ``delta * I`` and a masked covariance
``<m x x^H>`` with ``delta * <m> * I``, i.e. the loading behaves like a white
floor added to ``x`` before masking. This keeps ``Phi_s + Phi_n = Phi_x``
exact whenever ``m_s + m_n = 1`` (and the ``m_s + m_n = alpha`` analogue), so
the max-SNR / max-SOR / min-NOR equivalences survive regularization.
"""
import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import container
from .cov_linalg import DEFAULT_LOADING, canonicalize, covariance_batch, gev_batch, solve_loaded_batch
from .errors import ConstraintViolation, InvalidInput
from .masks import MaskSet

log = logging.getLogger(__name__)


class MethodId(enum.Enum):
    MASK_MWF = "mwf"
    IDEAL_MWF = "ideal_mwf"
    MAX_SNR = "max_snr"
    MAX_SOR = "max_sor"
    MIN_NOR = "min_nor"

    @property
    def roles(self):
        return _ROLES[self]

    @property
    def label(self):
        return _LABELS[self]

    @classmethod
    def parse(cls, text):
        key = str(text).strip().lower().replace("-", "_")
        for m in cls:
            if key in (m.value, m.name.lower()):
                return m
        raise InvalidInput(f"unknown beamformer method {text!r}")


_ROLES = {
    MethodId.MASK_MWF: ("m_s",),
    MethodId.IDEAL_MWF: (),
    MethodId.MAX_SNR: ("m_s", "m_n"),
    MethodId.MAX_SOR: ("m_s",),
    MethodId.MIN_NOR: ("m_n",),
}
_LABELS = {
    MethodId.MASK_MWF: "MWF",
    MethodId.IDEAL_MWF: "Ideal MWF",
    MethodId.MAX_SNR: "Max-SNR",
    MethodId.MAX_SOR: "Max-SOR",
    MethodId.MIN_NOR: "Min-NOR",
}
MASK_METHODS = (MethodId.MAX_SNR, MethodId.MAX_SOR, MethodId.MIN_NOR, MethodId.MASK_MWF)


@dataclass
class BeamformerFilter:
    weights: np.ndarray
    method: MethodId
    ref_mic: int = 0
    failed_bins: list = field(default_factory=list)

    def save(self, path):
        container.save(path, self.weights)


@dataclass
class ScaledOutput:
    y: np.ndarray
    gamma: np.ndarray


class Observation:
    """Per-bin statistics of a multichannel observation with shape (F, T, N)."""

    def __init__(self, x, loading=DEFAULT_LOADING, phi_x=None):
        x = x.ftn() if hasattr(x, "ftn") else np.asarray(x, dtype=np.complex128)
        if x.ndim != 3:
            raise InvalidInput("observation must have shape (F, T, N)")
        if loading < 0:
            raise InvalidInput("loading must be nonnegative")
        self.x = np.ascontiguousarray(x)
        self.loading = loading
        self.phi_x = covariance_batch(self.x) if phi_x is None else phi_x
        n = self.n_mics
        self.delta = loading * np.real(np.trace(self.phi_x, axis1=1, axis2=2)) / n
        self._eye = np.eye(n)

    @property
    def shape(self):
        return self.x.shape

    @property
    def n_mics(self):
        return self.x.shape[2]

    def phi_x_loaded(self):
        return self.phi_x + self.delta[:, None, None] * self._eye

    def masked_cov(self, m):
        """``<m x x^H> + delta <m> I`` per bin."""
        cov = covariance_batch(self.x, m)
        return cov + (self.delta * np.mean(m, axis=-1))[:, None, None] * self._eye

    def cross(self, ref):
        """``<x(t) conj(ref(t))>_t`` per bin for a reference of shape (F, T)."""
        return np.einsum("ftn,ft->fn", self.x, np.conj(ref)) / self.x.shape[1]


def as_observation(x, loading=DEFAULT_LOADING):
    if isinstance(x, Observation):
        return x
    return Observation(x, loading)


def _ref_channel(x_ftn, ref_mic):
    if not 0 <= ref_mic < x_ftn.shape[2]:
        raise InvalidInput(f"reference microphone {ref_mic} out of range")
    return x_ftn[:, :, ref_mic]


def _check_mask(obs, m, role):
    if m is None:
        raise InvalidInput(f"mask {role} is required")
    m = np.asarray(m, dtype=np.float64)
    if m.shape != obs.shape[:2]:
        raise InvalidInput(f"mask {role} has shape {m.shape}, expected {obs.shape[:2]}")
    if np.any(m < 0):
        raise ConstraintViolation(f"mask {role} contains negative values")
    return m


def _contain(weights, ok, method):
    failed = np.flatnonzero(~ok).tolist()
    if failed:
        log.warning("%s: %d bin(s) failed to factorize, filters zeroed: %s",
                    method.label, len(failed), failed[:10])
        weights = weights.copy()
        weights[~ok] = 0
    return weights, failed


# -- MWF family ---------------------------------------------------------------

def _mwf(obs, rhs, method, ref_mic):
    w, ok = solve_loaded_batch(obs.phi_x, rhs, obs.loading)
    w, failed = _contain(w, ok, method)
    return BeamformerFilter(w, method, ref_mic, failed)


def filter_mask_mwf(x, m_s, ref_mic=0, loading=DEFAULT_LOADING):
    """``w = Phi_x^-1 <m_s x conj(x_k)>`` per bin."""
    obs = as_observation(x, loading)
    m_s = _check_mask(obs, m_s, "m_s")
    xk = _ref_channel(obs.x, ref_mic)
    return _mwf(obs, obs.cross(m_s * xk), MethodId.MASK_MWF, ref_mic)


def _least_squares(x_ftn, s_k):
    """Minimum-norm ``w`` minimizing ``<|s_k - w^H x|^2>`` per bin (``Phi_x^+ r``).

    Solved on the frames through an SVD rather than through the normal
    equations, so rank-deficient and badly conditioned bins stay exact.
    """
    u, sv, vh = np.linalg.svd(x_ftn, full_matrices=False)
    cutoff = max(x_ftn.shape[1:]) * np.finfo(float).eps * sv[:, :1]
    keep = sv > cutoff
    inv = np.where(keep, 1.0 / np.where(keep, sv, 1.0), 0.0)
    coef = np.einsum("ftj,ft->fj", np.conj(u), s_k) * inv
    # x^T conj(w) = s_k  =>  conj(w) = V diag(1/sv) U^H s_k
    return np.conj(np.einsum("fjn,fj->fn", np.conj(vh), coef))


def filter_ideal_mwf(x, s, ref_mic=0, loading=0.0):
    """``w = Phi_x^-1 <x conj(s_k)>`` per bin, from the true target image ``s``.

    With ``loading == 0`` (the default) this is the exact least-squares
    filter, the upper bound for every linear filter. A positive ``loading``
    solves the loaded normal equations instead.
    """
    obs = as_observation(x, loading or DEFAULT_LOADING)
    s_k = target_reference(s, ref_mic)
    if s_k.shape != obs.shape[:2]:
        raise InvalidInput("target does not align with the observation")
    if loading < 0:
        raise InvalidInput("loading must be nonnegative")
    if loading == 0:
        w = _least_squares(obs.x, s_k)
        return BeamformerFilter(w, MethodId.IDEAL_MWF, ref_mic, [])
    w, ok = solve_loaded_batch(obs.phi_x, obs.cross(s_k), loading)
    w, failed = _contain(w, ok, MethodId.IDEAL_MWF)
    return BeamformerFilter(w, MethodId.IDEAL_MWF, ref_mic, failed)


def target_reference(s, ref_mic):
    """Reference-channel bins (F, T) from a spectrogram, an (F, T, N) array or (F, T)."""
    if hasattr(s, "bins"):
        return s.bins[ref_mic]
    s = np.asarray(s)
    return s[:, :, ref_mic] if s.ndim == 3 else s


# -- GEV family ---------------------------------------------------------------

@dataclass
class GevFilterState:
    """Filter plus the decomposition it came from (needed for gradients)."""

    filter: BeamformerFilter
    values: np.ndarray
    vectors: np.ndarray
    index: int


def _gev_filter(a, b, which, method, ref_mic):
    dec = gev_batch(a, b)
    lam, vec = dec.extreme(which)
    w = canonicalize(np.where(dec.ok[:, None], vec, 0))
    w, failed = _contain(w, dec.ok, method)
    values = np.where(dec.ok[:, None], dec.values, 0.0)
    vectors = np.where(dec.ok[:, None, None], dec.vectors, 0.0)
    idx = -1 if which == "max" else 0
    return GevFilterState(BeamformerFilter(w, method, ref_mic, failed), values, vectors, idx)


def gev_state(method, obs, masks, ref_mic=0):
    """Estimate a GEV-family filter and keep its full decomposition."""
    if method is MethodId.MAX_SNR:
        a = obs.masked_cov(_check_mask(obs, masks.m_s, "m_s"))
        b = obs.masked_cov(_check_mask(obs, masks.m_n, "m_n"))
        return _gev_filter(a, b, "max", method, ref_mic)
    if method is MethodId.MAX_SOR:
        a = obs.masked_cov(_check_mask(obs, masks.m_s, "m_s"))
        return _gev_filter(a, obs.phi_x_loaded(), "max", method, ref_mic)
    if method is MethodId.MIN_NOR:
        a = obs.masked_cov(_check_mask(obs, masks.m_n, "m_n"))
        return _gev_filter(a, obs.phi_x_loaded(), "min", method, ref_mic)
    raise InvalidInput(f"{method} is not a GEV-family beamformer")


def filter_max_snr(x, m_s, m_n, loading=DEFAULT_LOADING, ref_mic=0):
    """``GEV_max(Phi_s, Phi_n)`` per bin."""
    return gev_state(MethodId.MAX_SNR, as_observation(x, loading), MaskSet(m_s, m_n), ref_mic).filter


def filter_max_sor(x, m_s, loading=DEFAULT_LOADING, ref_mic=0):
    """``GEV_max(Phi_s, Phi_x)`` per bin."""
    return gev_state(MethodId.MAX_SOR, as_observation(x, loading), MaskSet(m_s=m_s), ref_mic).filter


def filter_min_nor(x, m_n, loading=DEFAULT_LOADING, ref_mic=0):
    """``GEV_min(Phi_n, Phi_x)`` per bin."""
    return gev_state(MethodId.MIN_NOR, as_observation(x, loading), MaskSet(m_n=m_n), ref_mic).filter


def estimate_filter(method, x, masks=None, s=None, ref_mic=0, loading=DEFAULT_LOADING):
    """Dispatch to the estimator for ``method``."""
    obs = as_observation(x, loading)
    if method is MethodId.IDEAL_MWF:
        if s is None:
            raise InvalidInput("the ideal MWF needs the target image")
        return filter_ideal_mwf(obs, s, ref_mic)
    if masks is None:
        raise InvalidInput(f"{method.label} needs masks {method.roles}")
    for role in method.roles:
        if not masks.has(role):
            raise InvalidInput(f"{method.label} needs mask {role}")
    if method is MethodId.MASK_MWF:
        return filter_mask_mwf(obs, masks.m_s, ref_mic)
    return gev_state(method, obs, masks, ref_mic).filter


# -- output -------------------------------------------------------------------

def apply_filter(filt, x):
    """``y(t) = w^H x(t)`` per bin and frame; returns shape (F, T)."""
    x = x.ftn() if hasattr(x, "ftn") else getattr(x, "x", x)
    w = getattr(filt, "weights", filt)
    if w.shape[0] != x.shape[0] or w.shape[1] != x.shape[2]:
        raise InvalidInput(f"filter {w.shape} does not match observation {x.shape}")
    return np.einsum("fn,ftn->ft", np.conj(w), x)


def ideal_scale(y, s_k):
    """Scale ``y`` per bin by ``gamma = <s_k conj(y)> / <|y|^2>`` (0 when ``y`` vanishes)."""
    y = np.asarray(y)
    s_k = np.asarray(s_k)
    if y.shape != s_k.shape:
        raise InvalidInput(f"output {y.shape} and target {s_k.shape} shapes differ")
    num = np.mean(s_k * np.conj(y), axis=-1)
    den = np.mean(np.abs(y) ** 2, axis=-1)
    gamma = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0)
    return ScaledOutput(gamma[..., None] * y, gamma)
