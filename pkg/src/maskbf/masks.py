"""Oracle masks, sum-is-constant conversions and the optimizer's constraint projection.

Mask arrays have shape ``(F, T)`` (frequency, frame); every per-bin operation
works along the last axis.
"""
import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolation, InvalidInput


class MaskKind(enum.Enum):
    IRM = "irm"
    SMM = "smm"
    OPTIMIZED = "optimized"
    UNIFORM = "uniform"


@dataclass
class MaskSet:
    m_s: np.ndarray = None
    m_n: np.ndarray = None

    def __post_init__(self):
        for name in ("m_s", "m_n"):
            m = getattr(self, name)
            if m is None:
                continue
            m = np.asarray(m, dtype=np.float64)
            if not np.all(np.isfinite(m)):
                raise InvalidInput(f"{name} contains non-finite values")
            if np.any(m < 0):
                raise ConstraintViolation(f"{name} contains negative values")
            setattr(self, name, m)

    def has(self, role):
        return getattr(self, role) is not None

    def scaled(self, c):
        return MaskSet(
            None if self.m_s is None else c * self.m_s,
            None if self.m_n is None else c * self.m_n,
        )

    def copy(self):
        return self.scaled(1.0)


def _ref_bins(target, interference, ref_mic):
    s = np.asarray(getattr(target, "bins", target))
    n = np.asarray(getattr(interference, "bins", interference))
    if s.shape != n.shape:
        raise InvalidInput(f"target {s.shape} and interference {n.shape} shapes differ")
    if s.ndim == 3:
        s, n = s[ref_mic], n[ref_mic]
    return s, n


def irm(target, interference, ref_mic=0, beta=1.0):
    """Ideal ratio masks ``(|s_k|^2 / (|s_k|^2 + |n_k|^2)) ** beta`` and the interference twin.

    Cells where both components vanish are split evenly (``0.5 ** beta``).
    """
    if not beta > 0:
        raise InvalidInput("beta must be positive")
    s, n = _ref_bins(target, interference, ref_mic)
    ps, pn = np.abs(s) ** 2, np.abs(n) ** 2
    total = ps + pn
    silent = total == 0
    denom = np.where(silent, 1.0, total)
    m_s = np.where(silent, 0.5, ps / denom)
    m_n = np.where(silent, 0.5, pn / denom)
    if beta != 1.0:
        m_s, m_n = m_s ** beta, m_n ** beta
    return MaskSet(m_s, m_n)


def smm(target, interference, ref_mic=0):
    """Spectral magnitude masks ``|s_k| / |s_k + n_k|``; not clipped, so values may exceed 1."""
    s, n = _ref_bins(target, interference, ref_mic)
    mix = np.abs(s + n)
    zero = mix == 0
    denom = np.where(zero, 1.0, mix)
    m_s = np.where(zero, 0.0, np.abs(s) / denom)
    m_n = np.where(zero, 0.0, np.abs(n) / denom)
    return MaskSet(m_s, m_n)


def _complement(m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 0 or m.shape[-1] == 0:
        raise InvalidInput("mask has an empty frame axis")
    if np.any(m < 0):
        raise ConstraintViolation("mask entries must be nonnegative")
    return m.max(axis=-1, keepdims=True) - m


def ms_from_mn(m_n):
    """Target mask from an interference mask: ``max_t m_n - m_n(t)`` per bin."""
    return _complement(m_n)


def mn_from_ms(m_s):
    """Interference mask from a target mask: ``max_t m_s - m_s(t)`` per bin."""
    return _complement(m_s)


def project_constraints(m):
    """Clamp to nonnegative and rescale each bin to unit mean square.

    Bins that are all zero after clamping are reset to the uniform mask.
    """
    m = np.maximum(np.asarray(m, dtype=np.float64), 0.0)
    ms = np.mean(m ** 2, axis=-1, keepdims=True)
    dead = ms == 0
    m = np.where(dead, 1.0, m)
    ms = np.where(dead, 1.0, ms)
    return m / np.sqrt(ms)


def save_mask_csv(path, mask):
    """One row per frequency bin, one column per frame, round-trip precision."""
    np.savetxt(path, np.atleast_2d(mask), delimiter=",", fmt="%.17g")


def load_mask_csv(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2))
