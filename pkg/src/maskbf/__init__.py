"""Mask-based multichannel beamforming and per-utterance optimal masks."""
from .beamformers import (
    BeamformerFilter,
    MethodId,
    apply_filter,
    estimate_filter,
    filter_ideal_mwf,
    filter_mask_mwf,
    filter_max_snr,
    filter_max_sor,
    filter_min_nor,
    ideal_scale,
)
from .cov_linalg import gev_max, gev_min, solve_loaded, weighted_covariance
from .errors import (
    ConstraintViolation,
    DatasetError,
    InvalidConfig,
    InvalidInput,
    MaskBFError,
    NumericalError,
)
from .kernels import BACKEND
from .mask_optimizer import GradientMode, OptimizerConfig, optimize
from .masks import MaskKind, MaskSet, irm, mn_from_ms, ms_from_mn, smm
from .metrics import MetricReport, mse_tf, sdr_db, si_sdr_db, snr_db
from .scene_gen import Scene, SceneSpec, load_chime_scene, synth_scene
from .tf_transform import Spectrogram, StftConfig, TimeSignal, istft, stft

__version__ = "0.1.0"
