"""Multichannel scenes with a known decomposition ``x = s + n``.

Synthetic scenes use an anechoic delay-and-gain mixing model: a speech-like
harmonic target and pink-noise interferers are each delayed by fractional
amounts (frequency-domain phase ramps) and scaled per microphone. A weak
spatially white sensor floor is part of ``n`` so ``Phi_x`` has full rank.
Real data follows the CHiME-3 stem layout (see :func:`load_chime_scene`).
"""
import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import DatasetError, InvalidConfig
from .tf_transform import StftConfig, TimeSignal, stft
from .wavio import read_multichannel, read_wav, write_multichannel


@dataclass
class Scene:
    x: TimeSignal
    s: TimeSignal
    n: TimeSignal
    bg_multiplier: float
    ref_mic: int
    label: str
    stft_config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.x_spec = stft(self.x, self.stft_config)
        self.s_spec = stft(self.s, self.stft_config)
        self.n_spec = stft(self.n, self.stft_config)

    @property
    def sample_rate(self):
        return self.x.sample_rate

    @property
    def n_mics(self):
        return self.x.channels


@dataclass
class SceneSpec:
    n_mics: int = 4
    duration: float = 2.0
    sample_rate: int = 16000
    target_kind: str = "synthetic"
    noise_kind: str = "pink"
    n_noise_sources: int = 2
    target_delays: tuple = None
    target_gains: tuple = None
    noise_delays: tuple = None
    noise_gains: tuple = None
    max_delay: float = 8.0
    snr_db: float = 7.5
    sensor_noise_db: float = -25.0
    noise_am_depth: float = 0.3
    bg_multiplier: float = 1.0
    ref_mic: int = 0
    window_len: int = 256
    hop_len: int = 64
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.n_mics < 1:
            raise InvalidConfig("n_mics must be >= 1")
        if not self.duration > 0 or self.sample_rate <= 0:
            raise InvalidConfig("duration and sample_rate must be positive")
        if self.bg_multiplier < 0:
            raise InvalidConfig("bg_multiplier must be nonnegative")
        if not 0 <= self.ref_mic < self.n_mics:
            raise InvalidConfig("ref_mic out of range")
        if self.n_noise_sources < 0:
            raise InvalidConfig("n_noise_sources must be nonnegative")
        limit = self.window_len / 4
        if not 0 <= self.max_delay < limit:
            raise InvalidConfig(f"max_delay must be below window_len/4 = {limit}")
        for name in ("target_delays", "noise_delays"):
            d = getattr(self, name)
            if d is not None and (np.any(np.asarray(d) < 0) or np.any(np.asarray(d) >= limit)):
                raise InvalidConfig(f"{name} must lie in [0, window_len/4)")
        for name in ("target_gains", "noise_gains"):
            g = getattr(self, name)
            if g is not None and np.any(np.asarray(g) <= 0):
                raise InvalidConfig(f"{name} must be positive")

    @property
    def stft_config(self):
        return StftConfig(self.window_len, self.hop_len)

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in known:
                raise InvalidConfig(f"unknown scene setting {key!r}")
            kwargs[key] = _coerce(known[key], raw)
        return cls(**kwargs)


def _coerce(fld, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if fld.name.endswith(("_delays", "_gains")):
        if fld.name == "noise_delays" or fld.name == "noise_gains":
            return tuple(tuple(float(v) for v in row.split(",")) for row in text.split(";"))
        return tuple(float(v) for v in text.split(","))
    default = fld.default
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def load_scene_spec(path, section="scene"):
    """Read a :class:`SceneSpec` from an INI-style ``key = value`` file."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise InvalidConfig(f"cannot read scene config {path}")
    if section not in parser:
        raise InvalidConfig(f"scene config {path} has no [{section}] section")
    return SceneSpec.from_mapping(dict(parser[section]))


# -- source signals ------------------------------------------------------------

def _syllable_envelope(rng, n, sr):
    env = np.zeros(n)
    pos = int(rng.uniform(0.0, 0.15) * sr)
    while pos < n:
        on = int(rng.uniform(0.15, 0.4) * sr)
        ramp = max(1, min(int(0.03 * sr), on // 3))
        seg = np.ones(on)
        fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        seg[:ramp] = fade
        seg[-ramp:] = fade[::-1]
        end = min(n, pos + on)
        env[pos:end] = seg[:end - pos] * rng.uniform(0.5, 1.0)
        pos = end + int(rng.uniform(0.05, 0.25) * sr)
    return env


def speech_like(rng, n, sr):
    """Harmonic AM tone complex gated by random syllable envelopes."""
    t = np.arange(n) / sr
    f0 = rng.uniform(100.0, 220.0)
    inst_f0 = f0 * (1.0 + 0.06 * np.sin(2 * np.pi * rng.uniform(0.3, 1.2) * t + rng.uniform(0, 2 * np.pi)))
    phase0 = 2 * np.pi * np.cumsum(inst_f0) / sr
    n_harm = int(rng.integers(6, 11))
    out = np.zeros(n)
    for h in range(1, n_harm + 1):
        if h * f0 * 1.07 >= sr / 2:
            break
        amp = rng.uniform(0.4, 1.0) / h ** 0.7
        am = 1.0 + 0.5 * np.sin(2 * np.pi * rng.uniform(2.0, 6.0) * t + rng.uniform(0, 2 * np.pi))
        out += amp * am * np.sin(h * phase0 + rng.uniform(0, 2 * np.pi))
    out *= _syllable_envelope(rng, n, sr)
    return out / (np.std(out) + 1e-12)


PINK_LOW_HZ = 50.0


def colored_noise(rng, n, kind="pink", sr=16000):
    """White or pink noise; pink is 1/f shaped and band-limited to PINK_LOW_HZ and above."""
    white = rng.standard_normal(n)
    if kind == "white":
        return white
    if kind != "pink":
        raise InvalidConfig(f"unknown noise kind {kind!r}")
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    # an unbounded 1/f shape piles most of the energy below the first STFT bin
    shape = np.where(freqs >= PINK_LOW_HZ, 1.0 / np.sqrt(np.maximum(freqs, PINK_LOW_HZ)), 0.0)
    out = np.fft.irfft(spec * shape, n)
    return out / np.std(out)


def babble_like(rng, n, sr, talkers=5):
    out = sum(speech_like(rng, n, sr) for _ in range(talkers))
    return out / np.std(out)


def fractional_delay(signal, delays, gains):
    """Render a mono signal at each microphone with a fractional delay and gain.

    Delays are applied as phase ramps on a zero-padded FFT so the wrap-around
    lands in padding that is trimmed afterwards.
    """
    n = signal.size
    pad = int(np.ceil(max(delays))) + 64
    size = n + pad
    spec = np.fft.rfft(signal, size)
    k = np.arange(spec.size)
    out = np.empty((len(delays), n))
    for i, (d, g) in enumerate(zip(delays, gains)):
        out[i] = g * np.fft.irfft(spec * np.exp(-2j * np.pi * k * d / size), size)[:n]
    return out


def _source(rng, kind, n, sr):
    if kind == "synthetic":
        return speech_like(rng, n, sr)
    if kind in ("pink", "white"):
        return colored_noise(rng, n, kind, sr)
    if kind == "babble":
        return babble_like(rng, n, sr)
    raise InvalidConfig(f"unknown source kind {kind!r}")


def _load_mono(path, n, sr):
    """First channel of a WAV file (or ``<stem>.CH<d>.wav`` set), tiled or cut to ``n``."""
    sig = read_wav(path) if str(path).lower().endswith(".wav") else read_multichannel(path)
    if sig.sample_rate != sr:
        raise InvalidConfig(f"{path} is sampled at {sig.sample_rate} Hz, expected {sr}")
    return np.resize(sig.samples[0], n)


def synth_scene(spec):
    """Render the scene described by ``spec``; deterministic for a fixed seed."""
    rng = np.random.default_rng(spec.seed)
    sr = spec.sample_rate
    n = int(round(spec.duration * sr))
    nm = spec.n_mics

    t_delays = spec.target_delays or tuple(rng.uniform(0, spec.max_delay, nm))
    t_gains = spec.target_gains or tuple(rng.uniform(0.7, 1.0, nm))
    if len(t_delays) != nm or len(t_gains) != nm:
        raise InvalidConfig("target delays/gains need one entry per microphone")
    n_src = spec.n_noise_sources
    n_delays = spec.noise_delays or tuple(tuple(rng.uniform(0, spec.max_delay, nm)) for _ in range(n_src))
    n_gains = spec.noise_gains or tuple(tuple(rng.uniform(0.7, 1.0, nm)) for _ in range(n_src))
    if len(n_delays) != n_src or len(n_gains) != n_src:
        raise InvalidConfig("noise delays/gains need one row per noise source")

    if spec.target_kind == "synthetic":
        target = speech_like(rng, n, sr)
    else:
        target = _load_mono(spec.target_kind, n, sr)
    s = fractional_delay(target, t_delays, t_gains)

    noise = np.zeros((nm, n))
    t = np.arange(n) / sr
    for d, g in zip(n_delays, n_gains):
        if spec.noise_kind in ("pink", "white", "babble"):
            src = _source(rng, spec.noise_kind, n, sr)
        else:
            src = _load_mono(spec.noise_kind, n, sr)
        if spec.noise_am_depth > 0:
            src = src * (1.0 + spec.noise_am_depth
                         * np.sin(2 * np.pi * rng.uniform(0.2, 1.0) * t + rng.uniform(0, 2 * np.pi)))
        noise += fractional_delay(src, d, g)
    ref = spec.ref_mic
    floor_ref = np.mean(noise[ref] ** 2) if n_src else np.mean(s[ref] ** 2)
    sensor = rng.standard_normal((nm, n)) * np.sqrt(floor_ref * 10 ** (spec.sensor_noise_db / 10))
    noise = noise + sensor

    # noise level fixed by the x1 SNR at the reference microphone
    gain = np.sqrt(np.mean(s[ref] ** 2) / (np.mean(noise[ref] ** 2) * 10 ** (spec.snr_db / 10)))
    noise = spec.bg_multiplier * gain * noise
    x = s + noise
    label = spec.label or f"synth{spec.seed:03d}"
    return Scene(TimeSignal(x, sr), TimeSignal(s, sr), TimeSignal(noise, sr),
                 spec.bg_multiplier, ref, label, spec.stft_config)


def with_multiplier(spec, multiplier):
    return replace(spec, bg_multiplier=multiplier)


def default_suite(n_scenes=10, n_mics=4, duration=2.0, sample_rate=16000,
                  window_len=256, hop_len=64, seed=0):
    """Base specs (multiplier 1) for the synthetic experiment suite."""
    return [
        SceneSpec(n_mics=n_mics, duration=duration, sample_rate=sample_rate,
                  window_len=window_len, hop_len=hop_len, seed=seed * 1000 + i,
                  label=f"synth{i:02d}")
        for i in range(n_scenes)
    ]


# -- CHiME-3 style datasets ----------------------------------------------------

CLEAN_TEMPLATE = "clean/{utt}"
NOISE_TEMPLATE = "noise/{utt}"


def load_chime_scene(root, utt, bg_multiplier=1.0, channels=6, ref_mic=4,
                     stft_config=None, clean_template=CLEAN_TEMPLATE,
                     noise_template=NOISE_TEMPLATE):
    """Build a scene from per-channel clean and noise stems.

    The stems are ``<root>/<template>.CH<d>.wav`` for ``d = 1..channels``;
    ``x`` is formed as ``s + bg_multiplier * n``.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root does not exist: {root}", root)
    s = read_multichannel(root / clean_template.format(utt=utt), channels)
    n = read_multichannel(root / noise_template.format(utt=utt), channels)
    if s.sample_rate != n.sample_rate:
        raise DatasetError(f"clean and noise sample rates differ for {utt}", root)
    if len(s) != len(n):
        raise DatasetError(f"clean and noise lengths differ for {utt}", root)
    noise = TimeSignal(bg_multiplier * n.samples, n.sample_rate)
    x = TimeSignal(s.samples + noise.samples, s.sample_rate)
    return Scene(x, s, noise, bg_multiplier, ref_mic, utt, stft_config or StftConfig())


def list_chime_utterances(root, clean_template=CLEAN_TEMPLATE):
    root = Path(root)
    pattern = clean_template.format(utt="*") + ".CH1.wav"
    names = sorted(p.name[: -len(".CH1.wav")] for p in root.glob(pattern))
    if not names:
        raise DatasetError(f"no utterances matching {root / pattern}", root / pattern)
    return names


def export_scene(scene, out_dir, fmt="float32"):
    """Write ``x``, ``s`` and ``n`` as ``<label>_{mix,clean,noise}.CH<d>.wav`` stems."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for tag, sig in (("mix", scene.x), ("clean", scene.s), ("noise", scene.n)):
        paths += write_multichannel(out_dir / f"{scene.label}_{tag}", sig, fmt)
    return paths
