"""WAV reading and writing, including the ``<stem>.CH<d>.wav`` per-microphone layout."""
import re
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import DatasetError, InvalidInput
from .tf_transform import TimeSignal

_CH_PATTERN = re.compile(r"\.CH(\d+)\.wav$", re.IGNORECASE)


def read_wav(path):
    """Read a PCM-16 or float-32 WAV file; PCM is scaled to [-1, 1)."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing WAV file: {path}", path)
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        data = data.astype(np.float64)
    else:
        raise InvalidInput(f"unsupported WAV sample format {data.dtype} in {path}")
    if data.ndim == 1:
        data = data[None, :]
    else:
        data = data.T
    return TimeSignal(data, rate)


def write_wav(path, signal, fmt="float32"):
    """Write ``signal`` as ``float32`` or ``pcm16``; multichannel data is interleaved."""
    data = signal.samples.T
    if data.shape[1] == 1:
        data = data[:, 0]
    if fmt == "float32":
        data = data.astype(np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(data * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise InvalidInput(f"unknown WAV format {fmt!r}")
    wavfile.write(Path(path), signal.sample_rate, data)


def channel_paths(stem, channels):
    """Paths ``<stem>.CH1.wav`` ... ``<stem>.CH<channels>.wav``."""
    stem = Path(stem)
    return [stem.with_name(f"{stem.name}.CH{d}.wav") for d in range(1, channels + 1)]


def discover_channels(stem):
    """Count the contiguous ``CH1..CHn`` files that exist for ``stem``."""
    stem = Path(stem)
    found = set()
    if stem.parent.is_dir():
        for p in stem.parent.glob(f"{stem.name}.CH*.wav"):
            m = _CH_PATTERN.search(p.name)
            if m:
                found.add(int(m.group(1)))
    n = 0
    while n + 1 in found:
        n += 1
    return n


def read_multichannel(stem, channels=None):
    """Stack per-microphone mono files into one multichannel signal.

    Raises :class:`DatasetError` naming the first missing file, or when the
    files disagree in length or sample rate.
    """
    if channels is None:
        channels = discover_channels(stem)
        if channels == 0:
            raise DatasetError(f"missing WAV file: {channel_paths(stem, 1)[0]}",
                               channel_paths(stem, 1)[0])
    rows, rate = [], None
    for path in channel_paths(stem, channels):
        sig = read_wav(path)
        if sig.channels != 1:
            raise DatasetError(f"expected a mono file: {path}", path)
        if rate is not None and sig.sample_rate != rate:
            raise DatasetError(f"sample rate mismatch in {path}", path)
        if rows and len(sig) != rows[0].shape[0]:
            raise DatasetError(f"ragged channel length in {path}", path)
        rate = sig.sample_rate
        rows.append(sig.samples[0])
    return TimeSignal(np.stack(rows), rate)


def write_multichannel(stem, signal, fmt="float32"):
    paths = channel_paths(stem, signal.channels)
    for path, row in zip(paths, signal.samples):
        write_wav(path, TimeSignal(row[None], signal.sample_rate), fmt)
    return paths
