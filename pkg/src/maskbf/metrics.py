"""Extraction-quality metrics on time signals and spectrograms.

``sdr_db`` is the plain signal-to-distortion ratio (no BSS-eval distortion
filter). All dB values are capped at :data:`CAP_DB` when the denominator is
negligible compared with the numerator.
"""
import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInput

CAP_DB = 100.0
CAP_RATIO = 1e-10


def _samples(sig):
    return np.asarray(getattr(sig, "samples", sig), dtype=np.float64)


def _ratio_db(num, den):
    if den <= CAP_RATIO * num:
        return CAP_DB
    return float(10.0 * np.log10(num / den))


def sdr_db(reference, estimate):
    """``10 log10(sum s^2 / sum (s - y)^2)``, capped at +100 dB."""
    s, y = _samples(reference), _samples(estimate)
    if s.shape != y.shape:
        raise InvalidInput(f"reference {s.shape} and estimate {y.shape} differ in shape")
    num = float(np.sum(s ** 2))
    if num == 0:
        raise InvalidInput("reference has zero energy")
    return _ratio_db(num, float(np.sum((s - y) ** 2)))


def si_sdr_db(reference, estimate):
    """SDR after rescaling the estimate by the least-squares scalar ``<s, y> / <y, y>``."""
    s, y = _samples(reference), _samples(estimate)
    if s.shape != y.shape:
        raise InvalidInput(f"reference {s.shape} and estimate {y.shape} differ in shape")
    yy = float(np.sum(y ** 2))
    alpha = float(np.sum(s * y)) / yy if yy > 0 else 0.0
    return sdr_db(s, alpha * y)


def snr_db(target, noise):
    """``10 log10(sum s^2 / sum n^2)``, capped at +100 dB when ``n`` vanishes."""
    s, n = _samples(target), _samples(noise)
    num = float(np.sum(s ** 2))
    if num == 0:
        raise InvalidInput("target has zero energy")
    return _ratio_db(num, float(np.sum(n ** 2)))


def mse_tf(reference, estimate):
    """Per-bin ``<|s - y|^2>_t`` and its fullband sum for (F, T) arrays or one-channel spectrograms."""
    s = np.asarray(getattr(reference, "bins", reference))
    y = np.asarray(getattr(estimate, "bins", estimate))
    if s.shape != y.shape:
        raise InvalidInput(f"reference {s.shape} and estimate {y.shape} differ in shape")
    if s.ndim == 3:
        if s.shape[0] != 1:
            raise InvalidInput("mse_tf expects a single channel")
        s, y = s[0], y[0]
    per_bin = np.mean(np.abs(s - y) ** 2, axis=-1)
    return per_bin, float(per_bin.sum())


@dataclass
class MetricReport:
    sdr_db: float
    si_sdr_db: float
    snr_db: float = float("nan")
    mse: float = float("nan")
    label: str = ""
    per_bin_mse: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def csv_row(self):
        return [self.label, repr(self.sdr_db), repr(self.si_sdr_db), repr(self.snr_db), repr(self.mse)]

    @staticmethod
    def csv_header():
        return ["label", "sdr_db", "si_sdr_db", "snr_db", "mse"]

    @classmethod
    def to_csv(cls, reports):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cls.csv_header())
        for r in reports:
            writer.writerow(r.csv_row())
        return buf.getvalue()


def evaluate(reference, estimate, noise=None, ref_spec=None, est_spec=None, label=""):
    """Bundle the metrics for one utterance into a :class:`MetricReport`."""
    report = MetricReport(sdr_db(reference, estimate), si_sdr_db(reference, estimate), label=label)
    if noise is not None:
        report.snr_db = snr_db(reference, noise)
    if ref_spec is not None and est_spec is not None:
        per_bin, total = mse_tf(ref_spec, est_spec)
        report.mse = total
        report.per_bin_mse = per_bin.tolist()
    return report
