"""The three experiments: peak performance, mask transfer and oracle masks.

Each ``run_exp*`` returns an :class:`ExperimentResult` holding one
:class:`ResultRow` per (scene, method, mask, multiplier) plus the gate
outcomes. :func:`emit_report` writes the CSV / JSON / text files and returns
the process exit code. Gates only apply to the synthetic suite; numbers from
a user-supplied dataset are reported but never gated.

exp1 persists its optimized masks under ``<out>/masks`` together with a
manifest carrying a checksum of every setting that influences them. exp2 and
exp3 reuse those masks (running exp1 first when they are missing) and abort
on a checksum mismatch.
"""
import configparser
import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import container
from . import masks as masklib
from .beamformers import (
    MASK_METHODS,
    MethodId,
    Observation,
    apply_filter,
    estimate_filter,
    filter_ideal_mwf,
    ideal_scale,
    target_reference,
)
from .errors import DatasetError, InvalidConfig
from .mask_optimizer import GradientMode, OptimizerConfig, optimize
from .masks import MaskSet
from .metrics import mse_tf, sdr_db, si_sdr_db, snr_db
from .scene_gen import default_suite, list_chime_utterances, load_chime_scene, synth_scene, with_multiplier
from .tf_transform import StftConfig, istft, single_channel

log = logging.getLogger(__name__)

EXPERIMENTS = ("exp1", "exp2", "exp3")
FULL_FRAMING = (1024, 256)

# gate tolerances
PEAK_SDR_TOL_DB = 0.3
UPPER_BOUND_TOL = 1e-9
CONVERSION_TOL_DB = 1e-6
TRANSFER_SLACK_DB = 0.05
DEGRADE_FRACTION = 0.8
IRM_IDENTITY_TOL_DB = 1e-9
ORACLE_GAP_DB = 0.2


@dataclass
class ExperimentConfig:
    experiment: str = "exp1"
    n_scenes: int = 10
    n_mics: int = 4
    duration: float = 2.0
    sample_rate: int = 16000
    window_len: int = 256
    hop_len: int = 64
    multipliers: tuple = (1.0, 2.0, 4.0)
    methods: tuple = MASK_METHODS
    seed: int = 0
    dataset_root: str = None
    max_utterances: int = 0
    dataset_ref_mic: int = 4
    dataset_channels: int = 6
    workers: int = 1
    out_dir: str = "results"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidConfig(f"experiment must be one of {EXPERIMENTS}")
        if self.n_scenes < 1:
            raise InvalidConfig("n_scenes must be >= 1")
        self.multipliers = tuple(float(m) for m in self.multipliers)
        if not self.multipliers or any(m < 0 for m in self.multipliers):
            raise InvalidConfig("multipliers must be a nonempty list of nonnegative values")
        self.methods = tuple(MethodId.parse(m) if not isinstance(m, MethodId) else m
                             for m in self.methods)
        bad = [m for m in self.methods if m not in MASK_METHODS]
        if bad:
            raise InvalidConfig(f"not a mask-based method: {bad[0].value}")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")
        StftConfig(self.window_len, self.hop_len)

    @property
    def synthetic(self):
        return not self.dataset_root

    @property
    def stft_config(self):
        return StftConfig(self.window_len, self.hop_len)

    def checksum(self):
        """Digest of every setting that changes the optimized masks."""
        opt = asdict(self.optimizer)
        opt["gradient_mode"] = self.optimizer.gradient_mode.value
        opt["init"] = self.optimizer.init.value
        payload = {
            "scenes": [self.n_scenes, self.n_mics, self.duration, self.sample_rate, self.seed],
            "stft": [self.window_len, self.hop_len],
            "multipliers": list(self.multipliers),
            "methods": [m.value for m in self.methods],
            "dataset": [self.dataset_root or "", self.max_utterances,
                        self.dataset_ref_mic, self.dataset_channels],
            "optimizer": opt,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _split(text):
    return [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]


def _section_kwargs(parser, section, cls, reserved):
    """Typed keyword arguments for ``cls`` from one INI section."""
    out = {}
    if not parser.has_section(section):
        return out
    known = {f.name: f for f in fields(cls)}
    for key, raw in parser[section].items():
        if key not in known or key in reserved:
            raise InvalidConfig(f"unknown {section} setting {key!r}")
        default = known[key].default
        if key == "multipliers":
            out[key] = tuple(float(v) for v in _split(raw))
        elif key == "methods":
            out[key] = tuple(_split(raw))
        elif isinstance(default, bool):
            out[key] = raw.strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(default, int):
            out[key] = int(raw)
        elif isinstance(default, float):
            out[key] = float(raw)
        else:
            out[key] = raw.strip() or None
    return out


def load_experiment_config(path=None, **overrides):
    """Read ``[experiment]`` and ``[optimizer]`` sections from an INI file, then apply overrides.

    ``None`` overrides are ignored so CLI flags that were not given keep the
    file's values.
    """
    parser = configparser.ConfigParser()
    if path is not None and not parser.read(path):
        raise InvalidConfig(f"cannot read experiment config {path}")
    try:
        exp_kwargs = _section_kwargs(parser, "experiment", ExperimentConfig, {"optimizer"})
        opt_kwargs = _section_kwargs(parser, "optimizer", OptimizerConfig, set())
    except ValueError as exc:
        raise InvalidConfig(f"bad value in {path}: {exc}") from exc
    for key in ("iterations", "gradient_mode"):
        value = overrides.pop(key, None)
        if value is not None:
            opt_kwargs[key] = value
    if overrides.pop("full_framing", False):
        exp_kwargs["window_len"], exp_kwargs["hop_len"] = FULL_FRAMING
    seed = overrides.get("seed")
    if seed is not None:
        opt_kwargs.setdefault("seed", seed)
    exp_kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        opt = OptimizerConfig(**opt_kwargs)
        return ExperimentConfig(optimizer=opt, **exp_kwargs)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(str(exc)) from exc


# -- results --------------------------------------------------------------------

@dataclass
class ResultRow:
    experiment: str
    scene: str
    method: str
    mask: str
    multiplier: float
    sdr_db: float
    si_sdr_db: float
    mse: float
    iterations: int

    @staticmethod
    def header():
        return [f.name for f in fields(ResultRow)]

    def cells(self):
        return [self.experiment, self.scene, self.method, self.mask, repr(self.multiplier),
                repr(self.sdr_db), repr(self.si_sdr_db), repr(self.mse), str(self.iterations)]


@dataclass
class Gate:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)


@dataclass
class ExperimentResult:
    experiment: str
    rows: list
    gates: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    per_bin: dict = field(default_factory=dict)

    def select(self, method=None, mask=None, multiplier=None):
        return [r for r in self.rows
                if (method is None or r.method == method)
                and (mask is None or r.mask == mask)
                and (multiplier is None or r.multiplier == multiplier)]

    def sdr(self, scene, method, mask, multiplier):
        for r in self.rows:
            if (r.scene, r.method, r.mask, r.multiplier) == (scene, method, mask, multiplier):
                return r.sdr_db
        raise KeyError((scene, method, mask, multiplier))

    @property
    def passed(self):
        return all(g.passed for g in self.gates)


# -- scenes -------------------------------------------------------------------

@dataclass(frozen=True)
class SceneKey:
    index: int
    label: str
    multiplier: float


def scene_keys(config):
    if config.synthetic:
        labels = [f"synth{i:02d}" for i in range(config.n_scenes)]
    else:
        labels = list_chime_utterances(config.dataset_root)
        if config.max_utterances:
            labels = labels[: config.max_utterances]
    return [SceneKey(i, lab, m) for i, lab in enumerate(labels) for m in config.multipliers]


def build_scene(config, key):
    if config.synthetic:
        base = default_suite(config.n_scenes, config.n_mics, config.duration, config.sample_rate,
                             config.window_len, config.hop_len, config.seed)[key.index]
        return synth_scene(with_multiplier(base, key.multiplier))
    return load_chime_scene(config.dataset_root, key.label, key.multiplier,
                            config.dataset_channels, config.dataset_ref_mic, config.stft_config)


# -- evaluation -----------------------------------------------------------------

def score_filter(scene, filt, obs=None):
    """Ideally scaled output of ``filt`` scored against the reference-channel target.

    Returns ``(sdr, si_sdr, fullband mse, per-bin mse)``; SDRs are computed
    on the time signal after inverse STFT.
    """
    x = obs if obs is not None else scene.x_spec
    s_k = target_reference(scene.s_spec, scene.ref_mic)
    scaled = ideal_scale(apply_filter(filt, x), s_k)
    per_bin, total = mse_tf(s_k, scaled.y)
    y_time = istft(single_channel(scaled.y, scene.x_spec)).samples[0]
    s_time = scene.s.samples[scene.ref_mic]
    return sdr_db(s_time, y_time), si_sdr_db(s_time, y_time), total, per_bin


def _row(exp, key, method, mask, score, iterations):
    return ResultRow(exp, key.label, method, mask, key.multiplier,
                     score[0], score[1], score[2], iterations)


def mask_path(mask_dir, key, method, role):
    return Path(mask_dir) / f"{key.label}_x{key.multiplier:g}_{method.value}_{role}.mbf"


def _exp1_unit(config, key):
    scene = build_scene(config, key)
    obs = Observation(scene.x_spec, config.optimizer.loading)
    out = {"rows": [], "masks": {}, "per_bin": {}, "warnings": [], "snr": None}
    if not config.synthetic:
        ref = scene.ref_mic
        out["snr"] = snr_db(scene.s.samples[ref], scene.n.samples[ref])
    ideal = filter_ideal_mwf(obs, scene.s_spec, scene.ref_mic)
    score = score_filter(scene, ideal, obs)
    out["rows"].append(_row("exp1", key, MethodId.IDEAL_MWF.value, "-", score, 0))
    out["per_bin"][MethodId.IDEAL_MWF.value] = score[3]
    for method in config.methods:
        trace = optimize(method, scene, config=config.optimizer, obs=obs)
        filt = estimate_filter(method, obs, trace.masks, ref_mic=scene.ref_mic)
        score = score_filter(scene, filt, obs)
        out["rows"].append(_row("exp1", key, method.value, f"optimized:{method.value}",
                                score, trace.iterations))
        out["per_bin"][method.value] = score[3]
        out["masks"][method.value] = {r: getattr(trace.masks, r) for r in method.roles}
        out["warnings"] += [f"{key.label} x{key.multiplier:g} {method.value}: {w}"
                            for w in trace.warnings]
    return out


def _map(config, fn, keys):
    """Run ``fn(config, key)`` for every key; results come back in key order."""
    if config.workers > 1 and len(keys) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(fn, [config] * len(keys), keys))
    return [fn(config, k) for k in keys]


def _write_masks(config, keys, units):
    mask_dir = Path(config.out_dir) / "masks"
    mask_dir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for key, unit in zip(keys, units):
        for method_value, roles in unit["masks"].items():
            method = MethodId.parse(method_value)
            for role, m in roles.items():
                path = mask_path(mask_dir, key, method, role)
                blob = container.to_bytes(m)
                path.write_bytes(blob)
                entries[path.name] = hashlib.sha256(blob).hexdigest()
    manifest = {"checksum": config.checksum(), "files": entries}
    (mask_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def run_exp1(config):
    """Optimize every method's masks on every scene and multiplier; also score the ideal MWF."""
    config = replace(config, experiment="exp1")
    keys = scene_keys(config)
    units = _map(config, _exp1_unit, keys)
    rows = [r for u in units for r in u["rows"]]
    result = ExperimentResult("exp1", rows)
    for key, unit in zip(keys, units):
        for method, per_bin in unit["per_bin"].items():
            result.per_bin[(key.label, key.multiplier, method)] = per_bin
    result.info["warnings"] = [w for u in units for w in u["warnings"]]
    if not config.synthetic:
        result.info["snr_db"] = _mean_by_multiplier(
            [(k.multiplier, u["snr"]) for k, u in zip(keys, units)])
    _write_masks(config, keys, units)
    if config.synthetic:
        result.gates = exp1_gates(result, config)
    return result


def _mean_by_multiplier(pairs):
    out = {}
    for m in sorted({p[0] for p in pairs}):
        out[f"x{m:g}"] = float(np.mean([v for mm, v in pairs if mm == m]))
    return out


def exp1_gates(result, config):
    gates = []
    ideal = MethodId.IDEAL_MWF.value
    for mult in config.multipliers:
        ref = np.mean([r.sdr_db for r in result.select(ideal, multiplier=mult)])
        for method in config.methods:
            got = np.mean([r.sdr_db for r in result.select(method.value, multiplier=mult)])
            gates.append(Gate(f"exp1 peak x{mult:g} {method.value}",
                              abs(got - ref) <= PEAK_SDR_TOL_DB,
                              f"mean SDR {got:.4f} dB vs ideal {ref:.4f} dB"))
    worst = 0.0
    for (label, mult, method), per_bin in result.per_bin.items():
        if method == ideal:
            continue
        worst = max(worst, float(np.max(result.per_bin[(label, mult, ideal)] - per_bin)))
    gates.append(Gate("exp1 ideal MWF upper bound per bin", worst <= UPPER_BOUND_TOL,
                      f"largest per-bin MSE advantage over the ideal MWF {worst:.3e}"))
    return gates


# -- persisted masks ------------------------------------------------------------

def load_optimized_masks(config, keys):
    """Masks persisted by exp1 for ``config``; ``None`` when absent."""
    mask_dir = Path(config.out_dir) / "masks"
    manifest_path = mask_dir / "manifest.json"
    if not manifest_path.exists():
        return None
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("checksum") != config.checksum():
        raise InvalidConfig(
            f"masks in {mask_dir} were produced by a different configuration "
            f"(checksum {manifest.get('checksum', '?')[:12]} != {config.checksum()[:12]}); "
            "rerun exp1 or use another output directory")
    out = {}
    for key in keys:
        for method in MASK_METHODS:
            roles = {}
            for role in method.roles:
                path = mask_path(mask_dir, key, method, role)
                if path.name not in manifest["files"]:
                    continue
                if not path.exists():
                    raise DatasetError(f"mask file listed in the manifest is missing: {path}", path)
                blob = path.read_bytes()
                if hashlib.sha256(blob).hexdigest() != manifest["files"][path.name]:
                    raise InvalidConfig(f"mask file {path} does not match its manifest checksum")
                roles[role] = container.from_bytes(blob)
            if roles:
                out[(key, method)] = MaskSet(**roles)
    return out


def _require_masks(config, keys):
    stored = load_optimized_masks(config, keys)
    if stored is None:
        log.info("no stored optimal masks in %s, running exp1 first", config.out_dir)
        exp1 = run_exp1(config)
        emit_report(exp1, Path(config.out_dir) / "exp1")
        stored = load_optimized_masks(config, keys)
    return stored


# -- exp2 -----------------------------------------------------------------------

# (source, destination, rule) with rule naming the role carried or the conversion
TRANSFERS = (
    (MethodId.MAX_SNR, MethodId.MAX_SOR, "m_s"),
    (MethodId.MAX_SNR, MethodId.MIN_NOR, "m_n"),
    (MethodId.MAX_SOR, MethodId.MIN_NOR, "mn_from_ms"),
    (MethodId.MIN_NOR, MethodId.MAX_SOR, "ms_from_mn"),
    (MethodId.MAX_SOR, MethodId.MASK_MWF, "m_s"),
    (MethodId.MASK_MWF, MethodId.MAX_SOR, "m_s"),
)


def transfer_masks(masks, rule):
    if rule == "m_s":
        return MaskSet(m_s=masks.m_s)
    if rule == "m_n":
        return MaskSet(m_n=masks.m_n)
    if rule == "mn_from_ms":
        return MaskSet(m_n=masklib.mn_from_ms(masks.m_s))
    if rule == "ms_from_mn":
        return MaskSet(m_s=masklib.ms_from_mn(masks.m_n))
    raise InvalidConfig(f"unknown transfer rule {rule!r}")


def transfer_label(src, rule):
    return f"{src.value}:{rule}"


def _exp2_unit(config, key, stored):
    scene = build_scene(config, key)
    obs = Observation(scene.x_spec, config.optimizer.loading)
    rows = []
    needed = sorted({m for t in TRANSFERS for m in t[:2]}, key=lambda m: MASK_METHODS.index(m))
    for method in needed:
        filt = estimate_filter(method, obs, stored[(key, method)], ref_mic=scene.ref_mic)
        rows.append(_row("exp2", key, method.value, f"optimized:{method.value}",
                         score_filter(scene, filt, obs), 0))
    for src, dst, rule in TRANSFERS:
        masks = transfer_masks(stored[(key, src)], rule)
        filt = estimate_filter(dst, obs, masks, ref_mic=scene.ref_mic)
        rows.append(_row("exp2", key, dst.value, transfer_label(src, rule),
                         score_filter(scene, filt, obs), 0))
    return rows


def _exp2_task(args):
    return _exp2_unit(*args)


def run_exp2(config):
    """Apply each method's optimal mask to another method (six transfer rows per scene)."""
    config = replace(config, experiment="exp2")
    missing = {m for t in TRANSFERS for m in t[:2]} - set(config.methods)
    if missing:
        raise InvalidConfig(f"exp2 needs optimized masks for {sorted(m.value for m in missing)}")
    keys = scene_keys(config)
    stored = _require_masks(config, keys)
    args = [(config, k, {kk: v for kk, v in stored.items() if kk[0] == k}) for k in keys]
    if config.workers > 1 and len(keys) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_exp2_task, args))
    else:
        parts = [_exp2_task(a) for a in args]
    result = ExperimentResult("exp2", [r for p in parts for r in p])
    if config.synthetic:
        result.gates = exp2_gates(result, config, keys)
    return result


def exp2_gates(result, config, keys):
    gates = []
    labels = sorted({k.label for k in keys})
    for src, dst, rule in TRANSFERS:
        tag = transfer_label(src, rule)
        own = f"optimized:{dst.value}"
        src_own = f"optimized:{src.value}"
        for mult in config.multipliers:
            moved = np.array([result.sdr(l, dst.value, tag, mult) for l in labels])
            dest = np.array([result.sdr(l, dst.value, own, mult) for l in labels])
            source = np.array([result.sdr(l, src.value, src_own, mult) for l in labels])
            name = f"exp2 x{mult:g} {src.value}->{dst.value} ({rule})"
            if rule in ("mn_from_ms", "ms_from_mn"):
                gap = float(np.max(np.abs(moved - dest)))
                gates.append(Gate(f"{name} matches destination optimum", gap <= CONVERSION_TOL_DB,
                                  f"max |SDR - destination optimized SDR| {gap:.3e} dB"))
                gap_src = float(np.max(np.abs(moved - source)))
                gates.append(Gate(f"{name} reproduces source filter", gap_src <= CONVERSION_TOL_DB,
                                  f"max |SDR - source optimized SDR| {gap_src:.3e} dB"))
            elif dst is MethodId.MASK_MWF or src is MethodId.MASK_MWF:
                worse = int(np.sum(moved < dest))
                need = int(np.ceil(DEGRADE_FRACTION * len(labels)))
                gates.append(Gate(f"{name} degrades", worse >= need,
                                  f"below destination optimum on {worse}/{len(labels)} scenes"))
            else:
                excess = float(np.max(moved - dest))
                gates.append(Gate(f"{name} never beats destination optimum",
                                  excess <= TRANSFER_SLACK_DB,
                                  f"largest excess {excess:.4f} dB"))
    return gates


# -- exp3 -----------------------------------------------------------------------

ORACLE_MASKS = (("irm1", "IRM(beta=1)"), ("irm0.5", "IRM(beta=0.5)"), ("smm", "SMM"))


def oracle_masks(scene, kind):
    if kind == "irm1":
        return masklib.irm(scene.s_spec, scene.n_spec, scene.ref_mic, 1.0)
    if kind == "irm0.5":
        return masklib.irm(scene.s_spec, scene.n_spec, scene.ref_mic, 0.5)
    if kind == "smm":
        return masklib.smm(scene.s_spec, scene.n_spec, scene.ref_mic)
    raise InvalidConfig(f"unknown oracle mask {kind!r}")


def _exp3_unit(config, key, stored):
    scene = build_scene(config, key)
    obs = Observation(scene.x_spec, config.optimizer.loading)
    rows = []
    for method in config.methods:
        filt = estimate_filter(method, obs, stored[(key, method)], ref_mic=scene.ref_mic)
        rows.append(_row("exp3", key, method.value, f"optimized:{method.value}",
                         score_filter(scene, filt, obs), 0))
        for kind, _ in ORACLE_MASKS:
            masks = oracle_masks(scene, kind)
            filt = estimate_filter(method, obs, masks, ref_mic=scene.ref_mic)
            rows.append(_row("exp3", key, method.value, kind, score_filter(scene, filt, obs), 0))
    return rows


def _exp3_task(args):
    return _exp3_unit(*args)


def run_exp3(config):
    """Score every method with IRM(beta=1), IRM(beta=0.5) and SMM masks."""
    config = replace(config, experiment="exp3")
    keys = scene_keys(config)
    stored = _require_masks(config, keys)
    args = [(config, k, {kk: v for kk, v in stored.items() if kk[0] == k}) for k in keys]
    if config.workers > 1 and len(keys) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_exp3_task, args))
    else:
        parts = [_exp3_task(a) for a in args]
    result = ExperimentResult("exp3", [r for p in parts for r in p])
    if config.synthetic:
        result.gates = exp3_gates(result, config, keys)
    return result


def exp3_gates(result, config, keys):
    gates = []
    labels = sorted({k.label for k in keys})
    for method in config.methods:
        own = f"optimized:{method.value}"
        for kind, name in ORACLE_MASKS:
            gaps = np.array([result.sdr(l, method.value, own, m) - result.sdr(l, method.value, kind, m)
                             for l in labels for m in config.multipliers])
            gates.append(Gate(f"exp3 {method.value} {name} never beats optimized",
                              bool(np.all(gaps >= 0)), f"smallest gap {gaps.min():.4f} dB"))
            gates.append(Gate(f"exp3 {method.value} {name} median gap",
                              float(np.median(gaps)) >= ORACLE_GAP_DB,
                              f"median gap {np.median(gaps):.4f} dB"))
    gev = [m for m in (MethodId.MAX_SNR, MethodId.MAX_SOR, MethodId.MIN_NOR) if m in config.methods]
    if len(gev) > 1:
        spread = 0.0
        for l in labels:
            for m in config.multipliers:
                vals = [result.sdr(l, g.value, "irm1", m) for g in gev]
                spread = max(spread, max(vals) - min(vals))
        gates.append(Gate("exp3 IRM(beta=1) identical across GEV methods",
                          spread <= IRM_IDENTITY_TOL_DB, f"largest spread {spread:.3e} dB"))
    return gates


RUNNERS = {"exp1": run_exp1, "exp2": run_exp2, "exp3": run_exp3}


def run_experiment(config):
    return RUNNERS[config.experiment](config)


# -- reporting --------------------------------------------------------------------

def summarize(result):
    """Mean SDR / SI-SDR / MSE per (method, mask, multiplier) cell."""
    cells = {}
    for r in result.rows:
        cells.setdefault((r.method, r.mask, r.multiplier), []).append(r)
    out = []
    for (method, mask, mult), rows in sorted(cells.items()):
        out.append({
            "method": method, "mask": mask, "multiplier": mult, "n": len(rows),
            "sdr_db": float(np.mean([r.sdr_db for r in rows])),
            "si_sdr_db": float(np.mean([r.si_sdr_db for r in rows])),
            "mse": float(np.mean([r.mse for r in rows])),
        })
    return out


def render_table(result):
    """Plain-text table: one line per (method, mask), one column per multiplier."""
    summary = summarize(result)
    mults = sorted({c["multiplier"] for c in summary})
    lines = {}
    for c in summary:
        lines.setdefault((c["method"], c["mask"]), {})[c["multiplier"]] = c["sdr_db"]
    head = f"{'method':<10} {'mask':<22}" + "".join(f"{'x' + format(m, 'g'):>10}" for m in mults)
    out = [f"{result.experiment}: mean SDR [dB]", head, "-" * len(head)]
    for (method, mask), vals in lines.items():
        label = MethodId.parse(method).label
        out.append(f"{label:<10} {mask:<22}"
                   + "".join(f"{vals[m]:>10.3f}" if m in vals else f"{'':>10}" for m in mults))
    if result.gates:
        out.append("")
        for g in result.gates:
            out.append(f"[{'PASS' if g.passed else 'FAIL'}] {g.name}: {g.detail}")
    for key, value in result.info.items():
        if key != "warnings":
            out.append(f"{key}: {value}")
    return "\n".join(out) + "\n"


def emit_report(result, out_dir):
    """Write ``results.csv``, ``summary.json`` and ``table.txt``; return the exit code."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ResultRow.header())
        for r in result.rows:
            writer.writerow(r.cells())
    summary = {
        "experiment": result.experiment,
        "cells": summarize(result),
        "gates": [asdict(g) for g in result.gates],
        "info": result.info,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    (out_dir / "table.txt").write_text(render_table(result))
    return 0 if result.passed else 1


def gradient_mode(text):
    return GradientMode.parse(text) if text is not None else None
