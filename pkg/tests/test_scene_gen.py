import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskbf.errors import DatasetError, InvalidConfig
from maskbf.metrics import snr_db
from maskbf.scene_gen import (
    PINK_LOW_HZ,
    SceneSpec,
    colored_noise,
    default_suite,
    export_scene,
    list_chime_utterances,
    load_chime_scene,
    load_scene_spec,
    synth_scene,
    with_multiplier,
)
from maskbf.tf_transform import StftConfig, TimeSignal
from maskbf.wavio import read_multichannel, write_multichannel

SMALL = dict(n_mics=3, duration=0.2, window_len=64, hop_len=16, max_delay=4.0)


@settings(max_examples=10)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.5, 1.0, 2.0, 4.0]))
def test_scene_is_additive(seed, mult):
    scene = synth_scene(SceneSpec(seed=seed, bg_multiplier=mult, **SMALL))
    np.testing.assert_allclose(scene.x.samples, scene.s.samples + scene.n.samples, atol=1e-9)
    total = scene.s_spec.bins + scene.n_spec.bins
    scale = np.abs(total).max()
    np.testing.assert_allclose(scene.x_spec.bins, total, atol=1e-6 * scale)


def test_zero_multiplier_is_clean():
    scene = synth_scene(SceneSpec(seed=1, bg_multiplier=0.0, **SMALL))
    np.testing.assert_array_equal(scene.x.samples, scene.s.samples)


def test_multiplier_doubling_shifts_snr():
    spec = SceneSpec(seed=4, **SMALL)
    snrs = []
    for mult in (1.0, 2.0, 4.0):
        scene = synth_scene(with_multiplier(spec, mult))
        snrs.append(snr_db(scene.s.samples[0], scene.n.samples[0]))
    assert snrs[0] == pytest.approx(spec.snr_db, abs=1e-9)
    np.testing.assert_allclose(np.diff(snrs), -6.0206, atol=1e-4)


def test_scene_is_deterministic():
    a = synth_scene(SceneSpec(seed=11, **SMALL))
    b = synth_scene(SceneSpec(seed=11, **SMALL))
    assert a.x.samples.tobytes() == b.x.samples.tobytes()
    assert a.n.samples.tobytes() == b.n.samples.tobytes()
    c = synth_scene(SceneSpec(seed=12, **SMALL))
    assert not np.array_equal(a.x.samples, c.x.samples)


def test_explicit_geometry_and_label():
    spec = SceneSpec(n_mics=2, duration=0.1, window_len=64, hop_len=16, n_noise_sources=1,
                     target_delays=(0.0, 2.0), target_gains=(1.0, 0.5),
                     noise_delays=((1.0, 0.0),), noise_gains=((1.0, 1.0),), label="geo")
    scene = synth_scene(spec)
    assert scene.label == "geo"
    # half-gain copy of the target two samples later on the second microphone
    s = scene.s.samples
    np.testing.assert_allclose(s[1, 100:-100], 0.5 * s[0, 98:-102], atol=1e-9)


def test_pink_noise_band_limited():
    sr = 16000
    noise = colored_noise(np.random.default_rng(0), sr, "pink", sr)
    power = np.abs(np.fft.rfft(noise)) ** 2
    freqs = np.fft.rfftfreq(sr, 1 / sr)
    assert power[freqs < PINK_LOW_HZ].max() < 1e-20
    low = power[(freqs >= 100) & (freqs < 200)].mean()
    high = power[(freqs >= 1000) & (freqs < 2000)].mean()
    assert 5 < low / high < 20
    with pytest.raises(InvalidConfig):
        colored_noise(np.random.default_rng(0), 10, "brown")


@pytest.mark.parametrize("kwargs", [
    dict(n_mics=0), dict(duration=0.0), dict(bg_multiplier=-1.0), dict(ref_mic=3),
    dict(max_delay=64.0), dict(n_noise_sources=-1), dict(target_delays=(0.0,)),
])
def test_spec_validation(kwargs):
    with pytest.raises(InvalidConfig):
        synth_scene(SceneSpec(**{**SMALL, **kwargs}))


def test_load_scene_spec(tmp_path):
    path = tmp_path / "scene.ini"
    path.write_text("[scene]\nn_mics = 2\nduration = 0.1\nsnr_db = 3.5\nnoise_kind = white\n"
                    "noise_delays = 1,2;0,0.5\nnoise_gains = 1,1;0.5,0.5\n")
    spec = load_scene_spec(path)
    assert spec.n_mics == 2 and spec.snr_db == 3.5 and spec.noise_kind == "white"
    assert spec.noise_delays == ((1.0, 2.0), (0.0, 0.5))
    synth_scene(spec)
    path.write_text("[scene]\nmicrophones = 2\n")
    with pytest.raises(InvalidConfig):
        load_scene_spec(path)
    with pytest.raises(InvalidConfig):
        load_scene_spec(tmp_path / "missing.ini")


def test_default_suite():
    suite = default_suite(n_scenes=3, seed=2)
    assert [s.label for s in suite] == ["synth00", "synth01", "synth02"]
    assert len({s.seed for s in suite}) == 3
    assert all(s.n_mics == 4 and s.window_len == 256 and s.hop_len == 64 for s in suite)


def make_dataset(root, utt="u01", channels=3, n=800, sr=16000):
    rng = np.random.default_rng(5)
    clean = TimeSignal(0.1 * rng.standard_normal((channels, n)), sr)
    noise = TimeSignal(0.1 * rng.standard_normal((channels, n)), sr)
    write_multichannel(root / "clean" / utt, clean, "float32")
    write_multichannel(root / "noise" / utt, noise, "float32")
    return clean, noise


def test_chime_loader(tmp_path):
    (tmp_path / "clean").mkdir()
    (tmp_path / "noise").mkdir()
    clean, noise = make_dataset(tmp_path)
    cfg = StftConfig(window_len=64, hop_len=16)
    scene = load_chime_scene(tmp_path, "u01", 2.0, channels=3, ref_mic=1, stft_config=cfg)
    np.testing.assert_allclose(scene.s.samples, clean.samples, atol=1e-7)
    np.testing.assert_allclose(scene.x.samples, clean.samples + 2 * noise.samples, atol=1e-6)
    assert scene.ref_mic == 1 and scene.label == "u01"
    assert list_chime_utterances(tmp_path) == ["u01"]


def test_chime_loader_missing_files(tmp_path):
    with pytest.raises(DatasetError, match="nowhere"):
        load_chime_scene(tmp_path / "nowhere", "u01")
    (tmp_path / "clean").mkdir()
    with pytest.raises(DatasetError, match="u02"):
        load_chime_scene(tmp_path, "u02", channels=2)
    with pytest.raises(DatasetError):
        list_chime_utterances(tmp_path)


def test_export_scene(tmp_path):
    scene = synth_scene(SceneSpec(seed=3, **SMALL))
    paths = export_scene(scene, tmp_path)
    assert len(paths) == 9
    back = read_multichannel(tmp_path / f"{scene.label}_mix", 3)
    np.testing.assert_allclose(back.samples, scene.x.samples, atol=1e-6)
