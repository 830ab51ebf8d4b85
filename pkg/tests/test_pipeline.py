import numpy as np
import pytest

from mtmvdr.masks import MaskTensor, complex_mask
from mtmvdr.metrics import si_snr
from mtmvdr.pipeline import SYSTEMS, SystemSpec, enhance, enhance_scene, oracle_masks
from mtmvdr.roomsim import SceneConfig, render_scene
from mtmvdr.signal import stft


@pytest.fixture(scope="module")
def anechoic_scene():
    mics = [[2.8 + 0.05 * m, 3.0, 1.5] for m in range(6)]
    cfg = SceneConfig(room_dims=[6, 5, 3], source_positions=[[1.5, 1.5, 1.5]], mic_positions=mics,
                      reflection_order=0, snr_db=5.0, duration=1.0, seed=11)
    return render_scene(cfg)


@pytest.fixture(scope="module")
def reverberant_scene():
    mics = [[2.8 + 0.05 * m, 3.0, 1.5] for m in range(4)]
    cfg = SceneConfig(room_dims=[6, 5, 3], source_positions=[[1.5, 1.5, 1.5], [4.5, 1.2, 1.5]],
                      mic_positions=mics, reflection_order=3, sir_db=0.0, snr_db=20.0, duration=1.0, seed=3)
    return render_scene(cfg)


def _score(scene, out):
    return si_snr(out.samples[0], scene.target_reverberant.samples[0])


def test_oracle_mvdr_beats_mixture_anechoic(anechoic_scene):
    mix = si_snr(anechoic_scene.mixture.samples[0], anechoic_scene.target_reverberant.samples[0])
    for name in ("cm-mvdr", "relu-mvdr", "sigmoid-mvdr", "cm-mtmvdr"):
        assert _score(anechoic_scene, enhance_scene(anechoic_scene, name)) > mix, name


def test_cm_masking_reconstructs_target(reverberant_scene):
    out = enhance_scene(reverberant_scene, "cm-mask")
    assert si_snr(out, reverberant_scene.target_reverberant.channel(0)) > 60


def test_mixture_system_is_passthrough(reverberant_scene):
    out = enhance_scene(reverberant_scene, "mixture")
    np.testing.assert_array_equal(out.samples[0], reverberant_scene.mixture.samples[0])


def test_output_length_and_weights(reverberant_scene):
    res = enhance(reverberant_scene.mixture, SYSTEMS["cm-mtmvdr"], target=reverberant_scene.target_reverberant)
    assert res.output.samples.shape == (1, reverberant_scene.mixture.samples.shape[1])
    assert len(res.weights) == 1 and res.weights[0].weights.shape == (257, 12)
    assert res.chunks == [(0, stft(reverberant_scene.mixture).frame_count)]


def test_chunked_statistics(reverberant_scene):
    spec = SystemSpec(mask="cm", taps=2, chunk_seconds=0.25)
    res = enhance(reverberant_scene.mixture, spec, target=reverberant_scene.target_reverberant)
    frames = stft(reverberant_scene.mixture).frame_count
    assert res.chunks[0] == (0, 16) and res.chunks[-1][1] == frames
    assert len(res.weights) == len(res.chunks)
    assert np.isfinite(res.output.samples).all()


def test_imported_mask_matches_oracle(reverberant_scene):
    Y = stft(reverberant_scene.mixture)
    S = stft(reverberant_scene.target_reverberant)
    imported = MaskTensor(complex_mask(S, Y).values.copy(), "complex")
    system = SystemSpec(mask="cm", taps=1)
    a = enhance(reverberant_scene.mixture, system, target=reverberant_scene.target_reverberant).output
    b = enhance(reverberant_scene.mixture, system, speech_mask=imported).output
    # the complement of an exact complex mask equals the oracle noise mask up to rounding
    np.testing.assert_allclose(b.samples, a.samples, atol=1e-9)


def test_complement_policy_for_real_masks(reverberant_scene):
    Y, S = stft(reverberant_scene.mixture), stft(reverberant_scene.target_reverberant)
    N = Y.replace(Y.bins - S.bins)
    speech, noise = oracle_masks(Y, S, N, "relu", "complement")
    np.testing.assert_allclose(noise.values, np.maximum(1 - speech.values, 0))


def test_mask_shape_mismatch(reverberant_scene):
    bad = MaskTensor(np.ones((3, 257)), "relu")
    with pytest.raises(ValueError):
        enhance(reverberant_scene.mixture, SystemSpec(), speech_mask=bad)


def test_missing_target_and_bad_specs(reverberant_scene):
    with pytest.raises(ValueError):
        enhance(reverberant_scene.mixture, SystemSpec())
    with pytest.raises(ValueError):
        enhance(reverberant_scene.mixture, SystemSpec(ref_channel=9), target=reverberant_scene.target_reverberant)
    for kw in ({"mask": "ibm"}, {"noise_mask": "x"}, {"taps": 0}, {"loading": -1.0}, {"chunk_seconds": 0.0}):
        with pytest.raises(ValueError):
            SystemSpec(**kw)
