import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtmvdr.beamformer import BeamformerWeights, apply, save_weights, solve_multitap_mvdr, solve_mvdr
from mtmvdr.covariance import CovarianceStack, stack_taps
from mtmvdr.signal import ComplexSpectrogram, StftConfig
from mtmvdr.tensor_io import load_tensor

from conftest import crandn, random_hpd
from oracles import kkt_mvdr

CFG = StftConfig(fft_size=8, window_len=8, hop=4)


def stacks(ss, nn, taps=1, channels=None):
    ss, nn = np.asarray(ss, dtype=complex), np.asarray(nn, dtype=complex)
    if ss.ndim == 2:
        ss, nn = ss[None], nn[None]
    channels = channels or ss.shape[-1] // taps
    return (CovarianceStack(ss, taps, channels, "speech"), CovarianceStack(nn, taps, channels, "noise"))


def rank_one(rng, d, ref=0):
    v = crandn(rng, d)
    v /= v[ref]
    return v, np.outer(v, v.conj())


def test_hand_computed_two_mic():
    v = np.array([1.0, 1.0])
    w = solve_mvdr(*stacks(np.outer(v, v), np.eye(2)), ref_channel=0, loading=0.0).weights[0]
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-15)
    assert np.vdot(w, v) == pytest.approx(1.0)


def test_temporal_only_filter():
    v = np.array([1.0, 1.0])
    w = solve_multitap_mvdr(*stacks(np.outer(v, v), np.eye(2), taps=2, channels=1), loading=0.0)
    np.testing.assert_allclose(w.weights[0], [0.5, 0.5], atol=1e-15)
    np.testing.assert_array_equal(w.selector, [1.0, 0.0])


@pytest.mark.parametrize("c", [0.1, 1.0, 10.0])
def test_noise_scaling_invariance(rng, c):
    _, ss = rank_one(rng, 4)
    nn = random_hpd(rng, 4)
    a = solve_mvdr(*stacks(ss, nn)).weights
    b = solve_mvdr(*stacks(ss, c * nn)).weights
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_matches_closed_form_constrained_solution(rng):
    for _ in range(20):
        v, ss = rank_one(rng, 4, ref=2)
        nn = random_hpd(rng, 4)
        w = solve_mvdr(*stacks(3.0 * ss, nn), ref_channel=2, loading=0.0).weights[0]
        inv_v = np.linalg.solve(nn, v)
        np.testing.assert_allclose(w, inv_v / np.vdot(v, inv_v), atol=1e-8)


def test_multitap_equals_lagrangian_solution(rng):
    v, ss = rank_one(rng, 9, ref=1)
    nn = random_hpd(rng, 9)
    w = solve_multitap_mvdr(*stacks(ss, nn, taps=3, channels=3), ref_channel=1, loading=0.0).weights[0]
    np.testing.assert_allclose(w, kkt_mvdr(nn, v), atol=1e-9)
    candidates = w[None] + _orthogonal_perturbations(rng, v, 50)
    base = np.real(np.vdot(w, nn @ w))
    others = np.real(np.einsum("kd,de,ke->k", candidates.conj(), nn, candidates))
    assert np.all(others >= base - 1e-9)


def _orthogonal_perturbations(rng, v, count):
    r = crandn(rng, count, v.size)
    return r - np.outer(r @ v.conj(), v) / np.vdot(v, v)


def test_single_tap_multitap_identity(rng):
    for d in (2, 4):
        pair = stacks(random_hpd(rng, d), random_hpd(rng, d))
        np.testing.assert_allclose(solve_multitap_mvdr(*pair).weights, solve_mvdr(*pair).weights, atol=1e-12)


def test_solve_mvdr_rejects_taps(rng):
    with pytest.raises(ValueError):
        solve_mvdr(*stacks(random_hpd(rng, 4), random_hpd(rng, 4), taps=2, channels=2))


def test_non_finite_rejected(rng):
    nn = random_hpd(rng, 3)
    nn[0, 0] = np.nan
    with pytest.raises(ValueError):
        solve_mvdr(*stacks(random_hpd(rng, 3), nn))


def test_zero_target_falls_back_to_selector(rng):
    ss = np.zeros((2, 3, 3), dtype=complex)
    nn = np.stack([random_hpd(rng, 3)] * 2)
    ss[1] = random_hpd(rng, 3)
    w = solve_mvdr(*stacks(ss, nn), ref_channel=2)
    assert w.fallback_bins == (0,)
    np.testing.assert_array_equal(w.weights[0], [0, 0, 1])


def test_singular_noise_takes_pinv_route(rng):
    # all-zero noise at one bin: loading is relative, so the matrix stays singular
    _, ss = rank_one(rng, 3)
    w = solve_mvdr(*stacks(ss, np.zeros((3, 3))))
    assert np.isfinite(w.weights).all()
    np.testing.assert_array_equal(w.weights[0], [1, 0, 0])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 3, 6]), sigma=st.floats(1e-2, 1e2))
def test_distortionless_property(seed, d, sigma):
    rng = np.random.default_rng(seed)
    v, ss = rank_one(rng, d)
    w = solve_mvdr(*stacks(sigma * ss, random_hpd(rng, d))).weights[0]
    assert abs(np.vdot(w, v) - 1) < 1e-6


def test_apply_selector_passes_reference_through(rng):
    y = ComplexSpectrogram(crandn(rng, 6, 5, 3), CFG)
    out = apply(BeamformerWeights.passthrough(5, 3, ref_channel=1), y)
    np.testing.assert_array_equal(out.bins[:, :, 0], y.bins[:, :, 1])


def test_apply_average_of_identical_channels(rng):
    x = crandn(rng, 6, 5, 1)
    y = ComplexSpectrogram(np.concatenate([x, x], axis=2), CFG)
    out = apply(BeamformerWeights(np.full((5, 2), 0.5), 1, 2), y)
    np.testing.assert_allclose(out.bins, x, atol=1e-15)


@pytest.mark.parametrize("taps", [1, 3])
def test_apply_matches_loop(rng, taps):
    y = ComplexSpectrogram(crandn(rng, 7, 5, 2), CFG)
    w = BeamformerWeights(crandn(rng, 5, 2 * taps), taps, 2)
    out = apply(w, y).bins[:, :, 0]
    stacked = stack_taps(y, taps).bins
    want = np.zeros((7, 5), dtype=complex)
    for t in range(7):
        for f in range(5):
            want[t, f] = sum(np.conj(w.weights[f, d]) * stacked[t, f, d] for d in range(2 * taps))
    np.testing.assert_allclose(out, want, atol=1e-12)


def test_apply_dimension_mismatch(rng):
    y = ComplexSpectrogram(crandn(rng, 7, 5, 2), CFG)
    with pytest.raises(ValueError):
        apply(BeamformerWeights.passthrough(5, 3), y)


def test_weights_file(tmp_path, rng):
    w = BeamformerWeights(crandn(rng, 5, 6), 3, 2, 1, (4,))
    save_weights(tmp_path / "w.bin", w)
    values, meta = load_tensor(tmp_path / "w.bin")
    np.testing.assert_array_equal(values, w.weights)
    assert meta == {"taps": 3, "channels": 2, "ref_channel": 1, "fallback_bins": [4]}
