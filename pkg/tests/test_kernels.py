import numpy as np
import pytest

from mtmvdr import _kernels_py, kernels

from conftest import crandn


def test_outer_sum_matches_loop(rng, kernel_backend):
    z = crandn(rng, 6, 4, 3)
    got = kernels.outer_sum(z)
    want = np.zeros((4, 3, 3), dtype=complex)
    for t in range(6):
        for f in range(4):
            want[f] += np.outer(z[t, f], z[t, f].conj())
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_pulse_has_unit_dc_gain_and_correct_peak(kernel_backend):
    out = np.zeros(300)
    kernels.add_pulses(out, [139.94], [0.5])
    assert out.sum() == pytest.approx(0.5, abs=1e-12)
    assert out.argmax() == 140


def test_integer_delay_is_a_single_tap(kernel_backend):
    out = np.zeros(200)
    kernels.add_pulses(out, [100.0], [1.0])
    assert out[100] == pytest.approx(1.0, abs=1e-12)
    assert np.abs(np.delete(out, 100)).max() < 1e-12


def test_pulses_outside_buffer_are_clipped(kernel_backend):
    out = np.zeros(50)
    kernels.add_pulses(out, [-100.0, 500.0, 2.3], [1.0, 1.0, 1.0])
    assert np.isfinite(out).all() and out[2] > 0.5


@pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled kernels not built")
def test_backends_agree(rng):
    z = crandn(rng, 40, 33, 9)
    np.testing.assert_allclose(kernels.compiled_backend.outer_sum(z), _kernels_py.outer_sum(z), atol=1e-11)
    delays = rng.uniform(-50, 1050, 500)
    gains = rng.standard_normal(500)
    a, b = np.zeros(1000), np.zeros(1000)
    kernels.compiled_backend.add_pulses(a, delays, gains, 40)
    _kernels_py.add_pulses(b, delays, gains, 40)
    np.testing.assert_allclose(a, b, atol=1e-12)
