"""NumPy implementations of the hot loops, used when the extension is unavailable."""
import numpy as np


def outer_sum(z):
    """Sum over frames of z z^H for every frequency: (T, F, D) -> (F, D, D)."""
    return np.einsum("tfa,tfb->fab", z, z.conj(), optimize=True)


def add_pulses(out, delays, gains, half_width):
    """Add unit-DC-gain Hann-windowed sinc pulses at fractional ``delays`` (in samples)."""
    delays = np.asarray(delays, dtype=np.float64)
    if delays.size == 0:
        return
    n0 = np.floor(delays).astype(np.int64)
    offsets = np.arange(-half_width, half_width + 1)
    idx = n0[:, None] + offsets[None, :]
    x = idx - delays[:, None]
    ker = np.sinc(x) * 0.5 * (1.0 + np.cos(np.pi * x / (half_width + 1.0)))
    ker *= (np.asarray(gains, dtype=np.float64) / ker.sum(axis=1))[:, None]
    ok = (idx >= 0) & (idx < out.shape[0])
    np.add.at(out, idx[ok], ker[ok])
