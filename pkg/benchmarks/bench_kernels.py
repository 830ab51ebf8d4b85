"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Sizes mirror the workload of one 4 s, 15-microphone scene: a 3-tap
covariance over 251 frames x 257 bins, and an order-6 image-source RIR bank.
"""
import argparse
import timeit

import numpy as np

from mtmvdr import _kernels_py, kernels


def cases(rng):
    z = rng.standard_normal((251, 257, 45)) + 1j * rng.standard_normal((251, 257, 45))
    delays = rng.uniform(0, 8000, 1159)
    gains = rng.uniform(-0.05, 0.05, 1159)

    def pulses(impl):
        out = np.zeros(8200)
        impl.add_pulses(out, delays, gains, 40)
        return out

    return {
        "outer_sum T=251 F=257 D=45": lambda impl: impl.outer_sum(z),
        "add_pulses 1159 images": pulses,
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = {"python": _kernels_py}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled kernels unavailable; timing the NumPy fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<30} " + " ".join(f"{b:>12}" for b in backends) + f" {'speedup':>9}")
    for name, fn in cases(rng).items():
        results = {b: fn(impl) for b, impl in backends.items()}
        if len(results) == 2:
            np.testing.assert_allclose(results["cython"], results["python"], rtol=1e-10, atol=1e-12)
        times = {b: min(timeit.repeat(lambda impl=impl: fn(impl), number=1, repeat=args.repeat))
                 for b, impl in backends.items()}
        speedup = f"{times['python'] / times['cython']:>8.1f}x" if "cython" in times else f"{'-':>9}"
        print(f"{name:<30} " + " ".join(f"{times[b] * 1e3:>10.1f}ms" for b in backends) + f" {speedup}")


if __name__ == "__main__":
    main()
