"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 8,32,128] [--repeat 5]

Prints one row per (kernel, n) with the best-of-repeat time per call for
each backend and the speed ratio. Without a built extension only the
fallback column is filled.
"""
import argparse
import timeit

import numpy as np

from psman import kernels
from psman.linalg import random_orthogonal
from psman.manifold import PartitionSpec
from psman.mdpca import fit_mdpca
from psman.optim import OptimizerConfig
from psman.synthetic import planted_mdpca


def _time(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(n, rng):
    spec = PartitionSpec(n, (n // 4, n // 4, n // 4))
    q = random_orthogonal(n, 1)
    q2 = random_orthogonal(n, 2)
    z = rng.standard_normal((n, n))
    blocks = np.asarray(spec.block_offsets, dtype=np.intp)
    parts = np.asarray(spec.partition_offsets, dtype=np.intp)
    return {
        "householder_qr": lambda b: b.householder_qr(z),
        "project_tangent": lambda b: b.project_tangent(q, z, blocks),
        "subspace_distance": lambda b: b.subspace_distance(q, q2, parts),
    }


def fit_case():
    inst = planted_mdpca(0, n=20, n_datasets=3, n_shared=4, n_unique=2, n_samples=300,
                         noise=0.0, shared_scales=[3, 2.5, 2, 1.5], unique_scale=2.0)
    config = OptimizerConfig(alpha=0.1)
    return lambda: fit_mdpca(inst.datasets, 2, 4, config, seed=0)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="8,32,128")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    backends = kernels.available_backends()
    rng = np.random.default_rng(0)

    print(f"{'kernel':<20}{'n':>6}{'cython (s)':>14}{'python (s)':>14}{'ratio':>8}")
    for n in sizes:
        number = max(1, 2000 // n)
        for name, fn in kernel_cases(n, rng).items():
            times = {b: _time(lambda: fn(kernels.get_backend(b)), args.repeat, number) for b in backends}
            _row(name, n, times)

    fit = fit_case()
    times = {}
    for b in backends:
        with kernels.use_backend(b):
            times[b] = _time(fit, args.repeat, 1)
    _row("fit_mdpca", 20, times)


def _row(name, n, times):
    cy = times.get("cython")
    py = times["python"]
    cy_text = f"{cy:14.3e}" if cy is not None else f"{'-':>14}"
    ratio = f"{py / cy:8.2f}" if cy else f"{'-':>8}"
    print(f"{name:<20}{n:>6}{cy_text}{py:14.3e}{ratio}")


if __name__ == "__main__":
    main()
