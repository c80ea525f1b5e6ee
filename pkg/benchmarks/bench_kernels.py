"""Training throughput of the compiled kernel against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Two workloads mirror the pipeline: one ensemble member (8 -> 16 -> 2,
cross-entropy, 2800 rows, 20 epochs) and one stage-two defer network
(12 -> 100 -> 100 -> 3, defer loss, 2800 rows, 40 epochs).
"""
import argparse
import time

import numpy as np

from ldu import _backend
from ldu.nn import TrainConfig, mlp_specs, train

WORKLOADS = {
    "ensemble member": (mlp_specs(8, [16], 2), TrainConfig(epochs=20, learning_rate=1e-3)),
    "defer network": (mlp_specs(12, [100, 100], 3),
                      TrainConfig(epochs=40, learning_rate=1e-3, loss="defer", alpha=0.8)),
}


def available():
    names = []
    for name in _backend.BACKENDS:
        try:
            _backend.load(name)
            names.append(name)
        except ImportError:
            pass
    return names


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--rows", type=int, default=2800)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    backends = available()
    print(f"{'workload':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for label, (specs, cfg) in WORKLOADS.items():
        x = rng.normal(size=(args.rows, specs[0].input_dim))
        y = rng.integers(0, 2, args.rows)
        times = [best_time(lambda b=b: train(x, y, specs, cfg, backend=b), args.repeat) for b in backends]
        speedup = f"{times[-1] / times[0]:.1f}x" if len(times) > 1 else "-"
        print(f"{label:<18}" + "".join(f"{t:>11.3f}s" for t in times) + f"{speedup:>10}")


if __name__ == "__main__":
    main()
