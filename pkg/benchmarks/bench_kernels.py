"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the best-of-N time for each backend and the
speed-up.  Both backends get identical inputs and their outputs are checked
for agreement before timing.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from synthguard import _kernels_py

try:
    from synthguard import _kernels
except ImportError:  # extension not built
    _kernels = None


def _cases(rng: np.random.Generator) -> dict[str, tuple]:
    batch, hidden = 256, 32
    z = rng.normal(size=(batch, 4 * hidden))
    c_prev = rng.normal(size=(batch, hidden))
    h, c, gates, tanh_c = _kernels_py.lstm_gates_forward(z, c_prev)
    dh, dc = rng.normal(size=h.shape), rng.normal(size=c.shape)
    members, nonmembers = rng.normal(0.3, 1.0, 5000), rng.normal(0.0, 1.0, 5000)
    return {
        "lstm_gates_forward": (z, c_prev),
        "lstm_gates_backward": (dh, dc, gates, c_prev, tanh_c),
        "auc_raw": (members, nonmembers),
        "max_tpr_fpr_gap": (members, nonmembers),
    }


def _agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    return bool(np.allclose(a, b, rtol=1e-10, atol=1e-12))


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=20)
    args = parser.parse_args(argv)

    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':<22}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}")
    for name, inputs in cases.items():
        py_fn = getattr(_kernels_py, name)
        py = min(timeit.repeat(lambda: py_fn(*inputs), repeat=args.repeat, number=args.number)) / args.number
        if _kernels is None:
            print(f"{name:<22}{py * 1e3:>12.3f}{'n/a':>12}{'':>10}")
            continue
        cy_fn = getattr(_kernels, name)
        if not _agree(py_fn(*inputs), cy_fn(*inputs)):
            raise SystemExit(f"{name}: backends disagree")
        cy = min(timeit.repeat(lambda: cy_fn(*inputs), repeat=args.repeat, number=args.number)) / args.number
        print(f"{name:<22}{py * 1e3:>12.3f}{cy * 1e3:>12.3f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
