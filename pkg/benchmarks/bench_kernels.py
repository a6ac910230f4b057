"""Time the compiled and numpy phase-space kernels on the same inputs.

Usage: python benchmarks/bench_kernels.py [n_x n_u repeats]
"""

import sys
import timeit

import numpy as np

from geomaxwell import _kernels_py
from geomaxwell.vlasov import PhaseSpaceGrid

try:
    from geomaxwell import _kernels
except ImportError:
    _kernels = None


def inputs(n_x, n_u, seed=0):
    grid = PhaseSpaceGrid(n_x, 4 * np.pi, n_u, 0.8)
    rng = np.random.default_rng(seed)
    f = rng.random(grid.shape)
    ex, ey, bz = rng.normal(size=(3, n_x))
    rhs_args = (f, grid._cwx, grid._ara, ex, ey, bz, -1.0, 1 / grid.h, 0.5 / grid.du)
    mom_args = (f, grid._cwx, grid._cwy)
    return rhs_args, mom_args


def best_of(fn, args, repeats):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeats, number)) / number


def main(argv):
    n_x, n_u, repeats = (int(a) for a in argv) if argv else (64, 32, 5)
    rhs_args, mom_args = inputs(n_x, n_u)
    backends = {"python": _kernels_py}
    if _kernels is not None:
        backends["compiled"] = _kernels
        np.testing.assert_allclose(_kernels.vlasov_rhs(*rhs_args), _kernels_py.vlasov_rhs(*rhs_args),
                                   rtol=1e-12, atol=1e-12)
    print(f"grid {n_x} x {n_u} x {n_u}")
    times = {}
    for name, mod in backends.items():
        times[name] = (best_of(mod.vlasov_rhs, rhs_args, repeats), best_of(mod.moments, mom_args, repeats))
        print(f"{name:>9}: vlasov_rhs {times[name][0] * 1e3:8.3f} ms   moments {times[name][1] * 1e3:8.3f} ms")
    if "compiled" in times:
        print(f"  speedup: vlasov_rhs {times['python'][0] / times['compiled'][0]:.1f}x   "
              f"moments {times['python'][1] / times['compiled'][1]:.1f}x")
    else:
        print("compiled kernels not built; only the numpy backend was timed")


if __name__ == "__main__":
    main(sys.argv[1:])
