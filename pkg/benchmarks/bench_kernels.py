"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the result does not depend on
SHARPNUC_PURE_PYTHON.  Outputs are compared before timing.
"""

import argparse
import timeit

import numpy as np

from sharpnuc import _kernels_py
from sharpnuc.fock import occupation_basis
from sharpnuc.gridspace import GridSpec, build_grid

try:
    from sharpnuc import _ckernels
except ImportError:
    _ckernels = None


def plane_wave_case(n=24, npoints=256, seed=0):
    grid = build_grid(GridSpec(3, n, 8.0))
    rng = np.random.default_rng(seed)
    w = rng.normal(size=grid.shape).ravel() * grid.weight
    pvecs = np.stack([c.ravel() for c in grid.pvecs], axis=1)
    pts = np.concatenate([rng.uniform(-3, 3, (npoints, 1)), rng.uniform(-6, 6, (npoints, 3))], axis=1)
    return (w, grid.omega.ravel(), pvecs, pts)


def ladder_case(modes=10, nmax=6):
    occ = occupation_basis(modes, nmax)
    table = _kernels_py.count_table(modes, nmax)
    return occ, table, nmax, modes


def _time(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the fallback can run")

    pw = plane_wave_case()
    occ, table, nmax, modes = ladder_case()
    cases = {
        f"plane_wave_sum ({pw[0].size} momenta x {len(pw[3])} points)": (
            lambda k: k.plane_wave_sum(*pw),
        ),
        f"ladder_entries ({len(occ)} states, {modes} modes)": (
            lambda k: [k.ladder_entries(occ, j, nmax, table) for j in range(modes)],
        ),
    }
    print(f"{'kernel':48s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, (call,) in cases.items():
        t_py = _time(lambda: call(_kernels_py), args.repeat)
        if _ckernels is None:
            print(f"{name:48s} {t_py:11.4f} {'-':>11s} {'-':>8s}")
            continue
        ref, got = call(_kernels_py), call(_ckernels)
        if isinstance(ref, list):
            same = all(np.array_equal(a, b) for r, g in zip(ref, got) for a, b in zip(r, g))
        else:
            same = np.allclose(ref, got, rtol=1e-10, atol=1e-12)
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        t_c = _time(lambda: call(_ckernels), args.repeat)
        print(f"{name:48s} {t_py:11.4f} {t_c:11.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
