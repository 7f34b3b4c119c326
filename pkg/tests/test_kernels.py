import os
import subprocess
import sys
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpnuc import _kernels_py, kernels
from sharpnuc.fock import occupation_basis

try:
    from sharpnuc import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [pytest.param(_kernels_py, id="python"),
            pytest.param(_ckernels, id="cython",
                         marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))]


def _dense_plane_wave(weights, omega, pvecs, points):
    out = []
    for x in points:
        out.append(sum(w * np.exp(1j * (o * x[0] - p @ x[1:])) for w, o, p in zip(weights, omega, pvecs)))
    return np.array(out)


@pytest.mark.parametrize("k", BACKENDS)
def test_plane_wave_sum_against_loop(k):
    rng = np.random.default_rng(0)
    pvecs = rng.normal(size=(40, 3))
    omega = np.linalg.norm(pvecs, axis=1)
    w = rng.normal(size=40)
    pts = rng.normal(size=(7, 4)) * 3
    assert np.allclose(k.plane_wave_sum(w, omega, pvecs, pts), _dense_plane_wave(w, omega, pvecs, pts),
                       rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("k", BACKENDS)
@given(modes=st.integers(1, 5), nmax=st.integers(1, 5))
@settings(max_examples=25, deadline=None)
def test_ladder_entries_match_definition(k, modes, nmax):
    occ = occupation_basis(modes, nmax)
    table = _kernels_py.count_table(modes, nmax)
    index = {tuple(row): i for i, row in enumerate(occ)}
    for mode in range(modes):
        rows, cols, vals = k.ladder_entries(occ, mode, nmax, table)
        expected = []
        for c, row in enumerate(occ):
            if row[mode] > 0:
                lowered = row.copy()
                lowered[mode] -= 1
                expected.append((index[tuple(lowered)], c, np.sqrt(row[mode])))
        got = sorted(zip(np.asarray(rows).tolist(), np.asarray(cols).tolist(), np.asarray(vals).tolist()))
        assert len(got) == len(expected)
        for (r1, c1, v1), (r2, c2, v2) in zip(got, sorted(expected)):
            assert (r1, c1) == (r2, c2) and abs(v1 - v2) < 1e-14


@given(modes=st.integers(1, 6), nmax=st.integers(0, 6))
@settings(max_examples=30, deadline=None)
def test_rank_states_is_bijection(modes, nmax):
    occ = occupation_basis(modes, nmax)
    assert len(occ) == comb(modes + nmax, nmax)
    table = _kernels_py.count_table(modes, nmax)
    ranks = _kernels_py.rank_states(occ, nmax, table)
    assert np.array_equal(np.sort(ranks), np.arange(len(occ)))


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
def test_backends_agree_on_grid_sized_input():
    rng = np.random.default_rng(2)
    pvecs = rng.uniform(-8, 8, size=(3000, 3))
    omega = np.linalg.norm(pvecs, axis=1)
    w = rng.normal(size=3000)
    pts = rng.uniform(-6, 6, size=(50, 4))
    a = _kernels_py.plane_wave_sum(w, omega, pvecs, pts)
    b = _ckernels.plane_wave_sum(w, omega, pvecs, pts)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10)


def test_fallback_selected_by_environment():
    env = dict(os.environ, SHARPNUC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import sharpnuc.kernels as k; print(k.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("python", "cython")
