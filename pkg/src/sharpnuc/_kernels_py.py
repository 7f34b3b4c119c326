"""NumPy reference implementations of the compiled kernels."""

import numpy as np

_CHUNK = 1 << 21


def plane_wave_sum(weights, omega, pvecs, points):
    """sum_p w_p exp(i(omega_p x0 - p.x)) for each row x of `points`."""
    weights = np.ascontiguousarray(weights, dtype=float)
    omega = np.ascontiguousarray(omega, dtype=float)
    pvecs = np.ascontiguousarray(pvecs, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    npts = weights.size
    out = np.empty(len(points), dtype=complex)
    step = max(1, _CHUNK // max(npts, 1))
    for start in range(0, len(points), step):
        x = points[start:start + step]
        theta = np.outer(x[:, 0], omega) - x[:, 1:] @ pvecs.T
        out[start:start + step] = np.exp(1j * theta) @ weights
    return out


def count_table(modes, nmax):
    """table[m, t] = number of occupation vectors over m modes with total <= t."""
    from math import comb
    table = np.zeros((modes + 1, nmax + 1), dtype=np.int64)
    for m in range(modes + 1):
        for t in range(nmax + 1):
            table[m, t] = comb(m + t, t)
    return table


def rank_states(occ, nmax, table):
    """Lexicographic rank of each row of `occ` among vectors with total <= nmax."""
    occ = np.asarray(occ, dtype=np.int64)
    nstates, modes = occ.shape
    rank = np.zeros(nstates, dtype=np.int64)
    rem = np.full(nstates, nmax, dtype=np.int64)
    # cumulative count for "first entry < v": sum_{u<v} table[m, rem-u]
    for i in range(modes):
        m = modes - i - 1
        v = occ[:, i]
        for u in range(nmax + 1):
            mask = u < v
            if not mask.any():
                break
            rank[mask] += table[m, rem[mask] - u]
        rem = rem - v
    return rank


def ladder_entries(occ, mode, nmax, table):
    """COO triplets (row, col, value) of the annihilator of `mode`."""
    occ = np.asarray(occ, dtype=np.int64)
    cols = np.nonzero(occ[:, mode] > 0)[0]
    lowered = occ[cols].copy()
    lowered[:, mode] -= 1
    rows = rank_states(lowered, nmax, table)
    vals = np.sqrt(occ[cols, mode].astype(float))
    return rows, cols.astype(np.int64), vals
