import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sharpnuc import fock as fk
from sharpnuc.localization import schatten_p

cplx = st.builds(complex, st.floats(-1, 1), st.floats(-1, 1))


def _unit(rng, M, norm=1.0):
    c = rng.normal(size=M) + 1j * rng.normal(size=M)
    return norm * c / np.linalg.norm(c)


@given(M=st.integers(1, 6), nmax=st.integers(0, 5))
@settings(max_examples=30, deadline=None)
def test_occupation_basis_count_and_order(M, nmax):
    occ = fk.occupation_basis(M, nmax)
    assert len(occ) == math.comb(M + nmax, nmax)
    assert len({tuple(r) for r in occ}) == len(occ)
    assert occ.sum(axis=1).max(initial=0) <= nmax and not occ[0].any()
    assert all(tuple(a) < tuple(b) for a, b in zip(occ, occ[1:]))


def test_modes_orthonormal_and_diagonalize_omega(model):
    modes = model.modes
    assert np.allclose(modes.gram(), np.eye(modes.M), atol=1e-10)
    grid = modes.grid
    flat = modes.modes.reshape(modes.M, -1)
    om = (flat.conj() * grid.omega.ravel()) @ flat.T * grid.weight
    assert np.allclose(om, np.diag(modes.energies), atol=1e-10)


def test_span_error(model, rng):
    stray = rng.normal(size=model.spectrum.grid.shape) + 0j
    with pytest.raises(fk.SpanError):
        model.modes.coefficients(stray)
    v = model.mode_vector("+", 0)
    assert np.allclose(model.modes.synthesize(model.modes.coefficients(v)), v, atol=1e-10)


def test_dimension_cap(model):
    with pytest.raises(fk.FockError):
        fk.build_fock(model.modes, 12, cap=1000)
    with pytest.raises(fk.FockError):
        fk.build_fock(model.modes, 0)


def test_ccr_on_safe_block(model):
    F = model.fock
    safe = F.safe_block()
    for i in range(F.M):
        for j in range(F.M):
            ai, aj = F.annihilators[i], F.annihilators[j]
            comm = (ai @ aj.conj().T - aj.conj().T @ ai).tocsr()[safe][:, safe].toarray()
            assert np.abs(comm - (i == j) * np.eye(len(safe))).max() < 1e-12
        assert not np.any(F.annihilators[i] @ F.vacuum())


def test_number_and_energy_diagonals(model):
    F = model.fock
    N = sum((a.conj().T @ a) for a in F.annihilators).diagonal().real
    assert np.allclose(N, F.number)
    H = sum(w * (a.conj().T @ a) for w, a in zip(model.modes.energies, F.annihilators)).diagonal().real
    assert np.allclose(H, F.energy)


@given(norm=st.floats(0.05, 0.8), seed=st.integers(0, 2 ** 16))
@settings(max_examples=20, deadline=None)
def test_vacuum_weyl_expectation(model, norm, seed):
    c = _unit(np.random.default_rng(seed), model.fock.M, norm)
    assert fk.vacuum_weyl_check(model.fock, c).lhs < 1e-6


def test_weyl_unitary_on_low_block(model, rng):
    F = model.fock
    c = _unit(rng, F.M, 0.5)
    low = np.nonzero(F.number <= F.nmax // 2)[0]
    basis = np.zeros((F.dim, len(low)), dtype=complex)
    basis[low, np.arange(len(low))] = 1.0
    back = fk.weyl_apply(F, -c, fk.weyl_apply(F, c, basis))
    assert np.abs(back[low] - basis[low]).max() < 1e-6


def test_weyl_dense_matches_expm_multiply(model, rng):
    small = fk.build_fock(model.modes, 2)
    c = _unit(rng, small.M, 0.4)
    v = rng.normal(size=small.dim) + 0j
    assert np.allclose(fk.weyl(small, c) @ v, fk.weyl_apply(small, c, v), atol=1e-12)


def test_nested_commutator_closed_form(model, rng):
    F = model.fock
    for _ in range(3):
        val, closed = fk.nested_commutator(F, _unit(rng, F.M), _unit(rng, F.M), _unit(rng, F.M, 0.5))
        assert abs(val - closed) < 1e-6


@given(n=st.integers(1, 2), seed=st.integers(0, 2 ** 16))
@settings(max_examples=25, deadline=None)
def test_energy_bounds(model, n, seed):
    rng = np.random.default_rng(seed)
    cs = [_unit(rng, model.fock.M, rng.uniform(0.2, 1.5)) for _ in range(n)]
    assert fk.energy_bound_check(model.fock, model.proj, cs).passed


def test_energy_projection_rank(model):
    assert model.proj.rank == int(np.sum(model.fock.energy <= model.E * (1 + 1e-12)))
    assert model.proj.rank >= 2


def test_multi_index_validation():
    with pytest.raises(fk.FockError):
        fk.MultiIndexPair((1,), (0, 0), (0,), (0,))
    with pytest.raises(fk.FockError):
        fk.MultiIndexPair((-1,), (0,), (0,), (0,))
    pair = fk.MultiIndexPair((2, 0), (0, 1), (1, 0), (0, 0))
    assert pair.order == 4 and pair.mu_factorial == 2 and pair.nu_factorial == 1
    rest, (sign, j) = pair.split_nu()
    assert (sign, j) == ("+", 0) and rest.nu_order == 0
    with pytest.raises(fk.FockError):
        rest.split_nu()


@pytest.mark.parametrize("length,order", [(1, 3), (2, 2), (2, 4)])
def test_multi_index_count(length, order):
    got = fk.multi_indices(length, order, order)
    assert len(got) == math.comb(order + 4 * length - 1, order)
    assert len(set(got)) == len(got)


@given(cp=st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2),
       cm=st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2), fsq=st.floats(0, 4))
@settings(max_examples=40, deadline=None)
def test_tau_bound_dominates_tau(cp, cm, fsq):
    for pair in fk.multi_indices(2, 3, 0):
        assert abs(fk.tau_value(pair, cp, cm, fsq)) <= fk.tau_bound(pair) * (1 + 1e-12)


def test_tau_single_mode_closed_form():
    # one plus-mode: tau_{(m),(n)} = i^{m+n} c^m conj(c)^n e^{-|f|^2/2} / (m! n!)
    c = 0.7
    for m in range(3):
        for n in range(3):
            pair = fk.MultiIndexPair((m,), (0,), (n,), (0,))
            expect = 1j ** (m + n) * c ** (m + n) * math.exp(-0.5 * 0.49) / (math.factorial(m) * math.factorial(n))
            assert abs(fk.tau_value(pair, [c], [0.0], 0.49) - expect) < 1e-14


def test_expansion_reproduces_weyl(model, rng):
    psi = fk.one_photon_state(model)
    cp, cm = rng.normal(size=2), rng.normal(size=2)
    scale = 0.5 / np.linalg.norm(fk.split_weyl_argument(model, cp, cm))
    res = fk.expansion_check(model, psi, psi, cp * scale, cm * scale, K=6)
    assert res.residuals[-1] < 1e-4
    assert res.residuals[0] == pytest.approx(abs(res.direct))
    tail = res.residuals[2:]
    assert np.all(np.diff(tail) <= 1e-8)


def test_functional_value_annihilates_identity(model, rng):
    psi = rng.normal(size=model.fock.dim) + 0j
    psi2 = rng.normal(size=model.fock.dim) + 0j
    eye = np.eye(model.fock.dim)
    assert abs(fk.functional_value(psi, psi2, eye)) < 1e-12


def test_S_norm_estimate(model):
    for pair in fk.multi_indices(2, 3, 1):
        _, sn = fk.S_functional(model, pair)
        assert sn.margin >= -1e-8
    with pytest.raises(fk.FockError):
        fk.S_functional(model, fk.MultiIndexPair((0, 0), (0, 0), (0, 0), (0, 0)))


def test_S_norm_translation_drift(spectrum):
    pts = np.array([[0, 0, 0, 0], [0, 5.0, 0, 0]])
    tm = fk.build_model(spectrum, (0,), points=pts, nmax=4)
    for pair in fk.multi_indices(1, 2, 1):
        base = fk.S_functional(tm, pair)[1].norm
        for k in range(len(pts)):
            assert abs(fk.S_functional(tm, pair, k)[1].norm - base) <= 0.05 * base


@pytest.mark.parametrize("sign", ["+", "-"])
def test_harmonic_bound(spectrum, sign):
    pts = np.array([[0, 0, 0, 0], [0, 5.0, 0, 0]])
    hm = fk.build_model(spectrum, (0,), points=pts, nmax=4)
    res = fk.harmonic_bound_check(hm, sign, 0, range(2))
    assert res.passed
    # the compressed-model bound is sharper than needed but must also dominate
    assert res.lhs <= res.extra["model_rhs"] * (1 + 1e-8)


def test_series_majorant(model, spectrum):
    K = 3
    for p in (0.5, 1.0):
        lhs = fk.series_lhs(model, p, K)
        assert lhs <= fk.series_majorant(model.E, schatten_p(spectrum, p), p, K)
    assert fk.series_majorant(4.0, 1.0, 1.0, 0) == 1.0
