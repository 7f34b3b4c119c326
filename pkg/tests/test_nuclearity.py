import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpnuc import fock as fk
from sharpnuc import nuclearity as nu
from sharpnuc.localization import schatten_p

coord = st.floats(-10, 10, allow_nan=False)


@pytest.fixture(scope="module")
def coincident(spectrum):
    pts = np.zeros((2, 4))
    return fk.build_model(spectrum, (0,), points=pts, nmax=3)


@pytest.fixture(scope="module")
def far(spectrum):
    pts = np.array([[0, 0, 0, 0], [0, 5.0, 0, 0]])
    return fk.build_model(spectrum, (0,), points=pts, nmax=3)


def _nu_pairs(length, order):
    return [p for p in fk.multi_indices(length, order, 1) if p.nu_order > 0]


def test_delta_examples():
    assert nu.delta_x([[0, 0, 0, 0], [0, 5, 0, 0]]) == 5
    assert nu.delta_x([[0, 0, 0, 0], [3, 3, 4, 0]]) == 2
    assert nu.delta_x([[0, 0, 0, 0]]) == math.inf


@given(pts=st.lists(st.tuples(coord, coord, coord, coord), min_size=4, max_size=4))
@settings(max_examples=40, deadline=None)
def test_delta_matches_pair_enumeration(pts):
    arr = np.array(pts)
    expected = min(math.dist(a[1:], b[1:]) - abs(a[0] - b[0]) for a, b in itertools.combinations(pts, 2))
    assert math.isclose(nu.delta_x(arr), expected, rel_tol=1e-12, abs_tol=1e-12)


@pytest.mark.parametrize("N,delta", [(2, 0.0), (4, 5.0), (3, 20.0)])
def test_spread_config(N, delta):
    pts = nu.spread_config(N, delta, time_offsets=np.linspace(0, 1, N))
    assert math.isclose(nu.delta_x(pts), delta, abs_tol=1e-12)


def test_braces_values():
    assert nu.braces(1, 0.0, 3, 0.1) == 1.0
    assert math.isclose(nu.braces(4, 10.0, 3, 0.1), 1 + 3 / 11 ** 0.9, rel_tol=1e-15)
    assert math.isclose(nu.braces(4, 10.0, 3, 0.1), float(1 + 3 / mpmath.mpf(11) ** mpmath.mpf("0.9")), rel_tol=1e-14)
    vals = [nu.braces(4, d, 3, 0.1) for d in (0, 1, 10, 100, 1e4)]
    assert all(a > b for a, b in zip(vals, vals[1:])) and vals[-1] - 1 < 1e-3
    with pytest.raises(nu.NuclearityError):
        nu.braces(2, -0.5, 3, 0.1)
    with pytest.raises(nu.NuclearityError):
        nu.braces(0, 1.0, 3, 0.1)


def test_semibound_rhs_single_point(spectrum):
    pair = fk.MultiIndexPair((1,), (0,), (1,), (0,))
    t = spectrum.t[:1]
    expect = 16 * 0.5 * 2.0 * 4.0 ** 2 * t[0] ** 4
    assert math.isclose(nu.semibound_rhs(pair, 1, 0.0, 4.0, t, 2.0, 0.1, 0.5), expect, rel_tol=1e-14)
    with pytest.raises(nu.NuclearityError):
        nu.semibound_rhs(fk.MultiIndexPair((1,), (0,), (0,), (0,)), 1, 0.0, 4.0, t, 2.0, 0.1, 0.5)


@given(a=st.lists(st.floats(-2, 2), min_size=5, max_size=5), b=st.lists(st.floats(-2, 2), min_size=5, max_size=5),
       ai=st.lists(st.floats(-2, 2), min_size=5, max_size=5))
@settings(max_examples=60, deadline=None)
def test_trace_norm_rank_one_against_dense_svd(a, b, ai):
    psi = np.array(a) + 1j * np.array(ai)
    psi2 = np.array(b) + 0j
    vac = np.zeros(5)
    vac[0] = 1.0
    dense = np.outer(psi, psi2.conj()) - np.vdot(psi2, psi) * np.outer(vac, vac)
    expect = np.linalg.svd(dense, compute_uv=False).sum()
    assert math.isclose(nu._trace_norm_rank_one_subtracted(psi, psi2), expect, rel_tol=1e-9, abs_tol=1e-12)


def test_single_point_consistency(spectrum):
    model = fk.build_model(spectrum, (0,), points=np.zeros((1, 4)), nmax=3)
    for pair in _nu_pairs(1, 3):
        res = nu.multi_norm_bruteforce(model, pair, [0])
        ref = fk.S_functional(model, pair, 0)[1].norm
        assert res.spread <= 0.05
        if pair.mu_order != pair.nu_order:
            assert math.isclose(res.value, ref, rel_tol=0.02) or ref <= 1e-12 and res.value <= 1e-10
        else:
            # vacuum subtraction can halve the functional norm
            assert res.value <= ref * (1 + 1e-9)


def test_coincident_points_scale_with_sqrt_N(coincident):
    for pair in _nu_pairs(1, 2):
        one = nu.multi_norm_bruteforce(coincident, pair, [0]).value
        two = nu.multi_norm_bruteforce(coincident, pair, [0, 1]).value
        assert math.isclose(two, math.sqrt(2) * one, rel_tol=0.02)


def test_far_points_below_coincident(coincident, far):
    pair = fk.MultiIndexPair((0,), (0,), (0,), (1,))
    c = nu.multi_norm_bruteforce(coincident, pair, [0, 1]).value
    f = nu.multi_norm_bruteforce(far, pair, [0, 1]).value
    assert f / math.sqrt(2) < c / math.sqrt(2)


def test_multi_norm_below_semibound(far, default_ctx, spectrum):
    sc = default_ctx.scenario
    from sharpnuc.cli import calibrated_constant
    c_hat = calibrated_constant(sc, spectrum, (0,))
    for pair in _nu_pairs(1, 3):
        res = nu.multi_norm_bruteforce(far, pair, [0, 1])
        rhs = nu.semibound_rhs(pair, 2, 5.0, spectrum.E, far.t(), spectrum.h.sup_inv_sq_on_ball,
                               sc["epsilon"], c_hat)
        assert res.value ** 2 <= rhs
        assert res.spread <= 0.05


def test_zero_pair_rejected(far):
    with pytest.raises(nu.NuclearityError):
        nu.multi_norm_bruteforce(far, fk.MultiIndexPair((0,), (0,), (0,), (0,)), [0])


@pytest.mark.parametrize("E,trace,p", [(1.0, 0.3, 1.0), (1.0, 0.3, 0.5), (0.5, 1.0, 0.7)])
def test_log_series_against_direct_sum(E, trace, p):
    mpmath.mp.dps = 30
    x = mpmath.mpf(32 * E) ** (mpmath.mpf(p) / 2) * trace
    total = mpmath.nsum(lambda k: x ** k / mpmath.factorial(k) ** (mpmath.mpf(p) / 2), [0, mpmath.inf])
    partial = sum(x ** k / mpmath.factorial(k) ** (mpmath.mpf(p) / 2) for k in range(5))
    ser = nu.log_series(E, trace, p, 4)
    assert math.isclose(ser.log_partial, float(mpmath.log(partial)), rel_tol=1e-12)
    # the tail is a certified upper bound; its excess is at most the geometric remainder
    k_stop = ser.terms_used - 1
    a_stop = x ** k_stop / mpmath.factorial(k_stop) ** (mpmath.mpf(p) / 2)
    remainder = a_stop * ser.ratio_at_stop / (1 - ser.ratio_at_stop)
    assert ser.log_total >= float(mpmath.log(total)) - 1e-12
    assert math.exp(ser.log_total) - float(total) <= float(remainder) * (1 + 1e-9)


def test_log_series_errors():
    with pytest.raises(nu.NuclearityError):
        nu.log_series(4.0, 1.0, 1.5, 4)
    assert nu.log_series(4.0, 0.0, 1.0, 4).log_total == 0.0


def test_pi_norm_bound_structure(spectrum):
    args = dict(E=spectrum.E, p=1.0, trace_p=schatten_p(spectrum, 1.0), c_hat=0.45,
                sup_inv=spectrum.h.sup_inv_sq_on_ball ** 0.5)
    single = nu.pi_norm_bound(N=1, delta=0.0, **args)
    assert math.isfinite(single.log_value)
    assert nu.pi_norm_bound(N=1, delta=37.0, **args).log_value == single.log_value
    prev = math.inf
    for d in (0, 5, 20, 50, 500):
        b = nu.pi_norm_bound(N=4, delta=d, **args)
        assert b.log_value <= prev
        assert math.isclose(nu.relative_to_single(b, single), math.sqrt(nu.braces(4, d, 3, 0.1)) - 1, rel_tol=1e-9)
        prev = b.log_value


def test_delta20_factor(spectrum):
    args = dict(E=spectrum.E, p=0.5, trace_p=schatten_p(spectrum, 0.5), c_hat=0.45, sup_inv=1.9)
    single = nu.pi_norm_bound(N=1, delta=0.0, **args)
    limit = math.sqrt(1 + 7 / 21 ** 0.9)
    for N in (2, 4, 8):
        ratio = math.exp(nu.pi_norm_bound(N=N, delta=20.0, **args).log_value - single.log_value)
        assert 1 <= ratio <= limit * (1 + 1e-12)


def test_p_nuclear_static_first_order(model):
    est = nu.p_nuclear_static(model, 1.0, 1)
    direct = sum(fk.tau_bound(pr) * fk.S_functional(model, pr)[1].norm for pr in fk.multi_indices(2, 1, 1))
    assert math.isclose(est.partial, direct, rel_tol=1e-12)
    with pytest.raises(nu.NuclearityError):
        nu.p_nuclear_static(model, 0.0, 1)


def test_p_nuclear_static_monotone_in_p(model):
    assert nu.p_nuclear_static(model, 0.5, 3).partial >= nu.p_nuclear_static(model, 1.0, 3).partial


@pytest.mark.xfail(reason="the K=4 partial sum is about 2.2 times the K=3 sum at desk scale", strict=True)
@pytest.mark.parametrize("p", [0.5, 1.0])
def test_p_nuclear_static_cutoff_converged(model, p):
    k3 = nu.p_nuclear_static(model, p, 3).partial
    k4 = nu.p_nuclear_static(model, p, 4).partial
    assert abs(k4 / k3 - 1) <= 0.1


def test_check_record_fields():
    rec = nu.check_record("x", 1.0, 2.0, 0.0, slack=0.5, note="n")
    assert rec == {"paper_anchor": "x", "lhs": 1.0, "rhs": 2.0, "margin": 1.0, "tolerance": 0.0,
                   "slack": 0.5, "pass": True, "note": "n"}
