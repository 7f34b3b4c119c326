"""Multi-point norms of the expansion functionals and the resulting bounds on Pi_E.

The bound values on ||Pi_E||_{p, x_1..x_N} overflow double precision for
any reasonable E, so they are carried as natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .fock import FockModel, MultiIndexPair, S_functional, multi_indices, tau_bound


class NuclearityError(ValueError):
    pass


# -- translation configurations ------------------------------------------------------


@dataclass
class TranslationConfig:
    points: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    @property
    def N(self) -> int:
        return len(self.points)

    @property
    def delta(self) -> float:
        return delta_x(self.points)

    def max_separation(self) -> float:
        if self.N < 2:
            return 0.0
        d = self.points[:, None, 1:] - self.points[None, :, 1:]
        return float(np.linalg.norm(d, axis=-1).max())


def delta_x(points) -> float:
    """inf over i != j of |x_i - x_j| - |x0_i - x0_j|; +inf for a single point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    best = math.inf
    for i in range(len(pts)):
        for j in range(len(pts)):
            if i != j:
                d = pts[i] - pts[j]
                best = min(best, float(np.linalg.norm(d[1:]) - abs(d[0])))
    return best


def spread_config(N: int, delta: float, s: int = 3, time_offsets=None) -> np.ndarray:
    """N points with pairwise spatial separation >= delta (+ time offsets) and delta(x) = delta.

    Points sit on a line with spacing delta + |dt| where dt is the time gap between neighbours.
    """
    dts = np.zeros(N) if time_offsets is None else np.asarray(time_offsets, dtype=float)
    pts = np.zeros((N, s + 1))
    pos = 0.0
    for k in range(N):
        if k:
            pos += delta + abs(dts[k] - dts[k - 1])
        pts[k, 0] = dts[k]
        pts[k, 1] = pos
    return pts


# -- brute-force multi-point norm -------------------------------------------------------


def _trace_norm_rank_one_subtracted(psi, psi2) -> float:
    """Trace norm of |psi><psi2| - <psi2|psi> |Omega><Omega| (Omega = first basis vector)."""
    vac = np.zeros_like(psi)
    vac[0] = 1.0
    q, _ = np.linalg.qr(np.stack([psi, psi2, vac], axis=1))
    a = q.conj().T @ psi
    b = q.conj().T @ psi2
    v = q.conj().T @ vac
    small = np.outer(a, b.conj()) - np.vdot(psi2, psi) * np.outer(v, v.conj())
    return float(np.linalg.svd(small, compute_uv=False).sum())


@dataclass
class MultiNormResult:
    pair: MultiIndexPair
    N: int
    value: float
    restarts: np.ndarray
    iterations: int

    @property
    def spread(self) -> float:
        if self.value == 0:
            return 0.0
        return float((self.restarts.max() - self.restarts.min()) / self.restarts.max())


def multi_norm_bruteforce(model: FockModel, pair: MultiIndexPair, point_ids, rng=None, restarts: int = 5,
                          samples: int = 256, max_iter: int = 500, tol: float = 1e-12) -> MultiNormResult:
    """Lower bound on ||S||_{x_1..x_N} from rank-one vacuum-subtracted functionals.

    With B_k = P_E A(x_k) P_E, sum_k |<psi2|B_k psi>|^2 = max_{|c|=1} |<psi2|sum_k c_k B_k psi>|^2,
    so the optimum over (psi, psi2) is max_c sigma_max(sum_k c_k B_k)^2.  Each restart samples
    `samples` directions c, then runs alternating ascent over (c, psi, psi2) from the best one.
    The value is divided by the trace norm of the functional.
    """
    if pair.nu_order == 0 and pair.mu_order == 0:
        raise NuclearityError("S_{0,0} = 0")
    rng = np.random.default_rng(0) if rng is None else rng
    proj = model.proj
    blocks = np.stack([proj.compress(model.ladder_product(pair, k)) for k in point_ids])
    N = len(blocks)
    vals, iters = [], 0
    for _ in range(restarts):
        cs = rng.normal(size=(samples, N)) + 1j * rng.normal(size=(samples, N))
        cs /= np.linalg.norm(cs, axis=1, keepdims=True)
        sig = np.linalg.norm(np.tensordot(cs, blocks, axes=(1, 0)), ord=2, axis=(1, 2))
        c = cs[int(np.argmax(sig))]
        f_old = -1.0
        for it in range(max_iter):
            u, sv, vh = np.linalg.svd(np.tensordot(c, blocks, axes=(0, 0)))
            psi2, psi = u[:, 0], vh[0].conj()
            z = np.array([np.vdot(psi2, B @ psi) for B in blocks])
            f = float(np.sum(np.abs(z) ** 2))
            nz = np.linalg.norm(z)
            if nz == 0 or f - f_old <= tol * max(f, 1e-300):
                break
            c = z.conj() / nz
            f_old = f
        iters = max(iters, it + 1)
        vals.append(_ratio(blocks, psi, psi2))
    vals = np.array(vals)
    return MultiNormResult(pair, N, float(vals.max()), vals, iters)


def _ratio(blocks, psi, psi2) -> float:
    fval = sum(abs(np.vdot(psi2, B @ psi)) ** 2 for B in blocks)
    # the vacuum is the first P_E basis state (energy 0)
    tn = _trace_norm_rank_one_subtracted(psi, psi2)
    return math.sqrt(fval) / tn if tn > 0 else 0.0


# -- analytic right-hand sides -----------------------------------------------------------


def braces(N: int, delta: float, s: int, eps: float) -> float:
    """1 + (N - 1) / (delta + 1)^{s - 2 - eps}."""
    if N < 1:
        raise NuclearityError("N must be >= 1")
    if N == 1:
        return 1.0
    if delta < 0:
        raise NuclearityError(f"delta(x) = {delta:g} < 0: configuration not spacelike separated")
    return 1.0 + (N - 1) / (delta + 1) ** (s - 2 - eps)


def semibound_rhs(pair: MultiIndexPair, N: int, delta: float, E: float, t, sup_inv_sq: float,
                  eps: float, c_hat: float, s: int = 3) -> float:
    """Upper bound on ||S_{mu nu}||_{x_1..x_N}^2."""
    if pair.nu_order == 0:
        raise NuclearityError("the bound is stated for nu != 0")
    return 16 * c_hat * sup_inv_sq * E ** pair.order * pair.t_power(t) ** 2 * braces(N, delta, s, eps)


@dataclass(frozen=True)
class SeriesBound:
    log_partial: float        # log of sum_{k <= K}
    log_total: float          # log of the full sum (explicit terms plus certified tail)
    log_tail: float
    terms_used: int
    ratio_at_stop: float


@lru_cache(maxsize=64)
def log_series(E: float, trace_p: float, p: float, K: int, max_terms: int = 2_000_000_000,
               chunk: int = 4_000_000) -> SeriesBound:
    """sum_k (2^5 E)^{pk/2} ||T^p||_1^k / (k!)^{p/2} in log space, tail by the ratio test.

    Terms are summed explicitly until the term ratio x / (k+1)^{p/2} drops below 1/2,
    after which the remainder is bounded by the geometric series of that ratio.
    """
    if not 0 < p <= 1:
        raise NuclearityError("p must lie in (0, 1]")
    if trace_p <= 0:
        return SeriesBound(0.0, 0.0, -math.inf, 1, 0.0)
    logx = 0.5 * p * math.log(32 * E) + math.log(trace_p)
    # first k with x / (k+1)^{p/2} < 1/2
    k_stop = max(K + 1, int(math.ceil(math.exp((logx + math.log(2)) * 2 / p))))
    if k_stop > max_terms:
        raise NuclearityError(f"series needs {k_stop} terms before the ratio test applies (p={p})")

    def logs(k):
        return k * logx - 0.5 * p * gammaln(k + 1)

    log_partial = float(logsumexp(logs(np.arange(K + 1))))
    log_tail_terms = -math.inf
    for start in range(K + 1, k_stop + 1, chunk):
        k = np.arange(start, min(start + chunk, k_stop + 1))
        log_tail_terms = float(np.logaddexp(log_tail_terms, logsumexp(logs(k))))
    ratio = math.exp(logx - 0.5 * p * math.log(k_stop + 1))
    # remainder beyond k_stop <= a_{k_stop} * ratio / (1 - ratio)
    log_rem = float(logs(k_stop) + math.log(ratio / (1 - ratio)))
    log_tail = float(np.logaddexp(log_tail_terms, log_rem))
    log_total = float(np.logaddexp(log_partial, log_tail))
    return SeriesBound(log_partial, log_total, log_tail, k_stop + 1, ratio)


@dataclass
class PiNormBound:
    log_value: float
    log_series_part: float
    log_tail: float
    braces: float
    N: int
    delta: float

    @property
    def log10_value(self) -> float:
        return self.log_value / math.log(10)


def pi_norm_bound(E: float, p: float, trace_p: float, c_hat: float, sup_inv: float, N: int,
                  delta: float, s: int = 3, eps: float = 0.1, K: int = 4) -> PiNormBound:
    """log of 4 c^{1/2} sup|h~|^{-1} (series)^{4/p} {braces}^{1/2}."""
    ser = log_series(E, trace_p, p, K)
    br = braces(N, delta, s, eps)
    logv = math.log(4) + 0.5 * math.log(c_hat) + math.log(sup_inv) + 4 / p * ser.log_total + 0.5 * math.log(br)
    return PiNormBound(logv, ser.log_total, ser.log_tail, br, N, delta)


def relative_to_single(bound: PiNormBound, single: PiNormBound) -> float:
    """bound / single - 1, evaluated in log space."""
    return math.expm1(bound.log_value - single.log_value)


@dataclass
class StaticEstimate:
    p: float
    K: int
    partial: float                      # (sum ||tau||^p ||S||^p)^{1/p} over 1 <= order <= K
    terms: dict = field(default_factory=dict)   # order -> sum of ||tau||^p ||S||^p


def p_nuclear_static(model: FockModel, p: float, K: int, s_norms=None, tau_norms=None) -> StaticEstimate:
    """(sum ||tau||^p ||S||^p)^{1/p} over the active eigen-indices, ||tau|| at its norm bound."""
    if not 0 < p <= 1:
        raise NuclearityError("p must lie in (0, 1]")
    by_order = {}
    for pair in multi_indices(len(model.indices), K, 1):
        sn = s_norms[pair] if s_norms is not None else S_functional(model, pair)[1].norm
        tn = tau_norms[pair] if tau_norms is not None else tau_bound(pair)
        by_order[pair.order] = by_order.get(pair.order, 0.0) + tn ** p * sn ** p
    total = sum(by_order.values())
    return StaticEstimate(p, K, total ** (1 / p), by_order)


# -- report -------------------------------------------------------------------------


def check_record(anchor: str, lhs: float, rhs: float, tolerance: float, slack: float = 0.0, **extra) -> dict:
    margin = rhs - lhs
    out = {"paper_anchor": anchor, "lhs": float(lhs), "rhs": float(rhs), "margin": float(margin),
           "tolerance": float(tolerance), "slack": float(slack), "pass": bool(margin >= -tolerance)}
    out.update(extra)
    return out


@dataclass
class NuclearityReport:
    scenario: dict
    checks: list = field(default_factory=list)
    multi_norms: list = field(default_factory=list)
    bounds: list = field(default_factory=list)
    series: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def as_dict(self) -> dict:
        return {"scenario": self.scenario, "checks": self.checks, "multi_norms": self.multi_norms,
                "bounds": self.bounds, "series": self.series, "pass": self.passed}
