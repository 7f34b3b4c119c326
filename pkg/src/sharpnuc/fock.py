"""Truncated bosonic Fock space over a finite mode span.

The one-particle space of the model is the span V of a few grid vectors
(eigenvector images L^{+-} e_j and their translates).  The single-particle
energy is the Galerkin compression omega_c = P_V omega P_V, and the Fock
modes are its eigenvectors, so dGamma(omega_c) and the spectral projection
P_E are diagonal in the occupation basis.  Occupations are cut at a total
of n_max quanta; the cut commutes with the number-conserving operators used
below, so it only removes states, it never distorts them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .gridspace import MomentumGrid, omega_power
from .kernels import count_table, ladder_entries
from .localization import LocalizationSpectrum


class FockError(ValueError):
    pass


class SpanError(FockError):
    pass


# -- modes --------------------------------------------------------------------


@dataclass(eq=False)
class ModeSet:
    grid: MomentumGrid
    modes: np.ndarray          # (M, *grid.shape), orthonormal eigenmodes of omega_c
    energies: np.ndarray       # eigenvalues of omega_c, ascending
    tags: list = field(default_factory=list)
    span_tol: float = 1e-8

    @property
    def M(self) -> int:
        return len(self.energies)

    def coefficients(self, f: np.ndarray, check: bool = True) -> np.ndarray:
        """c_j = <b_j|f>; raises SpanError when f leaves the span."""
        c = self.grid.inner(self.modes, f[None])
        if check:
            nf = float(self.grid.norm(f))
            resid = float(self.grid.norm(f - self.synthesize(c)))
            if nf > 0 and resid > self.span_tol * nf:
                raise SpanError(f"vector leaves the mode span (relative residual {resid / nf:.2e})")
        return c

    def synthesize(self, c: np.ndarray) -> np.ndarray:
        return np.tensordot(c, self.modes, axes=(0, 0))

    def gram(self) -> np.ndarray:
        flat = self.modes.reshape(self.M, -1)
        return flat.conj() @ flat.T * self.grid.weight

    def omega_c_power(self, a: float) -> np.ndarray:
        return self.energies ** a


def build_modes(grid: MomentumGrid, vectors, tags=None, tol: float = 1e-10, span_tol: float = 1e-8) -> ModeSet:
    """Orthonormalize `vectors` and rotate to the eigenbasis of the compressed omega."""
    vecs = np.asarray(vectors, dtype=complex).reshape(len(vectors), -1)
    if not len(vecs):
        raise FockError("empty mode list")
    w = math.sqrt(grid.weight)
    u, sv, vh = np.linalg.svd(vecs * w, full_matrices=False)
    keep = sv > tol * sv[0]
    basis = vh[keep] / w                        # orthonormal in the grid inner product
    om = grid.omega.ravel()
    omega_c = (basis.conj() * om) @ basis.T * grid.weight
    omega_c = 0.5 * (omega_c + omega_c.conj().T)
    energies, rot = np.linalg.eigh(omega_c)
    modes = rot.T @ basis                       # b'_k = sum_i rot[i, k] b_i
    return ModeSet(grid, modes.reshape((len(energies),) + grid.shape), energies,
                   list(tags) if tags is not None else [], span_tol)


# -- Fock space -----------------------------------------------------------------


def occupation_basis(M: int, nmax: int) -> np.ndarray:
    """All occupation vectors with total <= nmax, in lexicographic order."""
    rows = [np.zeros(M, dtype=np.int64)]
    for total in range(1, nmax + 1):
        for combo in itertools.combinations_with_replacement(range(M), total):
            rows.append(np.bincount(combo, minlength=M))
    occ = np.array(rows, dtype=np.int64)
    order = np.lexsort(occ.T[::-1])
    return occ[order]


@dataclass(eq=False)
class TruncatedFock:
    modes: ModeSet
    nmax: int
    occ: np.ndarray
    annihilators: list         # sparse (D, D) per mode
    energy: np.ndarray         # dGamma(omega_c) on the basis
    number: np.ndarray

    @property
    def M(self) -> int:
        return self.modes.M

    @property
    def dim(self) -> int:
        return len(self.occ)

    @property
    def vacuum_index(self) -> int:
        return 0

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    # ladder operators with arbitrary single-particle arguments (coefficient vectors)
    def a(self, c: np.ndarray) -> sp.csr_matrix:
        """a(f) = sum_j conj(c_j) a_j, antilinear in f."""
        out = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for cj, aj in zip(np.conj(c), self.annihilators):
            if cj != 0:
                out = out + cj * aj
        return out

    def adag(self, c: np.ndarray) -> sp.csr_matrix:
        return self.a(c).conj().T.tocsr()

    def field(self, c: np.ndarray) -> sp.csr_matrix:
        """a*(f) + a(f)."""
        a = self.a(c)
        return (a + a.conj().T).tocsr()

    def safe_block(self) -> np.ndarray:
        return np.nonzero(self.number <= self.nmax - 1)[0]


def build_fock(modes: ModeSet, nmax: int, cap: int = 20000) -> TruncatedFock:
    if nmax < 1:
        raise FockError("n_max must be >= 1")
    dim = math.comb(modes.M + nmax, nmax)
    if dim > cap:
        raise FockError(f"Fock dimension {dim} exceeds cap {cap} (M={modes.M}, n_max={nmax})")
    occ = occupation_basis(modes.M, nmax)
    table = count_table(modes.M, nmax)
    ann = []
    for j in range(modes.M):
        rows, cols, vals = ladder_entries(occ, j, nmax, table)
        ann.append(sp.csr_matrix((vals.astype(complex), (rows, cols)), shape=(dim, dim)))
    energy = occ @ modes.energies
    return TruncatedFock(modes, nmax, occ, ann, energy, occ.sum(axis=1))


@dataclass(eq=False)
class EnergyProjection:
    fock: TruncatedFock
    E: float
    indices: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.indices)

    def matrix(self) -> np.ndarray:
        P = np.zeros((self.fock.dim, self.fock.dim))
        P[self.indices, self.indices] = 1.0
        return P

    def compress(self, A) -> np.ndarray:
        """P_E A P_E restricted to the range of P_E, as a dense matrix."""
        A = A.tocsr() if sp.issparse(A) else sp.csr_matrix(A)
        return A[self.indices][:, self.indices].toarray()

    @property
    def occupancy_saturated(self) -> bool:
        """True when the energy window admits states beyond the occupancy cut."""
        return bool(self.fock.modes.energies[0] * (self.fock.nmax + 1) <= self.E)


def energy_projection(fock: TruncatedFock, E: float, rtol: float = 1e-12) -> EnergyProjection:
    idx = np.nonzero(fock.energy <= E * (1 + rtol))[0]
    return EnergyProjection(fock, E, idx)


def opnorm(mat) -> float:
    mat = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


# -- Weyl operators ---------------------------------------------------------------


def weyl_apply(fock: TruncatedFock, c: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """W(f) applied to the columns of `vecs` (or a single vector)."""
    gen = 1j * fock.field(c)
    return expm_multiply(gen.tocsc(), vecs)


def weyl(fock: TruncatedFock, c: np.ndarray, dense_limit: int = 4000) -> np.ndarray:
    """Dense matrix exp(i(a*(f) + a(f))) on the truncated space."""
    if fock.dim > dense_limit:
        raise FockError(f"dense Weyl matrix needs dim <= {dense_limit}, got {fock.dim}")
    return sla.expm(1j * fock.field(c).toarray())


@dataclass
class CheckValue:
    lhs: float
    rhs: float
    tolerance: float
    slack: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tolerance

    def as_dict(self) -> dict:
        out = {"lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "tolerance": self.tolerance,
               "slack": self.slack, "pass": self.passed}
        out.update(self.extra)
        return out


def vacuum_weyl_check(fock: TruncatedFock, c: np.ndarray, tolerance: float = 1e-6) -> CheckValue:
    """<Omega|W(f) Omega> against exp(-||f||^2 / 2); lhs is the deviation."""
    val = weyl_apply(fock, c, fock.vacuum())[0]
    expected = math.exp(-0.5 * float(np.sum(np.abs(c) ** 2)))
    return CheckValue(abs(val - expected), tolerance, 0.0, extra={"value_re": float(val.real),
                                                                   "value_im": float(val.imag),
                                                                   "closed_form": expected})


def nested_commutator(fock: TruncatedFock, c1: np.ndarray, c2: np.ndarray, cf: np.ndarray) -> tuple:
    """(Omega|[a(e1),[a*(e2), W(f)]] Omega) by matrices, and the closed form."""
    vac = fock.vacuum()
    a1d_vac = fock.adag(c1) @ vac
    a2d = fock.adag(c2)
    w_vac = weyl_apply(fock, cf, vac)
    w_a2d_vac = weyl_apply(fock, cf, a2d @ vac)
    # a(e1) Omega = 0 and (Omega| a*(e2) = 0 remove two of the four terms
    val = np.vdot(a1d_vac, a2d @ w_vac) - np.vdot(a1d_vac, w_a2d_vac)
    ic = 1j * cf
    closed = math.exp(-0.5 * float(np.sum(np.abs(cf) ** 2))) * np.vdot(c1, ic) * np.vdot(ic, c2)
    return complex(val), complex(closed)


def energy_bound_check(fock: TruncatedFock, proj: EnergyProjection, cs, tolerance: float = 1e-8) -> CheckValue:
    """||a(omega_c^{1/2} f_1) ... a(omega_c^{1/2} f_n) P_E|| <= E^{n/2} prod ||f_i||."""
    half = fock.modes.omega_c_power(0.5)
    prod = None
    for c in cs:
        op = fock.a(half * c)
        prod = op if prod is None else prod @ op
    block = prod.tocsc()[:, proj.indices]
    lhs = opnorm(block)
    rhs = proj.E ** (len(cs) / 2) * float(np.prod([np.linalg.norm(c) for c in cs]))
    return CheckValue(lhs, rhs, tolerance)


# -- multi-indices, S and tau -------------------------------------------------------


@dataclass(frozen=True)
class MultiIndexPair:
    """mu = (mu+, mu-), nu = (nu+, nu-), each a tuple over the active eigen-indices."""

    mu_plus: tuple
    mu_minus: tuple
    nu_plus: tuple
    nu_minus: tuple

    def __post_init__(self):
        lens = {len(self.mu_plus), len(self.mu_minus), len(self.nu_plus), len(self.nu_minus)}
        if len(lens) != 1:
            raise FockError("multi-indices must share one length")
        if min(min(x, default=0) for x in (self.mu_plus, self.mu_minus, self.nu_plus, self.nu_minus)) < 0:
            raise FockError("multi-index entries must be nonnegative")

    @property
    def length(self) -> int:
        return len(self.mu_plus)

    @property
    def mu_order(self) -> int:
        return sum(self.mu_plus) + sum(self.mu_minus)

    @property
    def nu_order(self) -> int:
        return sum(self.nu_plus) + sum(self.nu_minus)

    @property
    def order(self) -> int:
        return self.mu_order + self.nu_order

    @property
    def mu_factorial(self) -> int:
        return _mfact(self.mu_plus) * _mfact(self.mu_minus)

    @property
    def nu_factorial(self) -> int:
        return _mfact(self.nu_plus) * _mfact(self.nu_minus)

    @property
    def is_zero(self) -> bool:
        return self.order == 0

    def t_power(self, t) -> float:
        t = np.asarray(t, dtype=float)
        ex = np.add(self.mu_plus, self.mu_minus) + np.add(self.nu_plus, self.nu_minus)
        return float(np.prod(t[: self.length] ** ex))

    def split_nu(self):
        """nu = nu_a + nu_b with |nu_b| = 1: returns (nu_a pair, (sign, j))."""
        for sign, nu in (("+", self.nu_plus), ("-", self.nu_minus)):
            for j, k in enumerate(nu):
                if k:
                    reduced = list(nu)
                    reduced[j] -= 1
                    if sign == "+":
                        rest = MultiIndexPair(self.mu_plus, self.mu_minus, tuple(reduced), self.nu_minus)
                    else:
                        rest = MultiIndexPair(self.mu_plus, self.mu_minus, self.nu_plus, tuple(reduced))
                    return rest, (sign, j)
        raise FockError("nu is zero; cannot split off one annihilator")


def _mfact(idx) -> int:
    return math.prod(math.factorial(k) for k in idx)


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


def multi_indices(length: int, max_order: int, min_order: int = 0):
    """All pairs with min_order <= |mu| + |nu| <= max_order, ordered by total order."""
    out = []
    for order in range(min_order, max_order + 1):
        for combo in _compositions(order, 4 * length):
            parts = [combo[k * length:(k + 1) * length] for k in range(4)]
            out.append(MultiIndexPair(*parts))
    return out


def tau_value(pair: MultiIndexPair, cplus, cminus, fnorm_sq: float) -> complex:
    """Coefficient of S_{mu nu} in the normal-ordered expansion of W(f), f = f+ + i f-.

    cplus[j], cminus[j] are the expansion coefficients of f+- along L+- e_j.
    """
    cplus = np.asarray(cplus, dtype=complex)[: pair.length]
    cminus = np.asarray(cminus, dtype=complex)[: pair.length]
    phase = 1j ** (pair.mu_order + sum(pair.nu_plus) + sum(pair.mu_minus))
    # i^{|mu+| + |nu+| + 2|mu-|} = i^{mu_order + |nu+| + |mu-|}
    val = phase * np.prod(cplus ** np.array(pair.mu_plus)) * np.prod(cminus ** np.array(pair.mu_minus))
    val *= np.prod(np.conj(cplus) ** np.array(pair.nu_plus)) * np.prod(np.conj(cminus) ** np.array(pair.nu_minus))
    return complex(math.exp(-0.5 * fnorm_sq) * val / (pair.mu_factorial * pair.nu_factorial))


def tau_bound(pair: MultiIndexPair) -> float:
    return 2 ** (2.5 * pair.order) / math.sqrt(pair.mu_factorial * pair.nu_factorial)


# -- the model tying grid vectors to a Fock truncation ---------------------------------


@dataclass(eq=False)
class FockModel:
    spectrum: LocalizationSpectrum
    indices: tuple             # active eigen-indices j
    points: np.ndarray         # translation points x_k, shape (K, s+1)
    modes: ModeSet
    fock: TruncatedFock
    proj: EnergyProjection
    _coef: dict = field(default_factory=dict, repr=False)

    @property
    def E(self) -> float:
        return self.proj.E

    def mode_vector(self, sign: str, j: int, k: int | None = None) -> np.ndarray:
        """L+- e_j translated by the k-th point (untranslated for k=None)."""
        spec = self.spectrum
        v = spec.Lpm(sign).project(spec.e[self.indices[j]])
        if k is not None:
            v = spec.grid.translate(v, self.points[k])
        return v

    def coef(self, sign: str, j: int, k: int | None = None) -> np.ndarray:
        key = (sign, j, k)
        if key not in self._coef:
            self._coef[key] = self.modes.coefficients(self.mode_vector(sign, j, k))
        return self._coef[key]

    def ladder(self, create: bool, sign: str, j: int, k: int | None = None) -> sp.csr_matrix:
        key = ("op", create, sign, j, k)
        if key not in self._coef:
            c = self.coef(sign, j, k)
            self._coef[key] = self.fock.adag(c) if create else self.fock.a(c)
        return self._coef[key]

    def _factors(self, pair: MultiIndexPair, k):
        if pair.length > len(self.indices):
            raise FockError("multi-index longer than the active eigen-index list")
        out = []
        for create, sign, idx in ((True, "+", pair.mu_plus), (True, "-", pair.mu_minus),
                                  (False, "+", pair.nu_plus), (False, "-", pair.nu_minus)):
            for j, power in enumerate(idx):
                out.extend([self.ladder(create, sign, j, k)] * power)
        return out

    def ladder_product(self, pair: MultiIndexPair, k: int | None = None) -> sp.csr_matrix:
        """a*(L e)^mu a(L e)^nu, creators of L+ before L-, then annihilators of L+ before L-."""
        out = sp.identity(self.fock.dim, dtype=complex, format="csr")
        for op in self._factors(pair, k):
            out = out @ op
        return out.tocsr()

    def apply_ladder(self, pair: MultiIndexPair, vec: np.ndarray, k: int | None = None) -> np.ndarray:
        out = vec
        for op in reversed(self._factors(pair, k)):
            out = op @ out
            if not np.any(out):
                break
        return out

    def t(self) -> np.ndarray:
        return np.asarray(self.spectrum.t)[list(self.indices)]


def build_model(spectrum: LocalizationSpectrum, indices=(0,), points=None, nmax: int = 6,
                E: float | None = None, cap: int = 20000, extra_vectors=()) -> FockModel:
    """Mode span = {U(x_k) L+- e_j} for the active j and points (plus the untranslated vectors)."""
    grid = spectrum.grid
    E = spectrum.E if E is None else E
    pts = np.zeros((0, grid.s + 1)) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    vecs, tags = [], []
    for j in indices:
        for sign in ("+", "-"):
            base = spectrum.Lpm(sign).project(spectrum.e[j])
            vecs.append(base)
            tags.append((sign, j, None))
            for k, x in enumerate(pts):
                vecs.append(grid.translate(base, x))
                tags.append((sign, j, k))
    vecs.extend(extra_vectors)
    modes = build_modes(grid, vecs, tags)
    fock = build_fock(modes, nmax, cap)
    proj = energy_projection(fock, E)
    return FockModel(spectrum, tuple(indices), pts, modes, fock, proj)


@dataclass
class SNorm:
    pair: MultiIndexPair
    norm: float
    rhs: float
    tolerance: float = 1e-8

    @property
    def margin(self) -> float:
        return self.rhs - self.norm


def S_functional(model: FockModel, pair: MultiIndexPair, k: int | None = None) -> tuple:
    """(A, ||P_E A P_E||, energy-bound rhs E^{order/2} t^{mu+nu})."""
    if pair.is_zero:
        raise FockError("S_{0,0} is the zero functional")
    A = model.ladder_product(pair, k)
    norm = opnorm(model.proj.compress(A))
    rhs = model.E ** (pair.order / 2) * pair.t_power(model.t())
    return A, SNorm(pair, norm, rhs)


def functional_value(psi: np.ndarray, psi2: np.ndarray, A) -> complex:
    """phi(A) for phi = |psi><psi2| - <psi2|psi> omega_0."""
    vac = np.zeros_like(psi)
    vac[0] = 1.0
    return complex(np.vdot(psi2, A @ psi) - np.vdot(psi2, psi) * np.vdot(vac, A @ vac))


@dataclass
class ExpansionResult:
    direct: complex
    partial_sums: list
    residuals: list


def split_weyl_argument(model: FockModel, cplus, cminus) -> np.ndarray:
    """Mode coefficients of f = f+ + i f-, f+- = sum_j c+-_j L+- e_j."""
    total = np.zeros(model.modes.M, dtype=complex)
    for j in range(len(cplus)):
        total += cplus[j] * model.coef("+", j) + 1j * cminus[j] * model.coef("-", j)
    return total


def expansion_check(model: FockModel, psi: np.ndarray, psi2: np.ndarray, cplus, cminus, K: int = 6) -> ExpansionResult:
    """phi(W(f)) directly and as sum over |mu|+|nu| <= k of tau(W(f)) S(phi), k = 0..K."""
    cf = split_weyl_argument(model, cplus, cminus)
    fnorm_sq = float(np.sum(np.abs(cf) ** 2))
    w_psi = weyl_apply(model.fock, cf, psi)
    vac = model.fock.vacuum()
    w_vac = weyl_apply(model.fock, cf, vac)
    direct = complex(np.vdot(psi2, w_psi) - np.vdot(psi2, psi) * np.vdot(vac, w_vac))
    length = len(cplus)
    sums, total = [], 0j
    by_order = {}
    for pair in multi_indices(length, K, 1):
        by_order.setdefault(pair.order, []).append(pair)
    sums.append(0j)                            # S_{0,0}(phi) = phi(1) = 0
    for k in range(1, K + 1):
        for pair in by_order.get(k, []):
            # the vacuum term of phi drops: <Omega|A Omega> = 0 once |mu|+|nu| >= 1
            s_val = complex(np.vdot(psi2, model.apply_ladder(pair, psi)))
            if s_val != 0:
                total += tau_value(pair, cplus, cminus, fnorm_sq) * s_val
        sums.append(total)
    return ExpansionResult(direct, sums, [abs(s - direct) for s in sums])


def one_photon_state(model: FockModel, mode: int | None = None) -> np.ndarray:
    """a*_j Omega for the lowest compressed-energy mode (inside P_E when its energy <= E)."""
    j = 0 if mode is None else mode
    c = np.zeros(model.modes.M, dtype=complex)
    c[j] = 1.0
    return model.fock.adag(c) @ model.fock.vacuum()


# -- harmonic bound ---------------------------------------------------------------


def harmonic_bound_check(model: FockModel, sign: str, j: int, point_ids, tolerance: float = 1e-6) -> CheckValue:
    """||P_E sum_k (a*(g) a(g))(x_k) P_E|| against the energy-additivity bound, g = L+- e_j."""
    from .correlations import corr_values

    spec = model.spectrum
    grid = spec.grid
    point_ids = list(point_ids)
    D = model.fock.dim
    Q = sp.csr_matrix((D, D), dtype=complex)
    for k in point_ids:
        c = model.coef(sign, j, k)
        Q = Q + model.fock.adag(c) @ model.fock.a(c)
    block = model.proj.compress(Q)
    lhs = float(np.abs(np.linalg.eigvalsh(0.5 * (block + block.conj().T))).max()) if block.size else 0.0
    g = model.mode_vector(sign, j)
    u = omega_power(grid, -0.5).symbol * spec.h.htilde * g
    nsq = float(grid.norm(u) ** 2)
    pts = model.points[point_ids]
    N = len(point_ids)
    cross = 0.0
    if N > 1:
        diffs = np.array([pts[a] - pts[b] for a in range(N) for b in range(N) if a != b])
        cross = float(np.abs(corr_values(grid, u, diffs)).max())
    rhs = model.E * spec.h.sup_inv_sq_on_ball * (nsq + (N - 1) * cross)
    model_rhs = _compressed_harmonic_bound(model, sign, j, point_ids)
    return CheckValue(lhs, rhs, tolerance, slack=max(0.0, model_rhs - rhs),
                      extra={"N": N, "model_rhs": model_rhs,
                             "occupancy_saturated": model.proj.occupancy_saturated})


def _compressed_harmonic_bound(model: FockModel, sign, j, point_ids) -> float:
    """E ||omega_c^{-1/2} A omega_c^{-1/2}|| over modes of energy <= E; exact for the truncated model."""
    w = model.modes.energies
    low = w <= model.E
    if not low.any():
        return 0.0
    A = np.zeros((model.modes.M, model.modes.M), dtype=complex)
    for k in point_ids:
        c = model.coef(sign, j, k)
        A += np.outer(c, c.conj())
    scale = w[low] ** -0.5
    B = scale[:, None] * A[np.ix_(low, low)] * scale[None, :]
    return float(model.E * np.linalg.eigvalsh(0.5 * (B + B.conj().T)).max())


def series_majorant(E: float, trace_p: float, p: float, K: int) -> float:
    """(sum_{k<=K} (2^5 E)^{pk/2} ||T^p||_1^k / (k!)^{p/2})^4."""
    terms = [(32 * E) ** (p * k / 2) * trace_p ** k / math.factorial(k) ** (p / 2) for k in range(K + 1)]
    return float(sum(terms) ** 4)


def series_lhs(model: FockModel, p: float, K: int, tau_norms=None) -> float:
    """sum over 1 <= |mu|+|nu| <= K of ||tau||^p ||S||^p with tau at its norm bound."""
    total = 0.0
    for pair in multi_indices(len(model.indices), K, 1):
        _, sn = S_functional(model, pair)
        tn = tau_bound(pair) if tau_norms is None else tau_norms[pair]
        total += tn ** p * sn.norm ** p
    return total
