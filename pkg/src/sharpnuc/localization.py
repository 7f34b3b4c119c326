"""Localization subspaces, the test function h and the operator T.

All subspaces are spanned by vectors that are invariant under the
configuration-space conjugation J.  Inner products between such vectors are
real, so orthonormalization and the eigenproblem for T reduce to real
symmetric linear algebra and the eigenvectors come out J-invariant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .gridspace import MomentumGrid, momentum_ball, omega_power


class LocalizationError(ValueError):
    pass


class CertificateError(LocalizationError):
    """The positivity certificate for h-tilde failed on the requested ball."""


def bump(radius: float, rr: np.ndarray) -> np.ndarray:
    """Standard bump exp(-1/(1-|x/R|^2)) on |x| < R, zero elsewhere."""
    u = (rr / radius) ** 2
    out = np.zeros_like(rr, dtype=float)
    inside = u < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside]))
    return out


def _smooth_step(t: np.ndarray) -> np.ndarray:
    # 1 for t <= 0, 0 for t >= 1, C-infinity in between
    t = np.clip(t, 0.0, 1.0)
    a = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    b = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class SmoothCutoff:
    """chi(O_rho): 1 on the ball of radius rho, 0 outside radius rho + eps_pad."""

    rho: float
    eps_pad: float

    def profile(self, rr):
        return _smooth_step((np.asarray(rr, dtype=float) - self.rho) / self.eps_pad)

    def on_grid(self, grid: MomentumGrid, center=None) -> np.ndarray:
        return self.profile(grid.xnorm(center))

    def integral(self, s: int) -> float:
        """int chi(x) d^s x by radial quadrature."""
        area = 2 * math.pi ** (s / 2) / math.gamma(s / 2)
        inner = self.rho ** s / s
        shell, _ = integrate.quad(
            lambda r: float(self.profile(r)) * r ** (s - 1),
            self.rho, self.rho + self.eps_pad, epsabs=1e-13, epsrel=1e-12,
        )
        return area * (inner + shell)


@dataclass(frozen=True, eq=False)
class TestFunctionFamily:
    r: float
    members: np.ndarray   # (m, *grid.shape), real, configuration space
    labels: tuple

    @property
    def m(self) -> int:
        return len(self.members)

    def singular_values(self, grid: MomentumGrid) -> np.ndarray:
        mat = self.members.reshape(self.m, -1).T * np.sqrt(grid.config_weight)
        return np.linalg.svd(mat, compute_uv=False)


def _monomials(s: int, degree: int):
    for combo in itertools.combinations_with_replacement(range(s), degree):
        yield combo


def test_function_family(grid: MomentumGrid, r: float, m: int = 20) -> TestFunctionFamily:
    """Bump on O_r times monomials (degree <= 2) and three cosine modulations.

    Members are ordered by monomial degree, then modulation; the first ``m``
    are returned.  All members are real, so their span is J-invariant.
    """
    if m < 1:
        raise LocalizationError("test family needs at least one member")
    xs = grid.xvecs()
    rr = np.sqrt(sum(x ** 2 for x in xs))
    base = bump(r, rr)
    k = math.pi / r
    mods = [("1", np.ones(grid.shape))]
    # face-diagonal wave vectors; axis-aligned ones are degenerate with x_a^2 on the lattice
    for a in range(min(grid.s, 3)):
        b = (a + 1) % grid.s
        mods.append((f"cos(pi(x{a}+x{b})/r)", np.cos(k * (xs[a] + xs[b]))))
    members, labels = [], []
    for degree in range(3):
        for combo in _monomials(grid.s, degree):
            mono = np.ones(grid.shape)
            for a in combo:
                mono = mono * (xs[a] / r)
            name = "*".join(f"x{a}" for a in combo) or "1"
            for mname, mod in mods:
                members.append(base * mono * mod)
                labels.append(f"{name}|{mname}")
                if len(members) == m:
                    return TestFunctionFamily(r, np.array(members), tuple(labels))
    raise LocalizationError(f"family size m={m} exceeds the {len(members)} available generators")


def _real_orthonormalize(grid: MomentumGrid, vecs: np.ndarray, tol: float):
    """Orthonormal real combinations of vecs for the inner product Re<.|.>.

    Returns (basis, singular_values, coefficient matrix) with
    basis = coeff.T @ vecs, keeping singular values above tol * max.
    """
    k = vecs.shape[0]
    flat = vecs.reshape(k, -1)
    w = np.sqrt(grid.weight)
    a = np.concatenate([flat.real.T, flat.imag.T], axis=0) * w
    _, sv, vt = np.linalg.svd(a, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        raise LocalizationError("all generators vanish")
    keep = sv > tol * sv[0]
    coeff = vt[keep].T / sv[keep]
    basis = np.tensordot(coeff.T, vecs, axes=1)
    synth = vt[keep].T * sv[keep]   # vecs = synth @ basis on the kept range
    return basis, sv, synth


@dataclass(frozen=True, eq=False)
class Subspace:
    grid: MomentumGrid
    basis: np.ndarray      # (d, *shape), orthonormal
    tag: str
    svd_tolerance: float
    singular_values: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        return self.grid.inner(self.basis, f[None] if f.ndim == self.grid.s else f[:, None])

    def project(self, f: np.ndarray) -> np.ndarray:
        if self.tag == "real":
            # real-linear projection: Re<b|f> coefficients
            c = np.real(self.grid.inner(self.basis, f))
            return np.tensordot(c, self.basis, axes=1)
        c = self.grid.inner(self.basis, f)
        return np.tensordot(c, self.basis, axes=1)

    def gram(self) -> np.ndarray:
        b = self.basis.reshape(self.dim, -1)
        return (np.conj(b) @ b.T) * self.grid.weight

    def projection_matrix(self) -> np.ndarray:
        """Dense projector; only for small grids (tests)."""
        b = self.basis.reshape(self.dim, -1)
        return (b.T @ np.conj(b)) * self.grid.weight


def build_L_pm(grid: MomentumGrid, family: TestFunctionFamily, sign: str, tol: float = 1e-8) -> Subspace:
    """Orthonormal basis of the span of omega^{-/+1/2} psi-tilde_k (sign '+' / '-')."""
    if sign not in ("+", "-"):
        raise LocalizationError(f"sign must be '+' or '-', got {sign!r}")
    if family.m == 0:
        raise LocalizationError("empty test family")
    power = -0.5 if sign == "+" else 0.5
    gens = omega_power(grid, power)(grid.to_momentum(family.members))
    basis, sv, _ = _real_orthonormalize(grid, gens, tol)
    return Subspace(grid, basis, sign, tol, sv)


def build_L_real(Lplus: Subspace, Lminus: Subspace, tol: float = 1e-8) -> Subspace:
    """Real-linear span of (1+J)L+ and (1-J)L-, orthonormal for Re<.|.>."""
    if Lplus.grid is not Lminus.grid:
        raise LocalizationError("subspaces live on different grids")
    grid = Lplus.grid
    J = grid.conjugate_J
    gens = []
    for b in Lplus.basis:
        gens += [b + J(b), 1j * b + J(1j * b)]
    for b in Lminus.basis:
        gens += [b - J(b), 1j * b - J(1j * b)]
    gens = np.array(gens)
    norms = grid.norm(gens)
    gens = gens[norms > tol * norms.max()]
    if len(gens) == 0:
        raise LocalizationError("degenerate real subspace")
    basis, sv, _ = _real_orthonormalize(grid, gens, tol)
    return Subspace(grid, basis, "real", tol, sv)


@dataclass(frozen=True, eq=False)
class TestFunctionH:
    """h = autocorrelation of a half-radius bump; h-tilde normalized to sup 1."""

    r: float
    E: float
    autocorr: np.ndarray        # h at displacements m dx, m in offsets^s (odd-length cube)
    offsets: np.ndarray         # integer displacement index per axis
    htilde: np.ndarray
    min_on_ball: float
    sup_inv_sq_on_ball: float   # sup_{|p|<=E} h-tilde^{-2}

    @property
    def sup_inv_on_ball(self) -> float:
        return math.sqrt(self.sup_inv_sq_on_ball)


def choose_h(r: float, E: float, grid: MomentumGrid, threshold: float = 1e-12) -> TestFunctionH:
    if not (r > 0 and E > 0):
        raise LocalizationError("r and E must be positive")
    psi = bump(0.5 * r, grid.xnorm())
    psit = grid.to_momentum(psi)
    ht = np.abs(psit) ** 2
    if not ht.max() > 0:
        raise CertificateError(f"bump of radius {0.5 * r:g} misses every grid point (dx = {grid.dx:g})")
    ht = ht / ht.max()
    ball = grid.omega <= E
    if not ball.any():
        raise CertificateError(f"no grid point with |p| <= {E}")
    hmin = float(ht[ball].min())
    if hmin < threshold:
        raise CertificateError(
            f"min of h-tilde on |p|<={E} is {hmin:.3e} < {threshold:g}; "
            "shrink E or refine the grid"
        )
    # h-tilde = (2 pi)^{-s/2} dx^s sum_m h(m dx) exp(-i p m dx) with h the lattice autocorrelation
    auto, offsets = _autocorrelation(psi)
    scale = grid.dx ** grid.s * (2 * math.pi) ** (-grid.s / 2) / float((np.abs(psit) ** 2).max())
    return TestFunctionH(r, E, auto * scale, offsets, ht, hmin, hmin ** -2)


def _autocorrelation(psi: np.ndarray):
    """sum_j psi(x_j) psi(x_j - m dx) for integer displacements m, from the support box of psi."""
    idx = np.nonzero(psi)
    core = psi[tuple(slice(i.min(), i.max() + 1) for i in idx)]
    k = max(core.shape)
    core = np.pad(core, [(0, k - c) for c in core.shape])
    shape = (2 * k - 1,) * psi.ndim
    axes = tuple(range(psi.ndim))
    spec = np.fft.rfftn(core, shape, axes=axes)
    auto = np.fft.fftshift(np.fft.irfftn(np.abs(spec) ** 2, shape, axes=axes))
    return auto, np.arange(-(k - 1), k)


def _component_symbols(grid: MomentumGrid, E: float, gamma: float, h: TestFunctionH) -> dict:
    # |T_{E,+-}|^2 = L Q_E omega^{-1} L,  |T_{h,+-}|^2 = L omega^{-2 gamma} h-tilde L
    return {
        "E": omega_power(grid, -1.0).symbol * momentum_ball(grid, E).symbol,
        "h": omega_power(grid, -2.0 * gamma).symbol * h.htilde,
    }


@dataclass(frozen=True, eq=False)
class LocalizationSpectrum:
    grid: MomentumGrid
    t: np.ndarray              # descending, nonnegative
    e: np.ndarray              # (d, *shape), J-invariant orthonormal
    E: float
    gamma: float
    h: TestFunctionH
    Lplus: Subspace
    Lminus: Subspace
    components: dict           # (kind, sign) -> singular values of T_{kind,sign}
    symbols: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.t)

    def Lpm(self, sign: str) -> Subspace:
        return self.Lplus if sign == "+" else self.Lminus

    def apply_T_squared(self, f: np.ndarray) -> np.ndarray:
        """Sum of the four |T_*|^2 applied to f, built from the projections directly."""
        out = np.zeros_like(f, dtype=complex)
        for L in (self.Lplus, self.Lminus):
            pf = L.project(f)
            for sym in self.symbols.values():
                out += L.project(sym * pf)
        return out

    def component_matrix(self, kind: str, sign: str) -> np.ndarray:
        """T_{kind,sign} restricted to L_sign, in the orthonormal basis of L_sign."""
        L = self.Lpm(sign)
        root = np.sqrt(self.symbols[kind])
        return (root[None] * L.basis).reshape(L.dim, -1).T * np.sqrt(self.grid.weight)


def check_gamma(gamma: float, s: int) -> None:
    if not (0.5 <= gamma < (s - 1) / 2):
        raise LocalizationError(f"gamma must satisfy 1/2 <= gamma < {(s - 1) / 2:g}, got {gamma}")


def default_gamma(s: int, eps: float = 0.1) -> float:
    return (s - 1 - eps) / 2


def build_T(grid: MomentumGrid, Lplus: Subspace, Lminus: Subspace, E: float,
            gamma: float, h: TestFunctionH, tol: float = 1e-12) -> LocalizationSpectrum:
    check_gamma(gamma, grid.s)
    if not E > 0:
        raise LocalizationError(f"E must be positive, got {E}")
    symbols = _component_symbols(grid, E, gamma, h)
    total = symbols["E"] + symbols["h"]
    w = grid.weight
    blocks, components = [], {}
    for L in (Lplus, Lminus):
        b = L.basis.reshape(L.dim, -1)
        blocks.append(np.real(np.conj(b) @ (total.ravel()[:, None] * b.T)) * w)
        for kind, sym in symbols.items():
            a = np.real(np.conj(b) @ (sym.ravel()[:, None] * b.T)) * w
            ev = np.clip(np.linalg.eigvalsh(0.5 * (a + a.T)), 0, None)
            components[(kind, L.tag)] = np.sqrt(ev)[::-1]
    # T^2 = V M V^*, V = [B+, B-];  orthonormalize V and diagonalize R M R^T
    V = np.concatenate([Lplus.basis, Lminus.basis])
    Q, sv, synth = _real_orthonormalize(grid, V, tol)
    d1 = Lplus.dim
    M = np.zeros((V.shape[0], V.shape[0]))
    M[:d1, :d1] = blocks[0]
    M[d1:, d1:] = blocks[1]
    K = synth.T @ M @ synth
    K = 0.5 * (K + K.T)
    lam, W = np.linalg.eigh(K)
    order = np.argsort(lam)[::-1]
    lam, W = lam[order], W[:, order]
    t = np.sqrt(np.clip(lam, 0, None))
    e = np.tensordot(W.T, Q, axes=1)
    return LocalizationSpectrum(grid, t, e, E, gamma, h, Lplus, Lminus, components, symbols)


def schatten_p(values, p: float) -> float:
    """sum_j t_j^p over a spectrum (or a LocalizationSpectrum)."""
    if p <= 0:
        raise LocalizationError(f"p must be positive, got {p}")
    t = values.t if isinstance(values, LocalizationSpectrum) else np.asarray(values, dtype=float)
    t = t[t > 0]
    return float(np.sum(t ** p))


def kosaki_margin(a: np.ndarray, b: np.ndarray, p: float) -> float:
    """||A^p||_1 + ||B^p||_1 - ||(A+B)^p||_1 for positive semidefinite matrices."""
    def tr_pow(x):
        ev = np.linalg.eigvalsh(0.5 * (x + x.conj().T))
        # eigenvalues at round-off level are zero; small p would otherwise amplify them
        cut = len(ev) * np.finfo(float).eps * max(float(np.abs(ev).max()), 0.0) * 10
        return float(np.sum(ev[ev > cut] ** p))
    return tr_pow(a) + tr_pow(b) - tr_pow(a + b)


def component_gram(spec: LocalizationSpectrum, kind: str, sign: str) -> np.ndarray:
    """|T_{kind,sign}|^2 as a matrix on the common basis of L+ + L- (for Kosaki pairs)."""
    grid = spec.grid
    L = spec.Lpm(sign)
    d = len(spec.t)
    b = L.basis.reshape(L.dim, -1)
    coef = np.conj(b) @ spec.e.reshape(d, -1).T * grid.weight       # (dim L, d)
    proj = coef.T @ b                                                 # (d, npts)
    x = spec.symbols[kind].ravel()[None] * proj
    return np.real(np.conj(proj) @ x.T) * grid.weight


def chil_identity_check(L: Subspace, r: float, eps_pad: float | None = None, cutoff=None) -> float:
    """max_b ||b - omega^{-+1/2} chi(O_2r) omega^{+-1/2} b|| / ||b|| over the basis of L."""
    grid = L.grid
    sign = L.tag
    up = 0.5 if sign == "+" else -0.5
    if cutoff is None:
        chi = SmoothCutoff(2 * r, 0.25 * r if eps_pad is None else eps_pad).on_grid(grid)
    elif np.isscalar(cutoff):
        chi = np.full(grid.shape, float(cutoff))
    else:
        chi = cutoff
    fwd = omega_power(grid, up).symbol
    back = omega_power(grid, -up).symbol
    worst = 0.0
    for b in L.basis:
        w = back * grid.to_momentum(chi * grid.to_config(fwd * b))
        worst = max(worst, float(grid.norm(b - w) / grid.norm(b)))
    return worst
