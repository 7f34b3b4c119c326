"""Single-particle correlation functions x -> <g|U(x) g>, g = omega^{-1/2} h~ L e.

Two evaluators are provided: ``corr_fn`` sums plane waves at arbitrary
spacetime points (compiled kernel), ``corr_lattice`` returns the values at
every lattice displacement m*dx at once through one FFT.  The lattice route
is exact for compactly supported probes, which is what the support check
needs; off-lattice points see the trigonometric interpolant instead.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .gridspace import MomentumGrid, omega_power
from .kernels import plane_wave_sum
from .localization import LocalizationSpectrum, SmoothCutoff


class CorrelationError(ValueError):
    pass


def probe_vector(spec: LocalizationSpectrum, e: np.ndarray, sign: str) -> np.ndarray:
    grid = spec.grid
    return omega_power(grid, -0.5).symbol * spec.h.htilde * spec.Lpm(sign).project(e)


def _eigvec(spec: LocalizationSpectrum, index_or_vec):
    if np.ndim(index_or_vec) == 0:
        j = int(index_or_vec)
        return spec.e[j], float(spec.t[j])
    return np.asarray(index_or_vec), None


def _flat_momenta(grid: MomentumGrid) -> np.ndarray:
    return np.stack([p.ravel() for p in grid.pvecs], axis=1)


def corr_values(grid: MomentumGrid, g: np.ndarray, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != grid.s + 1:
        raise CorrelationError(f"points need {grid.s + 1} coordinates")
    w = (np.abs(g) ** 2).ravel() * grid.weight
    return plane_wave_sum(w, grid.omega.ravel(), _flat_momenta(grid), points)


def corr_fn(spec: LocalizationSpectrum, e, sign: str, points) -> np.ndarray:
    """<g|U(x)g> at each spacetime point x, g = omega^{-1/2} h~ L_sign e."""
    vec, _ = _eigvec(spec, e)
    return corr_values(spec.grid, probe_vector(spec, vec, sign), points)


def corr_lattice(grid: MomentumGrid, g: np.ndarray, x0: float = 0.0):
    """Correlation at all lattice displacements m*dx, m in [-n/2, n/2)^s.

    Returns (positions, values) with positions of shape (n^s, s).
    """
    n, s = grid.n, grid.s
    w = np.abs(g) ** 2 * grid.weight
    if x0:
        w = w * np.exp(1j * grid.omega * x0)
    # sum_k w_k exp(-i p_k m dx) = phase(m) * FFT(w)[m mod n], per axis
    offset = 0.5 if grid.spec.half_shift else 0.0
    c = offset - n / 2
    vals = np.fft.fftn(w)
    m = np.arange(-n // 2, n // 2)
    idx = np.ix_(*([m % n] * s))
    vals = vals[idx]
    phase = np.exp(-2j * np.pi * c * m / n)
    for axis in range(s):
        shape = [1] * s
        shape[axis] = n
        vals = vals * phase.reshape(shape)
    mesh = np.meshgrid(*([m * grid.dx] * s), indexing="ij")
    positions = np.stack([a.ravel() for a in mesh], axis=1)
    return positions, vals.ravel()


@dataclass
class CorrelationScan:
    t: float
    sign: str
    points: np.ndarray        # (k, s+1)
    values: np.ndarray        # complex
    bound: np.ndarray = None
    norm_sq: float = 0.0

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def margin(self):
        return None if self.bound is None else self.bound - self.moduli

    def rows(self):
        bound = self.bound if self.bound is not None else np.full(len(self.values), np.nan)
        margin = bound - self.moduli
        for x, v, b, mg in zip(self.points, self.values, bound, margin):
            yield list(x) + [v.real, v.imag, abs(v), b, mg]


def scan(spec: LocalizationSpectrum, e, sign: str, points, bound=None) -> CorrelationScan:
    vec, t = _eigvec(spec, e)
    g = probe_vector(spec, vec, sign)
    vals = corr_values(spec.grid, g, points)
    return CorrelationScan(t, sign, np.atleast_2d(points), vals, bound, float(spec.grid.norm(g) ** 2))


def write_scan_csv(path, scan_: CorrelationScan, s: int = 3) -> None:
    header = [f"x{i}" for i in range(s + 1)] + ["re", "im", "modulus", "bound", "margin"]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in scan_.rows():
            writer.writerow([repr(float(v)) for v in row])


@dataclass
class DecayFit:
    exponent: float
    amplitude: float
    window: tuple
    residual: float
    npoints: int
    radii: np.ndarray = field(default=None, repr=False)
    moduli: np.ndarray = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "amplitude": self.amplitude,
            "window": list(self.window),
            "residual": self.residual,
            "npoints": self.npoints,
        }


def fit_power_law(radii, moduli, window) -> DecayFit:
    """Least-squares fit log|c| = log A + k log r over radii inside window."""
    radii = np.asarray(radii, dtype=float)
    moduli = np.asarray(moduli, dtype=float)
    lo, hi = window
    sel = (radii >= lo) & (radii < hi) & (moduli > 0)
    if sel.sum() < 4:
        raise CorrelationError(f"only {int(sel.sum())} usable radii in window {window}")
    lx, ly = np.log(radii[sel]), np.log(moduli[sel])
    (k, loga), res, *_ = np.polyfit(lx, ly, 1, full=True)
    rms = float(np.sqrt(res[0] / sel.sum())) if len(res) else 0.0
    return DecayFit(float(k), float(np.exp(loga)), (float(lo), float(hi)), rms, int(sel.sum()),
                    radii[sel], moduli[sel])


def default_window(grid: MomentumGrid, r: float) -> tuple:
    """Fit window: beyond the probe support radius 2r, below the wrap radius."""
    lo, hi = 2.0 * r, grid.wrap_radius
    if lo >= hi:
        raise CorrelationError(f"empty fit window: 2r={lo:g} >= wrap radius {hi:g}")
    return lo, hi


def uniform_bound_constant(spec: LocalizationSpectrum) -> float:
    """sup_p omega^{2 gamma - 1} h~, so that |corr| <= constant * t^2."""
    return float(np.max(omega_power(spec.grid, 2 * spec.gamma - 1).symbol * spec.h.htilde))


@dataclass
class SupportCheck:
    max_ratio: float          # sup |corr| / ||g||^2 over the shell
    norm_sq: float
    shell: tuple
    npoints: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_ratio < self.tolerance


def support_vanishing_check(spec: LocalizationSpectrum, e, r: float, tolerance: float = 1e-6) -> SupportCheck:
    """sup of the (-) correlation over lattice displacements 4r < |x| < wrap radius, x0 = 0."""
    vec, _ = _eigvec(spec, e)
    grid = spec.grid
    g = probe_vector(spec, vec, "-")
    pos, vals = corr_lattice(grid, g)
    rr = np.linalg.norm(pos, axis=1)
    shell = (4 * r, grid.wrap_radius)
    sel = (rr > shell[0]) & (rr < shell[1])
    if not sel.any():
        raise CorrelationError(f"shell {shell} contains no lattice displacement")
    nsq = float(grid.norm(g) ** 2)
    return SupportCheck(float(np.abs(vals[sel]).max() / nsq), nsq, shell, int(sel.sum()), tolerance)


@dataclass
class SpatialDecay:
    fit: DecayFit
    t: float
    c_hat: float              # calibrated on lattice displacements
    test_max_ratio: float     # same ratio on off-lattice test points
    uniform_constant: float
    uniform_margin: float     # min over all sampled points of bound - |corr|
    power: float

    @property
    def bound_holds(self) -> bool:
        return self.test_max_ratio <= self.c_hat


def _random_directions(rng, k, s):
    v = rng.normal(size=(k, s))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def spatial_decay_fit(spec: LocalizationSpectrum, e, r: float, sign: str = "+", window=None,
                      rng=None, ntest: int = 64) -> SpatialDecay:
    """Power-law fit of |corr| at x0 = 0 and the c t^2 / (|x|+1)^{s-2} envelope check."""
    grid = spec.grid
    s = grid.s
    if s < 3:
        raise CorrelationError("spatial decay needs s >= 3")
    vec, t = _eigvec(spec, e)
    if t is None:
        raise CorrelationError("spatial_decay_fit needs an eigen-index")
    rng = np.random.default_rng(0) if rng is None else rng
    window = default_window(grid, r) if window is None else window
    g = probe_vector(spec, vec, sign)
    pos, vals = corr_lattice(grid, g)
    rr = np.linalg.norm(pos, axis=1)
    inside = rr < grid.wrap_radius
    mods = np.abs(vals)
    fit = fit_power_law(rr[inside], mods[inside], window)
    power = s - 2
    ratio = mods[inside] * (rr[inside] + 1) ** power / t ** 2
    c_hat = float(ratio.max())
    radii = rng.uniform(0, grid.wrap_radius, ntest)
    pts = np.concatenate([np.zeros((ntest, 1)), radii[:, None] * _random_directions(rng, ntest, s)], axis=1)
    tv = np.abs(corr_values(grid, g, pts))
    test_ratio = float((tv * (radii + 1) ** power / t ** 2).max())
    ucon = uniform_bound_constant(spec)
    umargin = float(min((ucon * t ** 2 - mods[inside]).min(), (ucon * t ** 2 - tv).min()))
    return SpatialDecay(fit, t, c_hat, test_ratio, ucon, umargin, power)


@dataclass
class KernelNormResult:
    x: np.ndarray
    norm: float
    bound: float
    restarts: np.ndarray
    iterations: int

    @property
    def margin(self) -> float:
        return self.bound - self.norm


def coulomb_constant(s: int) -> float:
    """c_s with F(x) = c_s |x|^{-(s-2)} the inverse transform of |p|^{-2}."""
    return 2 ** (s / 2 - 2) * math.gamma(s / 2 - 1)


def kernel_bound_constant(s: int, rho: float, eps_pad: float) -> float:
    """(2 pi)^{-s/2} int chi(O_{2(rho+eps)}) by quadrature."""
    return (2 * math.pi) ** (-s / 2) * SmoothCutoff(2 * (rho + eps_pad), eps_pad).integral(s)


def power_iteration_norm(apply, apply_adj, shape, rng, restarts=3, max_iter=200, min_iter=20, tol=1e-6):
    """Largest singular value of a matvec pair by power iteration on A^* A."""
    best, runs, iters = 0.0, [], 0
    for _ in range(restarts):
        v = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        v /= np.linalg.norm(v)
        sigma_old = 0.0
        for it in range(max_iter):
            w = apply(v)
            sigma = float(np.linalg.norm(w))
            if sigma == 0:
                break
            v = apply_adj(w)
            v /= np.linalg.norm(v)
            if it + 1 >= min_iter and abs(sigma - sigma_old) <= tol * sigma:
                break
            sigma_old = sigma
        else:
            raise CorrelationError("power iteration did not converge")
        iters = max(iters, it + 1)
        runs.append(sigma)
        best = max(best, sigma)
    return best, np.array(runs), iters


def kernel_norm_bound(grid: MomentumGrid, rho: float, eps_pad: float, x_vec, symbol=None,
                      rng=None, restarts: int = 3) -> KernelNormResult:
    """||chi(O_rho) F~ chi_x(O_rho)|| against c_{s,rho,eps} sup_{|z|<=2rho+3eps} |F(z-x)|.

    The default symbol is F~(p) = |p|^{-2}, for which F(x) = c_s |x|^{-(s-2)}.
    """
    s = grid.s
    x_vec = np.asarray(x_vec, dtype=float)
    dist = float(np.linalg.norm(x_vec))
    if dist < 3 * (rho + eps_pad):
        raise CorrelationError(f"|x|={dist:g} inside the excluded zone |x| < {3 * (rho + eps_pad):g}")
    if s < 3:
        raise CorrelationError("kernel bound with |p|^-2 needs s >= 3")
    rng = np.random.default_rng(0) if rng is None else rng
    if symbol is None:
        symbol = omega_power(grid, -2.0).symbol
    cut = SmoothCutoff(rho, eps_pad)
    chi = cut.on_grid(grid)
    chi_x = cut.on_grid(grid, center=x_vec)

    def apply(v):
        return chi * grid.to_config(symbol * grid.to_momentum(chi_x * v))

    def apply_adj(v):
        return chi_x * grid.to_config(np.conj(symbol) * grid.to_momentum(chi * v))

    # the lattice operator acts on configuration vectors with weight dx^s; both
    # transforms are unitary for their weights, so the l2 norm ratio is the operator norm
    norm, runs, iters = power_iteration_norm(apply, apply_adj, grid.shape, rng, restarts=restarts)
    reach = 2 * rho + 3 * eps_pad
    sup_f = coulomb_constant(s) * (dist - reach) ** (-(s - 2))
    bound = kernel_bound_constant(s, rho, eps_pad) * sup_f
    return KernelNormResult(x_vec, norm, bound, runs, iters)


def kernel_symbol_split(grid: MomentumGrid) -> dict:
    """|p|^{-1} = |p|^{-1} 1[|p|<1] + |p|^{-1} 1[|p|>=1]: L2 norm of the first, sup of the second."""
    inv = omega_power(grid, -1.0).symbol
    low = grid.omega < 1
    l2 = float(np.sqrt(np.sum(inv[low] ** 2) * grid.weight))
    sup_high = float(inv[~low].max()) if (~low).any() else 0.0
    return {"l2_part_norm": l2, "linf_part_sup": sup_high}


def kernel_sweep(grid: MomentumGrid, rho: float, eps_pad: float, nradii: int = 8, direction=None, rng=None):
    s = grid.s
    lo, hi = 3 * (rho + eps_pad), grid.wrap_radius
    if lo >= hi:
        raise CorrelationError(f"no valid kernel radii: {lo:g} >= wrap radius {hi:g}")
    direction = np.eye(s)[0] if direction is None else np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    rng = np.random.default_rng(0) if rng is None else rng
    radii = np.linspace(lo, hi, nradii, endpoint=False)
    return [kernel_norm_bound(grid, rho, eps_pad, rad * direction, rng=rng) for rad in radii]


@dataclass
class SpacelikeDecay:
    c_hat: float
    exponent_power: float
    train_points: int
    test_ratio_max: float
    ray_fit: DecayFit
    t: float

    @property
    def bound_holds(self) -> bool:
        return self.test_ratio_max <= self.c_hat


def spacelike_ratio(grid, g, points, t, power):
    pts = np.atleast_2d(points)
    sep = np.linalg.norm(pts[:, 1:], axis=1) - np.abs(pts[:, 0])
    if np.any(sep < -1e-12):
        raise CorrelationError("timelike point supplied; need |x| >= |x0|")
    vals = np.abs(corr_values(grid, g, pts))
    return vals * (sep + 1) ** power / t ** 2, vals


def calibrate_spacelike(grid: MomentumGrid, g: np.ndarray, t: float, power: float, times) -> float:
    """max over lattice displacements and the given times of |corr| (|x|-|x0|+1)^power / t^2."""
    best = 0.0
    for x0 in times:
        pos, vals = corr_lattice(grid, g, x0)
        rr = np.linalg.norm(pos, axis=1)
        sel = (rr < grid.wrap_radius) & (rr >= abs(x0))
        ratio = np.abs(vals[sel]) * (rr[sel] - abs(x0) + 1) ** power / t ** 2
        best = max(best, float(ratio.max()))
    return best


def spacelike_test_points(grid: MomentumGrid, rng, k: int) -> np.ndarray:
    s = grid.s
    rad = rng.uniform(0, grid.wrap_radius, k)
    x0 = rad * rng.uniform(-1, 1, k)
    return np.concatenate([x0[:, None], rad[:, None] * _random_directions(rng, k, s)], axis=1)


def spacelike_decay_check(spec: LocalizationSpectrum, e, sign: str, eps: float, r: float,
                          rng=None, ntimes: int = 7, ntest: int = 64) -> SpacelikeDecay:
    """Calibrate c on lattice displacements at several times, test on random spacelike points.

    Also fits the decay exponent along the ray x0 = |x|/2.
    """
    grid = spec.grid
    if not 0 < eps < 1:
        raise CorrelationError("eps must lie in (0, 1)")
    vec, t = _eigvec(spec, e)
    if t is None:
        raise CorrelationError("spacelike_decay_check needs an eigen-index")
    rng = np.random.default_rng(0) if rng is None else rng
    power = grid.s - 2 - eps
    g = probe_vector(spec, vec, sign)
    times = np.linspace(0, grid.wrap_radius, ntimes, endpoint=False)
    c_hat = calibrate_spacelike(grid, g, t, power, times)
    test = spacelike_test_points(grid, rng, ntest)
    ratio, _ = spacelike_ratio(grid, g, test, t, power)
    ray = ray_points(grid, 0.5, 2 * r, grid.wrap_radius, 24)
    rvals = np.abs(corr_values(grid, g, ray))
    fit = fit_power_law(np.linalg.norm(ray[:, 1:], axis=1), rvals, (2 * r, grid.wrap_radius))
    return SpacelikeDecay(c_hat, power, len(times), float(ratio.max()), fit, t)


def ray_points(grid: MomentumGrid, slope: float, lo: float, hi: float, k: int, direction=None) -> np.ndarray:
    """Points with x0 = slope*|x| along a spatial direction, |x| in [lo, hi)."""
    s = grid.s
    direction = np.ones(s) if direction is None else np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    rad = np.linspace(lo, hi, k, endpoint=False)
    return np.concatenate([slope * rad[:, None], rad[:, None] * direction], axis=1)


def positive_definiteness_margin(grid: MomentumGrid, g: np.ndarray, points) -> float:
    """min eigenvalue of [corr(x_j - x_i)]_{ij} relative to ||g||^2."""
    pts = np.atleast_2d(points)
    diffs = (pts[None, :, :] - pts[:, None, :]).reshape(-1, pts.shape[1])
    gram = corr_values(grid, g, diffs).reshape(len(pts), len(pts))
    gram = 0.5 * (gram + gram.conj().T)
    return float(np.linalg.eigvalsh(gram).min() / grid.norm(g) ** 2)
