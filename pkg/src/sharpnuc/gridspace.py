"""Discretized single-particle space L^2(R^s) in momentum representation.

Vectors are plain complex ``numpy`` arrays of shape ``grid.shape`` (or with
extra leading batch axes). The momentum lattice is

    p_k = (k + a) * dp - pmax,    dp = 2 pmax / n,

with ``a = 1/2`` on the default half-shifted grid, and the conjugate
configuration lattice uses the same offset with spacing ``dx = pi / pmax``.
Both lattices are then symmetric under reflection, so complex conjugation
in configuration space acts on momentum vectors as f(p) -> conj(f(-p))
without boundary terms.  With ``a = 1/2`` the configuration box is
antiperiodic (period ``2 pi / dp``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    s: int = 3
    n: int = 32
    pmax: float = 8.0
    half_shift: bool = True

    def validate(self, *, nuclearity: bool = False) -> None:
        if self.s < 2:
            raise GridError(f"spatial dimension must be >= 2, got {self.s}")
        if nuclearity and self.s < 3:
            raise GridError(
                "s=2 rejected: the nuclearity bounds need s >= 3 "
                "(infrared singularity of the massless field in two space dimensions)"
            )
        if self.n < 2 or self.n % 2:
            raise GridError(f"points per axis must be even and >= 2, got {self.n}")
        if not self.pmax > 0:
            raise GridError(f"pmax must be positive, got {self.pmax}")


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    spec: GridSpec
    dp: float
    dx: float
    p_axis: np.ndarray
    x_axis: np.ndarray
    pvecs: tuple          # s arrays of shape `shape`, momentum components
    omega: np.ndarray     # |p| on the grid
    reflection: np.ndarray  # flat permutation p -> -p
    _phase_in: tuple = field(repr=False)
    _phase_out: tuple = field(repr=False)

    @property
    def s(self) -> int:
        return self.spec.s

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def shape(self) -> tuple:
        return (self.spec.n,) * self.spec.s

    @property
    def size(self) -> int:
        return self.spec.n ** self.spec.s

    @property
    def weight(self) -> float:
        """Quadrature weight dp**s of the momentum Riemann sum."""
        return self.dp ** self.s

    @property
    def config_weight(self) -> float:
        return self.dx ** self.s

    @property
    def box(self) -> float:
        """Length of the (anti)periodic configuration box."""
        return self.n * self.dx

    @property
    def wrap_radius(self) -> float:
        """Half box length pi n / (2 pmax); spatial claims are restricted below it."""
        return 0.5 * self.box

    @property
    def has_origin(self) -> bool:
        return not self.spec.half_shift

    def xvecs(self) -> tuple:
        return tuple(np.meshgrid(*([self.x_axis] * self.s), indexing="ij"))

    def xnorm(self, center=None) -> np.ndarray:
        xs = self.xvecs()
        if center is None:
            center = np.zeros(self.s)
        return np.sqrt(sum((xi - ci) ** 2 for xi, ci in zip(xs, center)))

    # -- inner products ----------------------------------------------------

    def inner(self, f, g):
        """<f|g>, antilinear in f; reduces over the trailing grid axes."""
        axes = tuple(range(-self.s, 0))
        return np.sum(np.conj(f) * g, axis=axes) * self.weight

    def norm(self, f):
        axes = tuple(range(-self.s, 0))
        return np.sqrt(np.sum(np.abs(f) ** 2, axis=axes) * self.weight)

    def config_norm(self, f):
        axes = tuple(range(-self.s, 0))
        return np.sqrt(np.sum(np.abs(f) ** 2, axis=axes) * self.config_weight)

    # -- transforms ----------------------------------------------------------

    def to_momentum(self, g: np.ndarray) -> np.ndarray:
        """Fourier transform (2 pi)^{-s/2} int e^{-ipx} g(x) d^s x on the lattices."""
        g = np.asarray(g, dtype=complex)
        self._check_shape(g)
        axes = tuple(range(-self.s, 0))
        out = g * _outer_phase(self._phase_in, g.ndim)
        out = np.fft.fftn(out, axes=axes)
        out *= _outer_phase(self._phase_out, g.ndim)
        out *= (self.dx / np.sqrt(2 * np.pi)) ** self.s
        return out

    def to_config(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=complex)
        self._check_shape(f)
        axes = tuple(range(-self.s, 0))
        out = f * _outer_phase(tuple(np.conj(ph) for ph in self._phase_out), f.ndim)
        out = np.fft.ifftn(out, axes=axes)
        out *= _outer_phase(tuple(np.conj(ph) for ph in self._phase_in), f.ndim)
        out *= (self.n * self.dp / np.sqrt(2 * np.pi)) ** self.s
        return out

    # -- operators -----------------------------------------------------------

    def translate(self, f: np.ndarray, x) -> np.ndarray:
        """(U(x) f)(p) = exp(i(omega x0 - p.x)) f(p) with x = (x0, x1..xs)."""
        f = np.asarray(f)
        self._check_shape(f)
        return f * self.translation_phase(x)

    def translation_phase(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.s + 1,):
            raise GridError(f"translation needs {self.s + 1} components, got shape {x.shape}")
        theta = self.omega * x[0]
        for pi, xi in zip(self.pvecs, x[1:]):
            theta = theta - pi * xi
        return np.exp(1j * theta)

    def conjugate_J(self, f: np.ndarray) -> np.ndarray:
        """Complex conjugation in configuration space, acting as conj(f(-p))."""
        f = np.asarray(f)
        self._check_shape(f)
        lead = f.shape[: f.ndim - self.s]
        flat = f.reshape(lead + (self.size,))
        return np.conj(flat[..., self.reflection]).reshape(f.shape)

    def omega_power(self, a: float) -> "DiagonalOperator":
        return omega_power(self, a)

    def _check_shape(self, f) -> None:
        if tuple(f.shape[f.ndim - self.s:]) != self.shape:
            raise GridError(f"array shape {f.shape} does not end with grid shape {self.shape}")


def _outer_phase(phases: tuple, ndim: int) -> np.ndarray:
    s = len(phases)
    out = np.ones((1,) * ndim, dtype=complex)
    for axis, ph in enumerate(phases):
        shape = [1] * ndim
        shape[ndim - s + axis] = ph.size
        out = out * ph.reshape(shape)
    return out


def build_grid(spec: GridSpec) -> MomentumGrid:
    spec.validate()
    n, s = spec.n, spec.s
    offset = 0.5 if spec.half_shift else 0.0
    dp = 2.0 * spec.pmax / n
    dx = np.pi / spec.pmax
    k = np.arange(n)
    p_axis = (k + offset) * dp - spec.pmax
    x_axis = (k + offset) * dx - 0.5 * n * dx
    # p_k x_j = (2 pi / n)(k + c)(j + c) splits into an FFT and two phase factors
    c = offset - n / 2
    phase_in = np.exp(-2j * np.pi * c * k / n)
    phase_out = np.exp(-2j * np.pi * (c * k + c * c) / n)
    pvecs = tuple(np.meshgrid(*([p_axis] * s), indexing="ij"))
    omega = np.sqrt(sum(pi ** 2 for pi in pvecs))
    refl_axis = (n - 1 - k) if spec.half_shift else (-k) % n
    grids = np.meshgrid(*([refl_axis] * s), indexing="ij")
    reflection = np.ravel_multi_index(tuple(grids), (n,) * s).ravel()
    for arr in pvecs + (omega,):
        arr.setflags(write=False)
    return MomentumGrid(
        spec=spec,
        dp=dp,
        dx=dx,
        p_axis=p_axis,
        x_axis=x_axis,
        pvecs=pvecs,
        omega=omega,
        reflection=reflection,
        _phase_in=(phase_in,) * s,
        _phase_out=(phase_out,) * s,
    )


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    """Multiplication operator in momentum space."""

    symbol: np.ndarray
    tag: str = ""

    def __call__(self, f: np.ndarray) -> np.ndarray:
        return self.symbol * f

    def __matmul__(self, other: "DiagonalOperator") -> "DiagonalOperator":
        return DiagonalOperator(self.symbol * other.symbol, f"{self.tag}*{other.tag}")


def omega_power(grid: MomentumGrid, a: float) -> DiagonalOperator:
    if a == 0:
        return DiagonalOperator(np.ones(grid.shape), "omega^0")
    if a < 0 and np.any(grid.omega == 0):
        raise GridError("negative powers of omega need a grid without p = 0 (use half_shift)")
    with np.errstate(divide="ignore"):
        sym = grid.omega ** a
    return DiagonalOperator(sym, f"omega^{a:g}")


def momentum_ball(grid: MomentumGrid, radius: float) -> DiagonalOperator:
    """Indicator of |p| <= radius, the single-particle energy projection."""
    return DiagonalOperator((grid.omega <= radius).astype(float), f"Q[{radius:g}]")


def from_config_function(grid: MomentumGrid, fn: Callable[..., np.ndarray]) -> np.ndarray:
    """Sample fn(x1, ..., xs) on the configuration lattice and transform."""
    return grid.to_momentum(fn(*grid.xvecs()))
