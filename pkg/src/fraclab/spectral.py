"""Periodic spectral discretization, transforms and norms.

The whole space R^d is replaced by the torus [0, L)^d sampled on N points per
axis. Fourier coefficients are stored in full complex (``fftn``) layout with
shape ``(n, N, ..., N)``.

Normalization
-------------
Coefficients are taken against the orthonormal basis ``exp(i xi.x) / L^(d/2)``::

    u_hat(xi) = L^(d/2) / N^d * sum_x u(x) exp(-i xi.x)

so that the discrete Parseval identity reads
``sum_xi |u_hat(xi)|^2 = (L/N)^d * sum_x |u(x)|^2`` (the trapezoidal value of
the L^2(torus) integral). The lattice measure is therefore 1 and the H^s norm
is simply ``(sum_xi (1 + |xi|^2)^s |u_hat(xi)|^2)^(1/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class FourierGrid:
    """Uniform periodic grid with its frequency lattice ``xi = (2 pi / L) k``."""

    dimension: int
    modes: int
    length: float = 2 * math.pi

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.modes < 4 or self.modes % 2:
            raise ValueError(f"modes per axis must be even and >= 4, got {self.modes}")
        if not self.length > 0:
            raise ValueError(f"domain length must be positive, got {self.length}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.modes,) * self.dimension

    @property
    def size(self) -> int:
        return self.modes**self.dimension

    @property
    def spacing(self) -> float:
        return self.length / self.modes

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    @cached_property
    def integer_lattice(self) -> tuple[np.ndarray, ...]:
        """Integer indices k per axis in fft order, broadcast to the full grid."""
        k = np.fft.fftfreq(self.modes, d=1.0 / self.modes)
        return tuple(np.meshgrid(*([k] * self.dimension), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        scale = 2 * math.pi / self.length
        return tuple(scale * k for k in self.integer_lattice)

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(sum(x**2 for x in self.wavenumbers))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep |k| < N/3 on every axis."""
        keep = np.ones(self.shape, dtype=bool)
        for k in self.integer_lattice:
            keep &= np.abs(k) < self.modes / 3
        return keep

    @cached_property
    def zero_index(self) -> tuple[int, ...]:
        return (0,) * self.dimension

    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.modes) * self.spacing
        return tuple(np.meshgrid(*([x] * self.dimension), indexing="ij"))

    def reflect(self, a: np.ndarray) -> np.ndarray:
        """Return ``a`` evaluated at the lattice point -k (trailing d axes)."""
        axes = tuple(range(a.ndim - self.dimension, a.ndim))
        return np.roll(np.flip(a, axis=axes), 1, axis=axes)


def hermitian_defect(coeffs: np.ndarray, grid: FourierGrid) -> float:
    """Max of |u_hat(-xi) - conj(u_hat(xi))| relative to max |u_hat|."""
    scale = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(grid.reflect(coeffs) - np.conj(coeffs))) / scale)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable n-component field of Fourier coefficients on a grid.

    ``hermitian`` records that the coefficients describe real physical fields.
    """

    grid: FourierGrid
    coeffs: np.ndarray
    hermitian: bool = True

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == self.grid.dimension:
            c = c[np.newaxis]
        if c.shape[1:] != self.grid.shape:
            raise ValueError(
                f"coefficient shape {c.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise FloatingPointError("spectral field contains non-finite coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: FourierGrid, n: int = 1) -> "SpectralField":
        return cls(grid, np.zeros((n,) + grid.shape, dtype=complex))

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def component(self, i: int) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs[i : i + 1], self.hermitian)

    def with_coeffs(self, coeffs: np.ndarray, hermitian: bool | None = None) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.hermitian if hermitian is None else hermitian)

    def _check_compatible(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        if other.n != self.n:
            raise ValueError(f"component count mismatch: {self.n} vs {other.n}")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs, self.hermitian and other.hermitian)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs, self.hermitian and other.hermitian)

    def __mul__(self, scalar: float) -> "SpectralField":
        scalar = complex(scalar)
        return SpectralField(self.grid, self.coeffs * scalar, self.hermitian and scalar.imag == 0)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs, self.hermitian)


def _fft_scale(grid: FourierGrid) -> float:
    return grid.length ** (grid.dimension / 2) / grid.size


def forward_transform(physical: np.ndarray, grid: FourierGrid) -> SpectralField:
    """Transform real samples of shape ``(n, N, ..., N)`` (or ``(N, ..., N)``)."""
    u = np.asarray(physical)
    if np.iscomplexobj(u):
        raise ValueError("forward_transform expects real physical samples")
    if u.ndim == grid.dimension:
        u = u[np.newaxis]
    if u.shape[1:] != grid.shape:
        raise ValueError(f"physical shape {u.shape} does not match grid {grid.shape}")
    axes = tuple(range(1, grid.dimension + 1))
    return SpectralField(grid, np.fft.fftn(u, axes=axes) * _fft_scale(grid), hermitian=True)


def inverse_transform(field: SpectralField) -> np.ndarray:
    """Real samples ``(n, N, ..., N)``; the field must carry the Hermitian flag."""
    if not field.hermitian:
        raise ValueError("inverse_transform requires a Hermitian (real) field")
    grid = field.grid
    axes = tuple(range(1, grid.dimension + 1))
    return np.fft.ifftn(field.coeffs, axes=axes).real / _fft_scale(grid)


def _to_physical(coeffs: np.ndarray, grid: FourierGrid) -> np.ndarray:
    axes = tuple(range(coeffs.ndim - grid.dimension, coeffs.ndim))
    return np.fft.ifftn(coeffs, axes=axes).real / _fft_scale(grid)


def _to_spectral(u: np.ndarray, grid: FourierGrid) -> np.ndarray:
    axes = tuple(range(u.ndim - grid.dimension, u.ndim))
    return np.fft.fftn(u, axes=axes) * _fft_scale(grid)


# -- norms -------------------------------------------------------------------


@dataclass(frozen=True)
class Hs:
    s: float


@dataclass(frozen=True)
class Lp:
    p: float

    def __post_init__(self):
        if not (self.p >= 2):
            raise ValueError(f"Lp exponent must lie in [2, inf], got {self.p}")


@dataclass(frozen=True)
class HomWsp:
    """Homogeneous Sobolev W^{sigma,p}: L^p norm of |D|^sigma u."""

    sigma: float
    p: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"homogeneous Sobolev order must be positive, got {self.sigma}")
        if not (2 <= self.p < math.inf):
            raise ValueError(f"homogeneous Sobolev exponent must lie in [2, inf), got {self.p}")


NormKind = Union[Hs, Lp, HomWsp]


def _lp(u: np.ndarray, p: float, grid: FourierGrid) -> np.ndarray:
    axes = tuple(range(1, grid.dimension + 1))
    if math.isinf(p):
        return np.max(np.abs(u), axis=axes)
    return (grid.cell_volume * np.sum(np.abs(u) ** p, axis=axes)) ** (1.0 / p)


def component_norms(field: SpectralField, kind: NormKind) -> np.ndarray:
    """Per-component norms, shape ``(n,)``."""
    grid = field.grid
    axes = tuple(range(1, grid.dimension + 1))
    if isinstance(kind, Hs):
        weight = (1.0 + grid.xi_norm**2) ** kind.s
        return np.sqrt(np.sum(weight * np.abs(field.coeffs) ** 2, axis=axes))
    if isinstance(kind, Lp):
        return _lp(inverse_transform(field), kind.p, grid)
    if isinstance(kind, HomWsp):
        m = grid.xi_norm**kind.sigma
        m[grid.zero_index] = 0.0
        return _lp(inverse_transform(field.with_coeffs(field.coeffs * m)), kind.p, grid)
    raise TypeError(f"unknown norm kind {kind!r}")


def norm(field: SpectralField, kind: NormKind) -> float:
    """Norm of a field; for several components the sum of component norms."""
    return float(np.sum(component_norms(field, kind)))


# -- products and multipliers -----------------------------------------------


def dealias(coeffs: np.ndarray, grid: FourierGrid) -> np.ndarray:
    return coeffs * grid.dealias_mask


def dealiased_product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Componentwise product a_i * b_i with 2/3-rule truncation of inputs and output."""
    a._check_compatible(b)
    grid = a.grid
    ua = _to_physical(dealias(a.coeffs, grid), grid)
    ub = _to_physical(dealias(b.coeffs, grid), grid)
    out = dealias(_to_spectral(ua * ub, grid), grid)
    return SpectralField(grid, out, hermitian=a.hermitian and b.hermitian)


Symbol = Callable[..., np.ndarray]


def evaluate_symbol(m: Symbol, grid: FourierGrid, at_zero=None) -> np.ndarray:
    """Evaluate ``m(xi_1, ..., xi_d)`` on the lattice.

    ``at_zero`` replaces the value at xi = 0; ``None`` keeps whatever ``m``
    returns there (it must then be finite).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.asarray(m(*grid.wavenumbers), dtype=complex)
    d = grid.dimension
    if values.ndim < d or values.shape[values.ndim - d :] != grid.shape:
        # constant scalar or constant matrix symbol
        values = np.broadcast_to(values.reshape(values.shape + (1,) * d), values.shape + grid.shape)
    values = np.array(values)
    if at_zero is not None:
        values[(Ellipsis,) + grid.zero_index] = at_zero
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("symbol evaluation produced non-finite values")
    return values


def multiplier_apply(field: SpectralField, m: Symbol, at_zero=None) -> SpectralField:
    """Apply u_hat(xi) -> m(xi) u_hat(xi).

    ``m`` may return a scalar symbol (shape of the grid, or a constant) or a
    matrix symbol of shape ``(n, n, N, ..., N)`` acting on the component vector.
    """
    grid = field.grid
    values = evaluate_symbol(m, grid, at_zero)
    if values.ndim == grid.dimension + 2:
        if values.shape[:2] != (field.n, field.n):
            raise ValueError(f"matrix symbol of shape {values.shape[:2]} for {field.n} components")
        out = np.einsum("ij...,j...->i...", values, field.coeffs)
    else:
        out = values * field.coeffs
    hermitian = field.hermitian and hermitian_defect(out, grid) <= HERMITIAN_RTOL
    return SpectralField(grid, out, hermitian=hermitian)


def band_limited_field(
    grid: FourierGrid,
    n: int = 1,
    rng: np.random.Generator | None = None,
    k_max: float | None = None,
    decay: float = 1.0,
) -> SpectralField:
    """Random real field supported on integer modes 0 < |k| <= k_max.

    Coefficients are complex Gaussians damped by ``(1 + |k|^2)^(-decay)`` and
    symmetrized so that the physical field is real. The Nyquist planes and the
    mean are zero.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    k_max = grid.modes / 3 - 1 if k_max is None else k_max
    kk = np.sqrt(sum(k.astype(float) ** 2 for k in grid.integer_lattice))
    support = (kk > 0) & (kk <= k_max) & grid.dealias_mask
    raw = rng.standard_normal((n,) + grid.shape) + 1j * rng.standard_normal((n,) + grid.shape)
    c = raw * support * (1 + kk**2) ** (-decay)
    c = 0.5 * (c + np.conj(grid.reflect(c)))
    return SpectralField(grid, c, hermitian=True)
