"""Band-limited real scalar fields on the unit N-torus (N <= 3).

A field is held dually: real-space samples and normalized spectral
coefficients. Periodic axes use complex Fourier coefficients (``fftn`` with
``norm="forward"``), so a coefficient is grid independent: the same array
describes the field on the stored grid and on any padded grid. The last axis
may instead carry a cosine series on cell-centred samples (null-flux boundary
at x = 0 and x = 1); derivatives along it produce sine series, tracked by the
field's ``parity``.

Nyquist modes follow the half-weight convention: the stored coefficient is
split evenly between +n/2 and -n/2 when the field is interpolated, and folded
back when a padded field is truncated.

Everything here is a pure function of immutable inputs.
"""
from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft as sfft

from app.phasefield.errors import InvalidGridError

logger = logging.getLogger(__name__)

PERIODIC = "periodic"
NEUMANN = "neumann"
AXIS_KINDS = (PERIODIC, NEUMANN)

Parity = Literal["even", "odd"]
Direction = Literal["to-spectrum", "to-samples"]

RealArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]

DEFAULT_PERIODIC_SAMPLES = 64
DEFAULT_FILM_PLANE = 64
DEFAULT_FILM_VERTICAL = 16


def _axis_slice(rank: int, axis: int, start: int, stop: int) -> tuple[slice, ...]:
    index = [slice(None)] * rank
    index[axis] = slice(start, stop)
    return tuple(index)


def _along(rank: int, axis: int, values: NDArray[np.generic]) -> NDArray[np.generic]:
    """Reshape a 1-D array so it broadcasts along ``axis`` of a rank-``rank`` array."""
    shape = [1] * rank
    shape[axis] = values.size
    return values.reshape(shape)


@dataclass(frozen=True)
class Grid:
    """Sample layout of a field: per-axis even counts and boundary kinds.

    Periodic axes sample x_j = j/n; a neumann axis samples the cell centres
    x_j = (j + 1/2)/n. Only the last axis may be neumann.
    """

    shape: tuple[int, ...]
    axis_kinds: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        shape = tuple(int(n) for n in self.shape)
        kinds = tuple(self.axis_kinds) or (PERIODIC,) * len(shape)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "axis_kinds", kinds)

        if not 1 <= len(shape) <= 3:
            raise InvalidGridError(f"rank must be 1, 2 or 3, got {len(shape)}")
        if len(kinds) != len(shape):
            raise InvalidGridError(
                f"{len(kinds)} axis kinds given for a rank-{len(shape)} grid"
            )
        for kind in kinds:
            if kind not in AXIS_KINDS:
                raise InvalidGridError(f"unknown axis kind {kind!r}")
        if NEUMANN in kinds[:-1]:
            raise InvalidGridError("only the last axis may be neumann")
        for n, kind in zip(shape, kinds, strict=True):
            if n % 2:
                raise InvalidGridError(f"sample counts must be even, got {n}")
            if kind == PERIODIC and n < 4:
                raise InvalidGridError(f"periodic axes need at least 4 samples, got {n}")
            if n < 2:
                raise InvalidGridError(f"an axis needs at least 2 samples, got {n}")

    @classmethod
    def default(cls, rank: int) -> Grid:
        """64 per axis up to rank 2, 32x32x16 for rank 3."""
        if rank == 3:
            return cls((32, 32, 16))
        return cls((DEFAULT_PERIODIC_SAMPLES,) * rank)

    @classmethod
    def film(
        cls, n_plane: int = DEFAULT_FILM_PLANE, n_vertical: int = DEFAULT_FILM_VERTICAL
    ) -> Grid:
        """Thin-film layout: periodic in-plane square, cosine series vertically."""
        return cls((n_plane, n_plane, n_vertical), (PERIODIC, PERIODIC, NEUMANN))

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def neumann(self) -> bool:
        return self.axis_kinds[-1] == NEUMANN

    @property
    def periodic_axes(self) -> tuple[int, ...]:
        return tuple(i for i, kind in enumerate(self.axis_kinds) if kind == PERIODIC)

    @property
    def zero_mode(self) -> tuple[int, ...]:
        return (0,) * self.rank

    @cached_property
    def padded(self) -> Grid:
        """Dealiasing grid: 2n+2 per periodic axis, 2n per neumann axis.

        Quartic products of band-limited fields, Nyquist content included, are
        integrated exactly on it.
        """
        shape = tuple(
            2 * n + 2 if kind == PERIODIC else 2 * n
            for n, kind in zip(self.shape, self.axis_kinds, strict=True)
        )
        return Grid(shape, self.axis_kinds)

    @cached_property
    def integer_wavenumbers(self) -> tuple[NDArray[np.int64], ...]:
        """Per-axis integer mode indices in storage order (Nyquist stored as -n/2)."""
        numbers = []
        for n, kind in zip(self.shape, self.axis_kinds, strict=True):
            if kind == PERIODIC:
                numbers.append(np.fft.fftfreq(n, 1.0 / n).round().astype(np.int64))
            else:
                numbers.append(np.arange(n, dtype=np.int64))
        return tuple(numbers)

    def axis_k_squared(self, axis: int) -> RealArray:
        """Squared wavenumber of one axis, broadcastable to the grid shape."""
        j = self.integer_wavenumbers[axis].astype(float)
        scale = 2.0 * np.pi if self.axis_kinds[axis] == PERIODIC else np.pi
        return _along(self.rank, axis, (scale * j) ** 2)

    @cached_property
    def k_squared(self) -> RealArray:
        """|k|^2 per stored mode: (2 pi j)^2 on periodic axes, (pi p)^2 on a neumann axis."""
        total = np.zeros(self.shape)
        for axis in range(self.rank):
            total = total + self.axis_k_squared(axis)
        return total

    @cached_property
    def inplane_k_squared(self) -> RealArray:
        """|k'|^2 over the periodic axes only."""
        total = np.zeros(self.shape)
        for axis in self.periodic_axes:
            total = total + self.axis_k_squared(axis)
        return total

    @cached_property
    def weights(self) -> RealArray:
        """Parseval weights: integral of f*g equals sum(weights * Re(f_hat * conj(g_hat)))."""
        total = np.ones(self.shape)
        for axis, (n, kind) in enumerate(zip(self.shape, self.axis_kinds, strict=True)):
            w = np.ones(n)
            if kind == PERIODIC:
                w[n // 2] = 0.5
            else:
                w[1:] = 0.5
            total = total * _along(self.rank, axis, w)
        return total

    @cached_property
    def nyquist_mask(self) -> NDArray[np.bool_]:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in self.periodic_axes:
            n = self.shape[axis]
            mask |= _along(self.rank, axis, np.arange(n) == n // 2).astype(bool)
        return mask

    def band_mask(self, band: int) -> NDArray[np.bool_]:
        """Modes with every |integer index| <= band (Nyquist always excluded)."""
        mask = np.ones(self.shape, dtype=bool)
        for axis, numbers in enumerate(self.integer_wavenumbers):
            mask &= _along(self.rank, axis, np.abs(numbers) <= band).astype(bool)
        return mask & ~self.nyquist_mask

    def coordinates(self) -> tuple[RealArray, ...]:
        axes = []
        for n, kind in zip(self.shape, self.axis_kinds, strict=True):
            offset = 0.0 if kind == PERIODIC else 0.5
            axes.append((np.arange(n) + offset) / n)
        return tuple(np.meshgrid(*axes, indexing="ij"))


def _forward(grid: Grid, values: RealArray, parity: Parity) -> ComplexArray:
    coeffs = np.asarray(values, dtype=float)
    if grid.neumann:
        n = grid.shape[-1]
        if parity == "even":
            coeffs = sfft.dct(coeffs, type=2, axis=-1) / n
            coeffs[..., 0] *= 0.5
        else:
            raw = sfft.dst(coeffs, type=2, axis=-1) / n
            coeffs = np.zeros_like(raw)
            coeffs[..., 1:] = raw[..., :-1]
    axes = grid.periodic_axes
    if not axes:
        return coeffs.astype(complex)
    return sfft.fftn(coeffs, axes=axes, norm="forward")


def _inverse(grid: Grid, spectrum: ComplexArray, parity: Parity) -> RealArray:
    axes = grid.periodic_axes
    if axes:
        coeffs = sfft.ifftn(spectrum, axes=axes, norm="forward").real
    else:
        coeffs = spectrum.real.copy()
    if not grid.neumann:
        return np.ascontiguousarray(coeffs)
    if parity == "even":
        c = coeffs.copy()
        c[..., 1:] *= 0.5
        return sfft.dct(c, type=3, axis=-1)
    s = np.zeros_like(coeffs)
    s[..., :-1] = 0.5 * coeffs[..., 1:]
    return sfft.dst(s, type=3, axis=-1)


def _pad_spectrum(grid: Grid, spectrum: ComplexArray, target: Grid) -> ComplexArray:
    out = spectrum
    for axis, kind in enumerate(grid.axis_kinds):
        n, big = grid.shape[axis], target.shape[axis]
        shape = list(out.shape)
        shape[axis] = big
        padded = np.zeros(shape, dtype=complex)
        if kind == NEUMANN:
            padded[_axis_slice(grid.rank, axis, 0, n)] = out
        else:
            h = n // 2
            padded[_axis_slice(grid.rank, axis, 0, h)] = out[_axis_slice(grid.rank, axis, 0, h)]
            padded[_axis_slice(grid.rank, axis, big - h + 1, big)] = out[
                _axis_slice(grid.rank, axis, h + 1, n)
            ]
            nyquist = 0.5 * out[_axis_slice(grid.rank, axis, h, h + 1)]
            padded[_axis_slice(grid.rank, axis, h, h + 1)] += nyquist
            padded[_axis_slice(grid.rank, axis, big - h, big - h + 1)] += nyquist
        out = padded
    return out


def _truncate_spectrum(source: Grid, spectrum: ComplexArray, grid: Grid) -> ComplexArray:
    out = spectrum
    for axis, kind in enumerate(grid.axis_kinds):
        n, big = grid.shape[axis], source.shape[axis]
        if kind == NEUMANN:
            out = out[_axis_slice(grid.rank, axis, 0, n)]
            continue
        h = n // 2
        shape = list(out.shape)
        shape[axis] = n
        cut = np.zeros(shape, dtype=complex)
        cut[_axis_slice(grid.rank, axis, 0, h)] = out[_axis_slice(grid.rank, axis, 0, h)]
        cut[_axis_slice(grid.rank, axis, h + 1, n)] = out[
            _axis_slice(grid.rank, axis, big - h + 1, big)
        ]
        cut[_axis_slice(grid.rank, axis, h, h + 1)] = (
            out[_axis_slice(grid.rank, axis, h, h + 1)]
            + out[_axis_slice(grid.rank, axis, big - h, big - h + 1)]
        )
        out = cut
    return out


class SpectralField:
    """Immutable real field with lazily computed sample and spectral views."""

    __slots__ = ("grid", "parity", "_values", "_spectrum")

    # numpy scalars defer to __rmul__ instead of building object arrays
    __array_ufunc__ = None

    def __init__(
        self,
        grid: Grid,
        *,
        values: ArrayLike | None = None,
        spectrum: ArrayLike | None = None,
        parity: Parity = "even",
    ) -> None:
        if values is None and spectrum is None:
            raise InvalidGridError("a field needs samples or a spectrum")
        if parity not in ("even", "odd"):
            raise InvalidGridError(f"unknown parity {parity!r}")
        if parity == "odd" and not grid.neumann:
            raise InvalidGridError("odd parity only exists on a neumann axis")
        self.grid = grid
        self.parity: Parity = parity
        self._values: RealArray | None = None
        self._spectrum: ComplexArray | None = None
        if values is not None:
            arr = np.array(values, dtype=float)
            if arr.size != grid.size:
                raise InvalidGridError(
                    f"{arr.size} samples do not fit a grid of shape {grid.shape}"
                )
            arr = arr.reshape(grid.shape)
            arr.setflags(write=False)
            self._values = arr
        if spectrum is not None:
            spec = np.array(spectrum, dtype=complex)
            if spec.shape != grid.shape:
                raise InvalidGridError(
                    f"spectrum of shape {spec.shape} does not match grid {grid.shape}"
                )
            spec.setflags(write=False)
            self._spectrum = spec

    # -- construction -----------------------------------------------------

    @classmethod
    def from_values(cls, grid: Grid, values: ArrayLike, parity: Parity = "even") -> SpectralField:
        return cls(grid, values=values, parity=parity)

    @classmethod
    def from_spectrum(
        cls, grid: Grid, spectrum: ArrayLike, parity: Parity = "even"
    ) -> SpectralField:
        return cls(grid, spectrum=spectrum, parity=parity)

    @classmethod
    def constant(cls, grid: Grid, m: float) -> SpectralField:
        spectrum = np.zeros(grid.shape, dtype=complex)
        spectrum[grid.zero_mode] = m
        return cls(grid, values=np.full(grid.shape, float(m)), spectrum=spectrum)

    @classmethod
    def from_function(
        cls, grid: Grid, fn: Callable[..., ArrayLike], parity: Parity = "even"
    ) -> SpectralField:
        """Sample ``fn(x1, ..., xN)`` on the grid coordinates."""
        return cls(grid, values=fn(*grid.coordinates()), parity=parity)

    @classmethod
    def from_padded_values(
        cls, grid: Grid, padded_values: ArrayLike, parity: Parity = "even"
    ) -> SpectralField:
        """Project samples taken on ``grid.padded`` back onto the stored band."""
        big = grid.padded
        spectrum = _forward(big, np.asarray(padded_values, dtype=float).reshape(big.shape), parity)
        return cls(grid, spectrum=_truncate_spectrum(big, spectrum, grid), parity=parity)

    # -- views --------------------------------------------------------------

    @property
    def values(self) -> RealArray:
        if self._values is None:
            values = _inverse(self.grid, self._spectrum, self.parity)  # type: ignore[arg-type]
            values.setflags(write=False)
            self._values = values
        return self._values

    @property
    def spectrum(self) -> ComplexArray:
        if self._spectrum is None:
            spectrum = _forward(self.grid, self._values, self.parity)  # type: ignore[arg-type]
            spectrum.setflags(write=False)
            self._spectrum = spectrum
        return self._spectrum

    def padded_values(self) -> RealArray:
        """Trigonometric interpolant sampled on the dealiasing grid."""
        big = self.grid.padded
        return _inverse(big, _pad_spectrum(self.grid, self.spectrum, big), self.parity)

    @property
    def mean(self) -> float:
        if self.parity == "even":
            return float(self.spectrum[self.grid.zero_mode].real)
        p = np.arange(1, self.grid.shape[-1])
        column = self.spectrum[(0,) * (self.grid.rank - 1) + (slice(1, None),)].real
        return float(np.sum(column * (1.0 - np.cos(np.pi * p)) / (np.pi * p)))

    def coefficient(self, k: Sequence[int]) -> tuple[float, float]:
        """The (a_k, b_k) pair of integer wave vector ``k`` (wave vector 2 pi k).

        On a neumann axis the last entry is the cosine index p. The pair
        describes a_k cos(k.x) + b_k sin(k.x) over the periodic axes.
        """
        k = tuple(int(j) for j in k)
        if len(k) != self.grid.rank:
            raise InvalidGridError(f"wave vector {k} does not match rank {self.grid.rank}")
        index = []
        for j, n, kind in zip(k, self.grid.shape, self.grid.axis_kinds, strict=True):
            if kind == PERIODIC:
                if abs(j) >= n // 2:
                    raise InvalidGridError(f"mode {k} is at or beyond the Nyquist index")
                index.append(j % n)
            else:
                if not 0 <= j < n:
                    raise InvalidGridError(f"cosine index {j} outside 0..{n - 1}")
                index.append(j)
        value = self.spectrum[tuple(index)]
        if all(k[axis] == 0 for axis in self.grid.periodic_axes):
            return float(value.real), 0.0
        return float(2.0 * value.real), float(-2.0 * value.imag)

    # -- arithmetic ---------------------------------------------------------

    def _check_compatible(self, other: SpectralField) -> None:
        if other.grid != self.grid:
            raise InvalidGridError(f"grid mismatch: {self.grid.shape} vs {other.grid.shape}")
        if other.parity != self.parity:
            raise InvalidGridError("parity mismatch")

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check_compatible(other)
        if self._values is not None and other._values is not None:
            return SpectralField(self.grid, values=self._values + other._values, parity=self.parity)
        return SpectralField(self.grid, spectrum=self.spectrum + other.spectrum, parity=self.parity)

    def __sub__(self, other: SpectralField) -> SpectralField:
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> SpectralField:
        if self._values is not None:
            return SpectralField(self.grid, values=scalar * self._values, parity=self.parity)
        return SpectralField(self.grid, spectrum=scalar * self.spectrum, parity=self.parity)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return (-1.0) * self

    def shifted(self, m: float) -> SpectralField:
        """The field plus the constant ``m``."""
        return self + SpectralField.constant(self.grid, m)

    def apply_symbol(self, symbol: ArrayLike) -> SpectralField:
        return SpectralField(
            self.grid, spectrum=self.spectrum * np.asarray(symbol), parity=self.parity
        )

    def zero_mean(self) -> SpectralField:
        if self.parity == "odd":
            return self
        spectrum = np.array(self.spectrum)
        spectrum[self.grid.zero_mode] = 0.0
        return SpectralField(self.grid, spectrum=spectrum)

    def __repr__(self) -> str:
        return f"SpectralField(shape={self.grid.shape}, kinds={self.grid.axis_kinds}, parity={self.parity})"


# -- operations ---------------------------------------------------------------


def transform(field: SpectralField, direction: Direction) -> SpectralField:
    """Populate the requested view. Fields are immutable, so this returns ``field``."""
    if direction == "to-spectrum":
        _ = field.spectrum
    elif direction == "to-samples":
        _ = field.values
    else:
        raise InvalidGridError(f"unknown transform direction {direction!r}")
    return field


def laplacian(field: SpectralField) -> SpectralField:
    return field.apply_symbol(-field.grid.k_squared)


def inverse_laplacian_zero_mean(field: SpectralField) -> SpectralField:
    """psi with -Laplacian(psi) = field - mean(field) and mean(psi) = 0."""
    k2 = field.grid.k_squared
    inverse = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    return field.zero_mean().apply_symbol(inverse)


def partial_derivative(field: SpectralField, axis: int) -> SpectralField:
    """Spectral derivative along ``axis``.

    Periodic axes multiply by i*2*pi*j with the Nyquist mode dropped. On the
    neumann axis cos(pi p x) maps to -pi p sin(pi p x) and back, flipping parity.
    """
    grid = field.grid
    if not 0 <= axis < grid.rank:
        raise InvalidGridError(f"axis {axis} out of range for rank {grid.rank}")
    if grid.axis_kinds[axis] == PERIODIC:
        n = grid.shape[axis]
        j = grid.integer_wavenumbers[axis].astype(float)
        factor = 2j * np.pi * j
        factor[n // 2] = 0.0
        return field.apply_symbol(_along(grid.rank, axis, factor))
    p = np.pi * grid.integer_wavenumbers[axis].astype(float)
    if field.parity == "even":
        return SpectralField(
            grid, spectrum=field.spectrum * _along(grid.rank, axis, -p), parity="odd"
        )
    return SpectralField(grid, spectrum=field.spectrum * _along(grid.rank, axis, p), parity="even")


def inner(f: SpectralField, g: SpectralField) -> float:
    """Exact L2 inner product over the unit cell, by Parseval."""
    f._check_compatible(g)
    return float(np.sum(f.grid.weights * (f.spectrum * np.conj(g.spectrum)).real))


def norm_l2(field: SpectralField) -> float:
    return float(np.sqrt(max(inner(field, field), 0.0)))


def integrate_product(f: SpectralField, g: SpectralField) -> float:
    """Integral of f*g by dealiased quadrature (same parity only)."""
    f._check_compatible(g)
    return float(np.mean(f.padded_values() * g.padded_values()))


def moments(u: SpectralField) -> tuple[float, float, float]:
    """(M2, M3, M4) = integrals of u^2, u^3, u^4, exact for band-limited u."""
    if u.parity != "even":
        raise InvalidGridError("moments are defined for cosine-parity fields only")
    v = u.padded_values()
    v2 = v * v
    return float(np.mean(v2)), float(np.mean(v2 * v)), float(np.mean(v2 * v2))


def pointwise(field: SpectralField, fn: Callable[[RealArray], RealArray]) -> SpectralField:
    """Dealiased nonlinearity: evaluate on the padded grid, project to the stored band."""
    return SpectralField.from_padded_values(field.grid, fn(field.padded_values()))


def plancherel_quadratic(phi: SpectralField, alpha: float) -> float:
    """Integral of (alpha*phi + Laplacian(phi))^2 on the torus.

    Equals alpha^2 m^2 + 1/2 * sum_{k != 0} (alpha - |k|^2)^2 (a_k^2 + b_k^2); the
    sum is taken over the full lattice with Parseval weights, which is the same
    quantity without the half-lattice bookkeeping.
    """
    if phi.grid.neumann:
        raise InvalidGridError("the Plancherel identity is stated on the periodic torus")
    symbol = (alpha - phi.grid.k_squared) ** 2
    return float(np.sum(phi.grid.weights * symbol * np.abs(phi.spectrum) ** 2))


def random_field(
    grid: Grid,
    rng: np.random.Generator,
    band: int,
    *,
    mean: float = 0.0,
    rms: float | None = None,
) -> SpectralField:
    """Random real field with modes |j|_inf <= band, mean ``mean``, fluctuation RMS ``rms``."""
    noise = SpectralField(grid, values=rng.standard_normal(grid.shape))
    spectrum = np.where(grid.band_mask(band), noise.spectrum, 0.0)
    spectrum[grid.zero_mode] = 0.0
    fluctuation = SpectralField(grid, spectrum=spectrum)
    if rms is not None:
        size = norm_l2(fluctuation)
        fluctuation = fluctuation * (rms / size if size > 0 else 0.0)
    spectrum = np.array(fluctuation.spectrum)
    spectrum[grid.zero_mode] = mean
    return SpectralField(grid, spectrum=spectrum)


def translation_aligned_distance(f: SpectralField, g: SpectralField) -> float:
    """min over grid translations s of ||f - g(. - s)||_2 on a periodic grid."""
    f._check_compatible(g)
    if f.grid.neumann:
        raise InvalidGridError("translations are only defined on periodic grids")
    correlation = sfft.ifftn(
        f.grid.weights * f.spectrum * np.conj(g.spectrum), norm="forward"
    ).real
    squared = inner(f, f) + inner(g, g) - 2.0 * float(correlation.max())
    return float(np.sqrt(max(squared, 0.0)))
