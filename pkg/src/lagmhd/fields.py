"""Scalar, vector and matrix fields with lazily cached spectra.

Fields are treated as immutable: operations return fresh instances, and the
real samples and normalized Fourier coefficients are two views of the same
data, computed on first access from whichever representation the field was
built with.
"""

from __future__ import annotations

import numpy as np

from .errors import GridMismatchError
from .grid import Grid


class _Field:
    rank = 0

    def __init__(self, grid: Grid, values=None, spec=None):
        if values is None and spec is None:
            raise ValueError("field needs real values or spectral coefficients")
        expected = self._expected_shape(grid)
        for name, arr in (("values", values), ("spec", spec)):
            if arr is not None and arr.shape != expected:
                raise ValueError(
                    f"{name} shape {arr.shape} does not match grid shape {expected}"
                )
        self.grid = grid
        self._values = values
        self._spec = spec

    @classmethod
    def _expected_shape(cls, grid: Grid):
        return (grid.dim,) * cls.rank + grid.shape

    @classmethod
    def from_values(cls, grid: Grid, values):
        return cls(grid, values=np.asarray(values, dtype=float))

    @classmethod
    def from_spec(cls, grid: Grid, spec):
        return cls(grid, spec=np.asarray(spec, dtype=complex))

    @classmethod
    def zeros(cls, grid: Grid):
        return cls(grid, values=np.zeros(cls._expected_shape(grid)))

    @property
    def values(self):
        if self._values is None:
            self._values = self.grid.ifft(self._spec)
        return self._values

    @property
    def spec(self):
        if self._spec is None:
            self._spec = self.grid.fft(self._values)
        return self._spec

    def check_same_grid(self, other):
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("fields live on different grids")

    def conjugate_symmetry_error(self) -> float:
        """Max deviation of c(-k) from conj(c(k)), relative to the largest coefficient."""
        spec = self.spec
        axes = self.grid.spatial_axes
        flipped = spec
        for ax in axes:
            flipped = np.flip(flipped, axis=ax)
            flipped = np.roll(flipped, 1, axis=ax)
        scale = np.abs(spec).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(flipped - np.conj(spec)).max() / scale)


class ScalarField(_Field):
    rank = 0


class VectorField(_Field):
    rank = 1

    def component(self, i: int) -> ScalarField:
        return ScalarField(
            self.grid,
            values=None if self._values is None else self._values[i],
            spec=None if self._spec is None else self._spec[i],
        )


class MatrixField(_Field):
    rank = 2


def magnitude(field: _Field):
    """Pointwise Euclidean magnitude over all component channels."""
    v = field.values
    if field.rank == 0:
        return np.abs(v)
    flat = v.reshape((-1,) + field.grid.shape)
    return np.sqrt(np.sum(flat**2, axis=0))
