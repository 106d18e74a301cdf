"""Periodic grids and the spectral bookkeeping shared by every module.

Axis 0 of the spatial shape is the distinguished y1 direction: the background
magnetic field points along it, and all anisotropic weights single out k1.
Component axes of vector/matrix data always come first, so spatial axes are
the last ``dim`` axes and spectral transforms act on those.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on a box of per-axis lengths L_i with N_i points.

    Wavevectors follow FFT ordering, k_i = (2*pi/L_i) * n_i with
    n_i in {0, ..., N_i/2 - 1, -N_i/2, ..., -1}.
    """

    sizes: tuple
    lengths: tuple
    dealias: bool = True  # False leaves the top-third mask fully open

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        lengths = tuple(float(l) for l in self.lengths)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "lengths", lengths)
        if len(sizes) not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {len(sizes)}")
        if len(lengths) != len(sizes):
            raise ValueError("sizes and lengths must have matching dimension")
        for n in sizes:
            if not _is_power_of_two(n):
                raise ValueError(f"grid size {n} is not a power of two")
        for l in lengths:
            if not l > 0:
                raise ValueError(f"box length {l} must be positive")

        dim = len(sizes)
        spacings = tuple(l / n for n, l in zip(sizes, lengths))
        k1d = tuple(
            2.0 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(sizes, spacings)
        )
        # broadcastable views: k_axes[i] has shape (1,..,N_i,..,1)
        k_axes = tuple(
            k1d[i].reshape([-1 if j == i else 1 for j in range(dim)])
            for i in range(dim)
        )
        k2 = np.zeros(sizes)
        for ka in k_axes:
            k2 = k2 + ka**2
        # 2/3 rule: keep |n_i| < N_i/3 per axis so that products of retained
        # modes alias only onto discarded ones
        mask = np.ones(sizes, dtype=bool)
        if self.dealias:
            for i, n in enumerate(sizes):
                ncut = int(np.ceil(n / 3.0)) - 1
                idx = np.abs(np.fft.fftfreq(n) * n) <= ncut
                mask = mask & idx.reshape([-1 if j == i else 1 for j in range(dim)])
        coords = tuple(
            (spacings[i] * np.arange(sizes[i])).reshape(
                [-1 if j == i else 1 for j in range(dim)]
            )
            for i in range(dim)
        )

        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "spacings", spacings)
        object.__setattr__(self, "volume", float(np.prod(lengths)))
        object.__setattr__(self, "npoints", int(np.prod(sizes)))
        object.__setattr__(self, "k1d", k1d)
        object.__setattr__(self, "k_axes", k_axes)
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "k1sq", k_axes[0] ** 2)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "dealias_mask", mask)
        object.__setattr__(self, "_hs_weights", {})

    # -- transforms --------------------------------------------------------

    @property
    def shape(self):
        return self.sizes

    @property
    def spatial_axes(self):
        return tuple(range(-self.dim, 0))

    def fft(self, values):
        """Real samples -> normalized coefficients c_k with f(y) = sum c_k e^{ik.y}."""
        return sfft.fftn(values, axes=self.spatial_axes) / self.npoints

    def ifft(self, spec):
        """Normalized coefficients -> real samples (imaginary part discarded)."""
        return sfft.ifftn(spec * self.npoints, axes=self.spatial_axes).real

    def ifft_complex(self, spec):
        return sfft.ifftn(spec * self.npoints, axes=self.spatial_axes)

    # -- norms and weights --------------------------------------------------

    def hs_weight(self, s: int):
        """Multi-index Sobolev weight sum_{|alpha|<=s} prod_i k_i^(2 alpha_i).

        Kept as the literal multi-index sum (each alpha counted once), not the
        equivalent (1+|k|^2)^s weight, so inner products reproduce the exact
        coefficients of the energy functionals.
        """
        if s not in (0, 1, 2, 3, 4):
            raise ValueError(f"Sobolev order s={s} outside supported range 0..4")
        cache = self._hs_weights
        if s not in cache:
            w = np.zeros(self.sizes)
            for alpha in multi_indices(self.dim, s):
                term = np.ones(self.sizes)
                for ka, a in zip(self.k_axes, alpha):
                    if a:
                        term = term * ka ** (2 * a)
                w += term
            cache[s] = w
        return cache[s]

    def same_as(self, other: "Grid") -> bool:
        return self.sizes == other.sizes and np.allclose(self.lengths, other.lengths)


def multi_indices(dim: int, s: int):
    """All multi-indices alpha with |alpha| <= s, each exactly once."""
    return [
        alpha
        for alpha in itertools.product(range(s + 1), repeat=dim)
        if sum(alpha) <= s
    ]
