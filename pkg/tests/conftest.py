import numpy as np
import pytest

from lagmhd.fields import ScalarField, VectorField
from lagmhd.grid import Grid
from lagmhd.spectral import dealias_spec


@pytest.fixture(scope="session")
def grid3():
    return Grid((16, 16, 16), (2 * np.pi, 2 * np.pi, 2 * np.pi))


@pytest.fixture(scope="session")
def grid2():
    return Grid((32, 32), (2 * np.pi, 2 * np.pi))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def mesh(grid):
    return np.meshgrid(
        *[np.arange(n) * h for n, h in zip(grid.sizes, grid.spacings)], indexing="ij"
    )


def random_band_limited(grid, rng, rank=1, kmax=3, scale=1.0):
    """Random real field with spectrum confined to |n_i| <= kmax."""
    shape = (grid.dim,) * rank + grid.shape
    vals = rng.standard_normal(shape)
    spec = grid.fft(vals)
    mask = np.ones(grid.shape, dtype=bool)
    for i, n in enumerate(grid.sizes):
        keep = np.abs(np.fft.fftfreq(n) * n) <= kmax
        mask &= keep.reshape([-1 if j == i else 1 for j in range(grid.dim)])
    spec = spec * mask
    spec = dealias_spec(spec, grid)
    vals = grid.ifft(spec)
    vals *= scale / max(np.abs(vals).max(), 1e-300)
    cls = {0: ScalarField, 1: VectorField}
    if rank in cls:
        return cls[rank].from_values(grid, vals)
    from lagmhd.fields import MatrixField

    return MatrixField.from_values(grid, vals)
