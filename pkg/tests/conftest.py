import numpy as np
import pytest

from qns1d.spectral import RealField, TorusGrid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid64():
    return TorusGrid(64, 21)


@pytest.fixture
def grid256():
    return TorusGrid(256, 85)


def band_limited(grid: TorusGrid, rng: np.random.Generator, amplitude: float = 1.0,
                 max_mode: int | None = None) -> RealField:
    """Random real field supported on modes 1..max_mode with 1/j^2 decay."""
    top = max_mode if max_mode is not None else grid.m_modes
    spec = np.zeros(grid.n_half, dtype=complex)
    for j in range(1, top + 1):
        spec[j] = amplitude / j**2 * (rng.standard_normal() + 1j * rng.standard_normal())
    return RealField.from_spectral(spec, grid)


def oracle_mode_coefficients(values_fine: np.ndarray, n_modes: int) -> np.ndarray:
    """Half-spectrum coefficients by direct quadrature sums, c_j = <f, e^{2 pi i j x}>."""
    n = values_fine.shape[0]
    x = np.arange(n) / n
    out = np.zeros(n_modes + 1, dtype=complex)
    for j in range(n_modes + 1):
        out[j] = np.mean(values_fine * np.exp(-2j * np.pi * j * x))
    return out
