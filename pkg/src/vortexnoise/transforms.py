"""Fourier <-> grid transforms and alias-free product grids.

Values use e_k(x) = exp(2*pi*i*k.x) with grid points x_j = j/n, so the
forward transform is the plain DFT scaled by 1/n^3 ("forward" norm in
scipy).  Real fields travel through the half-spectrum (rfft) layout, which
enforces the conjugate symmetry exactly on the way back.

Quadratic products are evaluated pointwise on grids large enough that every
retained output mode is alias-free: a product of factors with per-component
radii r1 and r2, truncated back to radius r_out, is exact once
n >= r1 + r2 + r_out + 1 (the classical 2/3-style truncation with the grid
chosen so the 1/3 band covers the retained modes).
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .backend import thread_count
from .fields import SpectralField
from .lattice import Lattice

__all__ = [
    "GridPlan", "get_plan", "alias_free_size",
    "transform_to_grid", "transform_to_spectrum", "grid_coordinates",
]

_PLAN_CACHE: dict[tuple[int, int], "GridPlan"] = {}


def alias_free_size(r1: int, r2: int, r_out: int) -> int:
    """Smallest fast FFT length with no aliasing into modes |m_i| <= r_out."""
    return sfft.next_fast_len(r1 + r2 + r_out + 1, real=True)


def grid_coordinates(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Meshgrid of the n^3 collocation points x_j = j/n."""
    x = np.arange(n) / n
    return np.meshgrid(x, x, x, indexing="ij")


class GridPlan:
    """Scatter/gather tables between a lattice and FFT buffers of size n^3."""

    def __init__(self, lattice: Lattice, n: int):
        if n < 2 * lattice.M + 1:
            raise ValueError(
                f"grid size {n} cannot represent modes up to |k| = {lattice.M}")
        self.lattice = lattice
        self.n = n
        self.nz = n // 2 + 1
        modes = lattice.modes

        # rfft half-spectrum layout: own slot for every mode with kz >= 0
        half = modes[:, 2] >= 0
        self.pack_sel = np.nonzero(half)[0]
        ix = np.mod(modes[half, 0], n)
        iy = np.mod(modes[half, 1], n)
        iz = modes[half, 2]
        self.pack_flat = np.ravel_multi_index((ix, iy, iz), (n, n, self.nz))

        src = np.where(half[:, None], modes, -modes)
        gx = np.mod(src[:, 0], n)
        gy = np.mod(src[:, 1], n)
        gz = src[:, 2]
        self.gather_flat = np.ravel_multi_index((gx, gy, gz), (n, n, self.nz))
        self.gather_conj = ~half

        # full c2c layout (complex fields)
        fx = np.mod(modes[:, 0], n)
        fy = np.mod(modes[:, 1], n)
        fz = np.mod(modes[:, 2], n)
        self.full_flat = np.ravel_multi_index((fx, fy, fz), (n, n, n))

    # -- buffers ------------------------------------------------------------

    def alloc_half(self, m: int) -> np.ndarray:
        """Zeroed half-spectrum buffer for m scalar fields."""
        return np.zeros((m, self.n, self.n, self.nz), dtype=np.complex128)

    def pack_into(self, buf: np.ndarray, scalars: np.ndarray) -> None:
        """Write scalar-field coefficients (m, n_modes) into (m, n, n, nz).

        Only mode slots are written; the caller keeps the rest of the buffer
        zero across reuses.
        """
        flat = buf.reshape(buf.shape[0], -1)
        flat[:, self.pack_flat] = scalars[:, self.pack_sel]

    def gather_from(self, buf: np.ndarray) -> np.ndarray:
        """Read scalar-field coefficients (m, n_modes) from (m, n, n, nz)."""
        flat = buf.reshape(buf.shape[0], -1)
        out = flat[:, self.gather_flat].copy()
        out[:, self.gather_conj] = np.conj(out[:, self.gather_conj])
        return out

    # -- transforms ----------------------------------------------------------

    def to_grid(self, scalars: np.ndarray, out_half: np.ndarray | None = None) -> np.ndarray:
        """Batched inverse transform of (m, n_modes) coefficients to real grids."""
        buf = out_half if out_half is not None else self.alloc_half(scalars.shape[0])
        self.pack_into(buf, scalars)
        return sfft.irfftn(buf, s=(self.n,) * 3, axes=(-3, -2, -1),
                           norm="forward", workers=thread_count())

    def to_spec(self, grids: np.ndarray) -> np.ndarray:
        """Batched forward transform of (m, n, n, n) real grids to (m, n_modes)."""
        buf = sfft.rfftn(grids, axes=(-3, -2, -1), norm="forward",
                         workers=thread_count())
        return self.gather_from(buf)


def get_plan(lattice: Lattice, n: int) -> GridPlan:
    key = (lattice.M, n)
    plan = _PLAN_CACHE.get(key)
    if plan is None or plan.lattice is not lattice:
        plan = GridPlan(lattice, n)
        _PLAN_CACHE[key] = plan
    return plan


def transform_to_grid(v: SpectralField, n: int) -> np.ndarray:
    """Evaluate v at the n^3 collocation points; shape (3, n, n, n).

    Real fields return float64 grids (conjugate symmetry is enforced by the
    half-spectrum layout); complex fields return complex128 grids.
    """
    if n < 2 * v.lattice.M + 2:
        raise ValueError(
            f"grid size {n} too small for lattice radius {v.lattice.M}; need n >= {2 * v.lattice.M + 2}")
    plan = get_plan(v.lattice, n)
    if v.real:
        return plan.to_grid(v.coeffs.T.copy())
    buf = np.zeros((3, n, n, n), dtype=np.complex128)
    flat = buf.reshape(3, -1)
    flat[:, plan.full_flat] = v.coeffs.T
    return sfft.ifftn(buf, axes=(-3, -2, -1), norm="forward", workers=thread_count())


def transform_to_spectrum(grid: np.ndarray, lattice: Lattice) -> SpectralField:
    """Project grid samples (3, n, n, n) onto the lattice modes."""
    if grid.ndim != 4 or grid.shape[0] != 3:
        raise ValueError("expected grid of shape (3, n, n, n)")
    n = grid.shape[1]
    if n < 2 * lattice.M + 2:
        raise ValueError(
            f"grid size {n} too small for lattice radius {lattice.M}; need n >= {2 * lattice.M + 2}")
    plan = get_plan(lattice, n)
    if np.isrealobj(grid):
        coeffs = plan.to_spec(grid).T.copy()
        return SpectralField(lattice, np.ascontiguousarray(coeffs), real=True)
    buf = sfft.fftn(grid, axes=(-3, -2, -1), norm="forward", workers=thread_count())
    coeffs = buf.reshape(3, -1)[:, plan.full_flat].T
    return SpectralField(lattice, np.ascontiguousarray(coeffs), real=False)
