"""Grid transforms: round trips, pointwise values, convolution support."""

import numpy as np
import pytest

from vortexnoise import build_lattice, random_solenoidal, transform_to_grid, transform_to_spectrum, zero_field
from vortexnoise.transforms import alias_free_size, grid_coordinates


def test_round_trip_identity(lat6):
    v = random_solenoidal(lat6, seed=8)
    for n in (14, 16, 27):
        g = transform_to_grid(v, n)
        assert np.isrealobj(g)
        back = transform_to_spectrum(g, lat6)
        assert np.abs(back.coeffs - v.coeffs).max() < 1e-12 * np.abs(v.coeffs).max()


def test_grid_too_small_rejected(lat6):
    with pytest.raises(ValueError):
        transform_to_grid(random_solenoidal(lat6, seed=0), 2 * lat6.M + 1)
    with pytest.raises(ValueError):
        transform_to_spectrum(np.zeros((3, 8, 8, 8)), lat6)


def test_single_mode_matches_formula():
    # v = cos(2 pi x1) e2 on the grid
    lat = build_lattice(2)
    v = zero_field(lat)
    i = lat.index_of((1, 0, 0))
    v.coeffs[i, 1] = 0.5
    v.coeffs[lat.conj_index[i], 1] = 0.5
    n = 12
    g = transform_to_grid(v, n)
    x, _, _ = grid_coordinates(n)
    assert np.abs(g[1] - np.cos(2 * np.pi * x)).max() < 1e-13
    assert np.abs(g[0]).max() < 1e-14 and np.abs(g[2]).max() < 1e-14


def test_complex_field_round_trip():
    lat = build_lattice(3)
    rng = np.random.default_rng(0)
    v = zero_field(lat, real=False, solenoidal=False)
    v.coeffs[:] = rng.standard_normal((lat.n_modes, 3)) + 1j * rng.standard_normal((lat.n_modes, 3))
    g = transform_to_grid(v, 16)
    assert np.iscomplexobj(g)
    back = transform_to_spectrum(g, lat)
    assert np.abs(back.coeffs - v.coeffs).max() < 1e-12 * np.abs(v.coeffs).max()


def test_product_supported_on_sum_and_difference_modes():
    # hand convolution: cos(2 pi a.x) * cos(2 pi b.x) lives at a+b and a-b
    lat = build_lattice(3)
    a, b = (1, 0, 0), (0, 1, 0)
    u = zero_field(lat)
    w = zero_field(lat)
    for fld, k in ((u, a), (w, b)):
        i = lat.index_of(k)
        fld.coeffs[i, 2] = 0.5
        fld.coeffs[lat.conj_index[i], 2] = 0.5
    n = max(alias_free_size(1, 1, 3), 2 * lat.M + 2)
    prod = transform_to_grid(u, n)[2] * transform_to_grid(w, n)[2]
    spec = transform_to_spectrum(np.stack([prod, np.zeros_like(prod), np.zeros_like(prod)]), lat)
    expected = {(1, 1, 0): 0.25, (-1, -1, 0): 0.25, (1, -1, 0): 0.25, (-1, 1, 0): 0.25}
    for i, k in enumerate(lat.modes):
        want = expected.get(tuple(k), 0.0)
        assert abs(spec.coeffs[i, 0] - want) < 1e-14


def test_alias_free_size_covers_quadratic_products():
    assert alias_free_size(8, 8, 8) >= 25
    assert alias_free_size(4, 8, 8) >= 21
