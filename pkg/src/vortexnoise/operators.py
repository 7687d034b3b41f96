"""Nonlinear terms of the vorticity system and the norm cutoff.

The literal operators (``lie_derivative``, ``lie_adjoint``, ``stretching_T``)
evaluate their defining pointwise expressions pseudo-spectrally on
alias-free grids.  ``nonlinearity_b`` assembles the full quadratic drift
through an equivalent curl form which needs far fewer transforms:

    L_u xi = u . grad xi - xi . grad u = curl(xi x u)        (u, xi div-free)
    T(B, u) = curl(V),  V_j = B . d_j u

so b1 = curl(xi x u - S eta x B) and b2 = curl(eta x u - xi x B - 2 V).
The two routes agree to rounding; the test suite cross-checks them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractViolation
from .fields import (TWO_PI, SpectralField, State, leray_project,
                     state_sobolev_norm)
from .transforms import alias_free_size, get_plan

__all__ = [
    "PhysicsParams", "CutoffFn", "cutoff_value",
    "lie_derivative", "lie_adjoint", "stretching_T", "nonlinearity_b",
]


@dataclass(frozen=True)
class PhysicsParams:
    """Reynolds numbers and the magnetic coupling strength."""

    Re: float = 1.0
    Rm: float = 1.0
    S: float = 1.0

    def __post_init__(self):
        for name in ("Re", "Rm", "S"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def _require_shared_lattice(X: SpectralField, Y: SpectralField) -> None:
    if X.lattice is not Y.lattice:
        raise ContractViolation("operands must live on the same lattice")


def _gradient_scalars(coeffs: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """(9, n_modes) rows d_j f_i = 2 pi i k_j f_i, row index 3*i + j."""
    kf = modes.astype(np.float64)
    out = np.empty((9, coeffs.shape[0]), dtype=np.complex128)
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = TWO_PI * 1j * kf[:, j] * coeffs[:, i]
    return out


def lie_derivative(X: SpectralField, Y: SpectralField) -> SpectralField:
    """Dealiased pseudo-spectral X . grad Y - Y . grad X."""
    _require_shared_lattice(X, Y)
    lat = X.lattice
    plan = get_plan(lat, alias_free_size(lat.M, lat.M, lat.M))

    scalars = np.concatenate([
        X.coeffs.T, Y.coeffs.T,
        _gradient_scalars(X.coeffs, lat.modes),
        _gradient_scalars(Y.coeffs, lat.modes),
    ])
    g = plan.to_grid(scalars)
    xg, yg = g[0:3], g[3:6]
    gx = g[6:15].reshape(3, 3, *g.shape[1:])
    gy = g[15:24].reshape(3, 3, *g.shape[1:])

    out = np.einsum("jxyz,ijxyz->ixyz", xg, gy) - np.einsum("jxyz,ijxyz->ixyz", yg, gx)
    coeffs = plan.to_spec(out).T
    return SpectralField(lat, np.ascontiguousarray(coeffs),
                         real=X.real and Y.real, solenoidal=False)


def lie_adjoint(X: SpectralField, Y: SpectralField) -> SpectralField:
    """X . grad Y + (grad X)^* Y with ((grad X)^* Y)_i = Y . d_i X.

    Dual to ``lie_derivative`` in L2: <L_X Y, Z> = -<Y, L*_X Z> for
    divergence-free X.
    """
    _require_shared_lattice(X, Y)
    lat = X.lattice
    plan = get_plan(lat, alias_free_size(lat.M, lat.M, lat.M))

    scalars = np.concatenate([
        X.coeffs.T, Y.coeffs.T,
        _gradient_scalars(X.coeffs, lat.modes),
        _gradient_scalars(Y.coeffs, lat.modes),
    ])
    g = plan.to_grid(scalars)
    xg, yg = g[0:3], g[3:6]
    gx = g[6:15].reshape(3, 3, *g.shape[1:])
    gy = g[15:24].reshape(3, 3, *g.shape[1:])

    # (grad X)^* Y in index form: sum_j Y_j d_i X_j
    out = (np.einsum("jxyz,ijxyz->ixyz", xg, gy)
           + np.einsum("jxyz,jixyz->ixyz", yg, gx))
    coeffs = plan.to_spec(out).T
    return SpectralField(lat, np.ascontiguousarray(coeffs),
                         real=X.real and Y.real, solenoidal=False)


def stretching_T(B: SpectralField, u: SpectralField) -> SpectralField:
    """Antisymmetric gradient coupling T(B, u)_i = eps_ijk d_j B . d_k u."""
    _require_shared_lattice(B, u)
    lat = B.lattice
    plan = get_plan(lat, alias_free_size(lat.M, lat.M, lat.M))

    scalars = np.concatenate([
        _gradient_scalars(B.coeffs, lat.modes),
        _gradient_scalars(u.coeffs, lat.modes),
    ])
    g = plan.to_grid(scalars)
    gb = g[0:9].reshape(3, 3, *g.shape[1:])
    gu = g[9:18].reshape(3, 3, *g.shape[1:])

    # d_j B . d_k u contracted over components
    m = np.einsum("mjxyz,mkxyz->jkxyz", gb, gu)
    out = np.stack([m[1, 2] - m[2, 1], m[2, 0] - m[0, 2], m[0, 1] - m[1, 0]])
    coeffs = plan.to_spec(out).T
    return SpectralField(lat, np.ascontiguousarray(coeffs),
                         real=B.real and u.real, solenoidal=False)


def nonlinearity_b(phi: State, params: PhysicsParams = PhysicsParams()) -> State:
    """Quadratic drift of the vorticity pair, Leray-projected.

    Velocity and magnetic fields are reconstructed internally from the two
    vorticities; the output is exactly solenoidal (curl form plus a final
    projection guarding rounding).
    """
    b1c, b2c = _nonlinearity_raw(phi.stack(), phi.lattice, params)
    b1 = leray_project(SpectralField(phi.lattice, b1c, real=True))
    b2 = leray_project(SpectralField(phi.lattice, b2c, real=True))
    return State(b1, b2)


def _nonlinearity_raw(stack: np.ndarray, lat, params: PhysicsParams,
                      plan=None, work=None):
    """Curl-form drift on raw (2, n_modes, 3) coefficients.

    Returns un-projected (b1, b2) coefficient arrays; the curl already makes
    them solenoidal up to rounding.  ``plan``/``work`` allow the stepper to
    reuse buffers.
    """
    xi_c, eta_c = stack[0], stack[1]
    if plan is None:
        plan = get_plan(lat, alias_free_size(lat.M, lat.M, lat.M))

    kf = lat.modes.astype(np.float64)
    inv = 1.0 / (TWO_PI * lat.k2[:, None])
    u_c = 1j * np.cross(kf, xi_c) * inv
    b_c = 1j * np.cross(kf, eta_c) * inv

    scalars = np.concatenate([
        u_c.T, b_c.T, xi_c.T, eta_c.T,
        _gradient_scalars(u_c, lat.modes),
    ])
    g = plan.to_grid(scalars, out_half=work)
    shp = g.shape[1:]
    flat = g.reshape(g.shape[0], -1)
    prods = kernels.drift_products(flat[0:3], flat[3:6], flat[6:9], flat[9:12],
                                   flat[12:21].reshape(3, 3, -1), params.S)
    spec = plan.to_spec(prods.reshape(6, *shp))

    b1 = TWO_PI * 1j * np.cross(kf, spec[0:3].T)
    b2 = TWO_PI * 1j * np.cross(kf, spec[3:6].T)
    return np.ascontiguousarray(b1), np.ascontiguousarray(b2)


@dataclass(frozen=True)
class CutoffFn:
    """C^1 plateau cutoff: 1 on [0, R], cubic blend down to 0 on [R, R+1]."""

    R: float

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("cutoff threshold R must be nonnegative")

    def value(self, r: float) -> float:
        if r <= self.R:
            return 1.0
        s = r - self.R
        if s >= 1.0:
            return 0.0
        return 1.0 - 3.0 * s * s + 2.0 * s ** 3


def cutoff_value(f: CutoffFn, phi: State, delta: float) -> float:
    """Cutoff evaluated at the negative-order Sobolev norm of the pair."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in the open interval (0, 1/2), got {delta}")
    return f.value(state_sobolev_norm(phi, -delta))
