"""Spectral vector fields on the torus and the diagonal operators on them.

Coefficients follow the convention e_k(x) = exp(2*pi*i*k.x) on the unit
torus, so the Laplacian acts per mode as multiplication by -4*pi^2*|k|^2 and
curl as 2*pi*i*(k x .).  A field is *real* when c(-k) = conj(c(k)) and
*solenoidal* when k.c(k) = 0; both properties are tracked as flags and
preserved exactly (in floating point) by every operator in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .lattice import Lattice

__all__ = [
    "SpectralField", "State",
    "zero_field", "leray_project", "leray_perp", "biot_savart", "curl",
    "laplacian", "sobolev_norm", "l2_inner", "state_sobolev_norm",
    "random_solenoidal", "initial_state",
]

TWO_PI = 2.0 * np.pi
FOUR_PI2 = 4.0 * np.pi ** 2

_REALITY_TOL = 1e-12
_SOLENOID_TOL = 1e-10


@dataclass
class SpectralField:
    """Fourier coefficients of one 3-vector field, one row per lattice mode."""

    lattice: Lattice
    coeffs: np.ndarray           # (n_modes, 3) complex128
    real: bool = False
    solenoidal: bool = False

    def copy(self) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs.copy(), self.real, self.solenoidal)

    def check_real(self, tol: float = _REALITY_TOL) -> float:
        """Max deviation from c(-k) = conj(c(k)); raises above tol."""
        dev = np.abs(self.coeffs - np.conj(self.coeffs[self.lattice.conj_index])).max(initial=0.0)
        if dev > tol:
            raise ContractViolation(f"reality violated: max |c(k) - conj(c(-k))| = {dev:.3e}")
        return float(dev)

    def check_solenoidal(self, tol: float = _SOLENOID_TOL) -> float:
        """Max |k.c(k)| relative to the field size; raises above tol."""
        div = np.abs(np.sum(self.lattice.modes * self.coeffs, axis=1))
        scale = max(np.abs(self.coeffs).max(initial=0.0), 1e-300) * self.lattice.M
        dev = float(div.max(initial=0.0) / scale)
        if dev > tol:
            raise ContractViolation(f"solenoidality violated: relative divergence {dev:.3e}")
        return dev


@dataclass
class State:
    """The vorticity pair (fluid, magnetic); both components real solenoidal."""

    xi: SpectralField
    eta: SpectralField

    def __post_init__(self):
        if self.xi.lattice is not self.eta.lattice:
            raise ContractViolation("state components must share one lattice")

    @property
    def lattice(self) -> Lattice:
        return self.xi.lattice

    def stack(self) -> np.ndarray:
        """(2, n_modes, 3) view-copy used by the integrator hot path."""
        return np.stack([self.xi.coeffs, self.eta.coeffs])

    @classmethod
    def from_stack(cls, lattice: Lattice, arr: np.ndarray) -> "State":
        return cls(SpectralField(lattice, arr[0].copy(), True, True),
                   SpectralField(lattice, arr[1].copy(), True, True))

    def copy(self) -> "State":
        return State(self.xi.copy(), self.eta.copy())

    def l2_norm(self) -> float:
        return float(np.sqrt(sobolev_norm(self.xi, 0.0) ** 2 + sobolev_norm(self.eta, 0.0) ** 2))


def zero_field(lattice: Lattice, real: bool = True, solenoidal: bool = True) -> SpectralField:
    return SpectralField(lattice, np.zeros((lattice.n_modes, 3), dtype=np.complex128),
                         real, solenoidal)


def leray_project(v: SpectralField) -> SpectralField:
    """Remove the component along k at every mode: c -> c - k (k.c)/|k|^2."""
    k = v.lattice.modes.astype(np.float64)
    kc = np.sum(k * v.coeffs, axis=1)
    out = v.coeffs - k * (kc / v.lattice.k2)[:, None]
    return SpectralField(v.lattice, out, real=v.real, solenoidal=True)


def leray_perp(v: SpectralField) -> SpectralField:
    """The gradient part: c -> k (k.c)/|k|^2 (complement of leray_project)."""
    k = v.lattice.modes.astype(np.float64)
    kc = np.sum(k * v.coeffs, axis=1)
    out = k * (kc / v.lattice.k2)[:, None]
    return SpectralField(v.lattice, out, real=v.real, solenoidal=False)


def curl(v: SpectralField) -> SpectralField:
    """Spectral curl, 2*pi*i*(k x c) per mode."""
    k = v.lattice.modes.astype(np.float64)
    out = TWO_PI * 1j * np.cross(k, v.coeffs)
    return SpectralField(v.lattice, out, real=v.real, solenoidal=True)


def biot_savart(w: SpectralField) -> SpectralField:
    """Divergence-free velocity with curl u = w, diagonal in Fourier space.

    u(k) = i (k x w(k)) / (2*pi*|k|^2).  Input must be solenoidal (zero-mean
    is structural: there is no k = 0 mode).
    """
    w.check_solenoidal()
    k = w.lattice.modes.astype(np.float64)
    out = 1j * np.cross(k, w.coeffs) / (TWO_PI * w.lattice.k2[:, None])
    return SpectralField(w.lattice, out, real=w.real, solenoidal=True)


def laplacian(v: SpectralField) -> SpectralField:
    out = (-FOUR_PI2 * v.lattice.k2)[:, None] * v.coeffs
    return SpectralField(v.lattice, out, real=v.real, solenoidal=v.solenoidal)


def sobolev_norm(v: SpectralField, s: float) -> float:
    """( sum_k (4 pi^2 |k|^2)^s |c(k)|^2 )^(1/2) on the unit-volume torus."""
    w = (FOUR_PI2 * v.lattice.k2.astype(np.float64)) ** s
    return float(np.sqrt(np.sum(w * np.sum(np.abs(v.coeffs) ** 2, axis=1))))


def state_sobolev_norm(phi: State, s: float) -> float:
    """Norm of the stacked pair: square-sum of the component norms."""
    return float(np.sqrt(sobolev_norm(phi.xi, s) ** 2 + sobolev_norm(phi.eta, s) ** 2))


def l2_inner(f: SpectralField, g: SpectralField) -> complex:
    """Hermitian L2 pairing sum_k f(k).conj(g(k)) = integral f . conj(g) dx."""
    if f.lattice is not g.lattice:
        raise ContractViolation("inner product requires a shared lattice")
    val = complex(np.sum(f.coeffs * np.conj(g.coeffs)))
    return val


def random_solenoidal(lattice: Lattice, radius: int | None = None, seed: int = 0,
                      decay: float = 0.0) -> SpectralField:
    """Seeded real solenoidal field supported on |k| <= radius.

    ``decay`` applies a Gaussian spectral envelope exp(-decay*|k|^2) so test
    fields can be made smooth at will.
    """
    rng = np.random.default_rng(seed)
    n = lattice.n_modes
    raw = rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))
    if radius is not None:
        raw[lattice.k2 > radius * radius] = 0.0
    if decay > 0.0:
        raw *= np.exp(-decay * lattice.k2)[:, None]
    # hermitize, then remove the gradient part
    raw = 0.5 * (raw + np.conj(raw[lattice.conj_index]))
    v = SpectralField(lattice, raw, real=True, solenoidal=False)
    return leray_project(v)


def _normalize_state(phi: State, K: float) -> State:
    nrm = phi.l2_norm()
    if nrm == 0.0:
        if K != 0.0:
            raise ValueError("cannot normalize the zero state to a nonzero norm")
        return phi
    s = K / nrm
    phi.xi.coeffs *= s
    phi.eta.coeffs *= s
    return phi


def initial_state(lattice: Lattice, kind: str = "mixed", K: float = 1.0,
                  seed: int = 0) -> State:
    """Library of real solenoidal initial states with prescribed L2 norm K.

    kinds:
      "single-mode"    one low mode in each component (Taylor-Green flavored)
      "random-lowmode" seeded random field on |k| <= 2
      "mixed"          random low modes in the fluid part, shifted seed in the
                       magnetic part, equal energy split
      "stretching"     low-mode field biased toward large vortex stretching
                       (energy also in |k| = 2 and 3)
    """
    if kind == "single-mode":
        xi = zero_field(lattice)
        eta = zero_field(lattice)
        i1 = lattice.index_of((1, 0, 0))
        i2 = lattice.index_of((0, 1, 0))
        for idx, comp, fld in ((i1, 2, xi), (i2, 0, eta)):
            fld.coeffs[idx, comp] = 0.5
            fld.coeffs[lattice.conj_index[idx], comp] = 0.5
        phi = State(leray_project(xi), leray_project(eta))
    elif kind == "random-lowmode":
        phi = State(random_solenoidal(lattice, radius=2, seed=seed),
                    random_solenoidal(lattice, radius=2, seed=seed + 104729))
    elif kind == "mixed":
        xi = random_solenoidal(lattice, radius=2, seed=seed)
        eta = random_solenoidal(lattice, radius=2, seed=seed + 7919)
        for f in (xi, eta):
            nrm = sobolev_norm(f, 0.0)
            f.coeffs *= 1.0 / nrm if nrm else 0.0
        phi = State(xi, eta)
    elif kind == "stretching":
        rad = min(3, lattice.M)
        phi = State(random_solenoidal(lattice, radius=rad, seed=seed, decay=0.05),
                    random_solenoidal(lattice, radius=rad, seed=seed + 13, decay=0.05))
    else:
        raise ValueError(f"unknown initial state kind {kind!r}")
    return _normalize_state(phi, K)
