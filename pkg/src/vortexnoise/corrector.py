"""The drift correction turning Stratonovich transport noise into Ito form.

For shell weights theta and intensity parameter nu, the corrector acts mode
by mode: writing P_m for the projection onto the plane orthogonal to m,

    S_theta(v)(l) = -4 pi^2 * (C^2 / |theta|^2) *
                    sum_k theta_k^2 [ (a1_k.l)^2 + (a2_k.l)^2 ] P_l P_{l-k} v(l)

with C^2 = 3 nu / 2.  The shift identity sigma_{k,a}.grad(c e_l) =
2 pi i (a_{k,a}.l) c e_{k+l} makes the double advection diagonal in l, so
the sum over the shell is exact (intermediate modes l - k never need to be
truncated).  For radial theta the frame sums satisfy
sum_k theta_k^2 [(a1.l)^2 + (a2.l)^2] = (2/3) |theta|^2 |l|^2 exactly, which
gives the decomposition S_theta = nu * Laplacian - S_perp used below.

In the dyadic-shell scaling the corrector converges to (3/5) nu * Laplacian;
the complementary part S_perp converges to (2/5) nu * Laplacian, with the
angular factor (1/2) integral_0^pi sin^5 = 8/15 behind the split.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from . import kernels
from .fields import FOUR_PI2, SpectralField, laplacian
from .lattice import Lattice, build_lattice
from .noise import ThetaSequence, make_theta_N

__all__ = [
    "assemble_corrector_matrices", "corrector_S_theta", "corrector_limit",
    "corrector_perp", "angular_integral_check", "shell_sin4_average",
]


def assemble_corrector_matrices(theta: ThetaSequence, nu: float,
                                lattice: Lattice) -> np.ndarray:
    """Per-mode symmetric 3x3 matrices A_l with (S_theta v)(l) = A_l v(l).

    ``lattice`` is the lattice of the fields the corrector will act on; it
    need not coincide with theta's lattice.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    sup = theta.support
    s1, q = kernels.corrector_tables(
        lattice.modes, theta.lattice.modes[sup],
        np.ascontiguousarray(theta.lattice.a1[sup]),
        np.ascontiguousarray(theta.lattice.a2[sup]),
        np.ascontiguousarray(theta.weights[sup] ** 2))

    c = 1.5 * nu / theta.l2 ** 2
    eye = np.eye(3)
    raw = -FOUR_PI2 * c * (s1[:, None, None] * eye - q)

    # sandwich with P_l on both sides: symmetric, kernel contains l
    kf = lattice.modes.astype(np.float64)
    khat = kf / np.sqrt(lattice.k2)[:, None]
    proj = eye[None, :, :] - khat[:, :, None] * khat[:, None, :]
    return np.einsum("kij,kjl,klm->kim", proj, raw, proj)


def corrector_S_theta(theta: ThetaSequence, nu: float, v: SpectralField) -> SpectralField:
    """Exact shell-sum corrector applied to a solenoidal field."""
    v.check_solenoidal()
    mats = assemble_corrector_matrices(theta, nu, v.lattice)
    out = kernels.apply_mode_matrices(mats, v.coeffs)
    return SpectralField(v.lattice, out, real=v.real, solenoidal=True)


def corrector_limit(nu: float, v: SpectralField) -> SpectralField:
    """The scaling-limit drift (3/5) nu Laplacian v."""
    out = (-0.6 * nu * FOUR_PI2 * v.lattice.k2)[:, None] * v.coeffs
    return SpectralField(v.lattice, out, real=v.real, solenoidal=v.solenoidal)


def corrector_perp(theta: ThetaSequence, nu: float, v: SpectralField) -> SpectralField:
    """Complementary part: nu Laplacian v - S_theta v (exact for radial theta)."""
    full = laplacian(v)
    s = corrector_S_theta(theta, nu, v)
    return SpectralField(v.lattice, nu * full.coeffs - s.coeffs,
                         real=v.real, solenoidal=True)


def angular_integral_check() -> float:
    """Numeric value of (1/2) integral_0^pi sin^5(psi) d psi (exact: 8/15)."""
    val, _ = quad(lambda p: np.sin(p) ** 5, 0.0, np.pi, epsabs=1e-13, epsrel=1e-13)
    return 0.5 * val


def shell_sin4_average(N: int, kappa: float, direction=(1, 0, 0),
                       lattice: Lattice | None = None) -> float:
    """Weighted shell average of sin^4 of the angle against a direction.

    Uses the canonical dyadic-shell weights; the continuum value of the
    average is 8/15.
    """
    if lattice is None:
        lattice = build_lattice(2 * N)
    theta = make_theta_N(N, kappa, lattice)
    sup = theta.support
    k = lattice.modes[sup].astype(np.float64)
    w2 = theta.weights[sup] ** 2
    d = np.asarray(direction, dtype=np.float64)
    d /= np.linalg.norm(d)
    cos2 = (k @ d) ** 2 / lattice.k2[sup]
    sin4 = (1.0 - cos2) ** 2
    return float(np.sum(w2 * sin4) / np.sum(w2))
