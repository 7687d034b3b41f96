"""Shell weights and the complex Brownian increments driving the transport noise.

A weight sequence theta lives on its own lattice and must be radial
(equal on every shell |k|^2 = const).  The canonical family is supported on
the dyadic shell N <= |k| <= 2N with profile |k|^(-kappa).

Increments: each (k, alpha) with k in the positive half carries one complex
increment whose real and imaginary parts are independent N(0, dt); the
increment at (-k, alpha) is the complex conjugate.  This realizes the
quadratic covariation [W^{k,a}, W^{l,b}]_t = 2 t delta_{k,-l} delta_{a,b}.
Streams are counter-based (Philox keyed by seed and path, counter by step),
so ensembles are reproducible and embarrassingly parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from .errors import ContractViolation
from .fields import TWO_PI, SpectralField, State
from .lattice import Lattice
from .transforms import get_plan

__all__ = ["ThetaSequence", "make_theta_N", "BrownianDriver",
           "sample_increments", "noise_term", "noise_grid_size"]


@dataclass(eq=False)
class ThetaSequence:
    """Finitely supported radial weights on a lattice, with cached norms."""

    lattice: Lattice
    weights: np.ndarray                 # (n_modes,) float64, >= 0
    l2: float = field(init=False)
    linf: float = field(init=False)
    support: np.ndarray = field(init=False)       # indices of nonzero weights
    support_plus: np.ndarray = field(init=False)  # nonzero weights on the positive half

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.lattice.n_modes,):
            raise ValueError("weights must align with the lattice modes")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        # radial symmetry: one value per shell |k|^2
        order = np.argsort(self.lattice.k2, kind="stable")
        k2s, ws = self.lattice.k2[order], w[order]
        bounds = np.flatnonzero(np.diff(k2s)) + 1
        for grp in np.split(ws, bounds):
            if grp.max() - grp.min() > 0:
                raise ValueError("weights must be radial: equal on every shell |k| = const")
        self.weights = w
        self.l2 = float(np.sqrt(np.sum(w * w)))
        self.linf = float(w.max(initial=0.0))
        if self.l2 == 0.0:
            raise ValueError("theta must have at least one nonzero weight")
        self.support = np.flatnonzero(w)
        self.support_plus = np.flatnonzero((w > 0) & (self.lattice.sign > 0))

    @property
    def max_radius(self) -> float:
        return float(np.sqrt(self.lattice.k2[self.support].max()))


def make_theta_N(N: int, kappa: float, lattice: Lattice) -> ThetaSequence:
    """Dyadic shell weights 1_{N <= |k| <= 2N} / |k|^kappa."""
    if N < 1:
        raise ValueError("shell index N must be >= 1")
    if lattice.M < 2 * N:
        raise ValueError(
            f"lattice radius {lattice.M} too small for shell N={N}; need >= {2 * N}")
    k2 = lattice.k2
    inside = (k2 >= N * N) & (k2 <= 4 * N * N)
    w = np.where(inside, k2.astype(np.float64) ** (-kappa / 2.0), 0.0)
    return ThetaSequence(lattice, w)


@dataclass
class BrownianDriver:
    """Counter-based increment source for one trajectory.

    ``support_plus_modes`` records the positive-half wavevectors (in lattice
    order) whose two frame components each carry one complex Brownian
    motion; the other half is defined by conjugation.
    """

    seed: int
    dt: float
    support_plus_modes: np.ndarray     # (n_plus, 3) int
    path_id: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        self.n_plus = int(self.support_plus_modes.shape[0])

    def increments(self, step: int) -> np.ndarray:
        """Complex increments, shape (n_plus, 2); Re/Im parts are N(0, dt)."""
        key = np.array([np.uint64(self.seed), np.uint64(self.path_id)], dtype=np.uint64)
        counter = np.array([0, 0, np.uint64(step), 0], dtype=np.uint64)
        rng = Generator(Philox(key=key, counter=counter))
        z = rng.standard_normal((self.n_plus, 2, 2)) * np.sqrt(self.dt)
        return z[..., 0] + 1j * z[..., 1]

    @classmethod
    def for_theta(cls, theta: ThetaSequence, dt: float, seed: int,
                  path_id: int = 0) -> "BrownianDriver":
        modes = theta.lattice.modes[theta.support_plus]
        return cls(seed=seed, dt=dt, support_plus_modes=modes, path_id=path_id)


class FrozenDriver:
    """Pre-tabulated increments, for refinement studies on one noise path.

    ``coarsen(m)`` returns a driver whose step increments are sums of m
    consecutive fine increments, i.e. the same Brownian path sampled with a
    step m times larger.
    """

    def __init__(self, table: np.ndarray, dt: float):
        self.table = table              # (n_steps, n_plus, 2) complex
        self.dt = dt
        self.n_plus = table.shape[1]

    @classmethod
    def sample(cls, driver: BrownianDriver, n_steps: int) -> "FrozenDriver":
        tab = np.stack([driver.increments(s) for s in range(n_steps)])
        return cls(tab, driver.dt)

    def increments(self, step: int) -> np.ndarray:
        return self.table[step]

    def coarsen(self, m: int) -> "FrozenDriver":
        if self.table.shape[0] % m:
            raise ValueError("step count not divisible by coarsening factor")
        tab = self.table.reshape(-1, m, self.n_plus, 2).sum(axis=1)
        return FrozenDriver(tab, self.dt * m)


def sample_increments(driver: BrownianDriver, step: int = 0) -> dict:
    """One step of increments keyed by (k, alpha), conjugate-extended.

    alpha is 1-based to match the two frame components.
    """
    arr = driver.increments(step)
    out = {}
    for i, k in enumerate(driver.support_plus_modes):
        kt = tuple(int(c) for c in k)
        mk = tuple(-c for c in kt)
        for a in (0, 1):
            out[(kt, a + 1)] = complex(arr[i, a])
            out[(mk, a + 1)] = complex(np.conj(arr[i, a]))
    return out


def noise_grid_size(state_M: int, theta: ThetaSequence) -> int:
    """Alias-free FFT size for transport products against a state lattice."""
    import scipy.fft as sfft
    r_noise = int(np.ceil(theta.max_radius))
    return sfft.next_fast_len(max(2 * state_M + 2 * r_noise + 1, 2 * r_noise + 1), real=True)


def synthesize_w_coeffs(theta: ThetaSequence, incs_plus: np.ndarray) -> np.ndarray:
    """Coefficients of the real advecting increment field on theta's lattice.

    w(k) = theta_k * (a1_k dW^{k,1} + a2_k dW^{k,2}) on the positive half,
    conjugated on the negative half; shape (n_modes, 3) complex.
    """
    lat = theta.lattice
    out = np.zeros((lat.n_modes, 3), dtype=np.complex128)
    plus = theta.support_plus
    w = theta.weights[plus][:, None]
    out[plus] = w * (lat.a1[plus] * incs_plus[:, 0:1] + lat.a2[plus] * incs_plus[:, 1:2])
    minus = lat.conj_index[plus]
    out[minus] = np.conj(out[plus])
    return out


def transport_term_coeffs(stack: np.ndarray, lat: Lattice, theta: ThetaSequence,
                          nu: float, incs_plus: np.ndarray,
                          plans=None, work=None) -> np.ndarray:
    """Leray-projected transport increment (C_nu/|theta|) P(dW . grad Phi).

    Returns raw (2, n_modes, 3) coefficients on the state lattice.  The
    product is evaluated on an alias-free grid via the divergence form
    dW . grad phi_i = d_j (dW_j phi_i), exact because dW is solenoidal.
    """
    from . import kernels

    n = noise_grid_size(lat.M, theta)
    if plans is None:
        plans = (get_plan(theta.lattice, n), get_plan(lat, n))
    plan_theta, plan_state = plans

    wc = synthesize_w_coeffs(theta, incs_plus)
    gw = plan_theta.to_grid(wc.T.copy(), out_half=work[0] if work else None)
    gphi = plan_state.to_grid(
        np.concatenate([stack[0].T, stack[1].T]),
        out_half=work[1] if work else None)

    shp = gw.shape[1:]
    prods = kernels.transport_products(gw.reshape(3, -1),
                                       gphi[0:3].reshape(3, -1),
                                       gphi[3:6].reshape(3, -1))
    spec = plan_state.to_spec(prods.reshape(18, *shp))

    kf = lat.modes.astype(np.float64)
    scale = np.sqrt(1.5 * nu) / theta.l2
    out = np.empty((2, lat.n_modes, 3), dtype=np.complex128)
    for c in range(2):
        block = spec[9 * c: 9 * c + 9].reshape(3, 3, -1)   # [j, i, mode]
        raw = (TWO_PI * 1j * scale) * np.einsum("mj,jim->mi", kf, block)
        kc = np.sum(kf * raw, axis=1)
        out[c] = raw - kf * (kc / lat.k2)[:, None]
    return out


def noise_term(phi: State, incs, theta: ThetaSequence, nu: float) -> State:
    """One transport-noise increment applied to both vorticity components.

    ``incs`` is either the (n_plus, 2) complex array from a driver or the
    conjugate-extended mapping produced by ``sample_increments``; mappings
    are checked for conjugate symmetry.
    """
    if nu < 0:
        raise ValueError("noise intensity nu must be nonnegative")
    lat = phi.lattice
    incs_plus = _as_plus_array(incs, theta)
    out = transport_term_coeffs(phi.stack(), lat, theta, nu, incs_plus)
    return State(SpectralField(lat, out[0], real=True, solenoidal=True),
                 SpectralField(lat, out[1], real=True, solenoidal=True))


def _as_plus_array(incs, theta: ThetaSequence) -> np.ndarray:
    plus_modes = theta.lattice.modes[theta.support_plus]
    if isinstance(incs, np.ndarray):
        if incs.shape != (plus_modes.shape[0], 2):
            raise ValueError("increment array must have shape (n_plus, 2)")
        return incs.astype(np.complex128, copy=False)
    arr = np.empty((plus_modes.shape[0], 2), dtype=np.complex128)
    for i, k in enumerate(plus_modes):
        kt = tuple(int(c) for c in k)
        mk = tuple(-c for c in kt)
        for a in (0, 1):
            v = incs[(kt, a + 1)]
            vm = incs.get((mk, a + 1)) if hasattr(incs, "get") else None
            if vm is not None and abs(np.conj(v) - vm) > 1e-12 * max(1.0, abs(v)):
                raise ContractViolation(
                    f"increments at {kt} and {mk} are not complex conjugates")
            arr[i, a] = v
    return arr
