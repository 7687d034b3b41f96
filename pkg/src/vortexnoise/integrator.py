"""Time stepping for the cutoff Ito system and its deterministic limit.

Scheme family: exponential Euler-Maruyama.  The Laplacian is always
integrated exactly per mode; the quadratic drift is explicit with the cutoff
factor evaluated at the step start; the noise increment enters at the Ito
point.  The corrector can be handled three ways (``RunConfig.scheme``):

    exp-explicit  corrector fully explicit in the drift
    exp-proxy     integrating factor carries its diffusive proxy
                  (3/5) nu Laplacian; only the residual is explicit
    exp-exact     per-mode matrix exponential of Laplacian + corrector

For large nu the explicit variant needs tiny steps (the corrector scales
like nu |k|^2); exp-proxy is unconditionally stable against that term
because the corrector is negative semidefinite with norm at most
nu * 4 pi^2 |k|^2, and exp-exact removes the issue entirely.

The deterministic mode integrates the enhanced-viscosity limit system
(viscosity 1 + (3/5) nu on top of 1/Re, 1/Rm), with no cutoff and no noise.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import kernels
from .corrector import assemble_corrector_matrices
from .errors import BlowUpError, ConfigError
from .fields import FOUR_PI2, State
from .lattice import Lattice, build_lattice
from .noise import (BrownianDriver, ThetaSequence, make_theta_N,
                    noise_grid_size, transport_term_coeffs)
from .operators import CutoffFn, PhysicsParams, _nonlinearity_raw
from .transforms import alias_free_size, get_plan, transform_to_grid

__all__ = [
    "RunConfig", "DiagnosticsRecord", "Trajectory",
    "Stepper", "simulate", "step_stochastic", "step_deterministic",
    "galerkin_project", "suggest_dt", "driver_for",
]

_SCHEMES = ("exp-explicit", "exp-proxy", "exp-exact")


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one simulation run; immutable and hashable."""

    M: int = 8
    N_shell: int = 4
    kappa: float = 1.0
    nu: float = 1.0
    delta: float = 0.25
    R: float = 10.0
    Re: float = 1.0
    Rm: float = 1.0
    S: float = 1.0
    dt: float = 1e-3
    T_end: float = 1.0
    seed: int = 0
    blowup_threshold: float = 100.0
    scheme: str = "exp-exact"
    snapshot_every: int = 0
    cutoff_enabled: bool = True
    nonlinearity: bool = True

    def __post_init__(self):
        checks = [
            (self.M >= 1, "M must be an integer >= 1"),
            (self.N_shell >= 0, "N_shell must be >= 0 (0 disables the noise)"),
            (self.kappa >= 0, "kappa must be nonnegative"),
            (self.nu >= 0, "nu must be nonnegative"),
            (0.0 < self.delta < 0.5, "delta must lie in the open interval (0, 1/2)"),
            (self.R >= 0, "cutoff threshold R must be nonnegative"),
            (self.Re > 0 and self.Rm > 0 and self.S > 0,
             "Re, Rm, S must be strictly positive"),
            (self.dt > 0, "dt must be positive"),
            (self.T_end > 0, "T_end must be positive"),
            (self.scheme in _SCHEMES, f"scheme must be one of {_SCHEMES}"),
            (self.snapshot_every >= 0, "snapshot_every must be >= 0"),
        ]
        if self.cutoff_enabled:
            checks.append((self.blowup_threshold > self.R + 1,
                           "blowup_threshold must exceed R + 1"))
        else:
            checks.append((self.blowup_threshold > 0,
                           "blowup_threshold must be positive"))
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def physics(self) -> PhysicsParams:
        return PhysicsParams(Re=self.Re, Rm=self.Rm, S=self.S)

    @property
    def nu1(self) -> float:
        """Enhanced viscosity of the limit system."""
        return 1.0 + 0.6 * self.nu


@dataclass
class DiagnosticsRecord:
    """Per-step scalar observables; the first eight are the CSV contract."""

    t: float
    l2: float
    h1: float
    hminus_delta: float
    cutoff: float
    flux_b: float
    dissip: float
    flux_S: float
    noise_flux: float = 0.0   # realized 2<Phi, dN> + |dN|^2, not part of the CSV

    CSV_FIELDS = ("t", "l2", "h1", "hminus_delta", "cutoff",
                  "flux_b", "dissip", "flux_S")

    def csv_row(self) -> list:
        return [getattr(self, f) for f in self.CSV_FIELDS]


@dataclass
class Trajectory:
    times: np.ndarray
    diagnostics: list
    snapshots: list                    # (t, State) pairs at the configured cadence
    status: str                        # "completed" or "blown-up"
    t_star: float | None = None
    mode: str = "stochastic"

    @property
    def completed(self) -> bool:
        return self.status == "completed"


def galerkin_project(phi: State, M_prime: int) -> State:
    """Zero every mode with |k| > M_prime."""
    lat = phi.lattice
    if M_prime < 1:
        raise ValueError("Galerkin radius must be >= 1")
    if M_prime > lat.M:
        raise ValueError(f"Galerkin radius {M_prime} exceeds lattice radius {lat.M}")
    keep = lat.k2 <= M_prime * M_prime
    out = phi.copy()
    out.xi.coeffs[~keep] = 0.0
    out.eta.coeffs[~keep] = 0.0
    return out


class Stepper:
    """Precomputed machinery for repeated steps of one configuration."""

    def __init__(self, cfg: RunConfig, lattice: Lattice, mode: str):
        if mode not in ("stochastic", "deterministic"):
            raise ValueError(f"unknown mode {mode!r}")
        self.cfg = cfg
        self.lattice = lattice
        self.mode = mode
        lat = lattice
        dt = cfg.dt
        k2f = lat.k2.astype(np.float64)

        self.theta: ThetaSequence | None = None
        if mode == "stochastic" and cfg.N_shell >= 1:
            theta_lat = build_lattice(2 * cfg.N_shell)
            self.theta = make_theta_N(cfg.N_shell, cfg.kappa, theta_lat)

        visc = np.array([1.0 / cfg.Re, 1.0 / cfg.Rm])
        if mode == "deterministic":
            visc = visc + 0.6 * cfg.nu

        self.corr_mats = None
        self.expl_mats = None
        self.prop_mats = None
        proxy = 0.0
        if self.theta is not None:
            self.corr_mats = assemble_corrector_matrices(self.theta, cfg.nu, lat)
            if cfg.scheme == "exp-proxy":
                proxy = 0.6 * cfg.nu
                resid = self.corr_mats + (proxy * FOUR_PI2 * k2f)[:, None, None] * np.eye(3)
                self.expl_mats = resid
            elif cfg.scheme == "exp-explicit":
                self.expl_mats = self.corr_mats
            else:  # exp-exact
                lam, vec = np.linalg.eigh(self.corr_mats)
                self.prop_mats = np.einsum("kij,kj,klj->kil",
                                           vec, np.exp(dt * lam), vec)

        self.heat = np.exp(-(visc[:, None] + proxy) * FOUR_PI2 * k2f[None, :] * dt)
        self.heat = self.heat[:, :, None]             # (2, n_modes, 1)

        # norms and cutoff
        self.w_h1 = FOUR_PI2 * k2f
        self.w_hmd = (FOUR_PI2 * k2f) ** (-cfg.delta)
        self.cutoff = CutoffFn(cfg.R) if (mode == "stochastic" and cfg.cutoff_enabled) else None

        # grids; workspaces are thread-local so ensemble fan-out stays safe
        self.plan_b = get_plan(lat, alias_free_size(lat.M, lat.M, lat.M))
        self.noise_plans = None
        if self.theta is not None:
            n_w = noise_grid_size(lat.M, self.theta)
            self.noise_plans = (get_plan(self.theta.lattice, n_w), get_plan(lat, n_w))
        self._tls = threading.local()

    @property
    def work_b(self):
        buf = getattr(self._tls, "work_b", None)
        if buf is None:
            buf = self._tls.work_b = self.plan_b.alloc_half(21)
        return buf

    @property
    def noise_work(self):
        if self.noise_plans is None:
            return None
        buf = getattr(self._tls, "noise_work", None)
        if buf is None:
            pt, ps = self.noise_plans
            buf = self._tls.noise_work = (pt.alloc_half(3), ps.alloc_half(6))
        return buf

    # -- scalar observables ---------------------------------------------------

    def _norms(self, stack: np.ndarray) -> tuple[float, float, float]:
        p = np.sum(np.abs(stack) ** 2, axis=(0, 2))
        l2 = math.sqrt(float(p.sum()))
        h1 = math.sqrt(float((self.w_h1 * p).sum()))
        hmd = math.sqrt(float((self.w_hmd * p).sum()))
        return l2, hmd, h1

    @staticmethod
    def _inner(a: np.ndarray, b: np.ndarray) -> float:
        return float(np.real(np.sum(a * np.conj(b))))

    def diagnostics(self, stack: np.ndarray, t: float) -> DiagnosticsRecord:
        """Observables of a state, including the drift fluxes at that state."""
        rec, _, _ = self._drift_and_diag(stack, t)
        return rec

    # -- stepping -------------------------------------------------------------

    def _drift_and_diag(self, stack, t):
        cfg = self.cfg
        l2, hmd, h1 = self._norms(stack)
        fr = self.cutoff.value(hmd) if self.cutoff is not None else 1.0

        if cfg.nonlinearity:
            b1, b2 = _nonlinearity_raw(stack, self.lattice, cfg.physics,
                                       plan=self.plan_b, work=self.work_b)
            flux_b = self._inner(stack[0], b1) + self._inner(stack[1], b2)
            drift = np.stack([b1, b2])
            drift *= -fr
        else:
            flux_b = 0.0
            drift = np.zeros_like(stack)

        flux_S = 0.0
        if self.corr_mats is not None:
            sxi = kernels.apply_mode_matrices(self.corr_mats, stack[0])
            seta = kernels.apply_mode_matrices(self.corr_mats, stack[1])
            flux_S = self._inner(stack[0], sxi) + self._inner(stack[1], seta)
            if self.expl_mats is not None:
                if self.cfg.scheme == "exp-explicit":
                    drift[0] += sxi
                    drift[1] += seta
                else:
                    drift[0] += kernels.apply_mode_matrices(self.expl_mats, stack[0])
                    drift[1] += kernels.apply_mode_matrices(self.expl_mats, stack[1])

        rec = DiagnosticsRecord(t=t, l2=l2, h1=h1, hminus_delta=hmd, cutoff=fr,
                                flux_b=flux_b, dissip=h1 * h1, flux_S=flux_S)
        return rec, drift, l2

    def propagate(self, arr: np.ndarray) -> np.ndarray:
        """Apply the exact linear integrating factor of one step."""
        if self.prop_mats is not None:
            out = np.stack([kernels.apply_mode_matrices(self.prop_mats, arr[0]),
                            kernels.apply_mode_matrices(self.prop_mats, arr[1])])
            out *= self.heat
            return out
        return arr * self.heat

    def noise_increment(self, stack: np.ndarray, incs_plus) -> np.ndarray:
        return transport_term_coeffs(stack, self.lattice, self.theta, self.cfg.nu,
                                     incs_plus, plans=self.noise_plans,
                                     work=self.noise_work)

    def step(self, stack: np.ndarray, t: float, incs_plus=None):
        """Advance one step from time t; returns (new_stack, record)."""
        cfg = self.cfg
        rec, drift, _ = self._drift_and_diag(stack, t)

        pre = stack + cfg.dt * drift
        if self.theta is not None and incs_plus is not None:
            dn = self.noise_increment(stack, incs_plus)
            rec.noise_flux = (2.0 * (self._inner(stack[0], dn[0])
                                     + self._inner(stack[1], dn[1]))
                              + float(np.sum(np.abs(dn) ** 2)))
            pre += dn

        new = self.propagate(pre)
        l2_new = math.sqrt(float(np.sum(np.abs(new) ** 2)))
        if not math.isfinite(l2_new) or l2_new > cfg.blowup_threshold:
            raise BlowUpError(t + cfg.dt)
        return new, rec


_STEPPER_CACHE: dict = {}
_LATTICE_CACHE: dict = {}


def lattice_for(cfg: RunConfig) -> Lattice:
    lat = _LATTICE_CACHE.get(cfg.M)
    if lat is None:
        lat = build_lattice(cfg.M)
        _LATTICE_CACHE[cfg.M] = lat
    return lat


def _get_stepper(cfg: RunConfig, mode: str) -> Stepper:
    key = (cfg, mode)
    st = _STEPPER_CACHE.get(key)
    if st is None:
        st = Stepper(cfg, lattice_for(cfg), mode)
        if len(_STEPPER_CACHE) > 16:
            _STEPPER_CACHE.clear()
        _STEPPER_CACHE[key] = st
    return st


def driver_for(cfg: RunConfig, path_id: int = 0) -> BrownianDriver | None:
    """Increment source matching the configuration's shell weights."""
    st = _get_stepper(cfg, "stochastic")
    if st.theta is None:
        return None
    return BrownianDriver.for_theta(st.theta, cfg.dt, cfg.seed, path_id)


def step_stochastic(phi: State, cfg: RunConfig, driver=None, step_index: int = 0) -> State:
    """One Ito step of the cutoff system (raises BlowUpError on escape)."""
    st = _get_stepper(cfg, "stochastic")
    incs = None
    if st.theta is not None:
        if driver is None:
            driver = driver_for(cfg)
        incs = driver.increments(step_index)
    new, _ = st.step(phi.stack(), step_index * cfg.dt, incs)
    return State.from_stack(phi.lattice, new)


def step_deterministic(phi: State, cfg: RunConfig, step_index: int = 0) -> State:
    """One step of the enhanced-viscosity limit system (no cutoff, no noise)."""
    st = _get_stepper(cfg, "deterministic")
    new, _ = st.step(phi.stack(), step_index * cfg.dt, None)
    return State.from_stack(phi.lattice, new)


def simulate(cfg: RunConfig, phi0: State, mode: str = "stochastic",
             driver=None, observer=None) -> Trajectory:
    """Integrate to T_end or blow-up, recording diagnostics every step.

    ``observer(step_index, t, stack)`` is called after every accepted step
    (used by the ensemble experiments to accumulate distances without
    storing snapshots).
    """
    if phi0.lattice.M != cfg.M:
        raise ValueError("initial state lattice radius does not match the configuration")
    st = _get_stepper(cfg, mode)
    if mode == "stochastic" and st.theta is not None and driver is None:
        driver = driver_for(cfg)

    n_steps = max(1, int(round(cfg.T_end / cfg.dt)))
    stack = phi0.stack()
    times = [0.0]
    diags: list[DiagnosticsRecord] = []
    snaps: list = []
    status, t_star = "completed", None

    if cfg.snapshot_every > 0:
        snaps.append((0.0, State.from_stack(phi0.lattice, stack)))
    if observer is not None:
        observer(0, 0.0, stack)

    for n in range(n_steps):
        t = n * cfg.dt
        incs = driver.increments(n) if (st.theta is not None and driver is not None) else None
        try:
            stack, rec = st.step(stack, t, incs)
        except BlowUpError as ex:
            status, t_star = "blown-up", ex.t_star
            rec = st.diagnostics(np.nan_to_num(stack, nan=0.0, posinf=0.0, neginf=0.0), t)
            diags.append(rec)
            break
        diags.append(rec)
        t_next = (n + 1) * cfg.dt
        times.append(t_next)
        if observer is not None:
            observer(n + 1, t_next, stack)
        if cfg.snapshot_every > 0 and ((n + 1) % cfg.snapshot_every == 0 or n + 1 == n_steps):
            snaps.append((t_next, State.from_stack(phi0.lattice, stack)))

    if status == "completed":
        diags.append(st.diagnostics(stack, n_steps * cfg.dt))

    return Trajectory(times=np.asarray(times), diagnostics=diags, snapshots=snaps,
                      status=status, t_star=t_star, mode=mode)


def suggest_dt(phi0: State, cfg: RunConfig, safety: float = 0.25) -> float:
    """Advective step bound: dt * (max speed) * M <= safety.

    The stiff linear part is integrated exactly, so only the explicit
    quadratic term constrains the step.
    """
    from .fields import biot_savart

    n = 2 * cfg.M + 2
    u = transform_to_grid(biot_savart(phi0.xi), n)
    b = transform_to_grid(biot_savart(phi0.eta), n)
    speed = float(np.sqrt((u * u).sum(axis=0)).max()
                  + np.sqrt((b * b).sum(axis=0)).max())
    if speed == 0.0:
        return cfg.T_end / 10.0
    return min(safety / (speed * cfg.M), cfg.T_end / 10.0)
