"""Benchmark the numba kernels against their numpy fallbacks.

Run as ``python -m vortexnoise.bench [--grid N] [--modes M] [--shell N]``.
Reports per-call wall time for both backends (numba timings exclude the
first, compiling call) and the max relative deviation between them.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import kernels
from .backend import set_backend
from .lattice import build_lattice
from .noise import make_theta_N


def _time(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _bench_case(name, runner):
    set_backend("numpy")
    t_np, out_np = _time(runner)
    try:
        set_backend("numba")
        runner()                      # compile
        t_nb, out_nb = _time(runner)
        if isinstance(out_np, tuple):
            dev = max(np.abs(a - b).max() / max(np.abs(a).max(), 1e-300)
                      for a, b in zip(out_np, out_nb))
        else:
            dev = np.abs(out_np - out_nb).max() / max(np.abs(out_np).max(), 1e-300)
        speed = t_np / t_nb if t_nb > 0 else float("inf")
        print(f"{name:24s} numpy {t_np * 1e3:8.2f} ms   numba {t_nb * 1e3:8.2f} ms"
              f"   speedup {speed:5.2f}x   max rel dev {dev:.2e}")
    except ImportError:
        print(f"{name:24s} numpy {t_np * 1e3:8.2f} ms   numba unavailable")
    finally:
        set_backend(None)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(prog="python -m vortexnoise.bench")
    ap.add_argument("--grid", type=int, default=25, help="pointwise-kernel grid size")
    ap.add_argument("--modes", type=int, default=8, help="lattice radius for mode kernels")
    ap.add_argument("--shell", type=int, default=4, help="shell index for the corrector table")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    npts = args.grid ** 3
    u, b, xi, eta = (rng.standard_normal((3, npts)) for _ in range(4))
    gu = rng.standard_normal((3, 3, npts))
    _bench_case("drift_products",
                lambda: kernels.drift_products(u, b, xi, eta, gu, 1.0))

    w = rng.standard_normal((3, npts))
    _bench_case("transport_products",
                lambda: kernels.transport_products(w, xi, eta))

    lat = build_lattice(args.modes)
    theta = make_theta_N(args.shell, 1.0, build_lattice(2 * args.shell))
    sup = theta.support
    _bench_case("corrector_tables",
                lambda: kernels.corrector_tables(
                    lat.modes, theta.lattice.modes[sup],
                    np.ascontiguousarray(theta.lattice.a1[sup]),
                    np.ascontiguousarray(theta.lattice.a2[sup]),
                    np.ascontiguousarray(theta.weights[sup] ** 2)))

    mats = rng.standard_normal((lat.n_modes, 3, 3))
    vecs = rng.standard_normal((lat.n_modes, 3)) + 1j * rng.standard_normal((lat.n_modes, 3))
    _bench_case("apply_mode_matrices",
                lambda: kernels.apply_mode_matrices(mats, vecs))


if __name__ == "__main__":
    main()
