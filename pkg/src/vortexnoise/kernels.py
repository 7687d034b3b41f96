"""Hot numeric kernels, each in a numba and a pure-numpy variant.

The numba versions fuse the pointwise work into single passes over the
grids; the numpy fallbacks spell out the same arithmetic with vectorized
array expressions.  ``VORTEXNOISE_NUMBA`` (see :mod:`vortexnoise.backend`)
picks the variant; both must agree to rounding, which the test suite and
``python -m vortexnoise.bench`` check.

Grid arrays arrive flattened: component vectors as (3, npts), gradient
tensors as (3, 3, npts) with G[i, j] = d_j u_i.
"""

from __future__ import annotations

import numpy as np

from .backend import active_backend

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap if not (args and callable(args[0])) else args[0]


# ---------------------------------------------------------------------------
# pointwise drift products:
#   G1 = xi x u - S (eta x B)            (curl(G1) is the fluid nonlinearity)
#   H  = eta x u - xi x B - 2 V,  V_j = sum_m B_m d_j u_m
#   (curl(H) is the magnetic nonlinearity including the stretching coupling)
# ---------------------------------------------------------------------------

def _drift_products_numpy(u, b, xi, eta, gu, s_coupling):
    g1 = np.cross(xi, u, axis=0) - s_coupling * np.cross(eta, b, axis=0)
    v = np.einsum("mp,mjp->jp", b, gu)
    h = np.cross(eta, u, axis=0) - np.cross(xi, b, axis=0) - 2.0 * v
    return np.concatenate([g1, h], axis=0)


@njit(cache=True)
def _drift_products_numba(u, b, xi, eta, gu, s_coupling):  # pragma: no cover - thin jit
    npts = u.shape[1]
    out = np.empty((6, npts))
    for p in range(npts):
        u0, u1, u2 = u[0, p], u[1, p], u[2, p]
        b0, b1, b2 = b[0, p], b[1, p], b[2, p]
        x0, x1, x2 = xi[0, p], xi[1, p], xi[2, p]
        e0, e1, e2 = eta[0, p], eta[1, p], eta[2, p]
        out[0, p] = (x1 * u2 - x2 * u1) - s_coupling * (e1 * b2 - e2 * b1)
        out[1, p] = (x2 * u0 - x0 * u2) - s_coupling * (e2 * b0 - e0 * b2)
        out[2, p] = (x0 * u1 - x1 * u0) - s_coupling * (e0 * b1 - e1 * b0)
        v0 = b0 * gu[0, 0, p] + b1 * gu[1, 0, p] + b2 * gu[2, 0, p]
        v1 = b0 * gu[0, 1, p] + b1 * gu[1, 1, p] + b2 * gu[2, 1, p]
        v2 = b0 * gu[0, 2, p] + b1 * gu[1, 2, p] + b2 * gu[2, 2, p]
        out[3, p] = (e1 * u2 - e2 * u1) - (x1 * b2 - x2 * b1) - 2.0 * v0
        out[4, p] = (e2 * u0 - e0 * u2) - (x2 * b0 - x0 * b2) - 2.0 * v1
        out[5, p] = (e0 * u1 - e1 * u0) - (x0 * b1 - x1 * b0) - 2.0 * v2
    return out


def drift_products(u, b, xi, eta, gu, s_coupling: float) -> np.ndarray:
    """Stacked (6, npts) grids [G1, H] feeding the two spectral curls."""
    if active_backend() == "numba":
        return _drift_products_numba(u, b, xi, eta, gu, s_coupling)
    return _drift_products_numpy(u, b, xi, eta, gu, s_coupling)


# ---------------------------------------------------------------------------
# transport products for the noise: R[3*j + i] = w_j * phi_i, both components
# ---------------------------------------------------------------------------

def _transport_products_numpy(w, xi, eta):
    rx = w[:, None, :] * xi[None, :, :]
    re = w[:, None, :] * eta[None, :, :]
    return np.concatenate([rx.reshape(9, -1), re.reshape(9, -1)], axis=0)


@njit(cache=True)
def _transport_products_numba(w, xi, eta):  # pragma: no cover - thin jit
    npts = w.shape[1]
    out = np.empty((18, npts))
    for p in range(npts):
        for j in range(3):
            wj = w[j, p]
            for i in range(3):
                out[3 * j + i, p] = wj * xi[i, p]
                out[9 + 3 * j + i, p] = wj * eta[i, p]
    return out


def transport_products(w, xi, eta) -> np.ndarray:
    """(18, npts) grids w_j phi_i whose divergence gives w . grad phi."""
    if active_backend() == "numba":
        return _transport_products_numba(w, xi, eta)
    return _transport_products_numpy(w, xi, eta)


# ---------------------------------------------------------------------------
# corrector accumulation over the shell support:
#   for each output mode l:
#     S1(l) = sum_k w_k s(k, l)
#     Q(l)  = sum_k w_k s(k, l) qhat qhat^T,   q = l - k
#   with s(k, l) = (a1_k . l)^2 + (a2_k . l)^2
# ---------------------------------------------------------------------------

def _corrector_tables_numpy(lmodes, kmodes, a1, a2, w):
    n_l = lmodes.shape[0]
    s1 = np.zeros(n_l)
    q = np.zeros((n_l, 3, 3))
    for i in range(n_l):
        l = lmodes[i]
        s = (a1 @ l) ** 2 + (a2 @ l) ** 2
        ws = w * s
        s1[i] = ws.sum()
        d = l[None, :] - kmodes
        d2 = np.einsum("kj,kj->k", d, d)
        keep = d2 > 0
        dn = d[keep] / np.sqrt(d2[keep])[:, None]
        q[i] = np.einsum("k,ki,kj->ij", ws[keep], dn, dn)
    return s1, q


@njit(cache=True)
def _corrector_tables_numba(lmodes, kmodes, a1, a2, w):  # pragma: no cover - thin jit
    n_l = lmodes.shape[0]
    n_k = kmodes.shape[0]
    s1 = np.zeros(n_l)
    q = np.zeros((n_l, 3, 3))
    for i in range(n_l):
        l0, l1, l2 = lmodes[i, 0], lmodes[i, 1], lmodes[i, 2]
        acc = 0.0
        for kk in range(n_k):
            p1 = a1[kk, 0] * l0 + a1[kk, 1] * l1 + a1[kk, 2] * l2
            p2 = a2[kk, 0] * l0 + a2[kk, 1] * l1 + a2[kk, 2] * l2
            ws = w[kk] * (p1 * p1 + p2 * p2)
            if ws == 0.0:
                continue
            acc += ws
            d0 = l0 - kmodes[kk, 0]
            d1 = l1 - kmodes[kk, 1]
            d2c = l2 - kmodes[kk, 2]
            d2 = d0 * d0 + d1 * d1 + d2c * d2c
            if d2 == 0.0:
                continue
            f = ws / d2
            q[i, 0, 0] += f * d0 * d0
            q[i, 0, 1] += f * d0 * d1
            q[i, 0, 2] += f * d0 * d2c
            q[i, 1, 1] += f * d1 * d1
            q[i, 1, 2] += f * d1 * d2c
            q[i, 2, 2] += f * d2c * d2c
        s1[i] = acc
        q[i, 1, 0] = q[i, 0, 1]
        q[i, 2, 0] = q[i, 0, 2]
        q[i, 2, 1] = q[i, 1, 2]
    return s1, q


def corrector_tables(lmodes, kmodes, a1, a2, w):
    """Shell sums (S1, Q) per output mode; see module docstring for shapes."""
    lm = np.ascontiguousarray(lmodes, dtype=np.float64)
    km = np.ascontiguousarray(kmodes, dtype=np.float64)
    if active_backend() == "numba":
        return _corrector_tables_numba(lm, km, a1, a2, w)
    return _corrector_tables_numpy(lm, km, a1, a2, w)


# ---------------------------------------------------------------------------
# per-mode 3x3 real matrices applied to complex coefficient rows
# ---------------------------------------------------------------------------

def _apply_mode_matrices_numpy(mats, vecs):
    return np.einsum("kij,kj->ki", mats, vecs)


@njit(cache=True)
def _apply_mode_matrices_numba(mats, vecs):  # pragma: no cover - thin jit
    n = mats.shape[0]
    out = np.empty_like(vecs)
    for k in range(n):
        for i in range(3):
            out[k, i] = (mats[k, i, 0] * vecs[k, 0]
                         + mats[k, i, 1] * vecs[k, 1]
                         + mats[k, i, 2] * vecs[k, 2])
    return out


def apply_mode_matrices(mats: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Row-wise matvec: out[k] = mats[k] @ vecs[k]."""
    if active_backend() == "numba":
        return _apply_mode_matrices_numba(mats, np.ascontiguousarray(vecs))
    return _apply_mode_matrices_numpy(mats, vecs)
