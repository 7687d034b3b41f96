"""Wavevector lattice for zero-mean fields on the unit torus.

The lattice collects the integer wavevectors 0 < |k| <= M together with

* a sign partition of the nonzero lattice into a positive half and its
  negation (first nonzero component decides),
* one fixed orthonormal frame (a1, a2) of the plane orthogonal to each k.

Frame rule: on the positive half, a1 = (k x z)/|k x z| unless k is parallel
to the z-axis, in which case a1 = x; a2 = (k/|k|) x a1.  The frame is then
extended evenly, a_{-k,alpha} = a_{k,alpha}, which the conjugation structure
of the noise requires.  Consequently (a1, a2, k/|k|) is right-handed on the
positive half and left-handed on the negative half; downstream quantities
only ever use the frame through the projector sum
sum_alpha (a_alpha . x)(a_alpha . y) = x.y - (k.x)(k.y)/|k|^2, which is
frame independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Lattice", "build_lattice", "frame_vectors"]


@dataclass(eq=False)
class Lattice:
    """Truncated wavevector set with per-mode frames.

    Modes are ordered by (|k|^2, kx, ky, kz); the order is part of the
    on-disk contracts (snapshots, shell-weight enumeration) and must not
    change.
    """

    M: int
    modes: np.ndarray          # (n, 3) int64
    k2: np.ndarray             # (n,) int64, |k|^2
    sign: np.ndarray           # (n,) int8, +1 on the positive half
    a1: np.ndarray             # (n, 3) float64
    a2: np.ndarray             # (n, 3) float64
    conj_index: np.ndarray     # (n,) index of -k for each mode
    _lookup: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    def index_of(self, k) -> int:
        """Index of mode k, or -1 when k is not on the lattice."""
        kx, ky, kz = int(k[0]), int(k[1]), int(k[2])
        M = self.M
        if max(abs(kx), abs(ky), abs(kz)) > M:
            return -1
        return int(self._lookup[kx + M, ky + M, kz + M])

    def shift_indices(self, shift) -> tuple[np.ndarray, np.ndarray]:
        """Pairs (src, tgt) with modes[tgt] = modes[src] + shift, both on lattice."""
        shifted = self.modes + np.asarray(shift, dtype=np.int64)
        M = self.M
        inside = np.all(np.abs(shifted) <= M, axis=1)
        idx = np.full(self.n_modes, -1, dtype=np.int64)
        s = shifted[inside]
        idx[inside] = self._lookup[s[:, 0] + M, s[:, 1] + M, s[:, 2] + M]
        keep = idx >= 0
        return np.nonzero(keep)[0], idx[keep]


def frame_vectors(k) -> tuple[np.ndarray, np.ndarray]:
    """The fixed orthonormal frame (a1, a2) of the plane orthogonal to k.

    Even in k: frame_vectors(-k) == frame_vectors(k).  Raises for k = 0.
    """
    kv = np.asarray(k, dtype=np.float64)
    if kv.shape != (3,):
        raise ValueError("k must be a 3-vector")
    if not kv.any():
        raise ValueError("frame is undefined at k = 0")
    # canonical representative on the positive half
    for c in kv:
        if c != 0.0:
            if c < 0.0:
                kv = -kv
            break
    if kv[0] == 0.0 and kv[1] == 0.0:
        a1 = np.array([1.0, 0.0, 0.0])
    else:
        a1 = np.array([kv[1], -kv[0], 0.0])
        a1 /= np.linalg.norm(a1)
    a2 = np.cross(kv / np.linalg.norm(kv), a1)
    return a1, a2


def build_lattice(M: int) -> Lattice:
    """Enumerate all modes 0 < |k| <= M with frames and the sign partition."""
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise ValueError(f"lattice radius must be an integer >= 1, got {M!r}")
    M = int(M)

    r = np.arange(-M, M + 1, dtype=np.int64)
    kx, ky, kz = np.meshgrid(r, r, r, indexing="ij")
    modes = np.stack([kx.ravel(), ky.ravel(), kz.ravel()], axis=1)
    k2 = np.sum(modes * modes, axis=1)
    keep = (k2 > 0) & (k2 <= M * M)
    modes, k2 = modes[keep], k2[keep]

    order = np.lexsort((modes[:, 2], modes[:, 1], modes[:, 0], k2))
    modes, k2 = modes[order], k2[order]
    n = modes.shape[0]

    # sign partition: first nonzero component positive
    sign = np.zeros(n, dtype=np.int8)
    for axis in range(3):
        undecided = sign == 0
        col = modes[:, axis]
        sign[undecided & (col > 0)] = 1
        sign[undecided & (col < 0)] = -1

    # frames on the canonical (positive-half) representative
    kc = modes * sign[:, None].astype(np.int64)
    kcf = kc.astype(np.float64)
    para = (kc[:, 0] == 0) & (kc[:, 1] == 0)
    a1 = np.empty((n, 3))
    a1[:, 0] = kcf[:, 1]
    a1[:, 1] = -kcf[:, 0]
    a1[:, 2] = 0.0
    a1[para] = (1.0, 0.0, 0.0)
    a1 /= np.linalg.norm(a1, axis=1, keepdims=True)
    a2 = np.cross(kcf / np.sqrt(k2)[:, None], a1)

    lookup = np.full((2 * M + 1,) * 3, -1, dtype=np.int64)
    lookup[modes[:, 0] + M, modes[:, 1] + M, modes[:, 2] + M] = np.arange(n)
    conj_index = lookup[-modes[:, 0] + M, -modes[:, 1] + M, -modes[:, 2] + M]

    return Lattice(M=M, modes=modes, k2=k2, sign=sign, a1=a1, a2=a2,
                   conj_index=conj_index, _lookup=lookup)
