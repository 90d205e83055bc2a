"""Computational-basis bookkeeping and Pauli-sum matrix-vector products.

Bit convention: site k (1-based) sits at bit k-1 of the basis index, and
sigma^z = +1 maps to bit 0, so ``sigma_k = 1 - 2*bit_{k-1}``.  This makes
exact enumeration, sector bases and sampler histograms interoperable.
"""

from __future__ import annotations

import numpy as np

from .errors import CapacityError
from .operators import WeightedPauliSum

FULL_SPACE_CAP = 1 << 20


def config_to_index(configs) -> np.ndarray | int:
    """Map +-1 configurations (batch supported on the last axis) to indices."""
    configs = np.asarray(configs)
    n = configs.shape[-1]
    if n > 62:
        raise CapacityError(f"cannot index {n}-site configurations in 64 bits")
    weights = (1 << np.arange(n, dtype=np.int64))
    idx = ((configs == -1) @ weights).astype(np.int64)
    return idx if idx.ndim else int(idx)

def index_to_config(indices, n: int) -> np.ndarray:
    """Inverse of :func:`config_to_index`; returns int8 arrays of +-1."""
    idx = np.asarray(indices, dtype=np.int64)
    bits = (idx[..., None] >> np.arange(n, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def all_configs(n: int) -> np.ndarray:
    """All 2^n configurations, ordered by basis index."""
    if n > 24:
        raise CapacityError(f"refusing to enumerate 2^{n} configurations")
    return index_to_config(np.arange(1 << n), n)


def sector_indices(n: int, sigma_z: int) -> np.ndarray:
    """Basis indices of the fixed total-magnetization sector (sorted).

    ``sigma_z`` is the conserved sum of sigma^z values; the sector consists
    of all bitstrings with (n - sigma_z)/2 down spins.
    """
    if (n - sigma_z) % 2 or abs(sigma_z) > n:
        raise ValueError(f"sector {sigma_z} is empty for N={n}")
    if (1 << n) > FULL_SPACE_CAP:
        raise CapacityError(f"cannot enumerate sector basis for N={n}")
    n_down = (n - sigma_z) // 2
    idx = np.arange(1 << n, dtype=np.int64)
    return idx[np.bitwise_count(idx) == n_down]


def _string_masks(string, n):
    flip = 0
    yz = 0
    for site, axis in string.factors:
        bit = 1 << (site - 1)
        if axis in ("X", "Y"):
            flip |= bit
        if axis in ("Y", "Z"):
            yz |= bit
    n_y = len(string.sites_on("Y"))
    iy = 1j ** (n_y % 4)
    # keep the prefactor real when possible so real operators stay float64
    return flip, yz, iy.real if iy.imag == 0.0 else iy


def string_weights(string, indices) -> np.ndarray:
    """Matrix elements <flip(i)|P|i> for an array of source indices i."""
    flip, yz, iy = _string_masks(string, None)
    parity = np.bitwise_count(np.asarray(indices, dtype=np.int64) & yz) & 1
    signs = 1.0 - 2.0 * parity
    return signs if iy == 1 else iy * signs


class PauliSumMatvec:
    """Matrix-vector products of a WeightedPauliSum over a basis.

    With ``sector`` given (an array from :func:`sector_indices`), vectors
    live on that sub-basis and the operator is projected onto it; for
    sector-conserving operators the projection is exact.
    """

    def __init__(self, op: WeightedPauliSum, sector: np.ndarray | None = None):
        self.op = op
        self.n = op.n
        full_dim = 1 << op.n
        if full_dim > FULL_SPACE_CAP:
            raise CapacityError(f"basis dimension 2^{op.n} exceeds cap 2^20")
        self.sector = None if sector is None else np.asarray(sector, dtype=np.int64)
        self.dim = full_dim if self.sector is None else self.sector.shape[0]
        self._plan = []
        self._real_elements = True
        src_base = np.arange(full_dim, dtype=np.int64) if self.sector is None else self.sector
        for coeff, string in op.terms:
            flip, yz, iy = _string_masks(string, op.n)
            src = src_base ^ flip
            weight = (coeff * iy) * (1.0 - 2.0 * (np.bitwise_count(src & yz) & 1))
            self._real_elements = self._real_elements and not isinstance(iy, complex)
            if self.sector is None:
                self._plan.append((src, None, weight))
            else:
                pos = np.searchsorted(self.sector, src)
                pos_clipped = np.minimum(pos, self.dim - 1)
                valid = self.sector[pos_clipped] == src
                self._plan.append((pos_clipped[valid], valid, weight[valid]))

    @property
    def real_elements(self) -> bool:
        """True when every matrix element is real (even sigma^y counts)."""
        return self._real_elements

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.dtype.kind == "c" or not self._real_elements:
            dtype = np.complex128
        else:
            dtype = np.float64
        out = np.zeros(self.dim, dtype=dtype)
        for src, valid, weight in self._plan:
            if valid is None:
                out += weight * v[src]
            else:
                out[valid] += weight * v[src]
        return out

    def dense(self, limit: int = 1 << 13) -> np.ndarray:
        """Dense matrix assembled column-by-column from string applications."""
        if self.dim > limit:
            raise CapacityError(f"dense assembly of dimension {self.dim} refused")
        mat = np.zeros((self.dim, self.dim), dtype=np.complex128)
        cols = np.arange(self.dim)
        for src, valid, weight in self._plan:
            if valid is None:
                # out[j] += w(src_j) v[src_j]: column src_j feeds row j
                mat[cols, src] += weight
            else:
                mat[np.flatnonzero(valid), src] += weight
        return mat


def dense_matrix(op: WeightedPauliSum, limit: int = 1 << 13) -> np.ndarray:
    """Dense 2^N x 2^N matrix of the operator (test/oracle use)."""
    return PauliSumMatvec(op).dense(limit)
