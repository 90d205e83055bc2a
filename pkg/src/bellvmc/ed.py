"""Exact-diagonalization reference: lowest eigenpair of a Pauli sum.

Small problems (dimension <= 64) go through a dense eigh; larger ones use
Lanczos (ARPACK ``eigsh`` with ``which='SA'``) on the matrix-free product,
with a deterministic seeded start vector.  A non-converged Lanczos run is
retried with a larger Krylov space, then falls back to a dense solve when
the dimension allows.  Every returned pair is residual-checked against the
operator's coefficient norm, so a silent ARPACK misconvergence cannot leak
into downstream comparisons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .basis import PauliSumMatvec, sector_indices
from .errors import NumericsError
from .estimator import rbm_state_vector
from .operators import WeightedPauliSum
from .rbm import RbmParams
from .rngs import make_rng

DENSE_EIG_MAX_DIM = 64
DENSE_FALLBACK_MAX_DIM = 4096
RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class EdResult:
    """Lowest eigenpair with its residual certificate."""

    min_eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    dim: int
    sector: int | None = None

    def summary(self) -> dict:
        return {"min_eigenvalue": self.min_eigenvalue, "residual": self.residual,
                "dim": self.dim, "sector": self.sector}


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest component is real positive."""
    k = int(np.argmax(np.abs(vec)))
    pivot = vec[k]
    if pivot == 0:
        return vec
    return vec * (np.conj(pivot) / np.abs(pivot))


def min_eigenpair(op: WeightedPauliSum, sector: int | None = None,
                  seed: int = 0) -> EdResult:
    """Smallest eigenvalue and eigenvector of the operator (or of its
    fixed total-sigma^z sector block)."""
    idx = None if sector is None else sector_indices(op.n, sector)
    mv = PauliSumMatvec(op, idx)
    dim = mv.dim
    if dim < 1:
        raise ValueError("empty basis")
    if dim <= DENSE_EIG_MAX_DIM:
        vals, vecs = np.linalg.eigh(mv.dense())
        lam, vec = float(vals[0]), vecs[:, 0]
    else:
        lam, vec = _lanczos_ground(mv, seed)
    vec = _fix_phase(np.asarray(vec, dtype=np.complex128))
    vec /= np.linalg.norm(vec)
    residual = float(np.linalg.norm(mv.matvec(vec) - lam * vec))
    tol = RESIDUAL_RTOL * max(op.coefficient_norm(), 1.0)
    if residual > tol:
        raise NumericsError(
            f"eigenpair residual {residual:.3e} exceeds tolerance {tol:.3e}")
    return EdResult(min_eigenvalue=lam, eigenvector=vec, residual=residual,
                    dim=dim, sector=sector)


def _lanczos_ground(mv: PauliSumMatvec, seed: int):
    dtype = np.float64 if mv.real_elements else np.complex128
    linop = LinearOperator((mv.dim, mv.dim), matvec=mv.matvec, dtype=dtype)
    rng = make_rng(seed, 2)
    v0 = rng.normal(size=mv.dim)
    if dtype == np.complex128:
        v0 = v0 + 1j * rng.normal(size=mv.dim)
    attempts = ({}, {"ncv": min(mv.dim, 64), "maxiter": 100 * mv.dim})
    last_exc = None
    for extra in attempts:
        try:
            vals, vecs = eigsh(linop, k=1, which="SA", v0=v0, **extra)
            return float(vals[0]), vecs[:, 0]
        except ArpackNoConvergence as exc:
            last_exc = exc
    if mv.dim <= DENSE_FALLBACK_MAX_DIM:
        vals, vecs = np.linalg.eigh(mv.dense())
        return float(vals[0]), vecs[:, 0]
    raise NumericsError(f"Lanczos failed to converge at dim {mv.dim}: {last_exc}")


def eigen_variance(op: WeightedPauliSum, state: np.ndarray,
                   sector: int | None = None) -> float:
    """<op^2> - <op>^2 in an explicit state vector (zero iff eigenstate)."""
    idx = None if sector is None else sector_indices(op.n, sector)
    mv = PauliSumMatvec(op, idx)
    v = np.asarray(state, dtype=np.complex128)
    if v.shape != (mv.dim,):
        raise ValueError(f"state has shape {v.shape}, basis dimension is {mv.dim}")
    v = v / np.linalg.norm(v)
    hv = mv.matvec(v)
    mean = np.vdot(v, hv).real
    return float(np.vdot(hv, hv).real - mean**2)


def rbm_overlap(params: RbmParams, result: EdResult) -> float:
    """|<eigenvector|Phi>| with both states normalized (1 = exact match)."""
    phi = rbm_state_vector(params, sector=result.sector)
    if phi.shape != result.eigenvector.shape:
        raise ValueError("state dimensions differ; check N and sector")
    return float(np.abs(np.vdot(result.eigenvector, phi)))


def relative_error(value: float, reference: float) -> float:
    if reference == 0.0:
        raise ValueError("relative error is undefined against a zero reference")
    return abs(value - reference) / abs(reference)


def save_ed_result(path, result: EdResult):
    """Eigenvector as little-endian float64 (re, im interleaved) plus a JSON
    sidecar ``<path>.json`` carrying the scalar summary."""
    vec = result.eigenvector
    raw = np.empty(2 * vec.shape[0], dtype="<f8")
    raw[0::2] = vec.real
    raw[1::2] = vec.imag
    with open(path, "wb") as fh:
        fh.write(raw.tobytes())
    with open(str(path) + ".json", "w") as fh:
        json.dump(result.summary(), fh, indent=1)
        fh.write("\n")


def load_ed_result(path) -> EdResult:
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    raw = np.fromfile(path, dtype="<f8")
    if raw.shape[0] != 2 * meta["dim"]:
        raise ValueError(f"eigenvector file holds {raw.shape[0] // 2} amplitudes, "
                         f"sidecar says dim={meta['dim']}")
    vec = raw[0::2] + 1j * raw[1::2]
    return EdResult(min_eigenvalue=meta["min_eigenvalue"], eigenvector=vec,
                    residual=meta["residual"], dim=meta["dim"],
                    sector=meta["sector"])
