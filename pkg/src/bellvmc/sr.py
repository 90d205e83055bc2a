"""Stochastic-reconfiguration (natural-gradient) minimization of <op>.

Per iteration: sample |Phi|^2, form the force vector
F_k = <E_loc O_k*> - <E_loc><O_k*> and the covariance metric
S_kk' = <O_k* O_k'> - <O_k*><O_k'>, then solve (S + lambda * shift) delta = F
and update Omega <- Omega - eta * delta.  Learning rate and regularization
both decay exponentially: eta(p) = eta0 * eta_decay**p,
lambda(p) = max(lambda0 * lambda_decay**p, lambda_min).

The dense direct solver is used up to 4000 free parameters; above that a
Jacobi-preconditioned conjugate-gradient solve works matrix-free off the
sample derivative matrix.  A singular or non-converged solve is retried once
with lambda * 10 before giving up.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import NumericsError
from .estimator import (EstimateRecord, EstimatorPlan, blocked_stderr,
                        local_estimator_batch)
from .rbm import RbmParams, TyingScheme, derivatives_batch, random_init, \
    save_checkpoint, thetas
from .sampler import ChainEnsemble, SamplerConfig, exact_distribution

DENSE_SOLVER_MAX_PARAMS = 4000
DIAG_SHIFT_FLOOR = 1e-10
CG_TOL = 1e-8
CG_MAXITER = 1000

SOLVERS = ("auto", "dense_direct", "iterative_matrix_free")


@dataclass(frozen=True)
class SrConfig:
    iterations: int
    samples_per_iteration: int = 1024
    eta0: float = 0.05
    eta_decay: float = 0.995
    lambda0: float = 100.0
    lambda_decay: float = 0.9
    lambda_min: float = 1e-4
    solver: str = "auto"
    scaled_diag_shift: bool = True
    init_scale: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("need iterations >= 1")
        if not (0.0 < self.eta_decay <= 1.0):
            raise ValueError("need 0 < eta_decay <= 1")
        if self.lambda_min <= 0.0 or self.lambda0 <= 0.0:
            raise ValueError("need positive lambda0 and lambda_min")
        if not (0.0 < self.lambda_decay <= 1.0):
            raise ValueError("need 0 < lambda_decay <= 1")
        if self.samples_per_iteration < 2:
            raise ValueError("need at least 2 samples per iteration")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.eta0 <= 0.0 or self.init_scale <= 0.0:
            raise ValueError("need positive eta0 and init_scale")

    def eta(self, p: int) -> float:
        return self.eta0 * self.eta_decay**p

    def lam(self, p: int) -> float:
        return max(self.lambda0 * self.lambda_decay**p, self.lambda_min)


@dataclass(frozen=True)
class LearnPoint:
    iteration: int
    estimate: EstimateRecord
    eta: float
    lam: float
    wall_ms: float


@dataclass
class LearnCurve:
    points: list[LearnPoint] = field(default_factory=list)

    def append(self, point: LearnPoint):
        expected = self.points[-1].iteration + 1 if self.points else 0
        if point.iteration != expected:
            raise ValueError(f"iteration {point.iteration} out of order; "
                             f"expected {expected}")
        self.points.append(point)

    def means(self) -> np.ndarray:
        return np.array([pt.estimate.mean for pt in self.points])

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def compute_forces(e_loc, o_mat, weights=None) -> np.ndarray:
    """F_k = <E_loc O_k*> - <E_loc><O_k*> over the batch (or weighted batch)."""
    e_loc = np.asarray(e_loc)
    oc = np.conj(o_mat)
    if weights is None:
        if e_loc.shape[0] < 2:
            raise ValueError("need at least 2 samples")
        return (e_loc @ oc) / e_loc.shape[0] - e_loc.mean() * oc.mean(axis=0)
    w = np.asarray(weights)
    return (w * e_loc) @ oc - (w @ e_loc) * (w @ oc)


class Metric:
    """S_kk' = <O_k* O_k'> - <O_k*><O_k'>, dense or matrix-free.

    Hermitian positive semidefinite by construction (Gram matrix of the
    centered derivatives).
    """

    def __init__(self, o_mat, weights=None, dense_limit=DENSE_SOLVER_MAX_PARAMS,
                 force_dense=None):
        o_mat = np.asarray(o_mat)
        if weights is None and o_mat.shape[0] < 1:
            raise ValueError("need at least 1 sample")
        self.n_samples, self.n_params = o_mat.shape
        self._o = o_mat
        self._w = None if weights is None else np.asarray(weights)
        if self._w is None:
            self.mean = o_mat.mean(axis=0)
            self.diag = np.mean(np.abs(o_mat) ** 2, axis=0) - np.abs(self.mean) ** 2
        else:
            self.mean = self._w @ o_mat
            self.diag = self._w @ (np.abs(o_mat) ** 2) - np.abs(self.mean) ** 2
        self.diag = np.maximum(self.diag, 0.0)
        self.is_dense = (self.n_params <= dense_limit) if force_dense is None \
            else force_dense
        self._dense = None
        if self.is_dense:
            if self._w is None:
                gram = (o_mat.conj().T @ o_mat) / self.n_samples
            else:
                gram = (self._w[:, None] * o_mat).conj().T @ o_mat
            self._dense = gram - np.outer(np.conj(self.mean), self.mean)

    @property
    def dense(self) -> np.ndarray:
        if self._dense is None:
            raise ValueError("metric was built matrix-free")
        return self._dense

    def apply(self, x) -> np.ndarray:
        """S @ x without forming S."""
        x = np.asarray(x, dtype=complex)
        if self._w is None:
            ox = self._o @ x
            return (self._o.conj().T @ ox) / self.n_samples \
                - np.conj(self.mean) * (self.mean @ x)
        ox = self._o @ x
        return (self._w * ox) @ np.conj(self._o) - np.conj(self.mean) * (self.mean @ x)


def sr_step(params: RbmParams, forces, metric: Metric, eta: float, lam: float,
            scaled_diag_shift: bool = True, solver: str = "auto") -> RbmParams:
    """Solve (S + lambda * shift) delta = F and take Omega -> Omega - eta*delta."""
    if lam <= 0:
        raise ValueError("need lambda > 0")
    use_dense = metric.is_dense if solver == "auto" else solver == "dense_direct"
    lam_try = lam
    last_exc = None
    for attempt in range(2):
        if scaled_diag_shift:
            shift = lam_try * np.maximum(metric.diag, DIAG_SHIFT_FLOOR)
        else:
            shift = np.full(metric.n_params, lam_try)
        delta = None
        if use_dense:
            a = metric.dense + np.diag(shift)
            try:
                delta = np.linalg.solve(a, forces)
            except np.linalg.LinAlgError as exc:
                last_exc = exc
        else:
            op = LinearOperator(
                (metric.n_params, metric.n_params),
                matvec=lambda x, s=shift: metric.apply(x) + s * x,
                dtype=complex)
            precond = LinearOperator(
                (metric.n_params, metric.n_params),
                matvec=lambda x, d=1.0 / (metric.diag + shift): d * x,
                dtype=complex)
            delta, info = cg(op, forces, rtol=CG_TOL, maxiter=CG_MAXITER, M=precond)
            if info != 0:
                last_exc = RuntimeError(f"cg returned info={info}")
                delta = None
        if delta is not None and np.all(np.isfinite(delta.view(np.float64))):
            return params.replace(params.free - eta * delta)
        lam_try *= 10.0
    raise NumericsError(f"metric solve failed even with lambda={lam_try}: {last_exc}")


# ---------------------------------------------------------------------------
# exact-enumeration route (small N): used by gradient tests and as an
# independent check on the sampled estimates
# ---------------------------------------------------------------------------

def exact_moments(op, params: RbmParams, sector: int | None = None,
                  plan: EstimatorPlan | None = None):
    """(mean, forces, metric) from the full |Phi|^2 distribution."""
    cfgs, probs = exact_distribution(params, sector=sector)
    theta = thetas(params, cfgs.astype(np.float64))
    e = local_estimator_batch(op, params, cfgs, theta=theta, plan=plan)
    o = derivatives_batch(params, cfgs, theta=theta)
    forces = compute_forces(e, o, weights=probs)
    metric = Metric(o, weights=probs)
    return float((probs @ e).real), forces, metric


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def train(op, scheme: TyingScheme, sr: SrConfig, sampler: SamplerConfig,
          init_params: RbmParams | None = None, curve_path=None,
          checkpoint_path=None, progress=None):
    """Minimize <op> over the scheme's parameters; returns (params, curve).

    Chains persist across iterations (warm restart) and re-equilibrate for
    ``sampler.warmup_sweeps`` sweeps after every parameter update.  A
    non-finite estimate or update aborts with a diagnostic checkpoint next to
    ``checkpoint_path`` when one was requested.
    """
    if scheme.n != op.n:
        raise ValueError(f"operator acts on {op.n} sites, scheme has {scheme.n}")
    params = init_params if init_params is not None \
        else random_init(scheme, sr.init_scale, sr.seed)
    plan = EstimatorPlan(op, scheme)
    ensemble = ChainEnsemble(params, sampler, sr.seed)
    per_chain = -(-sr.samples_per_iteration // sampler.n_chains)
    curve = LearnCurve()
    curve_file = open(curve_path, "w") if curve_path is not None else None
    try:
        for p in range(sr.iterations):
            t0 = time.perf_counter()
            ensemble.set_params(params)
            ensemble.run_sweeps(sampler.warmup_sweeps)
            samples = ensemble.draw_samples(per_chain)
            c, s, n = samples.shape
            flat = samples.reshape(c * s, n).astype(np.float64)
            theta = thetas(params, flat)
            e = local_estimator_batch(op, params, flat, theta=theta, plan=plan)
            o = derivatives_batch(params, flat, theta=theta)

            mean = float(e.real.mean())
            variance = float((e.real**2 + e.imag**2).mean() - mean**2)
            stderr, reliable = blocked_stderr(e.real.reshape(c, s))
            record = EstimateRecord(mean=mean, stderr=stderr, variance=variance,
                                    n_samples=c * s, stderr_reliable=reliable)
            if not np.isfinite(mean) or not np.isfinite(variance):
                _dump_diagnostic(checkpoint_path, params, sr.seed, p, mean)
                raise NumericsError(f"non-finite estimate at iteration {p}: {mean}")

            eta, lam = sr.eta(p), sr.lam(p)
            forces = compute_forces(e, o)
            metric = Metric(o, force_dense=None if sr.solver == "auto"
                            else sr.solver == "dense_direct")
            params = sr_step(params, forces, metric, eta, lam,
                             scaled_diag_shift=sr.scaled_diag_shift,
                             solver=sr.solver)
            if not np.all(np.isfinite(params.free.view(np.float64))):
                _dump_diagnostic(checkpoint_path, params, sr.seed, p, mean)
                raise NumericsError(f"non-finite parameters after iteration {p}")

            wall_ms = (time.perf_counter() - t0) * 1e3
            point = LearnPoint(p, record, eta, lam, wall_ms)
            curve.append(point)
            if curve_file is not None:
                curve_file.write(json.dumps(
                    {"iter": p, "qv": record.mean, "stderr": record.stderr,
                     "var": record.variance, "eta": eta, "lambda": lam,
                     "wall_ms": round(wall_ms, 3)}) + "\n")
                curve_file.flush()
            if progress is not None:
                progress(point)
    finally:
        if curve_file is not None:
            curve_file.close()
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, params, seed=sr.seed)
    return params, curve


def _dump_diagnostic(checkpoint_path, params, seed, iteration, mean):
    if checkpoint_path is None:
        return
    path = str(checkpoint_path) + f".diag-iter{iteration}.json"
    try:
        save_checkpoint(path, params, seed=seed)
    except OSError:
        pass
