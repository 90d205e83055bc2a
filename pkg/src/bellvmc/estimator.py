"""Local estimators of Pauli-sum expectations over RBM samples.

E_loc(sigma) = sum_s c_s <sigma|P_s|sigma_s> Phi(sigma_s)/Phi(sigma), where
sigma_s flips the X/Y sites of string s.  The matrix element in terms of the
current (row) configuration is (-i)^{n_Y} times the product of sigma over the
string's Y and Z sites.  For Hermitian operators sampled from |Phi|^2 the mean
of Re E_loc estimates <Phi|op|Phi> / <Phi|Phi>, and mean |E_loc|^2 estimates
<op^2>, giving the variance estimate used throughout.

Statistical errors come from a blocking analysis: block sizes double until the
stderr stabilizes (first doubling that changes it by less than 5%); blocks
never straddle chain boundaries, so autocorrelation within chains is absorbed
while chains stay independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import all_configs, index_to_config, sector_indices, PauliSumMatvec
from .errors import CapacityError
from .operators import WeightedPauliSum
from .rbm import RbmParams, log_amplitude_batch, log_cosh, make_lookup, thetas

EXACT_EXPECTATION_MAX_SITES = 14
MIN_SAMPLES_FOR_STDERR = 16


@dataclass(frozen=True)
class EstimateRecord:
    mean: float
    stderr: float
    variance: float
    n_samples: int
    stderr_reliable: bool


class EstimatorPlan:
    """Per-string index arrays, reusable across parameter updates.

    For each string: the 0-based flip columns (X and Y sites), the Y/Z columns
    entering the diagonal phase, the (-i)**n_Y prefactor folded into the
    coefficient, and the hidden units coupled to any flip site.
    """

    def __init__(self, op: WeightedPauliSum, scheme):
        self.op = op
        self.strings = []
        for coeff, string in op.terms:
            cols = np.array([s - 1 for s in string.sites_on("X", "Y")], dtype=np.int64)
            yz = np.array([s - 1 for s in string.sites_on("Y", "Z")], dtype=np.int64)
            n_y = len(string.sites_on("Y"))
            iy = (-1j) ** (n_y % 4)
            c = coeff * (iy.real if iy.imag == 0.0 else iy)
            if cols.size:
                rows = np.unique(scheme.site_rows[cols])
                rows = rows[rows < scheme.m]
            else:
                rows = np.empty(0, dtype=np.int64)
            self.strings.append((c, cols, yz, rows))


def local_estimator_batch(op: WeightedPauliSum, params: RbmParams, configs,
                          theta=None, plan: EstimatorPlan | None = None) -> np.ndarray:
    """E_loc for a batch of configurations, shape (B,), complex."""
    if plan is None:
        plan = EstimatorPlan(op, params.scheme)
    sig = np.atleast_2d(np.asarray(configs, dtype=np.float64))
    if theta is None:
        theta = thetas(params, sig)
    lc = log_cosh(theta)
    out = np.zeros(sig.shape[0], dtype=complex)
    for c, cols, yz, rows in plan.strings:
        phase = c if yz.size == 0 else c * sig[:, yz].prod(axis=1)
        if cols.size == 0:
            out += phase
            continue
        w_sub = params.w[np.ix_(rows, cols)]
        sig_f = sig[:, cols]
        th_new = theta[:, rows] - 2.0 * (sig_f @ w_sub.T)
        dlog = (log_cosh(th_new) - lc[:, rows]).sum(axis=1) \
            - 2.0 * (sig_f @ params.a[cols])
        out += phase * np.exp(dlog)
    return out


def local_estimator(op: WeightedPauliSum, params: RbmParams, config,
                    lookup=None) -> complex:
    """Single-configuration local estimator (lookup arg kept for symmetry)."""
    if lookup is None:
        lookup = make_lookup(params, config)
    return complex(local_estimator_batch(
        op, params, lookup.config[None, :], theta=lookup.theta[None, :])[0])


def blocked_stderr(series: np.ndarray) -> tuple[float, bool]:
    """Stderr of the grand mean of (C, S) correlated series via block doubling.

    Returns (stderr, reliable); reliable is False when the series is too short
    for a plateau to show.
    """
    series = np.atleast_2d(np.asarray(series, dtype=np.float64))
    c, s = series.shape
    if c * s < MIN_SAMPLES_FOR_STDERR:
        if c * s < 2:
            return 0.0, False
        flat = series.ravel()
        return float(flat.std(ddof=1) / np.sqrt(flat.size)), False
    prev = None
    b = 1
    while s // b >= 2:
        nb = s // b
        means = series[:, :nb * b].reshape(c, nb, b).mean(axis=2).ravel()
        err = float(means.std(ddof=1) / np.sqrt(means.size))
        if prev is not None and abs(err - prev) <= 0.05 * max(prev, 1e-300):
            return err, True
        prev = err
        b *= 2
    return prev if prev is not None else 0.0, False


def batch_estimate(op: WeightedPauliSum, params: RbmParams, samples,
                   plan: EstimatorPlan | None = None) -> EstimateRecord:
    """Mean/stderr/variance of op from sampled configs, (B, N) or (C, S, N)."""
    arr = np.asarray(samples)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3 or arr.shape[1] == 0:
        raise ValueError("samples must be a non-empty (B, N) or (C, S, N) array")
    c, s, n = arr.shape
    e = local_estimator_batch(op, params, arr.reshape(c * s, n), plan=plan)
    mean = float(e.real.mean())
    variance = float((e.real**2 + e.imag**2).mean() - mean**2)
    stderr, reliable = blocked_stderr(e.real.reshape(c, s))
    return EstimateRecord(mean=mean, stderr=stderr, variance=variance,
                          n_samples=c * s, stderr_reliable=reliable)


def rbm_state_vector(params: RbmParams, sector: int | None = None):
    """Normalized amplitude table of Phi over the (sector) basis, index order."""
    n = params.n
    if n > EXACT_EXPECTATION_MAX_SITES:
        raise CapacityError(
            f"full enumeration needs 2**{n} amplitudes; cap is "
            f"N = {EXACT_EXPECTATION_MAX_SITES}")
    if sector is None:
        cfgs = all_configs(n)
    else:
        cfgs = index_to_config(sector_indices(n, sector), n)
    logs = log_amplitude_batch(params, cfgs)
    v = np.exp(logs - logs.real.max())
    return v / np.linalg.norm(v)


def exact_expectation(op: WeightedPauliSum, params: RbmParams,
                      sector: int | None = None) -> tuple[float, float]:
    """Exact <op> and <op^2> - <op>^2 in the RBM state by full enumeration."""
    v = rbm_state_vector(params, sector)
    idx = None if sector is None else sector_indices(params.n, sector)
    h = PauliSumMatvec(op, sector=idx).matvec(v)
    mean = float(np.real(np.vdot(v, h)))
    variance = float(np.real(np.vdot(h, h))) - mean**2
    return mean, variance
