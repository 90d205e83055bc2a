"""Complex RBM wavefunction with parameter tying.

The ansatz is log Phi(sigma) = sum_k a_k sigma_k + sum_r log cosh(theta_r)
with theta_r = b_r + sum_k W_rk sigma_k; the constant 2**M prefactor of the
traced-out hidden layer is dropped since it cancels in every ratio and
estimator.  All parameters are complex and derivatives are holomorphic in
Omega = (a, b, W).

Tying schemes constrain (a, W) to a free-parameter vector laid out as
[a_free | b | w_free]:

* dense: everything free, M = alpha*N.
* short_range: hidden unit r sits at site s(r) = r // alpha and couples only
  to sites within coupling_range of s(r) (open chain, no wraparound); masked
  weights are exactly zero.
* perm_symmetric: one shared visible bias, one shared weight per hidden unit.
* partial_symmetric: a_1 free and a_2..a_N shared; hidden unit 1 carries N
  free weights, every other hidden unit one weight shared across all sites.

Sites are 1-based in the public API, matching Pauli-string site labels.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .rngs import make_rng

LOG2 = math.log(2.0)

SCHEME_KINDS = ("dense", "short_range", "perm_symmetric", "partial_symmetric")


def _as_config(values) -> np.ndarray:
    """+-1 entries as int8; unlike Bell operators, N = 1 is fine for the RBM."""
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("spin configuration must be 1-d and non-empty")
    if not np.all(np.abs(arr) == 1):
        raise ValueError("spin configuration entries must be +-1")
    return arr.astype(np.int8)


def log_cosh(z):
    """log cosh(z), elementwise, stable for large |Re z|."""
    z = np.asarray(z)
    s = np.sign(z.real)
    s = np.where(s == 0.0, 1.0, s)
    sz = s * z
    return sz + np.log1p(np.exp(-2.0 * sz)) - LOG2


class TyingScheme:
    """Parameter-sharing pattern: group maps from full (a, W) entries to free slots.

    `a_group[k]` is the free index of visible bias k; `(w_rows, w_cols)` list
    the unmasked W entries in row-major order and `w_group` their free
    indices.  Hidden biases are always free, one per hidden unit.
    """

    def __init__(self, kind, n, m, a_group, w_rows, w_cols, w_group,
                 alpha=None, coupling_range=None):
        self.kind = kind
        self.n = int(n)
        self.m = int(m)
        self.alpha = alpha
        self.coupling_range = coupling_range
        self.a_group = np.asarray(a_group, dtype=np.int64)
        self.w_rows = np.asarray(w_rows, dtype=np.int64)
        self.w_cols = np.asarray(w_cols, dtype=np.int64)
        self.w_group = np.asarray(w_group, dtype=np.int64)

        self.n_a_free = int(self.a_group.max()) + 1
        self.n_w_free = int(self.w_group.max()) + 1 if self.w_group.size else 0
        self.n_free = self.n_a_free + self.m + self.n_w_free
        self.sl_a = slice(0, self.n_a_free)
        self.sl_b = slice(self.n_a_free, self.n_a_free + self.m)
        self.sl_w = slice(self.n_a_free + self.m, self.n_free)

        self.a_identity = self.n_a_free == self.n and np.array_equal(
            self.a_group, np.arange(self.n))
        self.w_identity = self.n_w_free == self.w_group.size and np.array_equal(
            self.w_group, np.arange(self.w_group.size))
        # one-hot reduction matrices for the tied cases; identity paths skip them
        self._ra = None
        if not self.a_identity:
            self._ra = np.zeros((self.n_a_free, self.n))
            self._ra[self.a_group, np.arange(self.n)] = 1.0
        self._rw = None
        if not self.w_identity and self.w_group.size:
            self._rw = np.zeros((self.n_w_free, self.w_group.size))
            self._rw[self.w_group, np.arange(self.w_group.size)] = 1.0

        # hidden rows coupled to each site, padded to equal length with row m
        # (a virtual always-zero row) so gathers need no ragged handling
        per_site = [self.w_rows[self.w_cols == k] for k in range(self.n)]
        width = max(len(r) for r in per_site)
        self.site_rows = np.full((self.n, width), self.m, dtype=np.int64)
        for k, rows in enumerate(per_site):
            self.site_rows[k, :len(rows)] = rows

    # -- factories ----------------------------------------------------------

    @classmethod
    def dense(cls, n, alpha=2):
        m = alpha * n
        rows, cols = np.divmod(np.arange(m * n), n)
        return cls("dense", n, m, np.arange(n), rows, cols, np.arange(m * n),
                   alpha=alpha)

    @classmethod
    def short_range(cls, n, alpha=4, coupling_range=2):
        m = alpha * n
        rows, cols = np.divmod(np.arange(m * n), n)
        keep = np.abs(rows // alpha - cols) <= coupling_range
        rows, cols = rows[keep], cols[keep]
        return cls("short_range", n, m, np.arange(n), rows, cols,
                   np.arange(rows.size), alpha=alpha, coupling_range=coupling_range)

    @classmethod
    def perm_symmetric(cls, n, alpha=2):
        m = alpha * n
        rows, cols = np.divmod(np.arange(m * n), n)
        return cls("perm_symmetric", n, m, np.zeros(n, dtype=np.int64),
                   rows, cols, rows.copy(), alpha=alpha)

    @classmethod
    def partial_symmetric(cls, n, alpha=2):
        # a_1 free, a_2..a_N shared; hidden unit 1 fully free, units 2..M one
        # shared weight each (site 1 included in the sharing)
        m = alpha * n
        a_group = np.ones(n, dtype=np.int64)
        a_group[0] = 0
        rows, cols = np.divmod(np.arange(m * n), n)
        w_group = np.where(rows == 0, cols, n + rows - 1)
        return cls("partial_symmetric", n, m, a_group, rows, cols, w_group,
                   alpha=alpha)

    @classmethod
    def make(cls, kind, n, alpha=None, coupling_range=None):
        if kind == "dense":
            return cls.dense(n, alpha if alpha is not None else 2)
        if kind == "short_range":
            return cls.short_range(n, alpha if alpha is not None else 4,
                                   coupling_range if coupling_range is not None else 2)
        if kind == "perm_symmetric":
            return cls.perm_symmetric(n, alpha if alpha is not None else 2)
        if kind == "partial_symmetric":
            return cls.partial_symmetric(n, alpha if alpha is not None else 2)
        raise ValueError(f"unknown tying scheme {kind!r}; choose from {SCHEME_KINDS}")

    # -- free-vector plumbing -----------------------------------------------

    def unpack(self, free):
        a = free[self.sl_a][self.a_group]
        b = free[self.sl_b]
        w = np.zeros((self.m, self.n), dtype=complex)
        w[self.w_rows, self.w_cols] = free[self.sl_w][self.w_group]
        return a, b, w

    def reduce_a(self, x):
        """Sum visible-bias derivatives over tied groups; x has shape (..., N)."""
        if self.a_identity:
            return x
        return x @ self._ra.T

    def reduce_w(self, x):
        """Sum weight derivatives over tied groups; x has shape (..., nnz)."""
        if self.w_identity:
            return x
        return x @ self._rw.T

    def __repr__(self):
        extra = ""
        if self.kind == "short_range":
            extra = f", alpha={self.alpha}, R={self.coupling_range}"
        elif self.alpha is not None:
            extra = f", alpha={self.alpha}"
        return f"TyingScheme({self.kind}, N={self.n}, M={self.m}{extra})"


class RbmParams:
    """Immutable snapshot of the free-parameter vector plus unpacked views."""

    def __init__(self, scheme: TyingScheme, free):
        free = np.asarray(free, dtype=complex)
        if free.shape != (scheme.n_free,):
            raise ValueError(f"free vector has shape {free.shape}, "
                             f"scheme needs ({scheme.n_free},)")
        self.scheme = scheme
        self.free = free.copy()
        self.free.flags.writeable = False
        self.a, self.b, self.w = scheme.unpack(self.free)
        self.w_vals = self.free[scheme.sl_w][scheme.w_group] if scheme.w_group.size \
            else np.zeros(0, dtype=complex)
        # per-site weight columns gathered to the padded site_rows layout
        rows = scheme.site_rows
        pad = rows >= scheme.m
        safe = np.where(pad, 0, rows)
        cols = np.broadcast_to(np.arange(scheme.n)[:, None], rows.shape)
        self.site_w = np.where(pad, 0.0, self.w[safe, cols])

    @property
    def n(self):
        return self.scheme.n

    @property
    def m(self):
        return self.scheme.m

    def replace(self, free) -> "RbmParams":
        return RbmParams(self.scheme, free)


def random_init(scheme: TyingScheme, scale: float = 0.05, seed: int = 0) -> RbmParams:
    """Free parameters i.i.d. complex Gaussian, std ``scale`` per real component."""
    if scale <= 0:
        raise ValueError(f"need scale > 0, got {scale}")
    rng = make_rng(seed)
    re = rng.normal(0.0, scale, scheme.n_free)
    im = rng.normal(0.0, scale, scheme.n_free)
    return RbmParams(scheme, re + 1j * im)


# ---------------------------------------------------------------------------
# amplitudes, ratios, lookups
# ---------------------------------------------------------------------------

def thetas(params: RbmParams, configs) -> np.ndarray:
    """Effective angles b + sigma W^T for one config or a batch (..., N)."""
    sig = np.asarray(configs, dtype=np.float64)
    return params.b + sig @ params.w.T


def log_amplitude(params: RbmParams, config) -> complex:
    config = _as_config(config)
    if config.shape != (params.n,):
        raise ValueError(f"config has length {config.shape}, params need N={params.n}")
    sig = config.astype(np.float64)
    return complex(sig @ params.a + np.sum(log_cosh(thetas(params, sig))))


def log_amplitude_batch(params: RbmParams, configs) -> np.ndarray:
    sig = np.asarray(configs, dtype=np.float64)
    return sig @ params.a + np.sum(log_cosh(thetas(params, sig)), axis=-1)


class LookupState:
    """Cached theta vector for one configuration (single chain)."""

    def __init__(self, theta, config):
        self.theta = np.asarray(theta, dtype=complex)
        self.config = np.asarray(config, dtype=np.int8)


def make_lookup(params: RbmParams, config) -> LookupState:
    config = _as_config(config)
    return LookupState(thetas(params, config), config)


def _flip_cols(params: RbmParams, flips):
    sites = sorted(set(int(s) for s in flips))
    if not sites:
        raise ValueError("need at least one site to flip")
    for s in sites:
        if not (1 <= s <= params.n):
            raise ValueError(f"flip site {s} outside 1..{params.n}")
    return np.asarray(sites, dtype=np.int64) - 1


def log_ratio(params: RbmParams, lookup: LookupState, flips) -> complex:
    """log Phi(config with flips negated) - log Phi(config), via the lookup."""
    cols = _flip_cols(params, flips)
    sig = lookup.config[cols].astype(np.float64)
    theta_new = lookup.theta - 2.0 * (params.w[:, cols] @ sig)
    dlog = np.sum(log_cosh(theta_new) - log_cosh(lookup.theta))
    return complex(dlog - 2.0 * (params.a[cols] @ sig))


def update_lookup(params: RbmParams, lookup: LookupState, flips) -> LookupState:
    cols = _flip_cols(params, flips)
    sig = lookup.config[cols].astype(np.float64)
    theta = lookup.theta - 2.0 * (params.w[:, cols] @ sig)
    config = lookup.config.copy()
    config[cols] = -config[cols]
    return LookupState(theta, config)


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------

def derivatives_batch(params: RbmParams, configs, theta=None) -> np.ndarray:
    """O_k = d log Phi / d Omega_k per free parameter, rows = samples.

    Full-parameter derivatives are O_a = sigma, O_b = tanh theta,
    O_W = sigma * tanh theta; tied groups contribute the sum of their members.
    """
    sig = np.atleast_2d(np.asarray(configs, dtype=np.float64))
    if theta is None:
        theta = thetas(params, sig)
    th = np.tanh(theta)
    sch = params.scheme
    o_w = sig[:, sch.w_cols] * th[:, sch.w_rows]
    return np.concatenate(
        [sch.reduce_a(sig.astype(complex)), th, sch.reduce_w(o_w)], axis=1)


def derivatives(params: RbmParams, config) -> np.ndarray:
    return derivatives_batch(params, _as_config(config))[0]


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, params: RbmParams, seed: int | None = None):
    sch = params.scheme
    doc = {
        "scheme": sch.kind,
        "N": sch.n,
        "M": sch.m,
        "alpha": sch.alpha,
        "seed": seed,
        "params": {
            "a_re": params.a.real.tolist(),
            "a_im": params.a.imag.tolist(),
            "b_re": params.b.real.tolist(),
            "b_im": params.b.imag.tolist(),
            "W_re": params.w.real.tolist(),
            "W_im": params.w.imag.tolist(),
        },
    }
    if sch.kind == "short_range":
        doc["R"] = sch.coupling_range
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_checkpoint(path) -> tuple[RbmParams, int | None]:
    """Rebuild params from a checkpoint, rejecting shape or tying violations."""
    with open(path) as f:
        doc = json.load(f)
    kind = doc["scheme"]
    n, m = int(doc["N"]), int(doc["M"])
    scheme = TyingScheme.make(kind, n, alpha=doc.get("alpha"),
                              coupling_range=doc.get("R"))
    if scheme.m != m:
        raise ValueError(f"checkpoint says M={m} but {kind} with N={n}, "
                         f"alpha={doc.get('alpha')} gives M={scheme.m}")
    p = doc["params"]
    a = np.array(p["a_re"], dtype=float) + 1j * np.array(p["a_im"], dtype=float)
    b = np.array(p["b_re"], dtype=float) + 1j * np.array(p["b_im"], dtype=float)
    w = np.array(p["W_re"], dtype=float) + 1j * np.array(p["W_im"], dtype=float)
    if a.shape != (n,) or b.shape != (m,) or w.shape != (m, n):
        raise ValueError(f"checkpoint arrays have shapes {a.shape}, {b.shape}, "
                         f"{w.shape}; expected ({n},), ({m},), ({m}, {n})")

    mask = np.zeros((m, n), dtype=bool)
    mask[scheme.w_rows, scheme.w_cols] = True
    if np.any(w[~mask] != 0.0):
        raise ValueError("checkpoint has nonzero weights outside the tying mask")

    free = np.zeros(scheme.n_free, dtype=complex)
    # first member of each group defines the value, the rest must agree exactly
    a_first = np.full(scheme.n_a_free, -1, dtype=np.int64)
    for k in range(n):
        g = scheme.a_group[k]
        if a_first[g] < 0:
            a_first[g] = k
            free[scheme.sl_a.start + g] = a[k]
        elif a[k] != a[a_first[g]]:
            raise ValueError(f"tied visible biases disagree at site {k + 1}: "
                             f"{a[k]} vs {a[a_first[g]]}")
    free[scheme.sl_b] = b
    w_entries = w[scheme.w_rows, scheme.w_cols]
    first = np.full(scheme.n_w_free, -1, dtype=np.int64)
    for idx in range(scheme.w_group.size):
        g = scheme.w_group[idx]
        if first[g] < 0:
            first[g] = idx
            free[scheme.sl_w.start + g] = w_entries[idx]
        elif w_entries[idx] != w_entries[first[g]]:
            raise ValueError(
                f"tied weights disagree: entry ({scheme.w_rows[idx]}, "
                f"{scheme.w_cols[idx]}) = {w_entries[idx]} vs {w_entries[first[g]]}")
    out = RbmParams(scheme, free)
    seed = doc.get("seed")
    return out, (int(seed) if seed is not None else None)
