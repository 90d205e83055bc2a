"""Metropolis sampling of spin configurations from |Phi|^2.

Moves are single site flips or sector-preserving pair exchanges (swap of an
antiparallel pair, conserving total sigma^z).  Proposals are symmetric, so
acceptance is min(1, |Phi'/Phi|^2), evaluated as log u < 2 Re log_ratio.

Each chain owns a counter-based stream keyed by (seed, 1, chain_id): adding or
removing chains never perturbs another chain's trajectory, and aggregation is
ordered by chain id, so runs are reproducible regardless of scheduling.  Per
advance block a chain draws its proposal sites first, then its uniforms.

The ensemble keeps, per chain, the configuration, the effective angles theta
(with one extra always-zero pad entry so masked-weight gathers need no ragged
handling), and the real part of log cosh(theta) so each proposal costs one
log-cosh evaluation over the affected hidden units only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import all_configs, index_to_config, sector_indices
from .errors import CapacityError
from .rbm import LookupState, RbmParams, log_amplitude_batch, log_cosh, log_ratio, \
    make_lookup, thetas, update_lookup
from .rngs import make_rng

EXACT_DIST_MAX_SITES = 14
MAX_BLOCK = 4096  # proposals per chain per pre-drawn block

MOVE_KINDS = ("single_flip", "pair_exchange")


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 32
    sweeps_per_sample: int = 1
    warmup_sweeps: int = 100
    move_kind: str = "single_flip"
    sector: int | None = None

    def __post_init__(self):
        if self.n_chains < 1 or self.sweeps_per_sample < 1 or self.warmup_sweeps < 0:
            raise ValueError("need n_chains >= 1, sweeps_per_sample >= 1, warmup >= 0")
        if self.move_kind not in MOVE_KINDS:
            raise ValueError(f"move_kind must be one of {MOVE_KINDS}")
        if self.move_kind == "pair_exchange" and self.sector is None:
            raise ValueError("pair_exchange moves need a fixed sigma^z sector")
        if self.move_kind == "single_flip" and self.sector is not None:
            raise ValueError("single_flip moves cannot hold a sigma^z sector")


def _n_up(n: int, sector: int) -> int:
    if abs(sector) > n or (n + sector) % 2 != 0:
        raise ValueError(f"sigma^z sector {sector} is empty for N = {n}")
    return (n + sector) // 2


class ChainEnsemble:
    """A bank of Metropolis chains advanced in lock step."""

    def __init__(self, params: RbmParams, config: SamplerConfig, seed: int,
                 streams=None):
        self.config = config
        self.seed = int(seed)
        self.streams = list(range(config.n_chains)) if streams is None else list(streams)
        n = params.n
        self.rngs = [make_rng(self.seed, 1, c) for c in self.streams]
        sigs = []
        for rng in self.rngs:
            if config.sector is None:
                sigs.append(rng.integers(0, 2, size=n) * 2 - 1)
            else:
                up = _n_up(n, config.sector)
                base = np.concatenate([np.ones(up), -np.ones(n - up)])
                sigs.append(rng.permutation(base))
        self.sig = np.array(sigs, dtype=np.float64)
        self.accepted = np.zeros(len(self.streams), dtype=np.int64)
        self.proposed = np.zeros(len(self.streams), dtype=np.int64)
        self.set_params(params)

    @property
    def n_chains(self):
        return len(self.streams)

    def set_params(self, params: RbmParams):
        """Swap in new parameters (between iterations); rebuilds the caches."""
        if params.n != self.sig.shape[1]:
            raise ValueError("parameter size does not match chain configurations")
        self.params = params
        th = thetas(params, self.sig)
        pad = np.zeros((self.n_chains, 1), dtype=complex)
        self.theta = np.concatenate([th, pad], axis=1)
        self.lc = log_cosh(self.theta).real.copy()

    def configs(self) -> np.ndarray:
        return self.sig.astype(np.int8)

    def acceptance_rates(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(self.proposed > 0, self.accepted / self.proposed, 0.0)

    # -- stepping -------------------------------------------------------------

    def _step_single(self, k, u):
        ci = np.arange(self.n_chains)
        sigk = self.sig[ci, k]
        rows = self.params.scheme.site_rows[k]          # (C, L)
        wk = self.params.site_w[k]                      # (C, L)
        th_old = self.theta[ci[:, None], rows]
        th_new = th_old - 2.0 * sigk[:, None] * wk
        lc_new = log_cosh(th_new).real
        lc_old = self.lc[ci[:, None], rows]
        dre = (lc_new - lc_old).sum(axis=1) - 2.0 * self.params.a.real[k] * sigk
        accept = np.log(u) < 2.0 * dre
        upd = accept[:, None]
        self.sig[ci, k] = np.where(accept, -sigk, sigk)
        self.theta[ci[:, None], rows] = np.where(upd, th_new, th_old)
        self.lc[ci[:, None], rows] = np.where(upd, lc_new, lc_old)
        self.accepted += accept
        self.proposed += 1

    def _step_pair(self, i, j, u):
        ci = np.arange(self.n_chains)
        sig_i = self.sig[ci, i]
        sig_j = self.sig[ci, j]
        valid = sig_i != sig_j
        rows = np.concatenate(
            [self.params.scheme.site_rows[i], self.params.scheme.site_rows[j]], axis=1)
        dth = np.concatenate(
            [-2.0 * sig_i[:, None] * self.params.site_w[i],
             -2.0 * sig_j[:, None] * self.params.site_w[j]], axis=1)
        # the two supports may share hidden units: sort rows per chain and fold
        # duplicate entries together (real rows appear at most twice; pads have
        # zero delta so their collisions are harmless)
        order = np.argsort(rows, axis=1, kind="stable")
        rows = np.take_along_axis(rows, order, axis=1)
        dth = np.take_along_axis(dth, order, axis=1)
        same = rows[:, 1:] == rows[:, :-1]
        dth[:, :-1] += np.where(same, dth[:, 1:], 0.0)
        m = self.params.m
        rows[:, 1:] = np.where(same, m, rows[:, 1:])
        dth[:, 1:] = np.where(same, 0.0, dth[:, 1:])

        th_old = self.theta[ci[:, None], rows]
        th_new = th_old + dth
        lc_new = log_cosh(th_new).real
        lc_old = self.lc[ci[:, None], rows]
        a = self.params.a.real
        dre = (lc_new - lc_old).sum(axis=1) - 2.0 * (a[i] * sig_i + a[j] * sig_j)
        accept = valid & (np.log(u) < 2.0 * dre)
        upd = accept[:, None]
        self.sig[ci, i] = np.where(accept, -sig_i, sig_i)
        self.sig[ci, j] = np.where(accept, -sig_j, sig_j)
        self.theta[ci[:, None], rows] = np.where(upd, th_new, th_old)
        self.lc[ci[:, None], rows] = np.where(upd, lc_new, lc_old)
        self.accepted += accept
        self.proposed += 1

    def _advance(self, n_proposals: int):
        n = self.params.n
        pair = self.config.move_kind == "pair_exchange"
        done = 0
        while done < n_proposals:
            block = min(MAX_BLOCK, n_proposals - done)
            if pair:
                si = np.stack([r.integers(0, n, size=block) for r in self.rngs])
                sj = np.stack([r.integers(0, n, size=block) for r in self.rngs])
                us = np.stack([r.random(size=block) for r in self.rngs])
                for t in range(block):
                    self._step_pair(si[:, t], sj[:, t], us[:, t])
            else:
                si = np.stack([r.integers(0, n, size=block) for r in self.rngs])
                us = np.stack([r.random(size=block) for r in self.rngs])
                for t in range(block):
                    self._step_single(si[:, t], us[:, t])
            done += block

    def run_sweeps(self, n_sweeps: int):
        self._advance(n_sweeps * self.params.n)

    def draw_samples(self, n_per_chain: int) -> np.ndarray:
        """Advance sweeps_per_sample sweeps per snapshot; (C, S, N) int8 output."""
        c, n = self.sig.shape
        out = np.empty((c, n_per_chain, n), dtype=np.int8)
        thin = self.config.sweeps_per_sample * n
        for s in range(n_per_chain):
            self._advance(thin)
            out[:, s] = self.sig
        return out


def run_chain(params: RbmParams, config: SamplerConfig, n_samples: int,
              seed: int, stream: int = 0) -> np.ndarray:
    """One chain: warmup, then n_samples thinned snapshots, (S, N) int8.

    Identical to chain ``stream`` of a ChainEnsemble run with the same
    schedule, whatever the ensemble's chain count.
    """
    ens = ChainEnsemble(params, config, seed, streams=[stream])
    ens.run_sweeps(config.warmup_sweeps)
    if n_samples == 0:
        return np.empty((0, params.n), dtype=np.int8)
    return ens.draw_samples(n_samples)[0]


# ---------------------------------------------------------------------------
# single-chain stepping (reference semantics, used by statistical tests)
# ---------------------------------------------------------------------------

@dataclass
class ChainState:
    config: np.ndarray
    lookup: LookupState
    rng: np.random.Generator
    accepted: int = 0
    proposed: int = 0


def make_chain(params: RbmParams, seed: int, stream: int = 0,
               sector: int | None = None) -> ChainState:
    rng = make_rng(seed, 1, stream)
    n = params.n
    if sector is None:
        cfg = (rng.integers(0, 2, size=n) * 2 - 1).astype(np.int8)
    else:
        up = _n_up(n, sector)
        base = np.concatenate([np.ones(up), -np.ones(n - up)])
        cfg = rng.permutation(base).astype(np.int8)
    return ChainState(cfg, make_lookup(params, cfg), rng)


def metropolis_step(params: RbmParams, chain: ChainState, move_kind: str) -> bool:
    """One proposal; returns acceptance.  Pair proposals with equal spins are
    skipped and counted as rejections (the uniform is still consumed, keeping
    the stream aligned with pre-drawn blocks)."""
    n = params.n
    chain.proposed += 1
    if move_kind == "single_flip":
        site = int(chain.rng.integers(0, n)) + 1
        flips = [site]
        u = chain.rng.random()
    elif move_kind == "pair_exchange":
        i = int(chain.rng.integers(0, n)) + 1
        j = int(chain.rng.integers(0, n)) + 1
        u = chain.rng.random()
        if chain.config[i - 1] == chain.config[j - 1]:
            return False
        flips = [i, j]
    else:
        raise ValueError(f"move_kind must be one of {MOVE_KINDS}")
    r = log_ratio(params, chain.lookup, flips)
    if np.log(u) < 2.0 * r.real:
        chain.lookup = update_lookup(params, chain.lookup, flips)
        chain.config = chain.lookup.config
        chain.accepted += 1
        return True
    return False


# ---------------------------------------------------------------------------
# exact reference distribution
# ---------------------------------------------------------------------------

def exact_distribution(params: RbmParams, sector: int | None = None):
    """Normalized |Phi|^2 over the full space or a sigma^z sector.

    Returns (configs, probs) with configs in basis-index order.
    """
    n = params.n
    if n > EXACT_DIST_MAX_SITES:
        raise CapacityError(
            f"exact distribution enumerates 2**{n} configs; cap is "
            f"N = {EXACT_DIST_MAX_SITES}")
    if sector is None:
        cfgs = all_configs(n)
    else:
        _n_up(n, sector)
        cfgs = index_to_config(sector_indices(n, sector), n)
    logs = log_amplitude_batch(params, cfgs).real
    logs -= logs.max()
    p = np.exp(2.0 * logs)
    return cfgs, p / p.sum()
