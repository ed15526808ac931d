"""Building the Monte Carlo sample: Metropolis-Hastings single-spin-flip
chains for RBM-family models, exact ancestral sampling for autoregressive
ones.

Chains restart from uniformly random configurations each call, discard a
burn-in of whole-chain sweeps, and keep one configuration per thinning
sweep; kept samples are concatenated across chains (and truncated) to
exactly ``n_samples``.  Each chain draws from its own spawned generator
stream, so a batch is reproducible from (seed, config) and chains stay
independent.  Acceptance works in the log domain: a flip is accepted with
probability min(1, exp(2 Re Δlog Ψ)).

When the caller supplies a precomputed log Ψ table over the whole basis,
the walk is driven by table lookups over basis indices — the identical
Markov chain (accept/reject decisions compare the same floats) at a
fraction of the cost.  The table kernel is JIT-compiled when numba is
installed; it performs only comparisons and integer flips, so results are
bit-identical with or without compilation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import SPIN_DTYPE, configs_to_indices

# Per-chain random numbers are drawn in fixed-size blocks; the constant is
# part of the reproducibility contract for a given package version.
_DRAW_BLOCK = 4096

_MAX_INIT_REDRAWS = 100


class SamplerError(RuntimeError):
    """The model gave the sampler nothing to walk on."""


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for one sampling pass.

    ``burn_in`` and ``thinning`` are measured in sweeps (one sweep =
    n_spins single-flip proposals); the defaults are engineering choices,
    exposed here precisely because they are not pinned by any physics.
    """

    n_samples: int = 512
    n_chains: int = 8
    burn_in: int = 10
    thinning: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("need at least one sample")
        if self.n_chains < 1:
            raise ValueError("need at least one chain")
        if self.burn_in < 0 or self.thinning < 1:
            raise ValueError("burn_in must be >= 0 and thinning >= 1")


@dataclass(frozen=True)
class SampleBatch:
    """Configurations drawn from |Ψ|² with provenance metadata."""

    configurations: np.ndarray  # (n_samples, n_spins) int8
    chain_ids: np.ndarray       # (n_samples,)
    log_psi: np.ndarray         # (n_samples,) complex
    acceptance_rate: float

    @property
    def size(self) -> int:
        return self.configurations.shape[0]

    def indices(self) -> np.ndarray:
        return configs_to_indices(self.configurations)


def acceptance_probability(log_psi_current: complex, log_psi_proposed: complex) -> float:
    """min(1, |Ψ(σ̃)|²/|Ψ(σ)|²) evaluated in the log domain."""
    delta = 2.0 * (np.real(log_psi_proposed) - np.real(log_psi_current))
    return float(np.exp(min(delta, 0.0)))


def _table_walk_kernel(idx, table_re2, bits, sites, log_u, step0, burn_steps,
                       thin_period, kept, n_kept, accepted):
    """Advance every chain through one block of proposals via table lookups.

    Mutates ``idx`` (current basis index per chain) and ``kept`` (kept
    sample indices); returns updated (n_kept, accepted).  Works identically
    interpreted or JIT-compiled: only comparisons, lookups and XORs.
    """
    n_chains, block = sites.shape
    for k in range(block):
        gstep = step0 + k
        counting = gstep >= burn_steps
        for c in range(n_chains):
            new = idx[c] ^ bits[sites[c, k]]
            delta = table_re2[new] - table_re2[idx[c]]
            if log_u[c, k] < delta:
                idx[c] = new
                if counting:
                    accepted += 1
        if counting and (gstep - burn_steps + 1) % thin_period == 0:
            for c in range(n_chains):
                kept[c, n_kept] = idx[c]
            n_kept += 1
    return n_kept, accepted


try:  # pragma: no cover - exercised indirectly
    from numba import njit as _njit

    _table_walk = _njit(cache=True)(_table_walk_kernel)
except ImportError:  # pragma: no cover
    _table_walk = _table_walk_kernel


def _random_configs(rngs, n_spins: int) -> np.ndarray:
    rows = [rng.integers(0, 2, size=n_spins) for rng in rngs]
    return (1 - 2 * np.stack(rows)).astype(SPIN_DTYPE)


def metropolis_sample(model, config: SamplerConfig, seed: int | None = None,
                      log_psi_table: np.ndarray | None = None) -> SampleBatch:
    """Run ``config.n_chains`` single-spin-flip chains and collect samples.

    ``log_psi_table`` optionally supplies precomputed log Ψ over the whole
    basis (indexed by config_to_index); see the module docstring.
    """
    n = model.n_spins
    seed = config.seed if seed is None else seed
    keep_per_chain = -(-config.n_samples // config.n_chains)
    burn_steps = config.burn_in * n
    thin_period = config.thinning * n
    total_steps = burn_steps + keep_per_chain * thin_period

    rngs = [np.random.default_rng(s)
            for s in np.random.SeedSequence(seed).spawn(config.n_chains)]
    current = _random_configs(rngs, n)
    log_cur = _eval_log_psi(model, current, log_psi_table)
    for _ in range(_MAX_INIT_REDRAWS):
        dead = ~np.isfinite(log_cur.real)
        if not dead.any():
            break
        redraw = _random_configs([rngs[i] for i in np.nonzero(dead)[0]], n)
        current[dead] = redraw
        log_cur[dead] = _eval_log_psi(model, redraw, log_psi_table)
    else:
        raise SamplerError("could not find configurations with nonzero amplitude")

    if log_psi_table is not None:
        return _run_table_walk(model, config, rngs, current, log_psi_table,
                               burn_steps, thin_period, total_steps,
                               keep_per_chain)
    return _run_direct_walk(model, config, rngs, current, log_cur,
                            burn_steps, thin_period, total_steps,
                            keep_per_chain)


def _run_table_walk(model, config, rngs, current, table, burn_steps,
                    thin_period, total_steps, keep_per_chain) -> SampleBatch:
    n = model.n_spins
    idx = configs_to_indices(current).astype(np.int64)
    table_re2 = np.ascontiguousarray(2.0 * np.real(table))
    bits = (1 << np.arange(n - 1, -1, -1)).astype(np.int64)
    kept = np.empty((config.n_chains, keep_per_chain), dtype=np.int64)
    n_kept, accepted = 0, 0
    step = 0
    while step < total_steps:
        block = min(_DRAW_BLOCK, total_steps - step)
        sites = np.stack([rng.integers(0, n, size=block) for rng in rngs])
        log_u = np.log(np.stack([rng.random(size=block) for rng in rngs]))
        n_kept, accepted = _table_walk(
            idx, table_re2, bits, sites, log_u, step, burn_steps,
            thin_period, kept, n_kept, accepted)
        step += block

    flat_idx = kept.reshape(-1)[:config.n_samples]
    shifts = np.arange(n - 1, -1, -1)
    configs = (1 - 2 * ((flat_idx[:, None] >> shifts[None, :]) & 1)).astype(SPIN_DTYPE)
    chain_ids = np.repeat(np.arange(config.n_chains), keep_per_chain)[:config.n_samples]
    proposals = config.n_chains * (total_steps - burn_steps)
    rate = accepted / proposals if proposals else 1.0
    return SampleBatch(configs, chain_ids, table[flat_idx], rate)


def _run_direct_walk(model, config, rngs, current, log_cur, burn_steps,
                     thin_period, total_steps, keep_per_chain) -> SampleBatch:
    n = model.n_spins
    kept = np.empty((config.n_chains, keep_per_chain, n), dtype=SPIN_DTYPE)
    kept_log = np.empty((config.n_chains, keep_per_chain), dtype=np.complex128)
    n_kept, accepted = 0, 0
    chain_range = np.arange(config.n_chains)
    step = 0
    while step < total_steps:
        block = min(_DRAW_BLOCK, total_steps - step)
        sites = np.stack([rng.integers(0, n, size=block) for rng in rngs])
        log_u = np.log(np.stack([rng.random(size=block) for rng in rngs]))
        for k in range(block):
            site = sites[:, k]
            prop = current.copy()
            prop[chain_range, site] *= -1
            log_prop = model.log_psi_batch(prop)
            delta = 2.0 * (log_prop.real - log_cur.real)
            accept = log_u[:, k] < delta
            current[accept] = prop[accept]
            log_cur[accept] = log_prop[accept]
            gstep = step + k
            if gstep >= burn_steps:
                accepted += int(accept.sum())
                if (gstep - burn_steps + 1) % thin_period == 0:
                    kept[:, n_kept] = current
                    kept_log[:, n_kept] = log_cur
                    n_kept += 1
        step += block

    configs = kept.reshape(-1, n)[:config.n_samples]
    log_psi = kept_log.reshape(-1)[:config.n_samples]
    chain_ids = np.repeat(np.arange(config.n_chains), keep_per_chain)[:config.n_samples]
    proposals = config.n_chains * (total_steps - burn_steps)
    rate = accepted / proposals if proposals else 1.0
    return SampleBatch(configs, chain_ids, log_psi, rate)


def _eval_log_psi(model, configs: np.ndarray,
                  table: np.ndarray | None) -> np.ndarray:
    if table is not None:
        return table[configs_to_indices(configs)]
    return model.log_psi_batch(configs)


def ar_direct_sample(model, n_samples: int, seed: int) -> SampleBatch:
    """Exact ancestral sampling for autoregressive models: i.i.d. samples,
    no chains, no burn-in."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    configs = model.sample(n_samples, rng)
    log_psi = model.log_psi_batch(configs)
    return SampleBatch(
        configurations=configs,
        chain_ids=np.zeros(n_samples, dtype=np.int64),
        log_psi=log_psi,
        acceptance_rate=1.0,
    )


def sample_for(model, config: SamplerConfig, seed: int | None = None,
               log_psi_table: np.ndarray | None = None) -> SampleBatch:
    """Dispatch on the model family: ancestral for autoregressive models,
    Metropolis otherwise."""
    if model.kind in ("ar", "ar-split"):
        return ar_direct_sample(model, config.n_samples,
                                config.seed if seed is None else seed)
    return metropolis_sample(model, config, seed, log_psi_table)
