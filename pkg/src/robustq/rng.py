"""Counter-based random streams for reproducible, order-independent sampling.

Trial ``i`` of a run always consumes the same 64-bit word of the Philox
keystream for a given seed, no matter how the trials are partitioned across
workers.  The keystream is organised in fixed blocks of ``BLOCK_SIZE`` words;
block ``b`` is generated from counter offset ``b << 64`` of the Philox-4x64
cipher keyed by the seed.  Merging partial counts is integer addition, so
parallel simulation is bit-exact regardless of scheduling.
"""

from __future__ import annotations

import numpy as np

BLOCK_SIZE = 1 << 16

_U64 = (1 << 64) - 1
_INV = 2.0 ** -53


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) <= _U64:
        raise ValueError("seed must fit in 64 bits")
    return int(seed)


def _block_words(seed: int, block: int) -> np.ndarray:
    bg = np.random.Philox(key=seed, counter=block << 64)
    return bg.random_raw(BLOCK_SIZE)


def uniforms(seed: int, first_trial: int, count: int) -> np.ndarray:
    """Uniform [0, 1) doubles for trials [first_trial, first_trial + count).

    The value of trial ``i`` depends only on ``(seed, i)``.
    """
    seed = _check_seed(seed)
    if count < 0 or first_trial < 0:
        raise ValueError("trial range must be nonnegative")
    out = np.empty(count)
    pos = 0
    trial = first_trial
    while pos < count:
        block, off = divmod(trial, BLOCK_SIZE)
        take = min(BLOCK_SIZE - off, count - pos)
        raw = _block_words(seed, block)[off:off + take]
        out[pos:pos + take] = (raw >> np.uint64(11)) * _INV
        pos += take
        trial += take
    return out


def sample_outcome_counts(probs, n_trials: int, seed: int,
                          first_trial: int = 0) -> np.ndarray:
    """Tally ``n_trials`` independent draws from a finite outcome table.

    Outcome ``k`` owns the subinterval [cum_{k-1}, cum_k) of [0, 1); a trial's
    uniform picks the owner.  Zero-probability outcomes own empty intervals
    and are never drawn.
    """
    p = np.asarray(probs, dtype=float)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if np.any(p < 0):
        raise ValueError("probabilities must be nonnegative")
    cum = np.cumsum(p)
    if abs(cum[-1] - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    cum[-1] = 1.0  # guard the top edge against cumulative rounding
    counts = np.zeros(p.size, dtype=np.int64)
    pos = 0
    while pos < n_trials:
        take = min(BLOCK_SIZE, n_trials - pos)
        u = uniforms(seed, first_trial + pos, take)
        idx = np.searchsorted(cum, u, side="right")
        counts += np.bincount(idx, minlength=p.size)
        pos += take
    return counts
