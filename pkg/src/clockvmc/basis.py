"""Spin-configuration basis handling and the reflected-binary clock encoding.

Conventions, fixed once and used everywhere:

* A configuration is a 1-D integer array of ``+1``/``-1`` spin values.
  Positions ``0 .. n_physical-1`` are the physical chain, positions
  ``n_physical .. n_physical+n_clock-1`` are the clock register.
* Spin ``+1`` maps to bit ``0``, spin ``-1`` to bit ``1``.
* Position 0 is the most significant bit of the basis index, so the
  all-up configuration is index 0 and all-down is ``2**n - 1``.
* Clock registers hold the reflected-binary (Gray) code of the time
  index, most significant clock bit first.
"""

from __future__ import annotations

import numpy as np

SPIN_DTYPE = np.int8


def gray_encode(t: int, n_bits: int) -> int:
    """Reflected-binary code of ``t`` as an ``n_bits``-wide integer word.

    Consecutive time indices map to words differing in exactly one bit.

    Raises:
        ValueError: if ``t`` is outside ``[0, 2**n_bits)``.
    """
    if not 0 <= t < (1 << n_bits):
        raise ValueError(f"time index {t} out of range for {n_bits} bits")
    return t ^ (t >> 1)


def gray_decode(word: int) -> int:
    """Inverse of :func:`gray_encode`: recover ``t`` from its Gray word."""
    t = 0
    while word:
        t ^= word
        word >>= 1
    return t


def config_to_index(config: np.ndarray) -> int:
    """Basis index of a spin configuration (+1 -> bit 0, position 0 MSB)."""
    bits = np.asarray(config) < 0
    n = bits.shape[-1]
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    return int(bits @ weights)


def configs_to_indices(configs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`config_to_index` over a (batch, n) array."""
    bits = np.asarray(configs) < 0
    n = bits.shape[-1]
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def index_to_config(index: int, n_physical: int, n_clock: int) -> np.ndarray:
    """Spin configuration for a basis index, physical spins first."""
    n = n_physical + n_clock
    if not 0 <= index < (1 << n):
        raise ValueError(f"index {index} out of range for {n} spins")
    bits = (index >> np.arange(n - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(SPIN_DTYPE)


def all_configurations(n_spins: int) -> np.ndarray:
    """All ``2**n_spins`` configurations, ordered by basis index."""
    idx = np.arange(1 << n_spins)
    bits = (idx[:, None] >> np.arange(n_spins - 1, -1, -1)[None, :]) & 1
    return (1 - 2 * bits).astype(SPIN_DTYPE)


def clock_word(config: np.ndarray, n_clock: int) -> int:
    """Integer word held by the clock register (spin -1 -> bit 1)."""
    if n_clock == 0:
        return 0
    clock = np.asarray(config)[len(config) - n_clock:]
    bits = clock < 0
    weights = 1 << np.arange(n_clock - 1, -1, -1, dtype=np.int64)
    return int(bits @ weights)


def clock_time_of(config: np.ndarray, n_clock: int) -> int:
    """Time index Gray-decoded from the clock spins.

    Codes beyond the last time step (possible when ``n_steps + 1 <
    2**n_clock``) decode to their numeric value; callers treat such basis
    states as ordinary Hilbert-space members that no clock term couples.
    """
    return gray_decode(clock_word(config, n_clock))


def clock_code_config(t: int, n_clock: int) -> np.ndarray:
    """Clock-register spin values for time index ``t``."""
    word = gray_encode(t, n_clock)
    bits = (word >> np.arange(n_clock - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(SPIN_DTYPE)


def validate_configuration(config: np.ndarray, n_spins: int) -> None:
    """Raise ``ValueError`` unless ``config`` is a length-``n_spins`` ±1 array."""
    config = np.asarray(config)
    if config.shape != (n_spins,):
        raise ValueError(f"expected {n_spins} spins, got shape {config.shape}")
    if not np.all(np.abs(config) == 1):
        raise ValueError("spin values must be +1 or -1")
