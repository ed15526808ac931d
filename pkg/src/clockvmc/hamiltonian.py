"""Transverse-field Ising chain, its short-time propagator, and the clock
Hamiltonian whose ground state is the discrete time-evolution history.

The enlarged operator acts on ``n_physical + n_clock`` spins and reads

    H_clock = H_pin ⊗ |0><0|
            + 1/2 Σ_t [ I ⊗ (|t><t| + |t+1><t+1|)
                        - U(dt) ⊗ |t+1><t|  -  U†(dt) ⊗ |t><t+1| ]

with clock states Gray-coded into spin words and ``H_pin`` counting down
physical spins so the all-up state is pinned at t = 0.  With this sign the
history state has energy exactly zero; the positive hopping sign sometimes
seen in print does not (it is enforced by tests here, not assumed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .basis import clock_time_of, gray_decode, gray_encode

# Off-diagonal propagator entries below this magnitude are dropped from rows.
ROW_PRUNE_TOLERANCE = 1e-14

DEFAULT_DENSE_CAP = 1 << 14


@dataclass(frozen=True)
class TfimParams:
    """Open-chain transverse-field Ising couplings (dimensionless, ħ = 1)."""

    n_physical: int
    coupling: float = 0.25
    field: float = 1.0

    def __post_init__(self) -> None:
        if self.n_physical < 1:
            raise ValueError("need at least one physical spin")

    @property
    def dim(self) -> int:
        return 1 << self.n_physical


@dataclass(frozen=True)
class OperatorRow:
    """All nonzero matrix elements <σ|H|σ'> for one source configuration σ.

    ``indices`` are basis indices of the connected σ', ``amplitudes`` the
    matching complex entries.  The diagonal element appears exactly once.
    """

    source_index: int
    indices: np.ndarray
    amplitudes: np.ndarray


def tfim_row(params: TfimParams, physical_index: int) -> OperatorRow:
    """Row of the Ising Hamiltonian at one physical basis state.

    Diagonal: J Σ σ_i σ_{i+1} over the open-chain bonds.  Off-diagonal:
    one entry of amplitude h per single-spin flip.
    """
    n = params.n_physical
    bits = (physical_index >> np.arange(n - 1, -1, -1)) & 1
    spins = 1 - 2 * bits
    diag = params.coupling * float(np.dot(spins[:-1], spins[1:])) if n > 1 else 0.0
    indices = np.empty(n + 1, dtype=np.int64)
    amplitudes = np.empty(n + 1, dtype=np.complex128)
    indices[0] = physical_index
    amplitudes[0] = diag
    for i in range(n):
        indices[i + 1] = physical_index ^ (1 << (n - 1 - i))
        amplitudes[i + 1] = params.field
    return OperatorRow(physical_index, indices, amplitudes)


def tfim_dense(params: TfimParams) -> np.ndarray:
    """Dense Ising matrix assembled from :func:`tfim_row`."""
    dim = params.dim
    out = np.zeros((dim, dim), dtype=np.complex128)
    for p in range(dim):
        row = tfim_row(params, p)
        out[p, row.indices] += row.amplitudes
    return out


@dataclass(frozen=True)
class Propagator:
    """Dense unitary exp(-i H dt) of the Ising chain."""

    matrix: np.ndarray
    dt: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def propagator(params: TfimParams, dt: float) -> Propagator:
    """Short-time propagator via eigendecomposition of the dense Ising matrix.

    The matrix is Hermitian, so U = V exp(-i D dt) V† is exact to machine
    precision and unitary by construction.
    """
    if not math.isfinite(dt):
        raise ValueError("time step must be finite")
    h = tfim_dense(params)
    try:
        evals, evecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise FloatingPointError("eigendecomposition of the Ising matrix failed") from exc
    u = (evecs * np.exp(-1j * evals * dt)) @ evecs.conj().T
    return Propagator(matrix=u, dt=dt)


class DenseCapError(ValueError):
    """Raised when a dense construction would exceed the configured cap."""


@dataclass
class ClockHamiltonian:
    """Clock-expanded Hamiltonian with row access for VMC and dense form
    for the exact oracle.

    ``n_steps`` is the number of evolution steps N; the clock register has
    ``ceil(log2(N+1))`` spins.  Immutable after construction; row queries
    are read-only.
    """

    tfim: TfimParams
    n_steps: int
    total_time: float
    dense_cap: int = DEFAULT_DENSE_CAP
    n_clock: int = field(init=False)
    prop: Propagator = field(init=False)

    def __post_init__(self) -> None:
        if self.n_steps < 0:
            raise ValueError("number of steps must be nonnegative")
        # ceil(log2(N+1)) equals bit_length(N) for N >= 1 and 0 for N = 0.
        self.n_clock = self.n_steps.bit_length()
        dt = self.total_time / self.n_steps if self.n_steps else 0.0
        self.prop = propagator(self.tfim, dt)

    @classmethod
    def for_clock_spins(cls, tfim: TfimParams, n_clock: int, total_time: float,
                        dense_cap: int = DEFAULT_DENSE_CAP) -> "ClockHamiltonian":
        """Problem with a full clock register: N = 2**n_clock - 1 steps."""
        return cls(tfim, (1 << n_clock) - 1, total_time, dense_cap)

    @property
    def n_physical(self) -> int:
        return self.tfim.n_physical

    @property
    def n_spins(self) -> int:
        return self.tfim.n_physical + self.n_clock

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    @property
    def dt(self) -> float:
        return self.prop.dt

    def _window_multiplicity(self, t: int) -> int:
        # Number of window terms 1/2 (|t><t| + |t+1><t+1| - hops) touching t.
        n = self.n_steps
        return int(0 <= t <= n - 1) + int(1 <= t <= n)

    def row_by_index(self, index: int) -> OperatorRow:
        """Row of the clock Hamiltonian at a basis index.

        Diagonal weight 1/2 per window containing the decoded time t, plus
        the pinning count of down physical spins at t = 0; hopping blocks
        couple Gray-adjacent clock words through U(dt) (toward t-1) and
        U†(dt) (toward t+1), dense over the physical block.
        """
        n_c = self.n_clock
        phys, word = divmod(index, 1 << n_c) if n_c else (index, 0)
        t = gray_decode(word)
        diag = 0.5 * self._window_multiplicity(t)
        if t == 0:
            diag += 0.5 * bin(phys).count("1")  # down physical spins
        indices = [np.array([index], dtype=np.int64)]
        amps = [np.array([diag], dtype=np.complex128)]
        u = self.prop.matrix
        if 1 <= t <= self.n_steps:
            w2 = gray_encode(t - 1, n_c)
            col = u[phys, :]
            keep = np.abs(col) >= ROW_PRUNE_TOLERANCE
            targets = (np.nonzero(keep)[0] << n_c) + w2
            indices.append(targets)
            amps.append(-0.5 * col[keep])
        if t <= self.n_steps - 1:
            w2 = gray_encode(t + 1, n_c)
            col = u[:, phys].conj()
            keep = np.abs(col) >= ROW_PRUNE_TOLERANCE
            targets = (np.nonzero(keep)[0] << n_c) + w2
            indices.append(targets)
            amps.append(-0.5 * col[keep])
        return OperatorRow(index, np.concatenate(indices), np.concatenate(amps))

    def row(self, config: np.ndarray) -> OperatorRow:
        """Row at a spin configuration (see :meth:`row_by_index`)."""
        from .basis import config_to_index

        return self.row_by_index(config_to_index(config))

    def check_dense_cap(self) -> None:
        if self.dim > self.dense_cap:
            raise DenseCapError(
                f"dense form of a {self.dim}-dimensional operator exceeds the "
                f"cap of {self.dense_cap}")

    def to_sparse(self) -> sparse.csr_matrix:
        """CSR matrix assembled row by row (subject to the dense cap)."""
        self.check_dense_cap()
        rows, cols, vals = [], [], []
        for i in range(self.dim):
            r = self.row_by_index(i)
            rows.append(np.full(r.indices.shape, i, dtype=np.int64))
            cols.append(r.indices)
            vals.append(r.amplitudes)
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dim, self.dim))

    def to_dense(self) -> np.ndarray:
        """Dense Hermitian matrix consistent with :meth:`row_by_index`."""
        return self.to_sparse().toarray()


def clock_time_of_config(config: np.ndarray, n_clock: int) -> int:
    """Time index of a full configuration's clock register."""
    return clock_time_of(config, n_clock)


def clock_projector_mask(h: ClockHamiltonian, t: int) -> np.ndarray:
    """Boolean mask over basis indices whose clock register encodes ``t``."""
    if not 0 <= t <= h.n_steps:
        raise ValueError(f"time index {t} out of range")
    word = gray_encode(t, h.n_clock)
    idx = np.arange(h.dim)
    return (idx & ((1 << h.n_clock) - 1)) == word


__all__ = [
    "TfimParams",
    "OperatorRow",
    "Propagator",
    "ClockHamiltonian",
    "DenseCapError",
    "tfim_row",
    "tfim_dense",
    "propagator",
    "clock_projector_mask",
    "DEFAULT_DENSE_CAP",
]
