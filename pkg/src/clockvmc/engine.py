"""Local-energy estimation, stochastic gradients, AdamW updates, staged
clock turn-on training, direct infidelity minimization, and time-projected
observable estimation.

The gradient estimator is the covariance form

    g_s = 2 Re < conj(D_s) (E_loc - <E_loc>) >          (batch average)

where ``D_s`` is the log-derivative with respect to the s-th *real*
parameter slot (complex parameters contribute a real and an imaginary
slot, which makes the same formula cover holomorphic, real-parameter and
non-holomorphic ansätze alike).  At desk scale (Hilbert dimension within
``table_cap``) the engine tabulates log Ψ over the whole basis once per
iteration and drives sampling and local energies off the table; this is
the identical algorithm, just cheaper.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import sparse as _sparse

from .basis import all_configurations, configs_to_indices, gray_encode
from .hamiltonian import ClockHamiltonian
from .oracle import (StateVector, ground_state, infidelity,
                     magnetization_per_physical_index, state_vector_from_model)
from .sampling import SampleBatch, SamplerConfig, sample_for


class EstimationError(RuntimeError):
    """No usable samples were left to average over."""


@dataclass(frozen=True)
class VmcConfig:
    """Training hyper-parameters; sampler settings ride along."""

    learning_rate: float = 0.02
    n_iterations: int = 300
    schedule_stages: int = 20
    total_time: float = 3.0
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    table_cap: int = 1 << 12  # tabulate log Ψ when the basis fits

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be nonnegative")
        if self.schedule_stages < 1 or self.n_iterations < 1:
            raise ValueError("stage and iteration counts must be positive")


@dataclass
class TraceRow:
    stage: int
    iteration: int
    energy: float
    stderr: float
    acceptance: float
    grad_norm: float
    wallclock_ms: float


@dataclass
class TrainingTrace:
    rows: list[TraceRow] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    skipped_samples: int = 0
    rejected_steps: int = 0
    final_infidelity: float = float("nan")
    wallclock_s: float = 0.0

    @staticmethod
    def csv_columns() -> list[str]:
        return [f.name for f in fields(TraceRow)]


@dataclass
class EnergyEstimate:
    mean: float
    stderr: float
    imag_mean: float
    n_used: int
    n_skipped: int
    degenerate: bool  # single-sample batch: stderr reported as zero


class AdamW:
    """Decoupled-weight-decay Adam on a flat real parameter vector.

    Steps with non-finite gradients are rejected (parameters and moments
    untouched) and counted, so one bad sample cannot poison a run.
    """

    def __init__(self, n_params: int, learning_rate: float,
                 weight_decay: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0
        self.rejected = 0

    @classmethod
    def from_config(cls, n_params: int, config: VmcConfig) -> "AdamW":
        return cls(n_params, config.learning_rate, config.weight_decay,
                   config.beta1, config.beta2, config.epsilon)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(grad)):
            self.rejected += 1
            return params
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        out = params * (1 - self.learning_rate * self.weight_decay)
        return out - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


# ---------------------------------------------------------------------------
# local energies


def local_energies(model, h: ClockHamiltonian, batch: SampleBatch,
                   table: np.ndarray | None = None,
                   h_sparse: _sparse.csr_matrix | None = None):
    """E_loc(σ) = Σ_σ' <σ|H|σ'> Ψ(σ')/Ψ(σ) for every sample.

    Returns (values, valid): samples with zero amplitude are flagged
    invalid rather than aborting the estimate.
    """
    if table is not None:
        psi = np.exp(table - np.max(table.real[np.isfinite(table.real)]))
        psi[~np.isfinite(psi)] = 0.0
        mat = h_sparse if h_sparse is not None else h.to_sparse()
        h_psi = mat @ psi
        idx = batch.indices()
        with np.errstate(divide="ignore", invalid="ignore"):
            values = h_psi[idx] / psi[idx]
        valid = psi[idx] != 0.0
        values = np.where(valid, values, 0.0)
        return values, valid

    values = np.zeros(batch.size, dtype=np.complex128)
    valid = np.isfinite(batch.log_psi.real)
    indices = batch.indices()
    lookup = _index_to_config_cached(h.n_spins)
    for k in range(batch.size):
        if not valid[k]:
            continue
        row = h.row_by_index(int(indices[k]))
        log_t = model.log_psi_batch(lookup[row.indices])
        with np.errstate(over="ignore"):
            ratios = np.exp(log_t - batch.log_psi[k])
        ratios[~np.isfinite(ratios)] = 0.0
        values[k] = np.dot(row.amplitudes, ratios)
    return values, valid


_CONFIG_CACHE: dict[int, np.ndarray] = {}


def _index_to_config_cached(n_spins: int) -> np.ndarray:
    if n_spins not in _CONFIG_CACHE:
        _CONFIG_CACHE[n_spins] = all_configurations(n_spins)
    return _CONFIG_CACHE[n_spins]


def estimate_energy(model, h: ClockHamiltonian, batch: SampleBatch,
                    table: np.ndarray | None = None,
                    h_sparse: _sparse.csr_matrix | None = None) -> EnergyEstimate:
    """Sample mean of Re E_loc with its standard error."""
    values, valid = local_energies(model, h, batch, table, h_sparse)
    return _summarize(values, valid)


def _summarize(values: np.ndarray, valid: np.ndarray) -> EnergyEstimate:
    used = values[valid]
    n = used.size
    if n == 0:
        raise EstimationError("every sample was flagged as zero-amplitude")
    mean = float(used.real.mean())
    degenerate = n == 1
    stderr = 0.0 if degenerate else float(used.real.std(ddof=1) / np.sqrt(n))
    return EnergyEstimate(mean=mean, stderr=stderr,
                          imag_mean=float(used.imag.mean()),
                          n_used=n, n_skipped=int(valid.size - n),
                          degenerate=degenerate)


def estimate_gradient(model, h: ClockHamiltonian, batch: SampleBatch,
                      table: np.ndarray | None = None,
                      h_sparse: _sparse.csr_matrix | None = None):
    """Covariance-form energy gradient over the batch.

    Returns (gradient over real slots, EnergyEstimate).
    """
    values, valid = local_energies(model, h, batch, table, h_sparse)
    est = _summarize(values, valid)
    mean = np.mean(values[valid])
    weights = np.where(valid, np.conj(values - mean), 0.0) / est.n_used
    grad = 2.0 * np.real(model.weighted_parameter_gradient(
        batch.configurations, weights))
    return grad, est


def exhaustive_energy_gradient(model, h: ClockHamiltonian) -> np.ndarray:
    """Gradient of the exact (full-enumeration) variational energy."""
    h.check_dense_cap()
    configs = _index_to_config_cached(h.n_spins)
    log_psi = model.log_psi_batch(configs)
    shift = np.max(log_psi.real[np.isfinite(log_psi.real)])
    psi = np.exp(log_psi - shift)
    psi[~np.isfinite(psi)] = 0.0
    p = np.abs(psi) ** 2
    p /= p.sum()
    h_psi = h.to_sparse() @ psi
    with np.errstate(divide="ignore", invalid="ignore"):
        e_loc = np.where(psi != 0.0, h_psi / np.where(psi != 0.0, psi, 1.0), 0.0)
    energy = np.dot(p, e_loc)
    weights = p * np.conj(e_loc - energy)
    return 2.0 * np.real(model.weighted_parameter_gradient(configs, weights))


# ---------------------------------------------------------------------------
# training loops


def _stage_hamiltonian(h_full: ClockHamiltonian, stage: int,
                       n_stages: int) -> ClockHamiltonian:
    t_k = h_full.total_time * stage / n_stages
    return ClockHamiltonian(h_full.tfim, h_full.n_steps, t_k, h_full.dense_cap)


def train_vmc(model, h_full: ClockHamiltonian, config: VmcConfig,
              seed: int = 0) -> tuple[object, TrainingTrace]:
    """Energy minimization with the clock turned on adiabatically.

    Stage k of ``schedule_stages`` trains on the Hamiltonian rebuilt with
    total time k·T/stages (same step count, growing dt), warm-starting
    from the previous stage.  Returns the trained model and the trace,
    including the final infidelity against the full-time exact ground
    state when the dense cap allows it.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    trace = TrainingTrace()
    opt = AdamW.from_config(model.parameter_count, config)
    params = model.get_parameters()
    use_table = h_full.dim <= config.table_cap
    configs_all = _index_to_config_cached(h_full.n_spins) if use_table else None

    for stage in range(1, config.schedule_stages + 1):
        h_k = _stage_hamiltonian(h_full, stage, config.schedule_stages)
        h_sp = h_k.to_sparse() if use_table else None
        stage_first = stage_last = None
        for it in range(1, config.n_iterations + 1):
            it_start = time.perf_counter()
            sampler_seed = int(rng.integers(0, 2 ** 63))
            table = model.log_psi_batch(configs_all) if use_table else None
            batch = sample_for(model, config.sampler, seed=sampler_seed,
                               log_psi_table=table)
            grad, est = estimate_gradient(model, h_k, batch, table, h_sp)
            trace.skipped_samples += est.n_skipped
            before = opt.rejected
            params = opt.step(params, grad)
            if opt.rejected > before:
                trace.events.append(f"stage {stage} iter {it}: non-finite "
                                    "gradient, step rejected")
            model.set_parameters(params)
            grad_norm = float(np.linalg.norm(grad)) if np.all(np.isfinite(grad)) else float("inf")
            trace.rows.append(TraceRow(
                stage=stage, iteration=it, energy=est.mean, stderr=est.stderr,
                acceptance=batch.acceptance_rate, grad_norm=grad_norm,
                wallclock_ms=(time.perf_counter() - it_start) * 1e3))
            stage_last = est.mean
            if stage_first is None:
                stage_first = est.mean
        if stage_first is not None and stage_last >= stage_first and config.n_iterations > 1:
            trace.events.append(f"stage {stage}: energy did not decrease "
                                f"({stage_first:.6g} -> {stage_last:.6g})")
    trace.rejected_steps = opt.rejected
    trace.final_infidelity = _final_infidelity(model, h_full)
    trace.wallclock_s = time.perf_counter() - t0
    return model, trace


def _final_infidelity(model, h_full: ClockHamiltonian) -> float:
    if h_full.dim > h_full.dense_cap:
        return float("nan")
    _, gs = ground_state(h_full)
    state = state_vector_from_model(model, h_full.n_physical, h_full.n_clock)
    return infidelity(state, gs)


def infidelity_and_gradient(model, target: StateVector):
    """Full-basis infidelity 1 - |<Φ|Ψ>|²/<Ψ|Ψ> and its exact gradient."""
    n_spins = target.n_physical + target.n_clock
    configs = _index_to_config_cached(n_spins)
    phi = target.normalized().amplitudes
    log_psi = model.log_psi_batch(configs)
    finite = np.isfinite(log_psi.real)
    if not finite.any():
        raise EstimationError("model evaluates to zero everywhere")
    shift = np.max(log_psi.real[finite])
    psi = np.exp(log_psi - shift)
    psi[~np.isfinite(psi)] = 0.0
    z = float(np.sum(np.abs(psi) ** 2))
    overlap = np.vdot(phi, psi)  # Σ conj(φ) ψ
    fidelity = abs(overlap) ** 2 / z
    s_d = model.weighted_parameter_gradient(configs, np.conj(phi) * psi)
    q = model.weighted_parameter_gradient(configs, (np.abs(psi) ** 2) / z)
    grad = -(2.0 * np.real(np.conj(overlap) * s_d) / z
             - fidelity * 2.0 * np.real(q))
    return float(1.0 - fidelity), grad


def train_infidelity(model, target: StateVector, config: VmcConfig,
                     n_iterations: int | None = None) -> tuple[object, TrainingTrace]:
    """AdamW descent on the exact infidelity against a fixed target state.

    Full-basis enumeration per step; the trace's energy column records the
    infidelity (no sampling is involved, so stderr is zero and the
    acceptance column is fixed at one).
    """
    t0 = time.perf_counter()
    steps = config.n_iterations if n_iterations is None else n_iterations
    trace = TrainingTrace()
    opt = AdamW.from_config(model.parameter_count, config)
    params = model.get_parameters()
    loss = float("nan")
    for it in range(1, steps + 1):
        it_start = time.perf_counter()
        loss, grad = infidelity_and_gradient(model, target)
        before = opt.rejected
        params = opt.step(params, grad)
        if opt.rejected > before:
            trace.events.append(f"iter {it}: non-finite gradient, step rejected")
        model.set_parameters(params)
        trace.rows.append(TraceRow(
            stage=1, iteration=it, energy=loss, stderr=0.0, acceptance=1.0,
            grad_norm=float(np.linalg.norm(grad)),
            wallclock_ms=(time.perf_counter() - it_start) * 1e3))
    trace.rejected_steps = opt.rejected
    trace.final_infidelity = infidelity_and_gradient(model, target)[0]
    trace.wallclock_s = time.perf_counter() - t0
    return model, trace


def train_infidelity_staged(model, h_full: ClockHamiltonian, config: VmcConfig,
                            use_history_target: bool = True) -> tuple[object, TrainingTrace]:
    """Infidelity minimization with the clock turned on adiabatically: the
    target at stage k is the exact ground state of the Hamiltonian with
    total time k·T/stages."""
    from .oracle import build_history_state

    t0 = time.perf_counter()
    trace = TrainingTrace()
    for stage in range(1, config.schedule_stages + 1):
        h_k = _stage_hamiltonian(h_full, stage, config.schedule_stages)
        target = (build_history_state(h_k) if use_history_target
                  else ground_state(h_k)[1])
        model, stage_trace = train_infidelity(model, target, config)
        for row in stage_trace.rows:
            row.stage = stage
            trace.rows.append(row)
        trace.events.extend(f"stage {stage}: {e}" for e in stage_trace.events)
        trace.rejected_steps += stage_trace.rejected_steps
    _, gs = ground_state(h_full)
    state = state_vector_from_model(model, h_full.n_physical, h_full.n_clock)
    trace.final_infidelity = infidelity(state, gs)
    trace.wallclock_s = time.perf_counter() - t0
    return model, trace


# ---------------------------------------------------------------------------
# observables


def magnetization_physical_diagonal(n_physical: int) -> np.ndarray:
    return magnetization_per_physical_index(n_physical)


def estimate_observable(model, h: ClockHamiltonian, t: int, batch: SampleBatch,
                        diagonal: np.ndarray | None = None,
                        table: np.ndarray | None = None):
    """Time-projected estimate (N+1) <Σ_σ' <σ|(Ô⊗|t><t|)|σ'> Ψ(σ')/Ψ(σ)>.

    ``diagonal`` holds Ô's diagonal over physical indices (default: average
    magnetization).  The projector makes the summand vanish unless the
    sample's clock reads t, so per sample the value is
    (N+1)·[clock(σ) = t]·Ô(phys(σ)).  Values above the naive operator
    bound are expected whenever the model puts more than 1/(N+1) of its
    mass on clock value t.  Returns (mean, stderr).
    """
    if not 0 <= t <= h.n_steps:
        raise ValueError(f"time index {t} out of range")
    if diagonal is None:
        diagonal = magnetization_per_physical_index(h.n_physical)
    idx = batch.indices()
    word = gray_encode(t, h.n_clock)
    clock_mask = (idx & ((1 << h.n_clock) - 1)) == word
    phys = idx >> h.n_clock
    values = (h.n_steps + 1) * clock_mask * diagonal[phys]
    n = values.size
    if n == 0:
        raise EstimationError("empty batch")
    mean = float(values.mean())
    stderr = 0.0 if n == 1 else float(values.std(ddof=1) / np.sqrt(n))
    return mean, stderr


def exact_variational_observable(state: StateVector, h: ClockHamiltonian, t: int,
                                 diagonal: np.ndarray | None = None) -> float:
    """(N+1) <Ψ|Ô⊗|t><t||Ψ>/<Ψ|Ψ> for a diagonal physical observable."""
    if diagonal is None:
        diagonal = magnetization_per_physical_index(h.n_physical)
    word = gray_encode(t, h.n_clock)
    amps = state.amplitudes.reshape(1 << h.n_physical, 1 << h.n_clock)[:, word]
    z = float(np.sum(np.abs(state.amplitudes) ** 2))
    if z == 0.0:
        raise EstimationError("zero state")
    return (h.n_steps + 1) * float(np.dot(np.abs(amps) ** 2, diagonal)) / z
