"""Hyper-parameter search: a tree-structured Parzen estimator over the
declared priors, with plain random search as a degenerate special case.

The estimator splits completed trials at the 0.25 objective quantile,
fits one-dimensional Parzen models (Gaussian kernels for continuous and
log-scale dimensions, re-weighted counts for categorical ones) to the
good and bad sets, draws candidates from the good model, and returns the
candidate with the best good-to-bad density ratio.  The objective is the
trial's final estimated energy; ground-truth infidelity is recorded as a
diagnostic but never read during suggestion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

# ---------------------------------------------------------------------------
# search-space dimensions


@dataclass(frozen=True)
class UniformInt:
    """Uniform integer prior on [low, high], Parzen-fitted in linear space."""

    name: str
    low: int
    high: int

    def sample_prior(self, rng: np.random.Generator):
        return int(rng.integers(self.low, self.high + 1))

    def to_internal(self, value) -> float:
        return float(value)

    def from_internal(self, x: float):
        return int(np.clip(round(x), self.low, self.high))

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.low), float(self.high)


@dataclass(frozen=True)
class LogUniform:
    """Log-uniform prior on [low, high], Parzen-fitted in log10 space."""

    name: str
    low: float
    high: float

    def sample_prior(self, rng: np.random.Generator):
        return float(10.0 ** rng.uniform(math.log10(self.low), math.log10(self.high)))

    def to_internal(self, value) -> float:
        return math.log10(value)

    def from_internal(self, x: float):
        lo, hi = self.bounds
        return float(10.0 ** np.clip(x, lo, hi))

    @property
    def bounds(self) -> tuple[float, float]:
        return math.log10(self.low), math.log10(self.high)


@dataclass(frozen=True)
class Categorical:
    """Uniform prior over an explicit finite support."""

    name: str
    choices: tuple

    def sample_prior(self, rng: np.random.Generator):
        return self.choices[int(rng.integers(len(self.choices)))]


@dataclass(frozen=True)
class SearchSpace:
    dimensions: tuple

    def names(self) -> list[str]:
        return [d.name for d in self.dimensions]

    def sample_prior(self, rng: np.random.Generator) -> dict:
        return {d.name: d.sample_prior(rng) for d in self.dimensions}


def rbm_search_space() -> SearchSpace:
    return SearchSpace((
        UniformInt("n_samples", 256, 2048),
        LogUniform("learning_rate", 1e-4, 1.0),
        Categorical("n_chains", (4, 8, 16)),
        Categorical("alpha", (1, 2, 3, 4, 5)),
    ))


def ar_search_space() -> SearchSpace:
    return SearchSpace((
        UniformInt("n_samples", 256, 2048),
        LogUniform("learning_rate", 1e-4, 1.0),
        Categorical("n_layers", (1, 2, 3)),
        Categorical("n_hidden", (2, 4, 8, 16, 32)),
    ))


def search_space_for(kind: str) -> SearchSpace:
    return rbm_search_space() if kind in ("rbm", "mp-rbm") else ar_search_space()


# ---------------------------------------------------------------------------
# trials and studies


@dataclass
class Trial:
    trial_id: int
    params: dict
    objective: float | None
    infidelity: float | None
    seed: int
    status: str  # "completed" | "failed" | "running"
    error: str | None = None

    def to_record(self) -> dict:
        rec = {
            "trial_id": self.trial_id,
            "params": self.params,
            "objective": self.objective,
            "infidelity": self.infidelity,
            "seed": self.seed,
            "status": self.status,
        }
        if self.error:
            rec["error"] = self.error
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Trial":
        return cls(rec["trial_id"], rec["params"], rec.get("objective"),
                   rec.get("infidelity"), rec["seed"], rec["status"],
                   rec.get("error"))


@dataclass
class StudyRecord:
    trials: list[Trial] = field(default_factory=list)

    def completed(self) -> list[Trial]:
        return [t for t in self.trials
                if t.status == "completed" and t.objective is not None
                and math.isfinite(t.objective)]

    def running(self) -> list[Trial]:
        return [t for t in self.trials if t.status == "running"]

    def best(self, k: int = 10) -> list[Trial]:
        """k lowest-objective completed trials, ascending; fewer than k
        completed returns everything (callers may warn)."""
        done = sorted(self.completed(), key=lambda t: t.objective)
        return done[:k]


best_k = StudyRecord.best


# ---------------------------------------------------------------------------
# the Parzen machinery


@dataclass(frozen=True)
class TpeConfig:
    """Declared defaults; none of these constants comes from physics."""

    n_startup: int = 10
    gamma: float = 0.25
    n_candidates: int = 24
    enabled: bool = True


class _ParzenContinuous:
    """1-D Gaussian mixture over observed points plus one prior component.

    Bandwidths follow the adjacent-point heuristic: each component is as
    wide as the larger gap to its sorted neighbors (domain edges for the
    extremes), clipped to [range/min(100, 1+n), range].  Components are
    truncated to the domain.
    """

    def __init__(self, points: np.ndarray, bounds: tuple[float, float]):
        lo, hi = bounds
        span = hi - lo if hi > lo else 1.0
        pts = np.sort(np.asarray(points, dtype=float))
        n = pts.size
        centers = np.concatenate([pts, [(lo + hi) / 2.0]])
        if n:
            padded = np.concatenate([[lo], pts, [hi]])
            gaps = np.maximum(padded[1:-1] - padded[:-2], padded[2:] - padded[1:-1])
            sig_min = span / min(100.0, 1.0 + n)
            sigmas = np.concatenate([np.clip(gaps, sig_min, span), [span]])
        else:
            sigmas = np.array([span])
        self.lo, self.hi = lo, hi
        self.centers = centers
        self.sigmas = sigmas
        self.cdf_lo = special.ndtr((lo - centers) / sigmas)
        self.cdf_hi = special.ndtr((hi - centers) / sigmas)
        self.mass = np.maximum(self.cdf_hi - self.cdf_lo, 1e-300)

    def sample(self, rng: np.random.Generator) -> float:
        k = int(rng.integers(self.centers.size))
        u = rng.uniform(self.cdf_lo[k], self.cdf_hi[k])
        x = self.centers[k] + self.sigmas[k] * special.ndtri(u)
        return float(np.clip(x, self.lo, self.hi))

    def log_pdf(self, x: float) -> float:
        z = (x - self.centers) / self.sigmas
        dens = np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * self.sigmas * self.mass)
        return float(np.log(max(dens.mean(), 1e-300)))


class _ParzenCategorical:
    """Counts re-weighted with one pseudo-observation per choice."""

    def __init__(self, values: list, choices: tuple):
        counts = np.array([1.0 + sum(v == c for v in values) for c in choices])
        self.choices = choices
        self.probs = counts / counts.sum()

    def sample(self, rng: np.random.Generator):
        return self.choices[int(rng.choice(len(self.choices), p=self.probs))]

    def log_pdf(self, value) -> float:
        return float(np.log(self.probs[self.choices.index(value)]))


def _fit_dimension(dim, values: list):
    if isinstance(dim, Categorical):
        return _ParzenCategorical(values, dim.choices)
    internal = np.array([dim.to_internal(v) for v in values])
    return _ParzenContinuous(internal, dim.bounds)


def suggest(study: StudyRecord, space: SearchSpace, rng: np.random.Generator,
            tpe: TpeConfig | None = None) -> dict:
    """Next hyper-parameter assignment.

    The first ``n_startup`` trials (and everything, when TPE is disabled)
    sample the raw priors.  Pending trials are imputed at the running
    median objective (constant liar) so concurrent suggestion never stalls.
    """
    tpe = tpe or TpeConfig()
    done = study.completed()
    pool = [(t.params, t.objective) for t in done]
    if done:
        median = float(np.median([t.objective for t in done]))
        pool += [(t.params, median) for t in study.running()]
    if not tpe.enabled or len(pool) < tpe.n_startup:
        return space.sample_prior(rng)

    pool.sort(key=lambda pair: pair[1])
    n_good = max(1, math.ceil(tpe.gamma * len(pool)))
    good = [p for p, _ in pool[:n_good]]
    bad = [p for p, _ in pool[n_good:]] or good

    best_params, best_score = None, -np.inf
    models = [( _fit_dimension(d, [p[d.name] for p in good]),
                _fit_dimension(d, [p[d.name] for p in bad]) )
              for d in space.dimensions]
    for _ in range(tpe.n_candidates):
        candidate = {}
        score = 0.0
        for dim, (l_model, g_model) in zip(space.dimensions, models):
            if isinstance(dim, Categorical):
                value = l_model.sample(rng)
                score += l_model.log_pdf(value) - g_model.log_pdf(value)
            else:
                x = l_model.sample(rng)
                score += l_model.log_pdf(x) - g_model.log_pdf(x)
                value = dim.from_internal(x)
            candidate[dim.name] = value
        if score > best_score:
            best_params, best_score = candidate, score
    return best_params


def run_study(objective_fn, space: SearchSpace, n_trials: int = 100,
              seed: int = 0, tpe: TpeConfig | None = None,
              ledger=None, study: StudyRecord | None = None) -> StudyRecord:
    """Sequential study of ``n_trials`` total trials.

    ``objective_fn(params, trial_seed)`` returns (objective, diagnostics);
    a diagnostics dict may carry ``infidelity``.  Failed trials are
    recorded and excluded from the Parzen fits.  ``ledger`` (optional) is
    called with each finished Trial for persistence; passing a partially
    filled ``study`` resumes at its recorded trial count.  Identical seeds
    give identical studies.
    """
    study = study if study is not None else StudyRecord()
    for i in range(len(study.trials), n_trials):
        trial_ss = np.random.SeedSequence(seed, spawn_key=(i,))
        rng = np.random.default_rng(trial_ss)
        params = suggest(study, space, rng, tpe)
        trial_seed = int(rng.integers(0, 2 ** 63))
        trial = Trial(trial_id=i, params=params, objective=None,
                      infidelity=None, seed=trial_seed, status="running")
        study.trials.append(trial)
        try:
            objective, diagnostics = objective_fn(params, trial_seed)
            trial.objective = float(objective)
            trial.infidelity = diagnostics.get("infidelity") if diagnostics else None
            trial.status = "completed" if math.isfinite(trial.objective) else "failed"
        except Exception as exc:  # noqa: BLE001 - a trial may die for any reason
            trial.status = "failed"
            trial.infidelity = None
            trial.objective = None
            trial.params = dict(params)
            trial.error = str(exc)
        if ledger is not None:
            ledger(trial)
    return study
