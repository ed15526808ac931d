"""Neural-quantum-state ansätze with analytic log-derivatives.

Every model exposes the same surface:

* ``log_psi_batch(configs)`` — complex log-amplitudes, one per row.
* ``log_derivatives_batch(configs)`` — matrix of ∂ log Ψ / ∂θ_s, one row
  per configuration and one column per *real* parameter slot (complex
  parameters occupy a real slot and an imaginary slot).
* ``weighted_parameter_gradient(configs, weights)`` — Σ_b w_b ∂logΨ(σ_b)/∂θ_s
  without materializing the full derivative matrix.
* ``get_parameters()`` / ``set_parameters()`` — the flat real parameter
  view used by the optimizer; flatten/unflatten round-trips exactly.
"""

from __future__ import annotations

import json

import numpy as np

from .autoregressive import ArJoint, ArSplit
from .rbm import MpRbm, Rbm

MODEL_KINDS = ("rbm", "mp-rbm", "ar", "ar-split")

INIT_STDDEV = 0.01


def init_parameters(kind: str, dims: dict, seed: int):
    """Build a model of the given kind with i.i.d. N(0, 0.01^2) parameters.

    ``dims`` carries the architecture: ``n_spins`` always; ``alpha``
    (hidden-unit ratio) for the RBM family; ``n_layers`` and ``n_hidden``
    for the autoregressive family.
    """
    rng = np.random.default_rng(seed)
    n_spins = int(dims["n_spins"])
    if kind in ("rbm", "mp-rbm"):
        alpha = int(dims.get("alpha", 1))
        if alpha < 1:
            raise ValueError("hidden-unit ratio must be a positive integer")
        n_hidden = alpha * n_spins
        cls = Rbm if kind == "rbm" else MpRbm
        model = cls(n_spins, n_hidden)
    elif kind in ("ar", "ar-split"):
        n_layers = int(dims.get("n_layers", 1))
        n_hidden = int(dims.get("n_hidden", 2 * n_spins))
        cls = ArJoint if kind == "ar" else ArSplit
        model = cls(n_spins, n_layers, n_hidden)
    else:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    flat = rng.normal(0.0, INIT_STDDEV, size=model.parameter_count)
    model.set_parameters(flat)
    model.seed = seed
    return model


def to_checkpoint(model) -> dict:
    """JSON-ready snapshot; parameters round-trip bit-exactly (repr floats)."""
    return {
        "kind": model.kind,
        "dims": model.dims,
        "seed": getattr(model, "seed", None),
        "parameters": model.get_parameters().tolist(),
    }


def from_checkpoint(data: dict):
    model = init_parameters(data["kind"], data["dims"], data.get("seed") or 0)
    params = np.asarray(data["parameters"], dtype=np.float64)
    model.set_parameters(params)
    model.seed = data.get("seed")
    return model


def save_checkpoint(path, model) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_checkpoint(model), fh)
        fh.write("\n")


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        return from_checkpoint(json.load(fh))


__all__ = [
    "Rbm",
    "MpRbm",
    "ArJoint",
    "ArSplit",
    "MODEL_KINDS",
    "INIT_STDDEV",
    "init_parameters",
    "to_checkpoint",
    "from_checkpoint",
    "save_checkpoint",
    "load_checkpoint",
]
