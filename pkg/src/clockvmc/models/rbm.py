"""Restricted-Boltzmann-machine wave functions.

Two flavors:

* :class:`Rbm` — complex parameters, log Ψ = a·σ + Σ_ℓ log(2 cosh(b_ℓ + W_ℓ·σ)).
* :class:`MpRbm` — modulus/phase pair of real-parameter RBMs combined as
  log Ψ = V_mod(σ) + i V_phase(σ), where V is the *value* of the RBM
  product form evaluated with real parameters (so V > 0 and the log
  amplitude carries a large constant offset; only differences matter).
"""

from __future__ import annotations

import numpy as np


def log2cosh(z: np.ndarray) -> np.ndarray:
    """log(2 cosh z), overflow-free for large |Re z|, complex-safe.

    Uses e^z + e^-z = e^{sz}(1 + e^{-2sz}) with s = sign(Re z), so the
    exponent argument never has a positive real part.
    """
    z = np.asarray(z)
    s = np.where(z.real >= 0, 1.0, -1.0)
    sz = s * z
    with np.errstate(divide="ignore", invalid="ignore"):
        return sz + np.log(1.0 + np.exp(-2.0 * sz))


class Rbm:
    """Complex-parameter RBM ansatz.

    Parameter view layout (real slots):
    [Re a, Im a, Re b, Im b, Re W (row-major), Im W].
    """

    kind = "rbm"

    def __init__(self, n_spins: int, n_hidden: int):
        if n_spins < 1 or n_hidden < 1:
            raise ValueError("need at least one visible and one hidden unit")
        self.n_spins = n_spins
        self.n_hidden = n_hidden
        self.a = np.zeros(n_spins, dtype=np.complex128)
        self.b = np.zeros(n_hidden, dtype=np.complex128)
        self.w = np.zeros((n_hidden, n_spins), dtype=np.complex128)
        self.seed = None

    @property
    def dims(self) -> dict:
        return {"n_spins": self.n_spins, "alpha": self.n_hidden // self.n_spins}

    @property
    def parameter_count(self) -> int:
        return 2 * (self.n_spins + self.n_hidden + self.n_hidden * self.n_spins)

    def get_parameters(self) -> np.ndarray:
        return np.concatenate([
            self.a.real, self.a.imag,
            self.b.real, self.b.imag,
            self.w.real.ravel(), self.w.imag.ravel(),
        ])

    def set_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.parameter_count,):
            raise ValueError("parameter vector has the wrong length")
        nv, nh = self.n_spins, self.n_hidden
        pos = 0

        def take(n):
            nonlocal pos
            out = flat[pos:pos + n]
            pos += n
            return out

        self.a = take(nv) + 1j * take(nv)
        self.b = take(nh) + 1j * take(nh)
        self.w = (take(nh * nv) + 1j * take(nh * nv)).reshape(nh, nv)

    def _preactivations(self, configs: np.ndarray) -> np.ndarray:
        sigma = np.asarray(configs, dtype=np.float64)
        return self.b[None, :] + sigma @ self.w.T

    def log_psi_batch(self, configs: np.ndarray) -> np.ndarray:
        sigma = np.atleast_2d(np.asarray(configs, dtype=np.float64))
        phi = self._preactivations(sigma)
        return sigma @ self.a + log2cosh(phi).sum(axis=1)

    def log_psi(self, config: np.ndarray) -> complex:
        return complex(self.log_psi_batch(np.atleast_2d(config))[0])

    def _holomorphic_blocks(self, configs: np.ndarray):
        """Per-sample holomorphic derivatives (O_a, O_b, O_W building blocks)."""
        sigma = np.atleast_2d(np.asarray(configs, dtype=np.float64))
        tanh = np.tanh(self._preactivations(sigma))
        return sigma, tanh

    def log_derivatives_batch(self, configs: np.ndarray) -> np.ndarray:
        sigma, tanh = self._holomorphic_blocks(configs)
        batch = sigma.shape[0]
        o_w = (tanh[:, :, None] * sigma[:, None, :]).reshape(batch, -1)
        blocks = [sigma, 1j * sigma, tanh, 1j * tanh, o_w, 1j * o_w]
        return np.concatenate(blocks, axis=1).astype(np.complex128)

    def log_derivatives(self, config: np.ndarray) -> np.ndarray:
        return self.log_derivatives_batch(np.atleast_2d(config))[0]

    def weighted_parameter_gradient(self, configs: np.ndarray,
                                    weights: np.ndarray) -> np.ndarray:
        sigma, tanh = self._holomorphic_blocks(configs)
        w = np.asarray(weights, dtype=np.complex128)
        g_a = sigma.T @ w
        g_b = tanh.T @ w
        g_w = (tanh * w[:, None]).T @ sigma
        return np.concatenate([
            g_a, 1j * g_a, g_b, 1j * g_b, g_w.ravel(), 1j * g_w.ravel(),
        ])


class _RealRbmHalf:
    """One real-parameter RBM used as modulus or phase inside MpRbm."""

    __slots__ = ("a", "b", "w")

    def __init__(self, n_spins: int, n_hidden: int):
        self.a = np.zeros(n_spins)
        self.b = np.zeros(n_hidden)
        self.w = np.zeros((n_hidden, n_spins))

    def log_value(self, sigma: np.ndarray) -> np.ndarray:
        """log of the (positive) RBM product form, batched."""
        phi = self.b[None, :] + sigma @ self.w.T
        return sigma @ self.a + log2cosh(phi).sum(axis=1)

    def tanh_phi(self, sigma: np.ndarray) -> np.ndarray:
        return np.tanh(self.b[None, :] + sigma @ self.w.T)


class MpRbm:
    """Modulus/phase RBM pair, log Ψ = V_mod + i V_phase with V = exp(log_value).

    Parameter view layout: [a, b, W] of the modulus network followed by
    [a, b, W] of the phase network, all real.
    """

    kind = "mp-rbm"

    def __init__(self, n_spins: int, n_hidden: int):
        if n_spins < 1 or n_hidden < 1:
            raise ValueError("need at least one visible and one hidden unit")
        self.n_spins = n_spins
        self.n_hidden = n_hidden
        self.modulus = _RealRbmHalf(n_spins, n_hidden)
        self.phase = _RealRbmHalf(n_spins, n_hidden)
        self.seed = None

    @property
    def dims(self) -> dict:
        return {"n_spins": self.n_spins, "alpha": self.n_hidden // self.n_spins}

    @property
    def _half_count(self) -> int:
        return self.n_spins + self.n_hidden + self.n_hidden * self.n_spins

    @property
    def parameter_count(self) -> int:
        return 2 * self._half_count

    def get_parameters(self) -> np.ndarray:
        return np.concatenate([
            self.modulus.a, self.modulus.b, self.modulus.w.ravel(),
            self.phase.a, self.phase.b, self.phase.w.ravel(),
        ])

    def set_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.parameter_count,):
            raise ValueError("parameter vector has the wrong length")
        nv, nh = self.n_spins, self.n_hidden
        pos = 0

        def take(n):
            nonlocal pos
            out = flat[pos:pos + n]
            pos += n
            return out

        for half in (self.modulus, self.phase):
            half.a = take(nv).copy()
            half.b = take(nh).copy()
            half.w = take(nh * nv).reshape(nh, nv).copy()

    def _values(self, configs: np.ndarray):
        sigma = np.atleast_2d(np.asarray(configs, dtype=np.float64))
        v_mod = np.exp(self.modulus.log_value(sigma))
        v_phase = np.exp(self.phase.log_value(sigma))
        return sigma, v_mod, v_phase

    def log_psi_batch(self, configs: np.ndarray) -> np.ndarray:
        _, v_mod, v_phase = self._values(configs)
        return v_mod + 1j * v_phase

    def log_psi(self, config: np.ndarray) -> complex:
        return complex(self.log_psi_batch(np.atleast_2d(config))[0])

    def _half_derivative_blocks(self, half: _RealRbmHalf, sigma: np.ndarray,
                                value: np.ndarray, scale: complex):
        """Blocks of scale * value_b * O_k(σ_b) for one network half."""
        tanh = half.tanh_phi(sigma)
        coeff = scale * value
        d_a = coeff[:, None] * sigma
        d_b = coeff[:, None] * tanh
        d_w = (coeff[:, None, None] * tanh[:, :, None] * sigma[:, None, :])
        return d_a, d_b, d_w.reshape(sigma.shape[0], -1)

    def log_derivatives_batch(self, configs: np.ndarray) -> np.ndarray:
        sigma, v_mod, v_phase = self._values(configs)
        mod_blocks = self._half_derivative_blocks(self.modulus, sigma, v_mod, 1.0)
        ph_blocks = self._half_derivative_blocks(self.phase, sigma, v_phase, 1j)
        return np.concatenate(mod_blocks + ph_blocks, axis=1).astype(np.complex128)

    def log_derivatives(self, config: np.ndarray) -> np.ndarray:
        return self.log_derivatives_batch(np.atleast_2d(config))[0]

    def weighted_parameter_gradient(self, configs: np.ndarray,
                                    weights: np.ndarray) -> np.ndarray:
        sigma, v_mod, v_phase = self._values(configs)
        w = np.asarray(weights, dtype=np.complex128)
        out = []
        for half, value, scale in ((self.modulus, v_mod, 1.0),
                                   (self.phase, v_phase, 1j)):
            tanh = half.tanh_phi(sigma)
            coeff = scale * value * w
            g_a = sigma.T @ coeff
            g_b = tanh.T @ coeff
            g_w = (tanh * coeff[:, None]).T @ sigma
            out.extend([g_a, g_b, g_w.ravel()])
        return np.concatenate(out)
