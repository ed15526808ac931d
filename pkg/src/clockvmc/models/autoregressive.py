"""Autoregressive wave functions built from masked feed-forward networks.

The network maps a full spin configuration to two output units per spin;
masking guarantees the pair for spin i depends only on spins 1..i-1, so a
single forward pass evaluates every conditional at once (teacher forcing)
and ancestral sampling is exact.  Per spin the two outputs are normalized
to a unit two-component amplitude, making the full wave function exactly
normalized over the basis.

Two variants:

* :class:`ArJoint` — one complex-parameter network; the raw outputs are
  divided by the root of their summed squared moduli (Born-rule
  normalization).  Not holomorphic, so gradients track the Wirtinger pair.
* :class:`ArSplit` — separate real-parameter networks for modulus and
  phase; modulus outputs are normalized in square through an exponential
  map, phase outputs enter as pure phases.
"""

from __future__ import annotations

import numpy as np

NEG_INF_LOG_PSI = complex(-np.inf, 0.0)


def _hidden_degrees(n_inputs: int, n_hidden: int) -> np.ndarray:
    # Degrees cycle over 1..n_inputs-1: a hidden unit of degree m may see
    # inputs 1..m and may feed conditionals for spins > m.
    span = max(n_inputs - 1, 1)
    return (np.arange(n_hidden) % span) + 1


class MaskedNet:
    """Feed-forward net with autoregressive masks, tanh hidden layers, and
    hand-rolled forward/backward passes (real or complex parameters)."""

    def __init__(self, n_inputs: int, n_layers: int, n_hidden: int,
                 complex_params: bool):
        if n_inputs < 1 or n_layers < 1 or n_hidden < 1:
            raise ValueError("network dimensions must be positive")
        self.n_inputs = n_inputs
        self.n_layers = n_layers
        self.n_hidden = n_hidden
        self.complex_params = complex_params
        dtype = np.complex128 if complex_params else np.float64

        in_orders = np.arange(1, n_inputs + 1)
        deg = _hidden_degrees(n_inputs, n_hidden)
        out_spin = np.repeat(np.arange(1, n_inputs + 1), 2)

        self.masks: list[np.ndarray] = []
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        prev_orders, prev_dim = in_orders, n_inputs
        for _ in range(n_layers):
            mask = (deg[:, None] >= prev_orders[None, :]).astype(np.float64)
            self.masks.append(mask)
            self.weights.append(np.zeros((n_hidden, prev_dim), dtype=dtype))
            self.biases.append(np.zeros(n_hidden, dtype=dtype))
            prev_orders, prev_dim = deg, n_hidden
        out_mask = (out_spin[:, None] - 1 >= prev_orders[None, :]).astype(np.float64)
        self.masks.append(out_mask)
        self.weights.append(np.zeros((2 * n_inputs, prev_dim), dtype=dtype))
        self.biases.append(np.zeros(2 * n_inputs, dtype=dtype))

    # -- parameter view ------------------------------------------------

    @property
    def parameter_count(self) -> int:
        per = sum(w.size + b.size for w, b in zip(self.weights, self.biases))
        return 2 * per if self.complex_params else per

    def get_parameters(self) -> np.ndarray:
        blocks = []
        for w, b in zip(self.weights, self.biases):
            if self.complex_params:
                blocks += [w.real.ravel(), w.imag.ravel(), b.real, b.imag]
            else:
                blocks += [w.ravel(), b]
        return np.concatenate(blocks)

    def set_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.parameter_count,):
            raise ValueError("parameter vector has the wrong length")
        pos = 0

        def take(n):
            nonlocal pos
            out = flat[pos:pos + n]
            pos += n
            return out

        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if self.complex_params:
                wre = take(w.size).reshape(w.shape)
                wim = take(w.size).reshape(w.shape)
                self.weights[i] = wre + 1j * wim
                self.biases[i] = take(b.size) + 1j * take(b.size)
            else:
                self.weights[i] = take(w.size).reshape(w.shape).copy()
                self.biases[i] = take(b.size).copy()

    # -- forward / backward --------------------------------------------

    def forward(self, configs: np.ndarray):
        """Outputs (batch, n_inputs, 2) plus the activation cache."""
        x = np.atleast_2d(np.asarray(configs, dtype=np.float64))
        if self.complex_params:
            x = x.astype(np.complex128)
        acts = [x]
        for w, b, m in zip(self.weights[:-1], self.biases[:-1], self.masks[:-1]):
            x = np.tanh(x @ (w * m).T + b)
            acts.append(x)
        out = x @ (self.weights[-1] * self.masks[-1]).T + self.biases[-1]
        return out.reshape(len(x), self.n_inputs, 2), acts

    def backward(self, acts: list[np.ndarray], seed: np.ndarray,
                 per_sample: bool = False) -> list[tuple[np.ndarray, np.ndarray]]:
        """Accumulate Σ_b seed_b·∂out_b/∂θ (or per-sample rows of it).

        ``seed`` has shape (batch, n_inputs, 2) and may be complex even for
        real-parameter nets.  No conjugation happens anywhere: for complex
        parameters this is the holomorphic derivative of the outputs.
        """
        g = seed.reshape(seed.shape[0], -1)
        grads: list[tuple[np.ndarray, np.ndarray]] = []
        for layer in range(self.n_layers, -1, -1):
            z_in = acts[layer]
            mask = self.masks[layer]
            if per_sample:
                g_w = np.einsum("bo,bi->boi", g, z_in) * mask[None, :, :]
                g_b = g
            else:
                g_w = (g.T @ z_in) * mask
                g_b = g.sum(axis=0)
            grads.append((g_w, g_b))
            if layer > 0:
                g = g @ (self.weights[layer] * mask)
                g = g * (1.0 - acts[layer] ** 2)  # tanh'
        grads.reverse()
        return grads


def _flatten_complex_grads(x_parts, y_parts, per_sample: bool) -> np.ndarray:
    """Interleave d/d(Re θ) and d/d(Im θ) blocks in the parameter layout."""
    blocks = []
    axis = 1 if per_sample else 0
    for (gw_x, gb_x), (gw_y, gb_y) in zip(x_parts, y_parts):
        if per_sample:
            b = gw_x.shape[0]
            blocks += [gw_x.reshape(b, -1), gw_y.reshape(b, -1), gb_x, gb_y]
        else:
            blocks += [gw_x.ravel(), gw_y.ravel(), gb_x, gb_y]
    return np.concatenate(blocks, axis=axis)


def _flatten_real_grads(grads, per_sample: bool) -> np.ndarray:
    blocks = []
    axis = 1 if per_sample else 0
    for gw, gb in grads:
        if per_sample:
            blocks += [gw.reshape(gw.shape[0], -1), gb]
        else:
            blocks += [gw.ravel(), gb]
    return np.concatenate(blocks, axis=axis)


def _branch_index(configs: np.ndarray) -> np.ndarray:
    """Output-unit index selected by each spin (+1 -> 0, -1 -> 1)."""
    return (np.atleast_2d(configs) < 0).astype(np.intp)


class _ArBase:
    """Shared ancestral sampling and conditional plumbing."""

    n_spins: int

    def sample(self, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        """Exact ancestral samples, spin by spin along the chain."""
        configs = np.ones((n_samples, self.n_spins), dtype=np.int8)
        for i in range(self.n_spins):
            p_up = self.conditional_prob_up(configs, i)
            configs[:, i] = np.where(rng.random(n_samples) < p_up, 1, -1)
        return configs

    def conditionals(self, prefix: np.ndarray) -> np.ndarray:
        """Normalized two-component amplitude for the next spin given a prefix."""
        prefix = np.asarray(prefix)
        i = prefix.size
        if i >= self.n_spins:
            raise ValueError("prefix already covers the whole chain")
        config = np.ones((1, self.n_spins), dtype=np.int8)
        if i:
            config[0, :i] = prefix
        return self._eta(config)[0, i]

    def log_psi(self, config: np.ndarray) -> complex:
        return complex(self.log_psi_batch(np.atleast_2d(config))[0])

    def log_derivatives(self, config: np.ndarray) -> np.ndarray:
        return self.log_derivatives_batch(np.atleast_2d(config))[0]


class ArJoint(_ArBase):
    """Complex-parameter autoregressive ansatz with Born-rule normalization."""

    kind = "ar"

    def __init__(self, n_spins: int, n_layers: int, n_hidden: int):
        self.n_spins = n_spins
        self.n_layers = n_layers
        self.n_hidden = n_hidden
        self.net = MaskedNet(n_spins, n_layers, n_hidden, complex_params=True)
        self.seed = None

    @property
    def dims(self) -> dict:
        return {"n_spins": self.n_spins, "n_layers": self.n_layers,
                "n_hidden": self.n_hidden}

    @property
    def parameter_count(self) -> int:
        return self.net.parameter_count

    def get_parameters(self) -> np.ndarray:
        return self.net.get_parameters()

    def set_parameters(self, flat: np.ndarray) -> None:
        self.net.set_parameters(flat)

    def _eta(self, configs: np.ndarray) -> np.ndarray:
        u, _ = self.net.forward(configs)
        norm = np.sqrt(np.abs(u[..., 0]) ** 2 + np.abs(u[..., 1]) ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            eta = u / norm[..., None]
        return np.where(norm[..., None] > 0, eta, np.sqrt(0.5))

    def conditional_prob_up(self, configs: np.ndarray, i: int) -> np.ndarray:
        u, _ = self.net.forward(configs)
        n0 = np.abs(u[:, i, 0]) ** 2
        n1 = np.abs(u[:, i, 1]) ** 2
        total = n0 + n1
        return np.where(total > 0, n0 / np.where(total > 0, total, 1.0), 0.5)

    def log_psi_batch(self, configs: np.ndarray) -> np.ndarray:
        u, _ = self.net.forward(configs)
        c = _branch_index(configs)
        u_c = np.take_along_axis(u, c[..., None], axis=2)[..., 0]
        n = np.abs(u[..., 0]) ** 2 + np.abs(u[..., 1]) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = np.log(u_c).sum(axis=1) - 0.5 * np.log(n).sum(axis=1)
        bad = ~np.isfinite(lp.real)
        if np.any(bad):
            lp = lp.copy()
            lp[bad] = NEG_INF_LOG_PSI
        return lp

    def _seeds(self, configs: np.ndarray):
        u, acts = self.net.forward(configs)
        c = _branch_index(configs)
        u_c = np.take_along_axis(u, c[..., None], axis=2)[..., 0]
        n = np.abs(u[..., 0]) ** 2 + np.abs(u[..., 1]) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            s1 = np.zeros_like(u)
            inv = np.where(u_c != 0, 1.0 / np.where(u_c != 0, u_c, 1.0), 0.0)
            np.put_along_axis(s1, c[..., None], inv[..., None], axis=2)
            s2 = np.where(n[..., None] > 0,
                          -0.5 * u.conj() / np.where(n[..., None] > 0, n[..., None], 1.0),
                          0.0)
        return acts, s1, s2

    def log_derivatives_batch(self, configs: np.ndarray) -> np.ndarray:
        acts, s1, s2 = self._seeds(configs)
        g1 = self.net.backward(acts, s1, per_sample=True)
        g2 = self.net.backward(acts, s2, per_sample=True)
        x_parts, y_parts = [], []
        for (w1, b1), (w2, b2) in zip(g1, g2):
            x_parts.append((w1 + 2 * w2.real, b1 + 2 * b2.real))
            y_parts.append((1j * w1 - 2 * w2.imag, 1j * b1 - 2 * b2.imag))
        return _flatten_complex_grads(x_parts, y_parts, per_sample=True)

    def weighted_parameter_gradient(self, configs: np.ndarray,
                                    weights: np.ndarray) -> np.ndarray:
        acts, s1, s2 = self._seeds(configs)
        w = np.asarray(weights, dtype=np.complex128)[:, None, None]
        ga = self.net.backward(acts, s1 * w)
        gb = self.net.backward(acts, s2 * w)
        gc = self.net.backward(acts, s2 * w.conj())
        x_parts, y_parts = [], []
        for (wa, ba), (wb, bb), (wc, bc) in zip(ga, gb, gc):
            x_parts.append((wa + wb + wc.conj(), ba + bb + bc.conj()))
            y_parts.append((1j * (wa + wb - wc.conj()), 1j * (ba + bb - bc.conj())))
        return _flatten_complex_grads(x_parts, y_parts, per_sample=False)


class ArSplit(_ArBase):
    """Separate real-parameter autoregressive networks for modulus and phase."""

    kind = "ar-split"

    def __init__(self, n_spins: int, n_layers: int, n_hidden: int):
        self.n_spins = n_spins
        self.n_layers = n_layers
        self.n_hidden = n_hidden
        self.mod_net = MaskedNet(n_spins, n_layers, n_hidden, complex_params=False)
        self.phase_net = MaskedNet(n_spins, n_layers, n_hidden, complex_params=False)
        self.seed = None

    @property
    def dims(self) -> dict:
        return {"n_spins": self.n_spins, "n_layers": self.n_layers,
                "n_hidden": self.n_hidden}

    @property
    def parameter_count(self) -> int:
        return self.mod_net.parameter_count + self.phase_net.parameter_count

    def get_parameters(self) -> np.ndarray:
        return np.concatenate([self.mod_net.get_parameters(),
                               self.phase_net.get_parameters()])

    def set_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        split = self.mod_net.parameter_count
        self.mod_net.set_parameters(flat[:split])
        self.phase_net.set_parameters(flat[split:])

    def _heads(self, configs: np.ndarray):
        v, acts_m = self.mod_net.forward(configs)
        ph, acts_p = self.phase_net.forward(configs)
        lse = np.logaddexp(2 * v[..., 0], 2 * v[..., 1])
        return v, ph, lse, acts_m, acts_p

    def _eta(self, configs: np.ndarray) -> np.ndarray:
        v, ph, lse, _, _ = self._heads(configs)
        return np.exp(v - 0.5 * lse[..., None] + 1j * ph)

    def conditional_prob_up(self, configs: np.ndarray, i: int) -> np.ndarray:
        v, _ = self.mod_net.forward(configs)
        # q(up) = e^{2 v0} / (e^{2 v0} + e^{2 v1}), computed stably.
        return 1.0 / (1.0 + np.exp(-2.0 * (v[:, i, 0] - v[:, i, 1])))

    def log_psi_batch(self, configs: np.ndarray) -> np.ndarray:
        v, ph, lse, _, _ = self._heads(configs)
        c = _branch_index(configs)
        v_c = np.take_along_axis(v, c[..., None], axis=2)[..., 0]
        p_c = np.take_along_axis(ph, c[..., None], axis=2)[..., 0]
        return (v_c - 0.5 * lse).sum(axis=1) + 1j * p_c.sum(axis=1)

    def _seeds(self, configs: np.ndarray):
        v, ph, lse, acts_m, acts_p = self._heads(configs)
        c = _branch_index(configs)
        onehot = np.zeros(v.shape)
        np.put_along_axis(onehot, c[..., None], 1.0, axis=2)
        softmax = np.exp(2 * v - lse[..., None])
        return acts_m, acts_p, onehot - softmax, onehot

    def log_derivatives_batch(self, configs: np.ndarray) -> np.ndarray:
        acts_m, acts_p, s_mod, s_ph = self._seeds(configs)
        g_mod = self.mod_net.backward(acts_m, s_mod, per_sample=True)
        g_ph = self.phase_net.backward(acts_p, s_ph, per_sample=True)
        d_mod = _flatten_real_grads(g_mod, per_sample=True)
        d_ph = _flatten_real_grads(g_ph, per_sample=True)
        return np.concatenate([d_mod, 1j * d_ph], axis=1).astype(np.complex128)

    def weighted_parameter_gradient(self, configs: np.ndarray,
                                    weights: np.ndarray) -> np.ndarray:
        acts_m, acts_p, s_mod, s_ph = self._seeds(configs)
        w = np.asarray(weights, dtype=np.complex128)[:, None, None]
        g_mod = self.mod_net.backward(acts_m, s_mod * w)
        g_ph = self.phase_net.backward(acts_p, s_ph * w)
        return np.concatenate([
            _flatten_real_grads(g_mod, per_sample=False),
            1j * _flatten_real_grads(g_ph, per_sample=False),
        ])
