"""
Minimal numpy neural toolkit: dense nets with manual backprop, Adam, and a
tanh-squashed Gaussian policy head.

Everything runs in float64. Layers compute x @ W + b with W of shape
(fan_in, fan_out); hidden layers use tanh and the output layer is linear.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import NetworkShapeError

CHECKPOINT_VERSION = 1
LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class DenseNet:
    """
    Fully connected network with tanh hidden layers.

    Args:
        sizes: Layer widths (input, hidden..., output)
        rng: Generator for the uniform +-1/sqrt(fan_in) initialization
    """

    def __init__(self, sizes: Sequence[int], rng: Optional[np.random.Generator] = None):
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise NetworkShapeError(f"invalid layer widths {list(sizes)}")
        self.sizes = [int(s) for s in sizes]
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self._activations: Optional[List[np.ndarray]] = None
        self._squeeze = False

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> List[np.ndarray]:
        """Parameter arrays in (W0, b0, W1, b1, ...) order; returned by reference."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        """
        Evaluate the network and cache activations for backward().

        A 1-D input is treated as a batch of one and the output is squeezed back.

        Raises:
            NetworkShapeError: if the input width differs from sizes[0]
        """
        x = np.asarray(x, dtype=np.float64)
        self._squeeze = x.ndim == 1
        h = x[None, :] if self._squeeze else x
        if h.ndim != 2 or h.shape[1] != self.sizes[0]:
            raise NetworkShapeError(f"expected input width {self.sizes[0]}, got shape {x.shape}")
        activations = [h]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < self.n_layers - 1:
                h = np.tanh(h)
            activations.append(h)
        self._activations = activations
        return h[0] if self._squeeze else h

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def backward(self, grad_out: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """
        Backpropagate dLoss/dOutput through the cached forward pass.

        Returns:
            (parameter gradients in params() order, dLoss/dInput)

        Raises:
            NetworkShapeError: if no forward pass is cached or shapes differ
        """
        if self._activations is None:
            raise NetworkShapeError("backward() called before forward()")
        g = np.asarray(grad_out, dtype=np.float64)
        if self._squeeze and g.ndim == 1:
            g = g[None, :]
        if g.shape != self._activations[-1].shape:
            raise NetworkShapeError(f"gradient shape {g.shape} != output shape {self._activations[-1].shape}")

        grads: List[np.ndarray] = [None] * (2 * self.n_layers)
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                g = g * (1.0 - self._activations[i + 1] ** 2)
            grads[2 * i] = self._activations[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, (g[0] if self._squeeze else g)

    def copy(self) -> "DenseNet":
        clone = DenseNet.__new__(DenseNet)
        clone.sizes = list(self.sizes)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        clone._activations = None
        clone._squeeze = False
        return clone

    def soft_update_from(self, other: "DenseNet", rho: float) -> None:
        """self <- (1 - rho) self + rho other, in place."""
        for mine, theirs in zip(self.params(), other.params()):
            mine *= 1.0 - rho
            mine += rho * theirs

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        expected = sum(p.size for p in self.params())
        if flat.shape != (expected,):
            raise NetworkShapeError(f"expected {expected} parameters, got {flat.shape}")
        offset = 0
        for p in self.params():
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size

    def to_dict(self) -> Dict:
        return {
            "version": CHECKPOINT_VERSION,
            "sizes": self.sizes,
            "shapes": [list(p.shape) for p in self.params()],
            "params": self.get_flat().tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "DenseNet":
        if data.get("version") != CHECKPOINT_VERSION:
            raise NetworkShapeError(f"unsupported checkpoint version {data.get('version')}")
        net = cls(data["sizes"])
        if [list(p.shape) for p in net.params()] != [list(s) for s in data["shapes"]]:
            raise NetworkShapeError("checkpoint shapes do not match the layer widths")
        net.set_flat(np.asarray(data["params"], dtype=np.float64))
        return net


def save_networks(path: Path, networks: Dict[str, DenseNet], extra: Optional[Dict] = None) -> Path:
    """Write named networks (plus JSON-able extras) to one checkpoint file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = {"version": CHECKPOINT_VERSION, "networks": {k: n.to_dict() for k, n in networks.items()}}
    blob.update(extra or {})
    with open(path, "w", encoding="utf-8") as f:
        json.dump(blob, f)
    return path


def load_networks(path: Path) -> Tuple[Dict[str, DenseNet], Dict]:
    with open(path, "r", encoding="utf-8") as f:
        blob = json.load(f)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise NetworkShapeError(f"unsupported checkpoint version {blob.get('version')}")
    networks = {k: DenseNet.from_dict(v) for k, v in blob.pop("networks").items()}
    return networks, blob


@dataclass
class AdamState:
    """First/second moments and step count for one list of parameter arrays."""

    m: List[np.ndarray]
    v: List[np.ndarray]
    lr: float = 1e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 1e-4, **kwargs) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], lr=lr, **kwargs)


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
    """Bias-corrected Adam update applied to params in place."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise NetworkShapeError("parameter, gradient and moment lists differ in length")
    b1, b2 = state.betas
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise NetworkShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def _log_one_minus_tanh_sq(u: np.ndarray) -> np.ndarray:
    # log(1 - tanh(u)^2) without cancellation for large |u|
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def log_prob_of(action: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Log-density of a squashed action under tanh(N(mean, exp(log_std)^2)), summed over the last axis."""
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0 + 1e-15, 1.0 - 1e-15)
    u = np.arctanh(a)
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    eps = (u - mean) / np.exp(log_std)
    per_dim = -0.5 * eps ** 2 - log_std - HALF_LOG_2PI - _log_one_minus_tanh_sq(u)
    return per_dim.sum(axis=-1)


@dataclass
class PolicySample:
    """Reparameterized sample plus what backward() needs."""

    action: np.ndarray
    log_prob: np.ndarray
    mean: np.ndarray
    log_std: np.ndarray
    noise: np.ndarray
    clipped: np.ndarray = field(repr=False, default=None)


class SquashedGaussianPolicy:
    """
    Stochastic policy a = tanh(mu + sigma * eps), eps ~ N(0, I).

    The network outputs [mu, log_sigma] per action dimension; log_sigma is
    clipped to [-20, 2] and the clipped coordinates pass no gradient.
    """

    def __init__(self, obs_dim: int, act_dim: int, hidden: Sequence[int] = (256, 256),
                 rng: Optional[np.random.Generator] = None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.net = DenseNet([obs_dim, *hidden, 2 * act_dim], rng)

    def params(self) -> List[np.ndarray]:
        return self.net.params()

    def distribution(self, obs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        out = self.net.forward(obs)
        mean = out[..., :self.act_dim]
        raw_log_std = out[..., self.act_dim:]
        log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
        clipped = (raw_log_std < LOG_STD_MIN) | (raw_log_std > LOG_STD_MAX)
        return mean, log_std, clipped

    def sample(self, obs: np.ndarray, rng: Optional[np.random.Generator] = None,
               deterministic: bool = False) -> PolicySample:
        """
        Draw a squashed action with its log-probability.

        Args:
            obs: Feature vector or (B, obs_dim) batch
            rng: Noise source; required unless deterministic
            deterministic: Return tanh(mu) (noise fixed at 0)
        """
        mean, log_std, clipped = self.distribution(obs)
        if deterministic:
            noise = np.zeros_like(mean)
        else:
            noise = rng.standard_normal(mean.shape)
        u = mean + np.exp(log_std) * noise
        action = np.tanh(u)
        per_dim = -0.5 * noise ** 2 - log_std - HALF_LOG_2PI - _log_one_minus_tanh_sq(u)
        return PolicySample(action=action, log_prob=per_dim.sum(axis=-1), mean=mean,
                            log_std=log_std, noise=noise, clipped=clipped)

    def backward(self, sample: PolicySample, grad_action: np.ndarray,
                 grad_log_prob: np.ndarray) -> List[np.ndarray]:
        """
        Parameter gradients of a loss given dL/da and dL/dlog_prob for the last sample().

        The noise is held fixed (reparameterization), so
        dlogp/dmu = 2a and dlogp/dlog_sigma = -1 + 2 a sigma eps.
        """
        a = sample.action
        sigma_eps = np.exp(sample.log_std) * sample.noise
        dtanh = 1.0 - a ** 2
        glp = np.asarray(grad_log_prob, dtype=np.float64)[..., None]
        d_mean = grad_action * dtanh + glp * 2.0 * a
        d_log_std = grad_action * dtanh * sigma_eps + glp * (-1.0 + 2.0 * a * sigma_eps)
        d_log_std = np.where(sample.clipped, 0.0, d_log_std)
        grads, _ = self.net.backward(np.concatenate([d_mean, d_log_std], axis=-1))
        return grads
