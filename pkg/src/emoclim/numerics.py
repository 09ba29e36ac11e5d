"""Dense layers with analytic gradients, the AdamW optimizer, and a
finite-difference gradient checker.

Parameters and activations are float32 in normal use; every layer is
dtype-generic so cloned float64 copies can be driven through the same code
path when checking gradients against central differences.

Conventions:
- batches are 2-D row-major arrays, one item per row;
- backward passes accumulate into persistent gradient buffers (`grad += ...`)
  so multiple loss terms can contribute before an optimizer step;
- parameter and gradient arrays are only ever mutated in place, never
  reassigned, so optimizer state stays attached across steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BatchTooSmallError,
    ConfigurationError,
    DegenerateInputError,
    StateError,
    TrainingError,
)

NORM_FLOOR = 1e-12


@dataclass
class Param:
    """A named trainable array paired with its gradient buffer.

    `decay` marks whether decoupled weight decay applies (linear weights
    yes; biases and batch-norm affine parameters no).
    """

    name: str
    value: np.ndarray
    grad: np.ndarray
    decay: bool = True


def as_matrix(x: np.ndarray, name: str = "input") -> np.ndarray:
    if x.ndim != 2:
        raise ConfigurationError(f"{name} must be 2-D, got shape {x.shape}")
    return x


def check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise TrainingError(f"non-finite values in {what}")


class LinearLayer:
    """Affine map y = x @ W.T + b with fan-in uniform initialization."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = "linear"):
        if in_dim < 1 or out_dim < 1:
            raise ConfigurationError(f"bad linear dims {in_dim}x{out_dim}")
        limit = 1.0 / np.sqrt(in_dim)
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = rng.uniform(-limit, limit, (out_dim, in_dim)).astype(dtype)
        self.bias = np.zeros(out_dim, dtype=dtype)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._input: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_matrix(x)
        if x.shape[1] != self.in_dim:
            raise ConfigurationError(
                f"{self.name}: expected {self.in_dim} input columns, got {x.shape[1]}")
        self._input = x
        return x @ self.weight.T + self.bias

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._input is None:
            raise StateError(f"{self.name}: backward called before forward")
        x = self._input
        if grad_out.shape != (x.shape[0], self.out_dim):
            raise ConfigurationError(f"{self.name}: grad_out shape {grad_out.shape}")
        self.grad_weight += grad_out.T @ x
        self.grad_bias += grad_out.sum(axis=0)
        return grad_out @ self.weight

    def params(self) -> list[Param]:
        return [
            Param(f"{self.name}.weight", self.weight, self.grad_weight, decay=True),
            Param(f"{self.name}.bias", self.bias, self.grad_bias, decay=False),
        ]

    def clone(self, dtype=None) -> "LinearLayer":
        dup = LinearLayer.__new__(LinearLayer)
        dup.name = self.name
        dup.in_dim, dup.out_dim = self.in_dim, self.out_dim
        dup.weight = self.weight.astype(dtype or self.weight.dtype)
        dup.bias = self.bias.astype(dtype or self.bias.dtype)
        dup.grad_weight = np.zeros_like(dup.weight)
        dup.grad_bias = np.zeros_like(dup.bias)
        dup._input = None
        return dup


class BatchNormLayer:
    """Per-column batch normalization with running statistics.

    Train mode standardizes with the batch mean and (population) variance
    and updates running stats as `running = (1-momentum)*running +
    momentum*batch`; eval mode uses the running stats only.
    """

    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-5,
                 dtype=np.float32, name: str = "bn"):
        if not 0.0 < momentum < 1.0:
            raise ConfigurationError(f"momentum must be in (0,1), got {momentum}")
        if eps <= 0.0:
            raise ConfigurationError(f"eps must be positive, got {eps}")
        self.name = name
        self.dim = dim
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(dim, dtype=dtype)
        self.beta = np.zeros(dim, dtype=dtype)
        self.running_mean = np.zeros(dim, dtype=dtype)
        self.running_var = np.ones(dim, dtype=dtype)
        self.grad_gamma = np.zeros_like(self.gamma)
        self.grad_beta = np.zeros_like(self.beta)
        self._cache: tuple[np.ndarray, np.ndarray] | None = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        x = as_matrix(x)
        if x.shape[1] != self.dim:
            raise ConfigurationError(f"{self.name}: expected {self.dim} columns")
        if train:
            if x.shape[0] < 2:
                raise BatchTooSmallError(
                    f"{self.name}: train mode needs N >= 2, got N={x.shape[0]}")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            x_hat = (x - mean) * inv_std
            self.running_mean[...] = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var[...] = (1 - self.momentum) * self.running_var + self.momentum * var
            self._cache = (x_hat, inv_std.astype(x.dtype), True)
            return self.gamma * x_hat + self.beta
        inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
        x_hat = (x - self.running_mean) * inv_std
        self._cache = (x_hat, inv_std.astype(x.dtype), False)
        return self.gamma * x_hat + self.beta

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError(f"{self.name}: backward called before forward")
        x_hat, inv_std, was_train = self._cache
        self.grad_gamma += (grad_out * x_hat).sum(axis=0)
        self.grad_beta += grad_out.sum(axis=0)
        dx_hat = grad_out * self.gamma
        if not was_train:
            # Eval mode standardizes with frozen running stats, so the map
            # is affine per row.
            return dx_hat * inv_std
        n = x_hat.shape[0]
        # Train-mode batch mean and variance depend on every row, so their
        # contributions fold back in.
        dx = (inv_std / n) * (
            n * dx_hat
            - dx_hat.sum(axis=0)
            - x_hat * (dx_hat * x_hat).sum(axis=0)
        )
        return dx

    def params(self) -> list[Param]:
        return [
            Param(f"{self.name}.gamma", self.gamma, self.grad_gamma, decay=False),
            Param(f"{self.name}.beta", self.beta, self.grad_beta, decay=False),
        ]

    def clone(self, dtype=None) -> "BatchNormLayer":
        dup = BatchNormLayer.__new__(BatchNormLayer)
        dup.name = self.name
        dup.dim = self.dim
        dup.momentum = self.momentum
        dup.eps = self.eps
        dup.gamma = self.gamma.astype(dtype or self.gamma.dtype)
        dup.beta = self.beta.astype(dtype or self.beta.dtype)
        dup.running_mean = self.running_mean.astype(dtype or self.running_mean.dtype)
        dup.running_var = self.running_var.astype(dtype or self.running_var.dtype)
        dup.grad_gamma = np.zeros_like(dup.gamma)
        dup.grad_beta = np.zeros_like(dup.beta)
        dup._cache = None
        return dup


class ReluLayer:
    def __init__(self):
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, np.zeros((), dtype=x.dtype))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise StateError("relu: backward called before forward")
        return np.where(self._mask, grad_out, np.zeros((), dtype=grad_out.dtype))

    def clone(self, dtype=None) -> "ReluLayer":
        return ReluLayer()


class DropoutLayer:
    """Inverted dropout: train mode scales kept units by 1/(1-rate),
    eval mode is the identity."""

    def __init__(self, rate: float, rng: np.random.Generator, name: str = "dropout"):
        if not 0.0 <= rate < 1.0:
            raise ConfigurationError(f"dropout rate must be in [0,1), got {rate}")
        self.name = name
        self.rate = rate
        self.rng = rng
        self._scaled_mask: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if not train or self.rate == 0.0:
            self._scaled_mask = None
            return x
        keep = self.rng.random(x.shape) >= self.rate
        self._scaled_mask = keep.astype(x.dtype) / (1.0 - self.rate)
        return x * self._scaled_mask

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._scaled_mask is None:
            return grad_out
        return grad_out * self._scaled_mask

    def clone(self, dtype=None) -> "DropoutLayer":
        dup = DropoutLayer.__new__(DropoutLayer)
        dup.name = self.name
        dup.rate = self.rate
        dup.rng = self.rng
        dup._scaled_mask = None
        return dup


class L2NormalizeLayer:
    """Row-wise projection onto the unit sphere.

    Backward uses the full Jacobian (I - z z^T) / ||x|| per row.
    """

    def __init__(self, norm_floor: float = NORM_FLOOR):
        self.norm_floor = norm_floor
        self._cache: tuple[np.ndarray, np.ndarray] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_matrix(x)
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        if np.any(norms < self.norm_floor):
            bad = int(np.argmin(norms))
            raise DegenerateInputError(
                f"row {bad} has norm {float(norms[bad, 0]):.3e}, below {self.norm_floor:.0e}")
        z = x / norms
        self._cache = (z, norms)
        return z

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("l2_normalize: backward called before forward")
        z, norms = self._cache
        return (grad_out - z * (grad_out * z).sum(axis=1, keepdims=True)) / norms

    def clone(self, dtype=None) -> "L2NormalizeLayer":
        return L2NormalizeLayer(self.norm_floor)


@dataclass
class AdamW:
    """AdamW with decoupled weight decay.

    The decay multiplies parameters by (1 - lr*wd) independently of the
    bias-corrected Adam direction, so zero gradients with nonzero decay
    still shrink weights and zero decay with zero gradients leaves them
    bit-identical.
    """

    params: list[Param]
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.lr < 0 or self.eps <= 0:
            raise ConfigurationError("AdamW: lr must be >= 0 and eps > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("AdamW: betas must lie in [0,1)")
        if not self.m:
            self.m = [np.zeros_like(p.value) for p in self.params]
            self.v = [np.zeros_like(p.value) for p in self.params]

    def zero_grads(self) -> None:
        for p in self.params:
            p.grad[...] = 0

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter '{p.name}'")
            if p.decay and self.weight_decay != 0.0:
                p.value *= 1.0 - self.lr * self.weight_decay
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            p.value -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.value.dtype)


def grad_check(loss_fn, grad_fn, params: list[Param], rng: np.random.Generator,
               max_entries_per_param: int = 24, fd_eps: float = 1e-5,
               rel_tol: float = 1e-4) -> float:
    """Compare analytic gradients against f64 central finite differences.

    `loss_fn()` returns the scalar loss at the current parameter values and
    must be deterministic (fixed rng state / eval-mode stochastic layers).
    `grad_fn()` populates the `Param.grad` buffers for the same loss.
    Returns the max over sampled entries of
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).

    A central difference carries rounding noise of order
    eps_machine*|loss|/fd_eps, so gradients smaller than noise/rel_tol
    cannot be resolved to rel_tol relative precision no matter how correct
    they are (for example a weight behind a nearly dead ReLU unit). Such
    entries are instead required to agree at the absolute noise level;
    within it they count as agreement, beyond it as full relative error.
    """
    for p in params:
        p.grad[...] = 0
    grad_fn()
    analytic = [p.grad.copy() for p in params]

    base_loss = abs(loss_fn())
    fd_noise = 32.0 * np.finfo(np.float64).eps * max(1.0, base_loss) / (2.0 * fd_eps)

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.value.reshape(-1)
        ana_flat = ana.reshape(-1)
        n = flat.size
        if n <= max_entries_per_param:
            idx = np.arange(n)
        else:
            idx = rng.choice(n, size=max_entries_per_param, replace=False)
        for i in idx:
            old = flat[i]
            flat[i] = old + fd_eps
            loss_plus = loss_fn()
            flat[i] = old - fd_eps
            loss_minus = loss_fn()
            flat[i] = old
            numeric = (loss_plus - loss_minus) / (2.0 * fd_eps)
            a, m = abs(ana_flat[i]), abs(numeric)
            if max(a, m) < fd_noise / rel_tol and abs(ana_flat[i] - numeric) <= 4.0 * fd_noise:
                continue  # below finite-difference resolution, consistent
            rel = abs(ana_flat[i] - numeric) / max(a, m, 1e-8)
            worst = max(worst, rel)
    return worst
