"""Finite-difference verification suite.

Every analytic backward pass in the package is checked against float64
central differences: individual layers (via input gradients where the layer
has no parameters), both projection heads through each contrastive
component and the total objective, and the tagging probe through its BCE
loss. Dropout runs where randomness would break finite differences are
either eval-mode or rate zero, which the projection-head contract allows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import ProjectionHead
from .evaluation import TagProbe, bce_with_logits
from .losses import LabeledBatch, LossConfig, supcon_cross, supcon_intra, total_loss
from .numerics import (
    BatchNormLayer,
    DropoutLayer,
    L2NormalizeLayer,
    LinearLayer,
    Param,
    ReluLayer,
    grad_check,
)
from .seeding import derive_rng


@dataclass
class CaseResult:
    name: str
    max_rel_error: float


def _input_param(x: np.ndarray) -> Param:
    return Param("input", x, np.zeros_like(x), decay=False)


def _run_check(loss_fn, grad_fn, params, rng, perturb: float,
               fd_eps: float = 1e-5) -> float:
    """grad_check with an optional deliberate gradient corruption, used by
    negative-control tests to prove the checker catches wrong gradients."""
    checked_grad_fn = grad_fn
    if perturb:
        def checked_grad_fn():
            grad_fn()
            params[0].grad += perturb
    return grad_check(loss_fn, checked_grad_fn, params, rng, fd_eps=fd_eps)


def _randomize_batchnorm(bn, rng: np.random.Generator) -> None:
    # Default gamma=1/beta=0 leaves train-mode activations centered exactly
    # at zero, where ReLU kink crossings inside the finite-difference step
    # corrupt the numeric derivative; a positive shift keeps most units
    # active and away from the kink.
    bn.gamma[...] = rng.uniform(0.8, 1.2, bn.dim)
    bn.beta[...] = rng.uniform(0.25, 0.75, bn.dim)


# A single-entry perturbation of fd_eps moves a pre-ReLU activation by at
# most ~30*fd_eps here (input magnitudes, batch-norm scale, and batch-stat
# coupling included); instances whose activations sit closer to the kink
# than this margin are redrawn so central differences stay valid.
_FD_EPS_PIPELINE = 1e-6
_KINK_MARGIN = 50 * _FD_EPS_PIPELINE


def _min_abs_preact(module, x: np.ndarray, train: bool) -> float:
    h = module.linear1.forward(x)
    h = module.bn.forward(h, train=train)
    return float(np.min(np.abs(h)))


def _check_simple_layer(name: str, rng: np.random.Generator,
                        perturb: float = 0.0) -> float:
    """Parameter and input gradients of a single layer under a random
    linear functional of its output."""
    n, d_in, d_out = 5, 7, 6
    x = rng.standard_normal((n, d_in))
    probe_vec = rng.standard_normal((n, d_out) if name == "linear" else (n, d_in))

    if name == "linear":
        layer = LinearLayer(d_in, d_out, rng, dtype=np.float64)
        params = layer.params() + [_input_param(x)]

        def loss_fn():
            return float((layer.forward(x) * probe_vec).sum())

        def grad_fn():
            loss_fn()
            params[-1].grad += layer.backward(probe_vec)

    elif name == "batchnorm":
        layer = BatchNormLayer(d_in, dtype=np.float64)
        layer.gamma[...] = rng.standard_normal(d_in)
        layer.beta[...] = rng.standard_normal(d_in)
        params = layer.params() + [_input_param(x)]

        def loss_fn():
            return float((layer.forward(x, train=True) * probe_vec).sum())

        def grad_fn():
            loss_fn()
            params[-1].grad += layer.backward(probe_vec)

    elif name == "relu":
        layer = ReluLayer()
        # Keep activations away from the kink where ReLU has no derivative.
        x = x + 0.2 * np.sign(x)
        params = [_input_param(x)]

        def loss_fn():
            return float((layer.forward(x) * probe_vec).sum())

        def grad_fn():
            loss_fn()
            params[0].grad += layer.backward(probe_vec)

    elif name == "dropout_eval":
        layer = DropoutLayer(0.5, rng)
        params = [_input_param(x)]

        def loss_fn():
            return float((layer.forward(x, train=False) * probe_vec).sum())

        def grad_fn():
            loss_fn()
            params[0].grad += layer.backward(probe_vec)

    elif name == "l2_normalize":
        layer = L2NormalizeLayer()
        params = [_input_param(x)]

        def loss_fn():
            return float((layer.forward(x) * probe_vec).sum())

        def grad_fn():
            loss_fn()
            params[0].grad += layer.backward(probe_vec)

    else:
        raise ValueError(name)

    return _run_check(loss_fn, grad_fn, params, rng, perturb)


def _make_heads(rng: np.random.Generator, dropout_rate: float
                ) -> tuple[ProjectionHead, ProjectionHead]:
    # Narrow hidden layers can ReLU-kill a whole row (zero output norm),
    # which the head rightly rejects; keep widths realistic enough that
    # the seeded instances never hit it.
    seed = int(rng.integers(2 ** 31))
    image_head = ProjectionHead(
        9, 6, hidden_dim=16, dropout_rate=dropout_rate,
        init_rng=derive_rng(seed, "gc.init.image"),
        dropout_rng=derive_rng(seed, "gc.dropout.image"),
        name="image_head", dtype=np.float64)
    audio_head = ProjectionHead(
        7, 6, hidden_dim=14, dropout_rate=dropout_rate,
        init_rng=derive_rng(seed, "gc.init.audio"),
        dropout_rng=derive_rng(seed, "gc.dropout.audio"),
        name="audio_head", dtype=np.float64)
    return image_head, audio_head


def _check_heads_with_loss(component: str, rng: np.random.Generator, train: bool,
                           perturb: float = 0.0) -> float:
    """End-to-end: features -> both heads -> one contrastive component."""
    n = 8
    dropout_rate = 0.0 if train else 0.5  # keep finite differences deterministic
    classes = ["a", "b", "c"]
    for _ in range(64):
        image_head, audio_head = _make_heads(rng, dropout_rate)
        _randomize_batchnorm(image_head.bn, rng)
        _randomize_batchnorm(audio_head.bn, rng)
        x_img = rng.standard_normal((n, image_head.in_dim))
        x_au = rng.standard_normal((n, audio_head.in_dim))
        if min(_min_abs_preact(image_head, x_img, train),
               _min_abs_preact(audio_head, x_au, train)) > _KINK_MARGIN:
            break
    y_img = np.array([classes[i] for i in rng.integers(0, 3, n)], dtype=object)
    y_au = np.array([classes[i] for i in rng.integers(0, 3, n)], dtype=object)
    tau = 0.5
    cfg = LossConfig(temperature=tau)
    # Check only the head(s) the component differentiates through; the
    # other head's gradient is identically zero and finite differences on
    # it would only measure cancellation noise.
    if component == "image_to_image":
        params = image_head.params()
    elif component == "audio_to_audio":
        params = audio_head.params()
    else:
        params = image_head.params() + audio_head.params()

    def compute(with_grads: bool) -> float:
        z_img = image_head.forward(x_img, train=train)
        z_au = audio_head.forward(x_au, train=train)
        if component == "image_to_audio":
            loss, g_img, g_au = supcon_cross(z_img, y_img, z_au, y_au, tau)
        elif component == "audio_to_image":
            loss, g_au, g_img = supcon_cross(z_au, y_au, z_img, y_img, tau)
        elif component == "image_to_image":
            loss, g_img = supcon_intra(z_img, y_img, tau)
            g_au = None
        elif component == "audio_to_audio":
            loss, g_au = supcon_intra(z_au, y_au, tau)
            g_img = None
        elif component == "total":
            result = total_loss(LabeledBatch(z_img, y_img, z_au, y_au), cfg)
            loss, g_img, g_au = result.loss, result.grad_images, result.grad_audio
        else:
            raise ValueError(component)
        if with_grads:
            if g_img is not None:
                image_head.backward(g_img)
            if g_au is not None:
                audio_head.backward(g_au)
        return float(loss)

    return _run_check(lambda: compute(False), lambda: compute(True), params, rng,
                      perturb, fd_eps=_FD_EPS_PIPELINE)


def _check_probe(rng: np.random.Generator, perturb: float = 0.0) -> float:
    n, d, hidden, t = 8, 6, 7, 4
    for _ in range(64):
        probe = TagProbe(d, t, hidden, rng, dtype=np.float64)
        _randomize_batchnorm(probe.bn, rng)
        x = rng.standard_normal((n, d))
        if _min_abs_preact(probe, x, train=True) > _KINK_MARGIN:
            break
    targets = (rng.random((n, t)) < 0.5).astype(np.float64)
    params = probe.params()

    def compute(with_grads: bool) -> float:
        logits = probe.forward(x, train=True)
        loss, grad = bce_with_logits(logits, targets)
        if with_grads:
            probe.backward(grad)
        return loss

    return _run_check(lambda: compute(False), lambda: compute(True), params, rng,
                      perturb, fd_eps=_FD_EPS_PIPELINE)


LAYER_CASES = ("linear", "batchnorm", "relu", "dropout_eval", "l2_normalize")
LOSS_CASES = ("image_to_audio", "audio_to_image", "image_to_image", "audio_to_audio", "total")


def run_suite(seed: int = 0, n_seeds: int = 20, perturb: float = 0.0) -> list[CaseResult]:
    """Run every gradient check over `n_seeds` random instances each.

    `perturb` deliberately corrupts one analytic gradient per case and is
    only meant for negative-control tests of the checker itself.
    """
    results: list[CaseResult] = []

    def record(name: str, fn) -> None:
        worst = 0.0
        for s in range(n_seeds):
            rng = derive_rng(seed, f"gradcheck.{name}.{s}")
            worst = max(worst, fn(rng))
        results.append(CaseResult(name, worst))

    for layer in LAYER_CASES:
        record(f"layer.{layer}",
               lambda rng, layer=layer: _check_simple_layer(layer, rng, perturb))
    for component in LOSS_CASES:
        record(f"heads.train.{component}",
               lambda rng, c=component: _check_heads_with_loss(c, rng, train=True,
                                                               perturb=perturb))
    record("heads.eval.total",
           lambda rng: _check_heads_with_loss("total", rng, train=False, perturb=perturb))
    record("probe.bce", lambda rng: _check_probe(rng, perturb))
    return results
