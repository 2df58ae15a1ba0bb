"""Finite-width Monte Carlo validation of the infinite-width predictions.

Networks are instantiated exactly as the theory assumes: equal hidden
widths, weights N(0, sw2 / N) and biases N(0, sb2) from layer 2 onward, and
the first-layer convention of the theory's experimental protocol: inputs
are drawn N(0, q*) and fed raw (nothing is activated before the first
weights), with the first layer using a variance-preserving 1/N weight law
and zero biases so its pre-activation already sits at q*.  Every hidden
pre-activation, the first included, then passes through the activation
before feeding the next layer, which is what keeps the variance recursion
at its fixed point from layer 2 onward.

Randomness comes from counter-based Philox streams keyed by (seed, layer,
stream tag), so runs are bit-reproducible and changing the width re-draws a
layer without reshuffling any other layer's stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import maps
from .solver import EocInit

_STREAM_INPUT = 0
_STREAM_WEIGHTS = 1
_STREAM_BIASES = 2
_STREAM_TOP_ERROR = 3
_STREAM_PAIR = 4


def _layer_rng(seed: int, layer: int, stream: int) -> np.random.Generator:
    key = (np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64((layer << 8) | stream))
    return np.random.Generator(np.random.Philox(key=np.array(key, dtype=np.uint64)))


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one Monte Carlo run."""

    init: EocInit
    depth: int
    width: int
    batch: int = 64
    seed: int = 0
    measure_backward: bool = False
    # variance of the drawn inputs; defaults to q*, override to probe the
    # map away from its fixed point
    input_variance: float | None = None

    def __post_init__(self):
        if self.depth < 2:
            raise ValueError("depth must be at least 2")
        if self.width < 8:
            raise ValueError("width must be at least 8")
        if self.batch < 1:
            raise ValueError("batch must be at least 1")

    def to_dict(self) -> dict:
        return {
            "init": self.init.to_dict(),
            "depth": self.depth,
            "width": self.width,
            "batch": self.batch,
            "seed": self.seed,
            "measure_backward": self.measure_backward,
            "input_variance": self.input_variance,
        }


@dataclass(frozen=True)
class LayerStats:
    """Empirical per-layer statistics of one run."""

    layer: int
    q_hat: float
    sparsity_hat: float
    chi1_hat: float
    v_hat: float | None = None
    rho_hat: float | None = None

    def to_row(self) -> list:
        return [self.layer, self.q_hat, self.sparsity_hat, self.chi1_hat,
                self.v_hat, self.rho_hat]


CSV_COLUMNS = ("layer", "q_hat", "sparsity_hat", "chi1_hat", "v_hat", "rho_hat")


def _draw_layers(config: SimConfig):
    """Per-layer weights and biases; layer 1 preserves input variance."""
    n = config.width
    init = config.init
    for layer in range(1, config.depth + 1):
        w_rng = _layer_rng(config.seed, layer, _STREAM_WEIGHTS)
        if layer == 1:
            w = w_rng.normal(0.0, math.sqrt(1.0 / n), size=(n, n))
            b = np.zeros(n)
        else:
            b_rng = _layer_rng(config.seed, layer, _STREAM_BIASES)
            w = w_rng.normal(0.0, math.sqrt(init.sw2 / n), size=(n, n))
            b = b_rng.normal(0.0, math.sqrt(init.sb2), size=n)
        yield layer, w, b


def _forward_pass(config: SimConfig, x0: np.ndarray):
    """Propagate a (batch, width) input; yields (layer, h, x, w).

    The raw input meets the variance-preserving first layer; every
    pre-activation h, including the first, is activated before the next
    layer consumes it.
    """
    spec = config.init.spec
    x = x0
    for layer, w, b in _draw_layers(config):
        h = x @ w.T + b
        x = spec.evaluate(h)
        yield layer, h, x, w


def _chi1_at(init: EocInit, q_hat: float) -> float:
    # a fully dead layer has no growth factor; chi1 -> 0 as q -> 0 for a
    # positive threshold, so return the limit instead of failing
    if q_hat <= 0.0:
        return 0.0
    return maps.chi1(init.spec, init.sw2, q_hat)


def _stats_from_states(config: SimConfig, states) -> list[LayerStats]:
    init = config.init
    out = []
    for layer, h, x, _ in states:
        q_hat = float(np.mean(h * h))
        out.append(
            LayerStats(
                layer=layer,
                q_hat=q_hat,
                sparsity_hat=float(np.mean(x == 0.0)),
                chi1_hat=_chi1_at(init, q_hat),
            )
        )
    return out


def _draw_inputs(config: SimConfig) -> np.ndarray:
    rng = _layer_rng(config.seed, 0, _STREAM_INPUT)
    var = config.init.q_star if config.input_variance is None else config.input_variance
    return rng.normal(0.0, math.sqrt(var), size=(config.batch, config.width))


def run_forward(config: SimConfig) -> list[LayerStats]:
    """Forward propagation statistics, deterministic in the seed."""
    x0 = _draw_inputs(config)
    return _stats_from_states(config, _forward_pass(config, x0))


def run_backward(config: SimConfig) -> list[LayerStats]:
    """Forward statistics plus the second moment of a backpropagated error.

    A synthetic unit-variance error vector is injected at the top layer and
    pulled down through transposed weights and the activation-derivative
    diagonal; no loss function is involved.
    """
    if not config.measure_backward:
        raise ValueError("config.measure_backward must be true for run_backward")
    spec = config.init.spec
    x0 = _draw_inputs(config)
    states = list(_forward_pass(config, x0))
    stats = _stats_from_states(config, states)

    rng = _layer_rng(config.seed, config.depth + 1, _STREAM_TOP_ERROR)
    delta = rng.normal(0.0, 1.0, size=(config.batch, config.width))
    v_hat: dict[int, float] = {config.depth: float(np.mean(delta * delta))}
    weights = {layer: w for layer, _, _, w in states}
    pre_acts = {layer: h for layer, h, _, _ in states}
    for layer in range(config.depth - 1, 0, -1):
        back = delta @ weights[layer + 1]
        delta = back * spec.derivative(pre_acts[layer])
        v_hat[layer] = float(np.mean(delta * delta))

    return [
        LayerStats(
            layer=st.layer,
            q_hat=st.q_hat,
            sparsity_hat=st.sparsity_hat,
            chi1_hat=st.chi1_hat,
            v_hat=v_hat[st.layer],
        )
        for st in stats
    ]


def _correlated_input_pair(config: SimConfig, rho0: float):
    """Batch of input pairs with exact empirical correlation rho0.

    Each row pair is built from an orthonormalised basis so the sample
    correlation and the sample second moment match their targets exactly,
    not just in expectation.
    """
    rng = _layer_rng(config.seed, 0, _STREAM_PAIR)
    n = config.width
    scale = math.sqrt(n * config.init.q_star)
    a = rng.normal(size=(config.batch, n))
    b = rng.normal(size=(config.batch, n))
    a_hat = a / np.linalg.norm(a, axis=1, keepdims=True)
    b_perp = b - np.sum(b * a_hat, axis=1, keepdims=True) * a_hat
    b_hat = b_perp / np.linalg.norm(b_perp, axis=1, keepdims=True)
    xa = scale * a_hat
    xb = scale * (rho0 * a_hat + math.sqrt(1.0 - rho0 * rho0) * b_hat)
    return xa, xb


def run_correlation(config: SimConfig, rho0: float) -> list[LayerStats]:
    """Track the empirical correlation of two inputs through shared weights.

    The two input batches ride through the same drawn network stacked into
    one forward pass, so the weights are shared by construction.
    """
    if not -1.0 <= rho0 <= 1.0:
        raise ValueError(f"rho0 must lie in [-1, 1], got {rho0}")
    xa, xb = _correlated_input_pair(config, rho0)
    stacked = np.concatenate([xa, xb], axis=0)

    out = []
    init = config.init
    for layer, h, x, _ in _forward_pass(config, stacked):
        ha, hb = h[: config.batch], h[config.batch :]
        dot = np.sum(ha * hb, axis=1)
        qa = np.sum(ha * ha, axis=1)
        qb = np.sum(hb * hb, axis=1)
        denom = np.sqrt(qa * qb)
        # a dead pair has no defined correlation; report nan rather than crash
        rho_rows = np.divide(dot, denom, out=np.full_like(dot, np.nan), where=denom > 0)
        rho_hat = float(np.mean(rho_rows))
        q_hat = float(np.mean(h * h))
        out.append(
            LayerStats(
                layer=layer,
                q_hat=q_hat,
                sparsity_hat=float(np.mean(x == 0.0)),
                chi1_hat=_chi1_at(init, q_hat),
                rho_hat=rho_hat,
            )
        )
    return out


def iterated_correlation(init: EocInit, rho0: float, depth: int) -> list[float]:
    """The infinite-width correlation trajectory the simulator is checked
    against: rho repeatedly passed through the one-layer map, after an
    affine first layer that leaves it unchanged."""
    rho = float(rho0)
    out = [rho]
    for _ in range(depth - 1):
        rho = maps.correlation_map_precise(init.spec, init.sw2, init.sb2, init.q_star, rho)
        rho = min(1.0, max(-1.0, rho))
        out.append(rho)
    return out
