"""Short-budget supervised trainers: BP, LM, quasi-Newton (BFGS) and SCG.

Every trainer runs full-batch for at most ``params.epochs`` epochs and
never returns non-finite weights.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .mlp import Network, forward_layers, nmse, transfer_derivative

MAX_EPOCHS = 5


class TrainAlgo(enum.Enum):
    BP = "bp"
    LM = "lm"
    QNA = "qna"
    SCG = "scg"


PARAM_RANGES: dict[TrainAlgo, dict[str, tuple[float, float]]] = {
    TrainAlgo.BP: {"learning_rate": (0.05, 0.25), "momentum": (0.05, 0.25)},
    TrainAlgo.LM: {"learning_rate": (0.001, 0.02)},
    TrainAlgo.QNA: {
        "step_size": (1.0e-6, 100.0),
        "step_limit": (0.1, 0.6),
        "perf_scale": (0.001, 0.003),
        "step_scale": (0.001, 0.02),
    },
    TrainAlgo.SCG: {"sigma": (0.0, 1.0e-4), "lambda": (0.0, 1.0e-6)},
}


@dataclass(frozen=True)
class TrainParams:
    algo: TrainAlgo
    values: dict[str, float]
    epochs: int = MAX_EPOCHS

    def __post_init__(self):
        ranges = PARAM_RANGES[self.algo]
        if set(self.values) != set(ranges):
            raise ValueError(f"{self.algo.name} expects parameters {sorted(ranges)}, got {sorted(self.values)}")
        for name, (lo, hi) in ranges.items():
            v = self.values[name]
            if not lo <= v <= hi:
                raise ValueError(f"{self.algo.name}.{name}={v} outside [{lo}, {hi}]")
        if not 1 <= self.epochs <= MAX_EPOCHS:
            raise ValueError(f"epochs must lie in [1, {MAX_EPOCHS}], got {self.epochs}")

    def __getitem__(self, name: str) -> float:
        return self.values[name]


@dataclass
class TrainReport:
    trained: Network
    train_nmse: float
    epochs_run: int


def _arrays(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple):
        x, d = data
    else:
        x, d = data.features, data.targets
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    if x.ndim != 2 or d.ndim != 2 or x.shape[0] != d.shape[0] or x.shape[0] == 0:
        raise ValueError(f"bad batch shapes: inputs {x.shape}, targets {d.shape}")
    return x, d


def gradient(net: Network, batch) -> list[np.ndarray]:
    """Gradient of 0.5 * sum((d - o)**2) over the batch, shaped like ``net.weights``."""
    x, d = _arrays(batch)
    if d.shape[1] != net.arch.output_size:
        raise ValueError(f"targets have {d.shape[1]} columns, network has {net.arch.output_size} outputs")
    acts = forward_layers(net, x)
    fns = net.arch.layer_fns
    delta = (acts[-1] - d) * transfer_derivative(fns[-1], acts[-1])
    grads = [None] * len(net.weights)
    for layer in range(len(net.weights) - 1, -1, -1):
        a = acts[layer]
        grads[layer] = np.hstack([delta.T @ a, delta.sum(axis=0)[:, None]])
        if layer:
            delta = (delta @ net.weights[layer][:, :-1]) * transfer_derivative(fns[layer - 1], a)
    return grads


def jacobian(net: Network, x: np.ndarray) -> np.ndarray:
    """d(output[p, k]) / d(weight) as a (P*N, W) matrix, rows pattern-major."""
    acts = forward_layers(net, x)
    fns = net.arch.layer_fns
    n_out, n_pat = net.arch.output_size, x.shape[0]
    jac = np.empty((n_pat, n_out, net.num_weights))
    # delta[p, k, j]: sensitivity of output k to the net input of unit j
    delta = np.zeros((n_pat, n_out, n_out))
    delta[:, np.arange(n_out), np.arange(n_out)] = transfer_derivative(fns[-1], acts[-1])
    end = jac.shape[2]
    for layer in range(len(net.weights) - 1, -1, -1):
        a = acts[layer]
        rows, cols = net.weights[layer].shape
        block = jac[:, :, end - rows * cols:end].reshape(n_pat, n_out, rows, cols)
        block[..., :-1] = delta[..., None] * a[:, None, None, :]
        block[..., -1] = delta
        end -= rows * cols
        if layer:
            delta = (delta @ net.weights[layer][:, :-1]) * transfer_derivative(fns[layer - 1], a)[:, None, :]
    return jac.reshape(n_pat * n_out, -1)


class _Objective:
    """Mean-over-patterns half squared error on a flat weight vector."""

    def __init__(self, net: Network, x: np.ndarray, d: np.ndarray):
        self.template, self.x, self.d = net, x, d
        self.n = x.shape[0]

    def net(self, w):
        return self.template.with_flat(w)

    def value(self, w) -> float:
        out = forward_layers(self.net(w), self.x)[-1]
        return float(0.5 * np.sum((out - self.d) ** 2) / self.n)

    def grad(self, w) -> np.ndarray:
        g = gradient(self.net(w), (self.x, self.d))
        return np.concatenate([gi.ravel() for gi in g]) / self.n


def _finite(*values) -> bool:
    return all(np.all(np.isfinite(v)) for v in values)


def _train_bp(obj: _Objective, w: np.ndarray, params: TrainParams):
    lr, mom = params["learning_rate"], params["momentum"]
    velocity = np.zeros_like(w)
    epochs = 0
    for _ in range(params.epochs):
        g = obj.grad(w)
        epochs += 1
        if not np.any(g):
            break
        velocity = mom * velocity - lr * g
        w_new = w + velocity
        if not _finite(w_new) or not math.isfinite(obj.value(w_new)):
            break
        w = w_new
    return w, epochs


def _train_lm(obj: _Objective, w: np.ndarray, params: TrainParams):
    mu = params["learning_rate"]
    x, d = obj.x, obj.d

    def residual(v):
        return (forward_layers(obj.net(v), x)[-1] - d).ravel()

    r = residual(w)
    sse = float(r @ r)
    epochs = 0
    for _ in range(params.epochs):
        epochs += 1
        jac = jacobian(obj.net(w), x)
        g = jac.T @ r
        if not np.any(g):
            break
        hess = jac.T @ jac
        diag = np.diag_indices_from(hess)
        base = hess[diag].copy()
        accepted = False
        while mu <= 1e10:
            hess[diag] = base + mu
            try:
                step = cho_solve(cho_factor(hess, check_finite=False), -g, check_finite=False)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            w_new = w + step
            r_new = residual(w_new)
            sse_new = float(r_new @ r_new)
            if _finite(w_new) and math.isfinite(sse_new) and sse_new < sse:
                w, r, sse = w_new, r_new, sse_new
                mu = max(mu / 10.0, 1e-20)
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            break
    return w, epochs


def _train_qna(obj: _Objective, w: np.ndarray, params: TrainParams):
    max_step = params["step_size"]
    shrink_hi = params["step_limit"]
    sufficient = params["perf_scale"]
    shrink_lo = params["step_scale"]
    e, g = obj.value(w), obj.grad(w)
    inv_h = None
    epochs = 0
    for _ in range(params.epochs):
        epochs += 1
        if not np.any(g):
            break
        direction = -g if inv_h is None else -inv_h @ g
        slope = float(g @ direction)
        if slope >= 0:
            inv_h, direction = None, -g
            slope = float(g @ direction)
        norm = float(np.linalg.norm(direction))
        t = min(1.0, max_step / norm)
        accepted = False
        for _ in range(30):
            e_t = obj.value(w + t * direction)
            if math.isfinite(e_t) and e_t <= e + sufficient * t * slope:
                accepted = True
                break
            curvature = e_t - e - slope * t if math.isfinite(e_t) else math.inf
            t_quad = -slope * t * t / (2.0 * curvature) if curvature > 0 else shrink_lo * t
            t = min(max(t_quad, shrink_lo * t), shrink_hi * t)
        if not accepted:
            break
        s = t * direction
        w_new = w + s
        g_new = obj.grad(w_new)
        y = g_new - g
        ys = float(y @ s)
        if ys > 1e-12:
            if inv_h is None:
                inv_h = np.eye(w.size) * (ys / float(y @ y))
            rho = 1.0 / ys
            hy = inv_h @ y
            inv_h = (inv_h - rho * (np.outer(s, hy) + np.outer(hy, s))
                     + (rho * rho * float(y @ hy) + rho) * np.outer(s, s))
        w, e, g = w_new, e_t, g_new
    return w, epochs


_MIN_SIGMA = 1e-7


def _train_scg(obj: _Objective, w: np.ndarray, params: TrainParams):
    # Moller (1993) scaled conjugate gradient
    sigma = max(params["sigma"], _MIN_SIGMA)
    lam = params["lambda"]
    lam_bar = 0.0
    e, g = obj.value(w), obj.grad(w)
    r = -g
    p = r.copy()
    success = True
    delta = 0.0
    epochs = 0
    for k in range(params.epochs):
        epochs += 1
        pp = float(p @ p)
        if pp == 0.0:
            break
        if success:
            sig_k = sigma / math.sqrt(pp)
            s = (obj.grad(w + sig_k * p) - g) / sig_k
            delta = float(p @ s)
        delta += (lam - lam_bar) * pp
        if delta <= 0:
            lam_bar = 2.0 * (lam - delta / pp)
            delta = -delta + lam * pp
            lam = lam_bar
        mu = float(p @ r)
        if delta <= 0 or mu == 0.0:
            break
        alpha = mu / delta
        w_new = w + alpha * p
        e_new = obj.value(w_new)
        big_delta = 2.0 * delta * (e - e_new) / (mu * mu) if math.isfinite(e_new) else -1.0
        if big_delta >= 0:
            g_new = obj.grad(w_new)
            r_new = -g_new
            lam_bar = 0.0
            success = True
            if (k + 1) % w.size == 0:
                p = r_new.copy()
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p = r_new + beta * p
            w, e, g, r = w_new, e_new, g_new, r_new
            if big_delta >= 0.75:
                lam = lam / 4.0
        else:
            lam_bar = lam
            success = False
        if big_delta < 0.25:
            lam = lam + delta * (1.0 - big_delta) / pp
    return w, epochs


_TRAINERS = {
    TrainAlgo.BP: _train_bp,
    TrainAlgo.LM: _train_lm,
    TrainAlgo.QNA: _train_qna,
    TrainAlgo.SCG: _train_scg,
}


def train(net: Network, params: TrainParams, train_set, val_set=None) -> TrainReport:
    """Train a copy of ``net``; ``val_set`` is accepted for symmetry but unused."""
    x, d = _arrays(train_set)
    if d.shape[1] != net.arch.output_size:
        raise ValueError(f"targets have {d.shape[1]} columns, network has {net.arch.output_size} outputs")
    obj = _Objective(net, x, d)
    w0 = net.flat()
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        w, epochs = _TRAINERS[params.algo](obj, w0.copy(), params)
    if not _finite(w):
        w = w0
    trained = net.with_flat(w)
    return TrainReport(trained, nmse(forward_layers(trained, x)[-1], d), epochs)
