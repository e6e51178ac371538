"""Batch SGD with Adam, per-layer learning rates, and early stopping.

The objective is the negative log-likelihood; each iteration averages
per-event gradients over a uniformly sampled batch. Validation NLL is checked
on a fixed cadence and the best-checkpoint parameters are returned, stopping
after `patience` consecutive checks without improvement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .events import EventStream
from .intensity import (
    HawkesModel,
    ROLE_BASE_HIDDEN,
    ROLE_BASE_OUTPUT,
    ROLE_KERNEL_HIDDEN,
    ROLE_KERNEL_OUTPUT,
    build_model,
)
from .likelihood import (
    _batch_terms,
    log_likelihood,
    nhpp_event_gradient,
    nhpp_log_likelihood,
)
from .network import ReluNet, init_base_net

__all__ = [
    "AdamState",
    "FitConfig",
    "FitTrace",
    "NonFiniteGradientError",
    "adam_step",
    "fit",
    "fit_nhpp",
]

log = logging.getLogger(__name__)


class NonFiniteGradientError(RuntimeError):
    """Raised when a gradient contains NaN or infinity."""


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), t=0)


@dataclass
class FitConfig:
    """Fitting configuration. Defaults follow the standard recipe."""

    kernel_neurons: int = 32
    base_neurons: int = 50
    base_mode: str = "constant"  # "constant" | "net"
    constant_base_init: float = 1.0
    train_kernel_bias: bool = False
    include_tail: bool = False
    max_lag: float = 100.0
    batch_size: int = 100
    max_iters: int = 2000
    lr_kernel_output: float = 1e-2
    lr_kernel_hidden: float = 1e-3
    lr_base_output: float = 1e-3
    lr_base_hidden: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 10
    val_check_interval: int = 1
    seed: int = 0
    workers: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FitTrace:
    """Per-check records plus how and where the loop stopped."""

    iterations: list = field(default_factory=list)
    train_nll: list = field(default_factory=list)  # batch-based estimates
    val_nll: list = field(default_factory=list)
    best_iteration: int = 0
    best_val_nll: float = float("inf")
    stop_reason: str = ""

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,train_nll,val_nll\n")
            for it, tr, va in zip(self.iterations, self.train_nll, self.val_nll):
                fh.write(f"{it},{tr!r},{va!r}\n")


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray,
              lr: np.ndarray | float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> np.ndarray:
    """One Adam update; returns the new parameter vector.

    grad is the gradient of the objective being minimized. lr may be a vector
    for per-parameter rates.
    """
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError("non-finite gradient entry")
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps)


def _learning_rates(roles: np.ndarray, cfg: FitConfig) -> np.ndarray:
    lr = np.empty(roles.size)
    lr[roles == ROLE_KERNEL_OUTPUT] = cfg.lr_kernel_output
    lr[roles == ROLE_KERNEL_HIDDEN] = cfg.lr_kernel_hidden
    lr[roles == ROLE_BASE_OUTPUT] = cfg.lr_base_output
    lr[roles == ROLE_BASE_HIDDEN] = cfg.lr_base_hidden
    return lr


@dataclass
class _LoopState:
    """Mutable fit-loop state, checkpointable for exact resumption."""

    iteration: int = 0
    best_params: np.ndarray | None = None
    best_val: float = float("inf")
    best_iteration: int = 0
    checks_since_improve: int = 0


def fit(train: EventStream, val: EventStream, cfg: FitConfig | None = None,
        resume: dict | None = None, checkpoint_hook=None
        ) -> tuple[HawkesModel, FitTrace]:
    """Fit a Hawkes model to the training window by batch Adam SGD.

    resume, if given, is a state dict produced by a checkpoint_hook call and
    continues the run bit-exactly. checkpoint_hook(state_dict) is invoked
    after every validation check.
    """
    cfg = cfg or FitConfig()
    ss = np.random.SeedSequence(cfg.seed)
    ss_init, ss_batch = ss.spawn(2)
    rng_batch = np.random.default_rng(ss_batch)
    model = build_model(train.D, kernel_neurons=cfg.kernel_neurons,
                        base_mode=cfg.base_mode, base_neurons=cfg.base_neurons,
                        constant_base_init=cfg.constant_base_init,
                        train_kernel_bias=cfg.train_kernel_bias,
                        max_lag=cfg.max_lag,
                        rng=np.random.default_rng(ss_init))
    params = model.get_params()
    adam = AdamState.zeros(params.size)
    loop = _LoopState(best_params=params.copy())
    trace = FitTrace()
    if resume is not None:
        params = np.asarray(resume["params"], dtype=float)
        adam = AdamState(m=np.asarray(resume["adam_m"], dtype=float),
                         v=np.asarray(resume["adam_v"], dtype=float),
                         t=int(resume["adam_t"]))
        rng_batch.bit_generator.state = resume["rng_state"]
        loop = _LoopState(iteration=int(resume["iteration"]),
                          best_params=np.asarray(resume["best_params"], dtype=float),
                          best_val=float(resume["best_val"]),
                          best_iteration=int(resume["best_iteration"]),
                          checks_since_improve=int(resume["checks_since_improve"]))
        trace = FitTrace(iterations=list(resume["trace_iterations"]),
                         train_nll=list(resume["trace_train_nll"]),
                         val_nll=list(resume["trace_val_nll"]))
    model.set_params(params)
    lr = _learning_rates(model.layout.roles, cfg)
    n_train = train.n_events
    if n_train == 0:
        raise ValueError("training window has no events")
    batch = min(cfg.batch_size, n_train)

    def _val_nll() -> float:
        return -log_likelihood(model, val, include_tail=cfg.include_tail).total_ll

    stop_reason = "max_iters"
    while loop.iteration < cfg.max_iters:
        loop.iteration += 1
        idxs = rng_batch.choice(n_train, size=batch, replace=False)
        try:
            mean_ll, grad_ll = _batch_terms(model, train, idxs, workers=cfg.workers)
            params = adam_step(adam, params, -grad_ll, lr,
                               cfg.beta1, cfg.beta2, cfg.eps)
        except NonFiniteGradientError:
            log.warning("non-finite gradient at iteration %d; aborting fit",
                        loop.iteration)
            stop_reason = "non_finite_gradient"
            break
        model.set_params(params)
        if loop.iteration % cfg.val_check_interval == 0:
            val_nll = _val_nll()
            train_est = -mean_ll * n_train
            trace.iterations.append(loop.iteration)
            trace.train_nll.append(train_est)
            trace.val_nll.append(val_nll)
            if val_nll < loop.best_val:
                loop.best_val = val_nll
                loop.best_params = params.copy()
                loop.best_iteration = loop.iteration
                loop.checks_since_improve = 0
            else:
                loop.checks_since_improve += 1
            if checkpoint_hook is not None:
                checkpoint_hook(_loop_state_dict(params, adam, rng_batch, loop, trace))
            if loop.checks_since_improve >= cfg.patience:
                stop_reason = "early_stopping"
                break
    model.set_params(loop.best_params if loop.best_params is not None else params)
    trace.best_iteration = loop.best_iteration
    trace.best_val_nll = loop.best_val
    trace.stop_reason = stop_reason
    return model, trace


def _loop_state_dict(params: np.ndarray, adam: AdamState,
                     rng: np.random.Generator, loop: _LoopState,
                     trace: FitTrace) -> dict:
    return {
        "params": params.tolist(),
        "adam_m": adam.m.tolist(),
        "adam_v": adam.v.tolist(),
        "adam_t": adam.t,
        "rng_state": rng.bit_generator.state,
        "iteration": loop.iteration,
        "best_params": loop.best_params.tolist(),
        "best_val": loop.best_val,
        "best_iteration": loop.best_iteration,
        "checks_since_improve": loop.checks_since_improve,
        "trace_iterations": list(trace.iterations),
        "trace_train_nll": list(trace.train_nll),
        "trace_val_nll": list(trace.val_nll),
    }


def fit_nhpp(train: EventStream, val: EventStream, cfg: FitConfig | None = None,
             resume: dict | None = None, checkpoint_hook=None
             ) -> tuple[ReluNet, FitTrace]:
    """Fit the clamped-net Poisson rate by the same batch Adam recipe."""
    cfg = cfg or FitConfig()
    ss = np.random.SeedSequence(cfg.seed)
    ss_init, ss_batch = ss.spawn(2)
    rng_batch = np.random.default_rng(ss_batch)
    net = init_base_net(cfg.base_neurons, np.random.default_rng(ss_init))
    p = net.p
    params = np.concatenate([net.a1, net.b1, net.a2, [net.b2]])
    adam = AdamState.zeros(params.size)
    loop = _LoopState(best_params=params.copy())
    trace = FitTrace()
    if resume is not None:
        params = np.asarray(resume["params"], dtype=float)
        adam = AdamState(m=np.asarray(resume["adam_m"], dtype=float),
                         v=np.asarray(resume["adam_v"], dtype=float),
                         t=int(resume["adam_t"]))
        rng_batch.bit_generator.state = resume["rng_state"]
        loop = _LoopState(iteration=int(resume["iteration"]),
                          best_params=np.asarray(resume["best_params"], dtype=float),
                          best_val=float(resume["best_val"]),
                          best_iteration=int(resume["best_iteration"]),
                          checks_since_improve=int(resume["checks_since_improve"]))
        trace = FitTrace(iterations=list(resume["trace_iterations"]),
                         train_nll=list(resume["trace_train_nll"]),
                         val_nll=list(resume["trace_val_nll"]))

    def _apply(vec: np.ndarray) -> None:
        net.a1[:] = vec[:p]
        net.b1[:] = vec[p:2 * p]
        net.a2[:] = vec[2 * p:3 * p]
        net.b2 = float(vec[3 * p])

    _apply(params)
    roles = np.concatenate([np.full(2 * p, ROLE_BASE_HIDDEN),
                            np.full(p + 1, ROLE_BASE_OUTPUT)])
    lr = _learning_rates(roles, cfg)
    n_train = train.n_events
    if n_train == 0:
        raise ValueError("training window has no events")
    batch = min(cfg.batch_size, n_train)
    stop_reason = "max_iters"
    while loop.iteration < cfg.max_iters:
        loop.iteration += 1
        idxs = rng_batch.choice(n_train, size=batch, replace=False)
        grad = np.zeros(params.size)
        for i in idxs:
            grad += nhpp_event_gradient(net, train, int(i))
        grad /= batch
        try:
            params = adam_step(adam, params, -grad, lr,
                               cfg.beta1, cfg.beta2, cfg.eps)
        except NonFiniteGradientError:
            log.warning("non-finite gradient at iteration %d; aborting fit",
                        loop.iteration)
            stop_reason = "non_finite_gradient"
            break
        _apply(params)
        if loop.iteration % cfg.val_check_interval == 0:
            val_nll = -nhpp_log_likelihood(net, val).total_ll
            train_nll = -nhpp_log_likelihood(net, train).total_ll
            trace.iterations.append(loop.iteration)
            trace.train_nll.append(train_nll)
            trace.val_nll.append(val_nll)
            if val_nll < loop.best_val:
                loop.best_val = val_nll
                loop.best_params = params.copy()
                loop.best_iteration = loop.iteration
                loop.checks_since_improve = 0
            else:
                loop.checks_since_improve += 1
            if checkpoint_hook is not None:
                checkpoint_hook(_loop_state_dict(params, adam, rng_batch, loop, trace))
            if loop.checks_since_improve >= cfg.patience:
                stop_reason = "early_stopping"
                break
    _apply(loop.best_params if loop.best_params is not None else params)
    trace.best_iteration = loop.best_iteration
    trace.best_val_nll = loop.best_val
    trace.stop_reason = stop_reason
    return net, trace
