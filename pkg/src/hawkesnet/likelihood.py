"""Exact log-likelihood and unbiased per-event gradients.

The likelihood of dimension d is

    sum_n [ log lambda*_d(t_n^d) - integral of lambda*_d over (t_{n-1}^d, t_n^d] ]

over the observation window, with lambda*_d the clamped intensity and history
from before the window retained. The final partial interval up to the window
end is excluded unless include_tail is set.

Two routes compute the same quantity: log_likelihood sweeps each dimension's
whole window once (toggle events on a sorted breakpoint list, vectorized),
while event_term/event_gradient work per inter-event interval via the segment
machinery. Summing event terms over all window events reproduces the sweep,
which is what makes single-event gradients unbiased for the full gradient.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .events import EventStream
from .intensity import (
    HawkesModel,
    _accumulate_compensator_gradient,
    _positive_parts,
    _segments,
    intensity_value_and_log_gradient,
    kernel_horizon,
)
from .network import (
    ReluNet,
    clamped_net_integral,
    clamped_net_integral_gradient,
    net_crossings,
    net_forward,
    net_gradient,
)

__all__ = [
    "LikelihoodReport",
    "LOG_FLOOR",
    "log_likelihood",
    "window_increments",
    "event_term",
    "event_gradient",
    "batch_gradient",
    "nhpp_log_likelihood",
    "nhpp_event_gradient",
]

# floor under the clamped intensity inside log terms
LOG_FLOOR = 1e-10


@dataclass
class LikelihoodReport:
    total_ll: float
    per_dim_ll: np.ndarray
    n_events: int
    window: tuple[float, float]


def _affine_at(m: HawkesModel, d: int, t: float, stream: EventStream
               ) -> tuple[float, float]:
    """Coefficients (c0, c1) of the raw intensity's affine form around t."""
    c0 = 0.0
    c1 = 0.0
    base = m.bases[d]
    if isinstance(base, ReluNet):
        act = base.a1 * t + base.b1 > 0.0
        c0 += base.b2 + float(base.a2[act] @ base.b1[act])
        c1 += float(base.a2[act] @ base.a1[act])
    else:
        c0 += float(base)
    for j in range(m.D):
        net = m.kernels[d][j]
        tj = stream.dim_times(j)
        i1 = np.searchsorted(tj, t, side="left")
        i0 = np.searchsorted(tj, t - m.max_lag, side="left")
        tk = tj[i0:i1]
        if tk.size == 0:
            continue
        lag = t - tk
        vis = (lag > 0.0) & (lag <= m.max_lag)
        pre = np.multiply.outer(lag, net.a1) + net.b1[None, :]
        act = ((pre > 0.0) & vis[:, None]).astype(float)  # (K, p)
        w1 = net.a2 * net.a1
        u = act @ w1
        c1 += float(u.sum())
        c0 += float((act @ (net.a2 * net.b1)).sum() - u @ tk)
        if m.train_kernel_bias:
            c0 += net.b2 * float(vis.sum())
    return c0, c1


def _unit_windows(net: ReluNet, max_lag: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(on_delay, off_delay, mask) per unit: the lag era a unit contributes in."""
    a1, b1, a2 = net.a1, net.b1, net.a2
    on = np.where((b1 > 0.0) | ((b1 == 0.0) & (a1 > 0.0)), 0.0,
                  np.where(a1 > 0.0, -b1 / np.where(a1 > 0.0, a1, 1.0), np.inf))
    off = np.where(a1 < 0.0, np.minimum(b1 / np.where(a1 < 0.0, -a1, 1.0), max_lag),
                   max_lag)
    ok = (a2 != 0.0) & (on < off) & (on < max_lag)
    return on, off, ok


def _dim_sweep(m: HawkesModel, d: int, stream: EventStream, include_tail: bool
               ) -> tuple[np.ndarray, np.ndarray]:
    """Log-term raw intensities and per-interval compensator increments.

    Returns (values, increments). values[i] is the raw intensity just before
    the i-th window event of dimension d. increments has one entry per event
    interval plus a final tail bucket (integral from the last event to the
    window end, zero unless include_tail).
    """
    w_lo = stream.t_start
    wd = stream.window_dim_times(d)
    n_d = wd.size
    U = stream.t_end if include_tail else (float(wd[-1]) if n_d else w_lo)
    if U <= w_lo:
        return np.zeros(n_d), np.zeros(n_d + 1)
    times_parts: list[np.ndarray] = []
    d0_parts: list[np.ndarray] = []
    d1_parts: list[np.ndarray] = []

    def _push(t: np.ndarray, dc0: np.ndarray, dc1: np.ndarray) -> None:
        keep = (t > w_lo) & (t < U)
        if np.any(keep):
            times_parts.append(t[keep])
            d0_parts.append(dc0[keep])
            d1_parts.append(dc1[keep])

    for j in range(m.D):
        net = m.kernels[d][j]
        horizon, _ = kernel_horizon(net, m.max_lag, m.train_kernel_bias)
        tj = stream.dim_times(j)
        i0 = np.searchsorted(tj, w_lo - horizon, side="left")
        i1 = np.searchsorted(tj, U, side="left")
        tk = tj[i0:i1]
        if tk.size == 0:
            continue
        on, off, ok = _unit_windows(net, m.max_lag)
        if np.any(ok):
            w1 = (net.a2 * net.a1)[ok]
            w0 = (net.a2 * net.b1)[ok]
            dc1 = np.broadcast_to(w1, (tk.size, w1.size)).ravel()
            dc0 = (w0[None, :] - np.multiply.outer(tk, w1)).ravel()
            t_on = (tk[:, None] + on[ok][None, :]).ravel()
            t_off = (tk[:, None] + off[ok][None, :]).ravel()
            _push(t_on, dc0, dc1)
            _push(t_off, -dc0, -dc1)
        if m.train_kernel_bias and net.b2 != 0.0:
            db = np.full(tk.size, net.b2)
            z = np.zeros(tk.size)
            _push(tk, db, z)
            _push(tk + m.max_lag, -db, z)
    base = m.bases[d]
    if isinstance(base, ReluNet):
        nz = (base.a1 != 0.0) & (base.a2 != 0.0)
        if np.any(nz):
            xc = -base.b1[nz] / base.a1[nz]
            sgn = np.sign(base.a1[nz])
            _push(xc, sgn * base.a2[nz] * base.b1[nz], sgn * base.a2[nz] * base.a1[nz])
    # zero-delta breakpoints at own-dimension events keep segments from
    # straddling interval boundaries
    if n_d:
        own = wd[wd < U]
        _push(own, np.zeros(own.size), np.zeros(own.size))

    if times_parts:
        t_all = np.concatenate(times_parts)
        order = np.argsort(t_all, kind="stable")
        t_sorted = t_all[order]
        d0s = np.concatenate(d0_parts)[order]
        d1s = np.concatenate(d1_parts)[order]
    else:
        t_sorted = np.empty(0)
        d0s = np.empty(0)
        d1s = np.empty(0)
    first = t_sorted[0] if t_sorted.size else U
    c0_0, c1_0 = _affine_at(m, d, 0.5 * (w_lo + first), stream)
    c0s = c0_0 + np.concatenate(([0.0], np.cumsum(d0s)))
    c1s = c1_0 + np.concatenate(([0.0], np.cumsum(d1s)))
    bounds = np.concatenate(([w_lo], t_sorted, [U]))
    pos_lo, pos_hi = _positive_parts(bounds, c0s, c1s)
    ypl = c0s + c1s * pos_lo
    yph = c0s + c1s * pos_hi
    areas = 0.5 * (np.maximum(ypl, 0.0) + np.maximum(yph, 0.0)) * (pos_hi - pos_lo)
    idx = np.searchsorted(t_sorted, wd, side="left")
    values = c0s[idx] + c1s[idx] * wd
    bucket = np.searchsorted(wd, bounds[1:], side="left")
    increments = np.bincount(bucket, weights=areas, minlength=n_d + 1)
    return values, increments


def log_likelihood(m: HawkesModel, stream: EventStream,
                   include_tail: bool = False) -> LikelihoodReport:
    """Exact log-likelihood of the window events under the model."""
    per_dim = np.zeros(m.D)
    for d in range(m.D):
        values, increments = _dim_sweep(m, d, stream, include_tail)
        if values.size == 0 and not include_tail:
            warnings.warn(f"dimension {d} has no events in the window")
            continue
        logs = np.log(np.maximum(values, LOG_FLOOR))
        per_dim[d] = logs.sum() - increments.sum() if include_tail \
            else logs.sum() - increments[:-1].sum()
    return LikelihoodReport(total_ll=float(per_dim.sum()), per_dim_ll=per_dim,
                            n_events=stream.n_events,
                            window=(stream.t_start, stream.t_end))


def window_increments(m: HawkesModel, d: int, stream: EventStream) -> np.ndarray:
    """Compensator increments between consecutive dimension-d window events.

    The first increment integrates from the window start; used for
    time-rescaling residuals.
    """
    _, increments = _dim_sweep(m, d, stream, include_tail=False)
    return increments[:-1]


# -- per-event terms --------------------------------------------------------


def _event_interval(stream: EventStream, idx: int) -> tuple[float, int, float]:
    wt = stream.window_times
    wdim = stream.window_dims
    if not 0 <= idx < wt.size:
        raise IndexError(f"event index {idx} outside window of {wt.size} events")
    t_n = float(wt[idx])
    d = int(wdim[idx])
    wd = stream.window_dim_times(d)
    pos = int(np.searchsorted(wd, t_n, side="left"))
    prev = float(wd[pos - 1]) if pos > 0 else stream.t_start
    return t_n, d, prev


def event_term(m: HawkesModel, stream: EventStream, idx: int
               ) -> tuple[float, np.ndarray]:
    """The idx-th window event's likelihood contribution and its gradient.

    The contribution is log lambda*_d(t_n) minus the compensator over the
    interval back to the previous same-dimension event (or the window start).
    """
    t_n, d, prev = _event_interval(stream, idx)
    seg = _segments(m, d, prev, t_n, stream)
    comp = seg.value
    grad = np.zeros(m.n_params)
    _accumulate_compensator_gradient(m, d, seg, grad, scale=-1.0)
    raw, log_grad = intensity_value_and_log_gradient(m, d, t_n, stream)
    grad += log_grad
    ll = float(np.log(max(raw, LOG_FLOOR)) - comp)
    return ll, grad


def event_gradient(m: HawkesModel, stream: EventStream, idx: int) -> np.ndarray:
    """Gradient of one event's likelihood term; unbiased estimator of the
    full gradient divided by the number of window events."""
    return event_term(m, stream, idx)[1]


def batch_gradient(m: HawkesModel, stream: EventStream, indices,
                   workers: int = 1) -> np.ndarray:
    """Average of event_gradient over a batch of window event indices."""
    return _batch_terms(m, stream, indices, workers)[1]


def _batch_terms(m: HawkesModel, stream: EventStream, indices,
                 workers: int = 1) -> tuple[float, np.ndarray]:
    indices = list(indices)
    if not indices:
        raise ValueError("empty batch")
    if workers <= 1:
        acc = np.zeros(m.n_params)
        ll = 0.0
        for i in indices:
            term, grad = event_term(m, stream, i)
            ll += term
            acc += grad
    else:
        chunks = np.array_split(np.asarray(indices), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda ch: _chunk_terms(m, stream, ch), chunks))
        # fixed reduction order keeps results identical for any worker count
        ll = sum(r[0] for r in results)
        acc = np.sum([r[1] for r in results], axis=0)
    n = len(indices)
    return ll / n, acc / n


def _chunk_terms(m: HawkesModel, stream: EventStream, chunk) -> tuple[float, np.ndarray]:
    acc = np.zeros(m.n_params)
    ll = 0.0
    for i in chunk:
        term, grad = event_term(m, stream, int(i))
        ll += term
        acc += grad
    return ll, acc


# -- non-homogeneous Poisson ------------------------------------------------


def nhpp_log_likelihood(net: ReluNet, stream: EventStream) -> LikelihoodReport:
    """Log-likelihood of a 1-d stream under the clamped-net Poisson rate.

    The rate is max(net(t), 0); the integral always runs over the whole
    window, tail included.
    """
    if stream.D != 1:
        raise ValueError("NHPP likelihood expects a 1-dimensional stream")
    wt = stream.window_times
    vals = np.atleast_1d(net_forward(net, wt))
    logs = np.log(np.maximum(vals, LOG_FLOOR))
    integral = clamped_net_integral(net, stream.t_start, stream.t_end)
    total = float(logs.sum() - integral)
    return LikelihoodReport(total_ll=total, per_dim_ll=np.array([total]),
                            n_events=wt.size, window=(stream.t_start, stream.t_end))


def nhpp_event_gradient(net: ReluNet, stream: EventStream, idx: int) -> np.ndarray:
    """Per-event gradient of the Poisson likelihood, flat as a1|b1|a2|b2.

    The window tail is folded into the last event's interval so the terms sum
    to the full objective.
    """
    if stream.D != 1:
        raise ValueError("NHPP gradient expects a 1-dimensional stream")
    wt = stream.window_times
    if not 0 <= idx < wt.size:
        raise IndexError(f"event index {idx} outside window of {wt.size} events")
    t_n = float(wt[idx])
    lo = float(wt[idx - 1]) if idx > 0 else stream.t_start
    hi = stream.t_end if idx == wt.size - 1 else t_n
    grad = -clamped_net_integral_gradient(net, lo, hi).flat(True)
    inner = net_forward(net, t_n)
    if inner > 0.0:
        grad += net_gradient(net, t_n).flat(True) / inner
    return grad
