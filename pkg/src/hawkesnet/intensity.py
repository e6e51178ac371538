"""Model intensities, zero crossings, and exact compensators.

A model's raw intensity for dimension d is

    lambda_d(t) = mu_d(t) + sum_j sum_{t_k^j < t} phi_dj(t - t_k^j)

with mu_d a constant or a ReLU net of absolute time and phi_dj ReLU nets of
the lag. The observed intensity clamps the raw one at zero. Between event
arrivals and hidden-unit kink crossings the raw intensity is affine in t, so
integrals of the clamped intensity (compensators) have closed forms per
segment, and parameter gradients fall out of the same segment sums with the
active-unit indicator sets held fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .events import EventStream
from .network import ReluNet, net_crossings, net_from_dict, net_to_dict

__all__ = [
    "HawkesModel",
    "ParamLayout",
    "Crossing",
    "CrossingSet",
    "SegmentSet",
    "build_model",
    "raw_intensity",
    "intensity",
    "zero_crossings",
    "compensator",
    "compensator_gradient",
    "model_to_dict",
    "model_from_dict",
    "model_to_json",
    "model_from_json",
]

TINY_SLOPE = 1e-14

# parameter role codes, used for the per-layer learning rates
ROLE_KERNEL_OUTPUT = 0
ROLE_KERNEL_HIDDEN = 1
ROLE_BASE_OUTPUT = 2
ROLE_BASE_HIDDEN = 3


@dataclass
class HawkesModel:
    """D-dimensional model: per-dim base plus a D x D grid of kernel nets.

    kernels[d][j] maps lags of dimension-j events into dimension d. Constant
    bases are stored as plain floats. The kernel output bias b2 is frozen at
    zero unless train_kernel_bias is set. max_lag caps how far back any event
    can influence the intensity (on the model's own time axis).
    """

    D: int
    bases: list  # float | ReluNet per dimension
    kernels: list  # D x D nested list of ReluNet
    train_kernel_bias: bool = False
    max_lag: float = 100.0

    _layout: "ParamLayout | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.bases) != self.D or len(self.kernels) != self.D:
            raise ValueError("bases and kernels must have D entries")
        for row in self.kernels:
            if len(row) != self.D:
                raise ValueError("kernels must be a D x D grid")
        self.bases = [b if isinstance(b, ReluNet) else float(b) for b in self.bases]

    @property
    def layout(self) -> "ParamLayout":
        if self._layout is None:
            self._layout = _build_layout(self)
        return self._layout

    @property
    def n_params(self) -> int:
        return self.layout.n

    def get_params(self) -> np.ndarray:
        lay = self.layout
        out = np.empty(lay.n)
        for d in range(self.D):
            b = self.bases[d]
            if isinstance(b, ReluNet):
                sl = lay.base[d]
                out[sl["a1"]] = b.a1
                out[sl["b1"]] = b.b1
                out[sl["a2"]] = b.a2
                out[sl["b2"]] = b.b2
            else:
                out[lay.base[d]["const"]] = b
        for d in range(self.D):
            for j in range(self.D):
                sl = lay.kern[d][j]
                k = self.kernels[d][j]
                out[sl["a1"]] = k.a1
                out[sl["b1"]] = k.b1
                out[sl["a2"]] = k.a2
                if sl["b2"] is not None:
                    out[sl["b2"]] = k.b2
        return out

    def set_params(self, vec: np.ndarray) -> None:
        lay = self.layout
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (lay.n,):
            raise ValueError(f"expected parameter vector of length {lay.n}")
        for d in range(self.D):
            b = self.bases[d]
            if isinstance(b, ReluNet):
                sl = lay.base[d]
                b.a1[:] = vec[sl["a1"]]
                b.b1[:] = vec[sl["b1"]]
                b.a2[:] = vec[sl["a2"]]
                b.b2 = float(vec[sl["b2"]])
            else:
                self.bases[d] = float(vec[lay.base[d]["const"]])
        for d in range(self.D):
            for j in range(self.D):
                sl = lay.kern[d][j]
                k = self.kernels[d][j]
                k.a1[:] = vec[sl["a1"]]
                k.b1[:] = vec[sl["b1"]]
                k.a2[:] = vec[sl["a2"]]
                if sl["b2"] is not None:
                    k.b2 = float(vec[sl["b2"]])

    def copy(self) -> "HawkesModel":
        bases = [b.copy() if isinstance(b, ReluNet) else b for b in self.bases]
        kernels = [[k.copy() for k in row] for row in self.kernels]
        return HawkesModel(D=self.D, bases=bases, kernels=kernels,
                           train_kernel_bias=self.train_kernel_bias,
                           max_lag=self.max_lag)


@dataclass
class ParamLayout:
    """Slices of the flat parameter vector.

    Order: bases by dimension, then kernels row-major by (d, j), each net
    flattened as a1 | b1 | a2 | [b2]. Constant bases occupy one slot.
    """

    n: int
    base: list  # per d: {"const": int} or {"a1": slice, "b1": slice, "a2": slice, "b2": int}
    kern: list  # per (d, j): {"a1": slice, "b1": slice, "a2": slice, "b2": int | None}
    roles: np.ndarray  # per-parameter role code


def _build_layout(m: HawkesModel) -> ParamLayout:
    pos = 0
    roles: list[np.ndarray] = []
    base = []
    for d in range(m.D):
        b = m.bases[d]
        if isinstance(b, ReluNet):
            p = b.p
            sl = {"a1": slice(pos, pos + p), "b1": slice(pos + p, pos + 2 * p),
                  "a2": slice(pos + 2 * p, pos + 3 * p), "b2": pos + 3 * p}
            pos += 3 * p + 1
            roles.append(np.full(p, ROLE_BASE_HIDDEN))
            roles.append(np.full(p, ROLE_BASE_HIDDEN))
            roles.append(np.full(p, ROLE_BASE_OUTPUT))
            roles.append(np.array([ROLE_BASE_OUTPUT]))
        else:
            sl = {"const": pos}
            pos += 1
            roles.append(np.array([ROLE_BASE_OUTPUT]))
        base.append(sl)
    kern = []
    for d in range(m.D):
        row = []
        for j in range(m.D):
            p = m.kernels[d][j].p
            sl = {"a1": slice(pos, pos + p), "b1": slice(pos + p, pos + 2 * p),
                  "a2": slice(pos + 2 * p, pos + 3 * p), "b2": None}
            pos += 3 * p
            roles.append(np.full(p, ROLE_KERNEL_HIDDEN))
            roles.append(np.full(p, ROLE_KERNEL_HIDDEN))
            roles.append(np.full(p, ROLE_KERNEL_OUTPUT))
            if m.train_kernel_bias:
                sl["b2"] = pos
                pos += 1
                roles.append(np.array([ROLE_KERNEL_OUTPUT]))
            row.append(sl)
        kern.append(row)
    return ParamLayout(n=pos, base=base, kern=kern, roles=np.concatenate(roles))


def build_model(D: int, kernel_neurons: int = 32, base_mode: str = "constant",
                base_neurons: int = 50, constant_base_init: float = 1.0,
                train_kernel_bias: bool = False, max_lag: float = 100.0,
                rng: np.random.Generator | None = None) -> HawkesModel:
    """Freshly initialized model with the standard init schemes."""
    from .network import init_base_net, init_kernel_net

    rng = np.random.default_rng() if rng is None else rng
    if base_mode == "constant":
        bases = [constant_base_init for _ in range(D)]
    elif base_mode == "net":
        bases = [init_base_net(base_neurons, rng) for _ in range(D)]
    else:
        raise ValueError(f"unknown base_mode {base_mode!r}")
    kernels = [[init_kernel_net(kernel_neurons, rng) for _ in range(D)]
               for _ in range(D)]
    return HawkesModel(D=D, bases=bases, kernels=kernels,
                       train_kernel_bias=train_kernel_bias, max_lag=max_lag)


# -- kernel visibility ------------------------------------------------------


def kernel_horizon(net: ReluNet, max_lag: float, train_bias: bool) -> tuple[float, bool]:
    """(visibility horizon, capped) for one kernel under the max_lag rule.

    An event older than the horizon cannot contribute. capped means the cap
    actually truncates mass (unbounded tail or a unit support past the cap).
    """
    horizon = 0.0
    capped = False
    contrib = net.a2 != 0.0
    if train_bias and net.b2 != 0.0:
        return max_lag, True
    a1, b1 = net.a1, net.b1
    neg = contrib & (a1 < 0.0) & (b1 > 0.0)
    if np.any(neg):
        offs = b1[neg] / -a1[neg]
        if np.any(offs > max_lag):
            capped = True
        horizon = min(float(offs.max()), max_lag)
    pos = contrib & (a1 > 0.0)
    if np.any(pos):
        on_lags = np.where(b1[pos] >= 0.0, 0.0, -b1[pos] / a1[pos])
        if np.any(on_lags < max_lag):
            horizon = max_lag
        capped = True
    flat = contrib & (a1 == 0.0) & (b1 > 0.0)
    if np.any(flat):
        horizon = max_lag
        capped = True
    return horizon, capped


# -- point evaluation -------------------------------------------------------


def _kernel_value_at(net: ReluNet, lags: np.ndarray, max_lag: float,
                     train_bias: bool) -> float:
    """Sum of kernel contributions over an array of positive lags."""
    vis = (lags > 0.0) & (lags <= max_lag)
    if not np.any(vis):
        return 0.0
    lv = lags[vis]
    pre = np.multiply.outer(net.a1, lv) + net.b1[:, None]
    total = float(net.a2 @ np.maximum(pre, 0.0).sum(axis=1))
    if train_bias:
        total += net.b2 * lv.size
    return total


def _base_value(base, t: float) -> float:
    if isinstance(base, ReluNet):
        from .network import net_forward

        return float(net_forward(base, t))
    return float(base)


def raw_intensity(m: HawkesModel, d: int, t: float, stream: EventStream) -> float:
    """Unclamped intensity of dimension d at time t given history before t."""
    total = _base_value(m.bases[d], t)
    for j in range(m.D):
        tj = stream.dim_times(j)
        i1 = np.searchsorted(tj, t, side="left")
        i0 = np.searchsorted(tj, t - m.max_lag, side="left")
        if i1 > i0:
            total += _kernel_value_at(m.kernels[d][j], t - tj[i0:i1],
                                      m.max_lag, m.train_kernel_bias)
    return float(total)


def intensity(m: HawkesModel, d: int, t: float, stream: EventStream) -> float:
    """Observed (clamped) intensity max(raw, 0)."""
    return max(raw_intensity(m, d, t, stream), 0.0)


# -- zero crossings ---------------------------------------------------------


@dataclass(frozen=True)
class Crossing:
    x: float
    kind: str  # "kernel" | "base"
    j: int = -1  # source dimension (kernel crossings)
    unit: int = -1
    event_time: float = float("nan")


@dataclass
class CrossingSet:
    lo: float
    hi: float
    crossings: list

    def values(self) -> np.ndarray:
        return np.sort(np.array([c.x for c in self.crossings]))


def zero_crossings(m: HawkesModel, d: int, lo: float, hi: float,
                   stream: EventStream) -> CrossingSet:
    """Candidate kink locations of lambda_d inside [lo, hi].

    One candidate t_k^j - b1_i/a1_i per (visible past event, kernel unit with
    a1_i != 0) pair, plus -b1_i/a1_i per base-net unit. Candidates outside a
    unit's active era are harmless extra partition points and are kept. Sign
    changes of the clamped intensity are handled segment-wise by the
    compensator, not listed here.
    """
    if hi < lo:
        raise ValueError("hi must be >= lo")
    out: list[Crossing] = []
    for j in range(m.D):
        net = m.kernels[d][j]
        # lookback covering every unit's forward kink offset, uncapped, so the
        # enumeration is exhaustive
        nz0 = net.a1 != 0.0
        offs = -net.b1[nz0] / net.a1[nz0] if np.any(nz0) else np.zeros(1)
        reach = max(float(offs.max(initial=0.0)), 0.0)
        tj = stream.dim_times(j)
        i0 = np.searchsorted(tj, lo - reach, side="left")
        i1 = np.searchsorted(tj, hi, side="left")
        for tk in tj[i0:i1]:
            for i in range(net.p):
                if net.a1[i] == 0.0:
                    continue
                x = tk - net.b1[i] / net.a1[i]
                if lo <= x <= hi:
                    out.append(Crossing(x=float(x), kind="kernel", j=j, unit=i,
                                        event_time=float(tk)))
    base = m.bases[d]
    if isinstance(base, ReluNet):
        for i in range(base.p):
            if base.a1[i] == 0.0:
                continue
            x = -base.b1[i] / base.a1[i]
            if lo <= x <= hi:
                out.append(Crossing(x=float(x), kind="base", unit=i))
    out.sort(key=lambda c: c.x)
    return CrossingSet(lo=lo, hi=hi, crossings=out)


# -- segment breakdown and compensators ------------------------------------


@dataclass
class SegmentSet:
    """Affine segments of lambda_d over one interval.

    bounds has M+1 entries; segment k spans [bounds[k], bounds[k+1]] with raw
    intensity c0[k] + c1[k] * s. [pos_lo[k], pos_hi[k]] is the sub-interval
    where the raw intensity is positive (empty when pos_lo == pos_hi); its
    interior endpoints are the sign-change points of the clamped intensity.
    """

    lo: float
    hi: float
    bounds: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    pos_lo: np.ndarray
    pos_hi: np.ndarray
    histories: list  # per j: event times feeding the interval

    @property
    def areas(self) -> np.ndarray:
        ypl = self.c0 + self.c1 * self.pos_lo
        yph = self.c0 + self.c1 * self.pos_hi
        return 0.5 * (np.maximum(ypl, 0.0) + np.maximum(yph, 0.0)) * (self.pos_hi - self.pos_lo)

    @property
    def value(self) -> float:
        return float(self.areas.sum())


def _positive_parts(bounds: np.ndarray, c0: np.ndarray, c1: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Positive sub-interval of each affine segment."""
    g, h = bounds[:-1], bounds[1:]
    yg = c0 + c1 * g
    yh = c0 + c1 * h
    flat = np.abs(c1) < TINY_SLOPE
    with np.errstate(divide="ignore", invalid="ignore"):
        s_out = np.where(flat, np.inf, -c0 / np.where(flat, 1.0, c1))
    inside = ~flat & (s_out > g) & (s_out < h)
    whole_pos = (yg + yh) > 0.0  # trapezoid midpoint sign
    pos_lo = np.where(inside, np.where(yg > 0.0, g, s_out), g)
    pos_hi = np.where(inside, np.where(yg > 0.0, s_out, h),
                      np.where(whole_pos, h, g))
    return pos_lo, pos_hi


def _segments(m: HawkesModel, d: int, lo: float, hi: float,
              stream: EventStream, chunk: int = 512) -> SegmentSet:
    """Partition [lo, hi] into affine segments of lambda_d."""
    cuts: list[np.ndarray] = []
    hists: list[np.ndarray] = []
    for j in range(m.D):
        net = m.kernels[d][j]
        horizon, capped = kernel_horizon(net, m.max_lag, m.train_kernel_bias)
        tj = stream.dim_times(j)
        i0 = np.searchsorted(tj, lo - horizon, side="left")
        i1 = np.searchsorted(tj, hi, side="left")
        tk = tj[i0:i1]
        hists.append(tk)
        if tk.size == 0:
            continue
        cuts.append(tk[(tk > lo) & (tk < hi)])
        nz = net.a1 != 0.0
        if np.any(nz):
            x = (tk[:, None] - (net.b1[nz] / net.a1[nz])[None, :]).ravel()
            cuts.append(x[(x > lo) & (x < hi)])
        if capped:
            xc = tk + m.max_lag
            cuts.append(xc[(xc > lo) & (xc < hi)])
    base = m.bases[d]
    if isinstance(base, ReluNet):
        xb = net_crossings(base)
        cuts.append(xb[(xb > lo) & (xb < hi)])
    inner = np.sort(np.concatenate(cuts)) if cuts else np.empty(0)
    bounds = np.concatenate(([lo], inner, [hi]))
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    M = mids.size
    c0 = np.zeros(M)
    c1 = np.zeros(M)
    if isinstance(base, ReluNet):
        act = (np.multiply.outer(base.a1, mids) + base.b1[:, None]) > 0.0
        c0 += base.b2 + base.a2 @ (act * base.b1[:, None])
        c1 += base.a2 @ (act * base.a1[:, None])
    else:
        c0 += float(base)
    for j in range(m.D):
        tk = hists[j]
        if tk.size == 0:
            continue
        net = m.kernels[d][j]
        w1 = net.a2 * net.a1
        w0 = net.a2 * net.b1
        for s0 in range(0, M, chunk):
            s1 = min(s0 + chunk, M)
            lag = mids[s0:s1, None] - tk[None, :]  # (B, K)
            vis = (lag > 0.0) & (lag <= m.max_lag)
            pre = lag[:, :, None] * net.a1[None, None, :] + net.b1[None, None, :]
            act = ((pre > 0.0) & vis[:, :, None]).astype(float)  # (B, K, p)
            u = act @ w1  # (B, K) sum_i act * a2*a1
            v = act @ w0
            c1[s0:s1] += u.sum(axis=1)
            c0[s0:s1] += v.sum(axis=1) - u @ tk
            if m.train_kernel_bias:
                c0[s0:s1] += net.b2 * vis.sum(axis=1)
    pos_lo, pos_hi = _positive_parts(bounds, c0, c1)
    return SegmentSet(lo=lo, hi=hi, bounds=bounds, c0=c0, c1=c1,
                      pos_lo=pos_lo, pos_hi=pos_hi, histories=hists)


def compensator(m: HawkesModel, d: int, lo: float, hi: float,
                stream: EventStream) -> tuple[float, SegmentSet]:
    """Exact integral of the clamped intensity of dimension d over [lo, hi]."""
    if hi < lo:
        raise ValueError("hi must be >= lo")
    if hi == lo:
        empty = SegmentSet(lo=lo, hi=hi, bounds=np.array([lo, hi]),
                           c0=np.zeros(1), c1=np.zeros(1),
                           pos_lo=np.array([lo]), pos_hi=np.array([lo]),
                           histories=[np.empty(0)] * m.D)
        return 0.0, empty
    seg = _segments(m, d, lo, hi, stream)
    return seg.value, seg


def compensator_gradient(m: HawkesModel, d: int, lo: float, hi: float,
                         stream: EventStream,
                         segments: SegmentSet | None = None) -> np.ndarray:
    """Gradient of the compensator w.r.t. the flat parameter vector.

    Derivative of the segment-wise closed form with every indicator set held
    fixed; exact almost everywhere in parameter space. Entries for other
    dimensions' bases and kernels are zero.
    """
    seg = segments if segments is not None else _segments(m, d, lo, hi, stream)
    grad = np.zeros(m.n_params)
    _accumulate_compensator_gradient(m, d, seg, grad)
    return grad


def _accumulate_compensator_gradient(m: HawkesModel, d: int, seg: SegmentSet,
                                     grad: np.ndarray, scale: float = 1.0,
                                     chunk: int = 512) -> None:
    lay = m.layout
    d1 = (seg.pos_hi - seg.pos_lo) * scale
    d2 = 0.5 * (seg.pos_hi ** 2 - seg.pos_lo ** 2) * scale
    mids = 0.5 * (seg.bounds[:-1] + seg.bounds[1:])
    base = m.bases[d]
    bsl = lay.base[d]
    if isinstance(base, ReluNet):
        act = (np.multiply.outer(base.a1, mids) + base.b1[:, None]) > 0.0  # (p, M)
        s1 = act @ d1
        s2 = act @ d2
        grad[bsl["a1"]] += base.a2 * s2
        grad[bsl["b1"]] += base.a2 * s1
        grad[bsl["a2"]] += base.b1 * s1 + base.a1 * s2
        grad[bsl["b2"]] += d1.sum()
    else:
        grad[bsl["const"]] += d1.sum()
    M = mids.size
    for j in range(m.D):
        tk = seg.histories[j]
        if tk.size == 0:
            continue
        net = m.kernels[d][j]
        ksl = lay.kern[d][j]
        g_a1 = np.zeros(net.p)
        g_b1 = np.zeros(net.p)
        g_a2 = np.zeros(net.p)
        g_b2 = 0.0
        for s0 in range(0, M, chunk):
            s1_ = min(s0 + chunk, M)
            lag = mids[s0:s1_, None] - tk[None, :]
            vis = (lag > 0.0) & (lag <= m.max_lag)
            pre = lag[:, :, None] * net.a1[None, None, :] + net.b1[None, None, :]
            act = ((pre > 0.0) & vis[:, :, None]).astype(float)  # (B, K, p)
            n_mi = act.sum(axis=1)  # (B, p)
            s_mi = np.einsum("bkp,k->bp", act, tk)
            w1 = d1[s0:s1_]
            w2 = d2[s0:s1_]
            t1n = w1 @ n_mi  # (p,)
            t1s = w1 @ s_mi
            t2n = w2 @ n_mi
            g_a2 += net.b1 * t1n - net.a1 * t1s + net.a1 * t2n
            g_a1 += net.a2 * (t2n - t1s)
            g_b1 += net.a2 * t1n
            if m.train_kernel_bias:
                g_b2 += float(w1 @ vis.sum(axis=1))
        grad[ksl["a1"]] += g_a1
        grad[ksl["b1"]] += g_b1
        grad[ksl["a2"]] += g_a2
        if ksl["b2"] is not None:
            grad[ksl["b2"]] += g_b2


def intensity_value_and_log_gradient(m: HawkesModel, d: int, t: float,
                                     stream: EventStream
                                     ) -> tuple[float, np.ndarray]:
    """Raw intensity at t and the gradient of log(clamped intensity).

    The log gradient is zero whenever the raw intensity is non-positive (the
    clamp's subgradient choice, which also kills the floored log terms).
    """
    lay = m.layout
    grad = np.zeros(lay.n)
    raw = _base_value(m.bases[d], t)
    masks = []
    for j in range(m.D):
        tj = stream.dim_times(j)
        i1 = np.searchsorted(tj, t, side="left")
        i0 = np.searchsorted(tj, t - m.max_lag, side="left")
        tk = tj[i0:i1]
        net = m.kernels[d][j]
        if tk.size:
            lag = t - tk
            vis = (lag > 0.0) & (lag <= m.max_lag)
            pre = np.multiply.outer(lag, net.a1) + net.b1[None, :]  # (K, p)
            act = (pre > 0.0) & vis[:, None]
            raw += float((np.where(act, pre, 0.0) @ net.a2).sum())
            if m.train_kernel_bias:
                raw += net.b2 * int(vis.sum())
        else:
            lag = tk
            vis = np.zeros(0, dtype=bool)
            pre = np.zeros((0, net.p))
            act = np.zeros((0, net.p), dtype=bool)
        masks.append((tk, lag, vis, pre, act))
    if raw <= 0.0:
        return raw, grad
    inv = 1.0 / raw
    base = m.bases[d]
    bsl = lay.base[d]
    if isinstance(base, ReluNet):
        preb = base.a1 * t + base.b1
        actb = preb > 0.0
        grad[bsl["a1"]] = np.where(actb, base.a2 * t, 0.0) * inv
        grad[bsl["b1"]] = np.where(actb, base.a2, 0.0) * inv
        grad[bsl["a2"]] = np.where(actb, preb, 0.0) * inv
        grad[bsl["b2"]] = inv
    else:
        grad[bsl["const"]] = inv
    for j in range(m.D):
        tk, lag, vis, pre, act = masks[j]
        if tk.size == 0:
            continue
        net = m.kernels[d][j]
        ksl = lay.kern[d][j]
        grad[ksl["a2"]] = np.where(act, pre, 0.0).sum(axis=0) * inv
        grad[ksl["a1"]] = net.a2 * (np.where(act, lag[:, None], 0.0).sum(axis=0)) * inv
        grad[ksl["b1"]] = net.a2 * act.sum(axis=0) * inv
        if ksl["b2"] is not None:
            grad[ksl["b2"]] = float(vis.sum()) * inv
    return raw, grad


# -- serialization ----------------------------------------------------------


def model_to_dict(m: HawkesModel) -> dict:
    bases = []
    for b in m.bases:
        if isinstance(b, ReluNet):
            bases.append({"kind": "net", **net_to_dict(b)})
        else:
            bases.append({"kind": "constant", "value": b})
    return {
        "D": m.D,
        "train_kernel_bias": m.train_kernel_bias,
        "max_lag": m.max_lag,
        "bases": bases,
        "kernels": [[net_to_dict(k) for k in row] for row in m.kernels],
    }


def model_from_dict(d: dict) -> HawkesModel:
    bases = []
    for b in d["bases"]:
        if b["kind"] == "net":
            bases.append(net_from_dict(b))
        elif b["kind"] == "constant":
            bases.append(float(b["value"]))
        else:
            raise ValueError(f"unknown base kind {b['kind']!r}")
    kernels = [[net_from_dict(k) for k in row] for row in d["kernels"]]
    return HawkesModel(D=int(d["D"]), bases=bases, kernels=kernels,
                       train_kernel_bias=bool(d["train_kernel_bias"]),
                       max_lag=float(d["max_lag"]))


def model_to_json(m: HawkesModel) -> str:
    return json.dumps(model_to_dict(m))


def model_from_json(s: str) -> HawkesModel:
    return model_from_dict(json.loads(s))
