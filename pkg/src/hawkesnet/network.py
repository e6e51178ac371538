"""Single-hidden-layer ReLU networks used for kernels and base intensities.

A net with p hidden units maps a scalar x to

    f(x) = b2 + sum_i a2[i] * max(a1[i] * x + b1[i], 0)

so f is piecewise linear with at most p kinks at x = -b1[i]/a1[i].
Everything downstream (intensities, compensators, gradients) leans on that
piecewise linearity, which is why the closed-form integrals here are exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ReluNet",
    "NetGradient",
    "net_forward",
    "net_gradient",
    "net_integral",
    "clamped_net_integral",
    "clamped_net_integral_gradient",
    "net_crossings",
    "kernel_support",
    "init_kernel_net",
    "init_base_net",
    "net_to_dict",
    "net_from_dict",
    "net_to_json",
    "net_from_json",
]

# Segment slopes below this magnitude are treated as flat when solving for
# sign changes of an affine piece.
TINY_SLOPE = 1e-14


@dataclass
class ReluNet:
    """Parameters of one scalar ReLU network."""

    a1: np.ndarray  # hidden slopes, shape (p,)
    b1: np.ndarray  # hidden biases, shape (p,)
    a2: np.ndarray  # output weights, shape (p,)
    b2: float = 0.0  # output bias

    def __post_init__(self) -> None:
        self.a1 = np.asarray(self.a1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.a2 = np.asarray(self.a2, dtype=float)
        self.b2 = float(self.b2)
        if not (self.a1.shape == self.b1.shape == self.a2.shape) or self.a1.ndim != 1:
            raise ValueError("a1, b1, a2 must be 1-d arrays of equal length")

    @property
    def p(self) -> int:
        return self.a1.size

    def __call__(self, x):
        return net_forward(self, x)

    def copy(self) -> "ReluNet":
        return ReluNet(self.a1.copy(), self.b1.copy(), self.a2.copy(), self.b2)


@dataclass
class NetGradient:
    """Parameter gradient of net_forward at a point (or summed over points)."""

    d_a1: np.ndarray
    d_b1: np.ndarray
    d_a2: np.ndarray
    d_b2: float

    def flat(self, with_bias: bool = True) -> np.ndarray:
        """Concatenate as a1 | b1 | a2 | [b2], the model flattening order."""
        parts = [self.d_a1, self.d_b1, self.d_a2]
        if with_bias:
            parts.append([self.d_b2])
        return np.concatenate(parts)


def net_forward(net: ReluNet, x):
    """Evaluate the net at scalar or array x."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return float(net.b2 + net.a2 @ np.maximum(net.a1 * x + net.b1, 0.0))
    # units on rows, evaluation points on columns
    h = np.maximum(np.multiply.outer(net.a1, x) + net.b1[:, None], 0.0)
    return net.b2 + net.a2 @ h


def net_gradient(net: ReluNet, x) -> NetGradient:
    """Analytic parameter gradient at scalar x, summed over x if x is an array.

    Active units are those with a1*x + b1 strictly positive; the derivative at
    a kink is taken from the inactive side, which matters on a measure-zero set
    only.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pre = np.multiply.outer(net.a1, x) + net.b1[:, None]  # (p, n)
    act = pre > 0.0
    d_a2 = np.where(act, pre, 0.0).sum(axis=1)
    d_a1 = net.a2 * (np.where(act, x[None, :], 0.0).sum(axis=1))
    d_b1 = net.a2 * act.sum(axis=1)
    return NetGradient(d_a1=d_a1, d_b1=d_b1, d_a2=d_a2, d_b2=float(x.size))


def net_crossings(net: ReluNet) -> np.ndarray:
    """Kink locations -b1/a1 for units with a1 != 0 (unsorted, may repeat)."""
    nz = net.a1 != 0.0
    return -net.b1[nz] / net.a1[nz]


def _unit_integral(a1: float, b1: float, lo: float, hi: float) -> float:
    # integral of max(a1*x + b1, 0) over [lo, hi], hi >= lo
    if a1 == 0.0:
        return b1 * (hi - lo) if b1 > 0.0 else 0.0
    c = -b1 / a1
    if a1 > 0.0:
        g = max(lo, c)
        if g >= hi:
            return 0.0
        return 0.5 * a1 * (hi * hi - g * g) + b1 * (hi - g)
    h = min(hi, c)
    if h <= lo:
        return 0.0
    return 0.5 * a1 * (h * h - lo * lo) + b1 * (h - lo)


def net_integral(net: ReluNet, lo: float, hi: float) -> float:
    """Exact integral of the (unclamped) net over [lo, hi]."""
    if hi < lo:
        raise ValueError("hi must be >= lo")
    total = net.b2 * (hi - lo)
    for i in range(net.p):
        total += net.a2[i] * _unit_integral(net.a1[i], net.b1[i], lo, hi)
    return float(total)


def _affine_positive_area(c0: float, c1: float, g: float, h: float) -> float:
    # integral of max(c0 + c1*s, 0) over [g, h] for one affine piece
    if h <= g:
        return 0.0
    yg = c0 + c1 * g
    yh = c0 + c1 * h
    if abs(c1) < TINY_SLOPE:
        mid = c0 + c1 * 0.5 * (g + h)
        return mid * (h - g) if mid > 0.0 else 0.0
    s_out = -c0 / c1
    if s_out <= g or s_out >= h:
        return 0.5 * (yg + yh) * (h - g) if (yg + yh) > 0.0 else 0.0
    if yg > 0.0:
        return 0.5 * yg * (s_out - g)
    return 0.5 * yh * (h - s_out)


def clamped_net_integral(net: ReluNet, lo: float, hi: float) -> float:
    """Exact integral of max(net(x), 0) over [lo, hi].

    The net is affine between its kinks, so the integral is assembled from
    trapezoids split at the sign change of each affine piece.
    """
    if hi < lo:
        raise ValueError("hi must be >= lo")
    if hi == lo:
        return 0.0
    xs = net_crossings(net)
    inner = np.sort(xs[(xs > lo) & (xs < hi)])
    bounds = np.concatenate(([lo], inner, [hi]))
    total = 0.0
    for g, h in zip(bounds[:-1], bounds[1:]):
        m = 0.5 * (g + h)
        act = net.a1 * m + net.b1 > 0.0
        c1 = float(net.a2[act] @ net.a1[act])
        c0 = float(net.b2 + net.a2[act] @ net.b1[act])
        total += _affine_positive_area(c0, c1, g, h)
    return float(total)


def clamped_net_integral_gradient(net: ReluNet, lo: float, hi: float) -> NetGradient:
    """Parameter gradient of the clamped integral, indicator sets held fixed.

    Exact almost everywhere; boundary-motion terms vanish because the
    integrand is continuous at kinks and zero at sign changes.
    """
    if hi < lo:
        raise ValueError("hi must be >= lo")
    d_a1 = np.zeros(net.p)
    d_b1 = np.zeros(net.p)
    d_a2 = np.zeros(net.p)
    d_b2 = 0.0
    if hi == lo:
        return NetGradient(d_a1, d_b1, d_a2, d_b2)
    xs = net_crossings(net)
    inner = np.sort(xs[(xs > lo) & (xs < hi)])
    bounds = np.concatenate(([lo], inner, [hi]))
    for g, h in zip(bounds[:-1], bounds[1:]):
        m = 0.5 * (g + h)
        act = net.a1 * m + net.b1 > 0.0
        c1 = float(net.a2[act] @ net.a1[act])
        c0 = float(net.b2 + net.a2[act] @ net.b1[act])
        pl, ph = _positive_span(c0, c1, g, h)
        d1 = ph - pl
        if d1 <= 0.0:
            continue
        d2 = 0.5 * (ph * ph - pl * pl)
        d_a2[act] += d1 * net.b1[act] + d2 * net.a1[act]
        d_a1[act] += net.a2[act] * d2
        d_b1[act] += net.a2[act] * d1
        d_b2 += d1
    return NetGradient(d_a1, d_b1, d_a2, d_b2)


def _positive_span(c0: float, c1: float, g: float, h: float) -> tuple[float, float]:
    # sub-interval of [g, h] where the affine piece is positive
    yg = c0 + c1 * g
    yh = c0 + c1 * h
    if abs(c1) < TINY_SLOPE:
        return (g, h) if (yg + yh) > 0.0 else (g, g)
    s_out = -c0 / c1
    if s_out <= g or s_out >= h:
        return (g, h) if (yg + yh) > 0.0 else (g, g)
    return (g, s_out) if yg > 0.0 else (s_out, h)


def kernel_support(net: ReluNet) -> float:
    """Smallest L with net(x) = 0 for all x > L, or +inf if none exists.

    Only units with a2 != 0 contribute. A nonzero output bias, a unit with
    positive slope that ever activates, or a flat always-on unit all give an
    unbounded tail.
    """
    if net.b2 != 0.0:
        return np.inf
    support = 0.0
    for i in range(net.p):
        if net.a2[i] == 0.0:
            continue
        a1, b1 = net.a1[i], net.b1[i]
        if a1 > 0.0 or (a1 == 0.0 and b1 > 0.0):
            return np.inf
        if a1 == 0.0:
            continue
        support = max(support, max(-b1 / a1, 0.0))
    return support


def init_kernel_net(p: int = 32, rng: np.random.Generator | None = None) -> ReluNet:
    """Kernel-net initialization: downward hinges with small positive mass.

    a1 ~ U(-0.3, 0), a2 ~ U(0, 0.2), b1 ~ U(0, 0.3), b2 = 0.
    """
    rng = np.random.default_rng() if rng is None else rng
    return ReluNet(
        a1=rng.uniform(-0.3, 0.0, size=p),
        b1=rng.uniform(0.0, 0.3, size=p),
        a2=rng.uniform(0.0, 0.2, size=p),
        b2=0.0,
    )


def init_base_net(p: int = 50, rng: np.random.Generator | None = None) -> ReluNet:
    """Base-net initialization: near-flat units spread over the time axis.

    a1 ~ U(-1e-3, 1e-3), a2 ~ U(0, 0.2), b1 ~ U(-1, 1), b2 = 0.
    """
    rng = np.random.default_rng() if rng is None else rng
    return ReluNet(
        a1=rng.uniform(-1e-3, 1e-3, size=p),
        b1=rng.uniform(-1.0, 1.0, size=p),
        a2=rng.uniform(0.0, 0.2, size=p),
        b2=0.0,
    )


def net_to_dict(net: ReluNet) -> dict:
    return {
        "p": net.p,
        "a1": net.a1.tolist(),
        "b1": net.b1.tolist(),
        "a2": net.a2.tolist(),
        "b2": net.b2,
    }


def net_from_dict(d: dict) -> ReluNet:
    net = ReluNet(
        a1=np.array(d["a1"], dtype=float),
        b1=np.array(d["b1"], dtype=float),
        a2=np.array(d["a2"], dtype=float),
        b2=float(d["b2"]),
    )
    if net.p != d["p"]:
        raise ValueError("declared p does not match array lengths")
    return net


def net_to_json(net: ReluNet) -> str:
    # repr-based float serialization round-trips doubles bit-exactly
    return json.dumps(net_to_dict(net))


def net_from_json(s: str) -> ReluNet:
    return net_from_dict(json.loads(s))
