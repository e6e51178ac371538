"""Ground-truth simulators: parametric Hawkes by Ogata thinning, NHPP by
Lewis thinning, plus exact-enough likelihood and residual evaluation for the
simulated (parametric) models via piecewise quadrature.

Kernels are exponential alpha*exp(-beta*t), rectangular alpha*beta on
[delta, delta+1/beta] (closed endpoints), or zero. Base rates are constants
or named functions of absolute time. The transfer Psi mapping raw to observed
intensity is max(., 0) or a shifted sigmoid.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .events import EventStream

__all__ = [
    "ParametricKernel",
    "BaseRate",
    "PsiSpec",
    "GroundTruthModel",
    "simulate_hawkes",
    "simulate_nhpp",
    "intensity_trace",
    "gt_log_likelihood",
    "gt_increments",
    "gt_to_dict",
    "gt_from_dict",
]

# positive kernel tails are truncated where they drop below this
TAIL_TOL = 1e-12


@dataclass(frozen=True)
class ParametricKernel:
    kind: str  # "exponential" | "rectangular" | "zero"
    alpha: float = 0.0
    beta: float = 1.0
    delta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("exponential", "rectangular", "zero"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind != "zero" and self.beta <= 0.0:
            raise ValueError("beta must be positive")

    def value(self, lags: np.ndarray) -> np.ndarray:
        """Kernel value at positive lags (vectorized); zero elsewhere."""
        lags = np.asarray(lags, dtype=float)
        if self.kind == "exponential":
            out = self.alpha * np.exp(-self.beta * np.minimum(lags, 700.0 / self.beta))
            return np.where(lags > 0.0, out, 0.0)
        if self.kind == "rectangular":
            inside = (lags >= self.delta) & (lags <= self.delta + 1.0 / self.beta)
            return np.where((lags > 0.0) & inside, self.alpha * self.beta, 0.0)
        return np.zeros_like(lags)

    def pos_tail_max(self, lag0: float) -> float:
        """sup over lag >= lag0 of max(value, 0), the thinning bound piece."""
        if self.alpha <= 0.0 or self.kind == "zero":
            return 0.0
        if self.kind == "exponential":
            return self.alpha * np.exp(-self.beta * max(lag0, 0.0))
        return self.alpha * self.beta if lag0 <= self.delta + 1.0 / self.beta else 0.0

    def trunc_lag(self) -> float:
        """Lag beyond which the kernel is negligible (exact for rectangular)."""
        if self.kind == "zero" or self.alpha == 0.0:
            return 0.0
        if self.kind == "exponential":
            return float(np.log(abs(self.alpha) / TAIL_TOL) / self.beta)
        return self.delta + 1.0 / self.beta

    def cut_lags(self) -> tuple[float, ...]:
        """Lags where the kernel jumps; quadrature splits there."""
        if self.kind == "rectangular" and self.alpha != 0.0:
            return (self.delta, self.delta + 1.0 / self.beta)
        return ()

    def integral(self, lo: float = 0.0, hi: float = np.inf) -> float:
        """Integral of the kernel over [max(lo,0), hi]."""
        lo = max(lo, 0.0)
        if hi <= lo:
            return 0.0
        if self.kind == "zero" or self.alpha == 0.0:
            return 0.0
        if self.kind == "exponential":
            hi_t = np.exp(-self.beta * hi) if np.isfinite(hi) else 0.0
            return self.alpha / self.beta * (np.exp(-self.beta * lo) - hi_t)
        a, b = self.delta, self.delta + 1.0 / self.beta
        overlap = max(0.0, min(hi, b) - max(lo, a))
        return self.alpha * self.beta * overlap


@dataclass(frozen=True)
class BaseRate:
    """Named base-rate functions of absolute time.

    constant:     a
    exponential:  a * exp(-b t)
    parabola:     a * (b t - c)^2
    sine:         a * (sin(b t - c) + d)
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "exponential", "parabola", "sine"):
            raise ValueError(f"unknown base kind {self.kind!r}")

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.a)
        if self.kind == "exponential":
            return self.a * np.exp(-self.b * t)
        if self.kind == "parabola":
            return self.a * (self.b * t - self.c) ** 2
        return self.a * (np.sin(self.b * t - self.c) + self.d)

    def integral(self, lo: float, hi: float) -> float:
        if hi < lo:
            raise ValueError("hi must be >= lo")
        if self.kind == "constant":
            return self.a * (hi - lo)
        if self.kind == "exponential":
            if self.b == 0.0:
                return self.a * (hi - lo)
            return self.a / self.b * (np.exp(-self.b * lo) - np.exp(-self.b * hi))
        if self.kind == "parabola":
            if self.b == 0.0:
                return self.a * self.c ** 2 * (hi - lo)
            f = lambda t: (self.b * t - self.c) ** 3 / (3.0 * self.b)
            return self.a * (f(hi) - f(lo))
        if self.b == 0.0:
            return self.a * (np.sin(-self.c) + self.d) * (hi - lo)
        f = lambda t: -np.cos(self.b * t - self.c) / self.b + self.d * t
        return self.a * (f(hi) - f(lo))

    def max_on(self, lo: float, hi: float) -> float:
        """Upper bound of the rate over [lo, hi]."""
        if self.kind == "constant":
            return self.a
        if self.kind == "exponential":
            return float(max(self.value(lo), self.value(hi)))
        if self.kind == "parabola":
            return float(max(self.value(lo), self.value(hi)))  # convex
        return self.a * (1.0 + self.d)


@dataclass(frozen=True)
class PsiSpec:
    """Transfer from raw to observed intensity."""

    kind: str = "max"  # "max" | "sigmoid"
    shift: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in ("max", "sigmoid"):
            raise ValueError(f"unknown transfer kind {self.kind!r}")

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "max":
            return np.maximum(x, 0.0)
        return 1.0 / (1.0 + np.exp(-np.clip(x - self.shift, -700.0, 700.0)))

    def bound(self, raw_bound: float) -> float:
        """Upper bound on the observed intensity given a raw upper bound."""
        if self.kind == "max":
            return max(raw_bound, 0.0)
        return float(self.apply(raw_bound))


def _as_base(b) -> BaseRate:
    if isinstance(b, BaseRate):
        return b
    return BaseRate(kind="constant", a=float(b))


@dataclass
class GroundTruthModel:
    D: int
    bases: list  # BaseRate | float per dimension
    kernels: list  # D x D nested list of ParametricKernel
    psi: PsiSpec = PsiSpec()

    def __post_init__(self) -> None:
        if len(self.bases) != self.D or len(self.kernels) != self.D:
            raise ValueError("bases and kernels must have D entries")
        for row in self.kernels:
            if len(row) != self.D:
                raise ValueError("kernels must be a D x D grid")
        self.bases = [_as_base(b) for b in self.bases]

    def raw_intensity_at(self, d: int, s: float, dim_times: list) -> float:
        total = float(self.bases[d].value(s))
        for j in range(self.D):
            k = self.kernels[d][j]
            trunc = k.trunc_lag()
            if trunc <= 0.0:
                continue
            tj = dim_times[j]
            i1 = np.searchsorted(tj, s, side="left")
            i0 = np.searchsorted(tj, s - trunc, side="left")
            if i1 > i0:
                total += float(k.value(s - tj[i0:i1]).sum())
        return total


def simulate_hawkes(gt: GroundTruthModel, horizon: float,
                    rng: np.random.Generator, max_events: int | None = None,
                    debug: bool = False) -> EventStream:
    """Multivariate Ogata thinning.

    The proposal bound sums, per dimension, the future maximum of the base
    over the remaining window and each past event's positive kernel tail
    maximum; both are non-increasing in time, so a bound computed now stays
    valid until the next accepted or rejected candidate.
    """
    if horizon <= 0.0:
        warnings.warn("non-positive horizon: returning an empty stream")
        return EventStream(times=np.empty(0), dims=np.empty(0, dtype=int),
                           D=gt.D, t_start=0.0, t_end=max(horizon, 0.0))
    D = gt.D
    dim_times: list[list[float]] = [[] for _ in range(D)]
    dim_arrays = [np.empty(0)] * D
    times: list[float] = []
    dims: list[int] = []
    pos_trunc = [[gt.kernels[d][j].trunc_lag() if gt.kernels[d][j].alpha > 0.0 else 0.0
                  for j in range(D)] for d in range(D)]
    t = 0.0
    while t < horizon:
        raw_bounds = np.zeros(D)
        for d in range(D):
            rb = gt.bases[d].max_on(t, horizon)
            for j in range(D):
                k = gt.kernels[d][j]
                if k.pos_tail_max(0.0) <= 0.0:
                    continue
                tj = dim_arrays[j]
                i0 = np.searchsorted(tj, t - pos_trunc[d][j], side="left")
                for tk in tj[i0:]:
                    rb += k.pos_tail_max(t - tk)
            raw_bounds[d] = rb
        lam_bar = float(sum(gt.psi.bound(rb) for rb in raw_bounds))
        if lam_bar <= TAIL_TOL:
            break  # nothing can ever fire again
        s = t + rng.exponential(1.0 / lam_bar)
        if s >= horizon:
            break
        lam = np.array([float(gt.psi.apply(gt.raw_intensity_at(d, s, dim_arrays)))
                        for d in range(D)])
        total = float(lam.sum())
        if debug and total > lam_bar * (1.0 + 1e-9):
            raise AssertionError(
                f"thinning bound violated: {total} > {lam_bar} at t={s}")
        u = rng.uniform()
        if u * lam_bar < total:
            d_new = int(np.searchsorted(np.cumsum(lam), u * lam_bar, side="right"))
            d_new = min(d_new, D - 1)
            times.append(s)
            dims.append(d_new)
            dim_times[d_new].append(s)
            dim_arrays[d_new] = np.asarray(dim_times[d_new])
            if max_events is not None and len(times) >= max_events:
                warnings.warn(f"stopping at max_events={max_events} before the horizon")
                return EventStream(times=np.array(times), dims=np.array(dims),
                                   D=D, t_start=0.0, t_end=s)
        t = s
    return EventStream(times=np.array(times), dims=np.array(dims, dtype=int),
                       D=D, t_start=0.0, t_end=horizon)


def simulate_nhpp(base: BaseRate | float, horizon: float,
                  rng: np.random.Generator) -> EventStream:
    """Lewis thinning of a homogeneous proposal at the base's maximum rate."""
    base = _as_base(base)
    if horizon <= 0.0:
        warnings.warn("non-positive horizon: returning an empty stream")
        return EventStream(times=np.empty(0), dims=np.empty(0, dtype=int),
                           D=1, t_start=0.0, t_end=max(horizon, 0.0))
    lam_bar = base.max_on(0.0, horizon)
    if lam_bar <= 0.0:
        return EventStream(times=np.empty(0), dims=np.empty(0, dtype=int),
                           D=1, t_start=0.0, t_end=horizon)
    n_cand = rng.poisson(lam_bar * horizon)
    cand = np.sort(rng.uniform(0.0, horizon, size=n_cand))
    accept = rng.uniform(size=n_cand) * lam_bar < base.value(cand)
    kept = cand[accept]
    return EventStream(times=kept, dims=np.zeros(kept.size, dtype=int),
                       D=1, t_start=0.0, t_end=horizon)


def intensity_trace(gt: GroundTruthModel, stream: EventStream,
                    grid: np.ndarray) -> np.ndarray:
    """Observed intensity of each dimension on a time grid, shape (D, G)."""
    grid = np.asarray(grid, dtype=float)
    out = np.empty((gt.D, grid.size))
    dim_arrays = [stream.dim_times(j) for j in range(gt.D)]
    for d in range(gt.D):
        raw = gt.bases[d].value(grid).copy()
        for j in range(gt.D):
            k = gt.kernels[d][j]
            trunc = k.trunc_lag()
            if trunc <= 0.0:
                continue
            tj = dim_arrays[j]
            for g0 in range(0, grid.size, 2048):
                g1 = min(g0 + 2048, grid.size)
                lags = grid[g0:g1, None] - tj[None, :]
                mask = (lags > 0.0) & (lags <= trunc)
                raw[g0:g1] += np.where(mask, k.value(lags), 0.0).sum(axis=1)
        out[d] = gt.psi.apply(raw)
    return out


# -- quadrature likelihood for ground-truth models --------------------------


def _piece_quad(gt: GroundTruthModel, d: int, lo: float, hi: float,
                dim_arrays: list, panels_per_unit: float) -> float:
    """Midpoint quadrature of the observed intensity over one smooth span."""
    width = hi - lo
    if width <= 0.0:
        return 0.0
    n = max(8, int(np.ceil(width * panels_per_unit)))
    mids = lo + (np.arange(n) + 0.5) * (width / n)
    raw = gt.bases[d].value(mids).copy()
    for j in range(gt.D):
        k = gt.kernels[d][j]
        trunc = k.trunc_lag()
        if trunc <= 0.0:
            continue
        tj = dim_arrays[j]
        i1 = np.searchsorted(tj, hi, side="left")
        i0 = np.searchsorted(tj, lo - trunc, side="left")
        if i1 > i0:
            lags = mids[:, None] - tj[None, i0:i1]
            mask = lags > 0.0
            raw += np.where(mask, k.value(lags), 0.0).sum(axis=1)
    lam = gt.psi.apply(raw)
    return float(lam.sum() * (width / n))


def _interval_quad(gt: GroundTruthModel, d: int, lo: float, hi: float,
                   dim_arrays: list, all_times: np.ndarray,
                   panels_per_unit: float) -> float:
    """Compensator over (lo, hi], split at arrivals and kernel jump lags."""
    cuts = [lo, hi]
    i0 = np.searchsorted(all_times, lo, side="right")
    i1 = np.searchsorted(all_times, hi, side="left")
    cuts.extend(all_times[i0:i1])
    for j in range(gt.D):
        for off in gt.kernels[d][j].cut_lags():
            tj = dim_arrays[j]
            k0 = np.searchsorted(tj, lo - off, side="left")
            k1 = np.searchsorted(tj, hi - off, side="left")
            cuts.extend(tj[k0:k1] + off)
    cuts = np.unique(np.clip(np.asarray(cuts), lo, hi))
    total = 0.0
    for g, h in zip(cuts[:-1], cuts[1:]):
        total += _piece_quad(gt, d, g, h, dim_arrays, panels_per_unit)
    return total


def gt_increments(gt: GroundTruthModel, stream: EventStream,
                  panels_per_unit: float = 256.0) -> list:
    """Per-dim compensator increments between consecutive window events."""
    dim_arrays = [stream.dim_times(j) for j in range(gt.D)]
    all_times = stream.times
    out = []
    for d in range(gt.D):
        wd = stream.window_dim_times(d)
        edges = np.concatenate(([stream.t_start], wd))
        inc = np.array([
            _interval_quad(gt, d, edges[i], edges[i + 1], dim_arrays,
                           all_times, panels_per_unit)
            for i in range(wd.size)
        ])
        out.append(inc)
    return out


def gt_log_likelihood(gt: GroundTruthModel, stream: EventStream,
                      include_tail: bool = False,
                      panels_per_unit: float = 256.0):
    """Log-likelihood of the window under the ground-truth model.

    Matches the estimator's convention: log terms at events, compensators
    between same-dimension events, tail excluded unless requested.
    """
    from .likelihood import LOG_FLOOR, LikelihoodReport

    dim_arrays = [stream.dim_times(j) for j in range(gt.D)]
    all_incs = gt_increments(gt, stream, panels_per_unit)
    per_dim = np.zeros(gt.D)
    for d in range(gt.D):
        wd = stream.window_dim_times(d)
        if wd.size == 0 and not include_tail:
            continue
        lam = np.array([
            float(gt.psi.apply(gt.raw_intensity_at(d, t, dim_arrays)))
            for t in wd
        ])
        logs = np.log(np.maximum(lam, LOG_FLOOR)).sum()
        incs = float(all_incs[d].sum())
        tail = 0.0
        if include_tail:
            last = float(wd[-1]) if wd.size else stream.t_start
            tail = _interval_quad(gt, d, last, stream.t_end, dim_arrays,
                                  stream.times, panels_per_unit)
        per_dim[d] = logs - incs - tail
    return LikelihoodReport(total_ll=float(per_dim.sum()), per_dim_ll=per_dim,
                            n_events=stream.n_events,
                            window=(stream.t_start, stream.t_end))


# -- serialization ----------------------------------------------------------


def gt_to_dict(gt: GroundTruthModel) -> dict:
    return {
        "D": gt.D,
        "psi": {"kind": gt.psi.kind, "shift": gt.psi.shift},
        "bases": [{"kind": b.kind, "a": b.a, "b": b.b, "c": b.c, "d": b.d}
                  for b in gt.bases],
        "kernels": [[{"kind": k.kind, "alpha": k.alpha, "beta": k.beta,
                      "delta": k.delta} for k in row] for row in gt.kernels],
    }


def gt_from_dict(d: dict) -> GroundTruthModel:
    psi = PsiSpec(kind=d["psi"]["kind"], shift=float(d["psi"]["shift"]))
    bases = [BaseRate(**b) for b in d["bases"]]
    kernels = [[ParametricKernel(**k) for k in row] for row in d["kernels"]]
    return GroundTruthModel(D=int(d["D"]), bases=bases, kernels=kernels, psi=psi)


def gt_to_json(gt: GroundTruthModel) -> str:
    return json.dumps(gt_to_dict(gt))


def gt_from_json(s: str) -> GroundTruthModel:
    return gt_from_dict(json.loads(s))
