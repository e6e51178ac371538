"""Evaluation utilities: held-out likelihood, time-rescaling residuals with
KS and QQ summaries, dense kernel/base dumps, and delimited output with JSON
metadata sidecars.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .events import EventStream, unscale_nll
from .intensity import HawkesModel, model_to_json
from .likelihood import log_likelihood, nhpp_log_likelihood, window_increments
from .network import ReluNet, net_forward, net_to_dict
from .simulate import (
    BaseRate,
    GroundTruthModel,
    gt_increments,
    gt_log_likelihood,
    gt_to_json,
)

__all__ = [
    "ResidualSeries",
    "test_nll",
    "rescaled_residuals",
    "ks_exponential",
    "qq_points",
    "qq_slope",
    "kernel_grid",
    "base_grid",
    "model_hash",
    "write_table",
    "write_metadata",
]


def test_nll(model, stream: EventStream, factor: float | None = None,
             include_tail: bool = False) -> dict:
    """Negative log-likelihood of a window under a fitted or true model.

    `model` may be a HawkesModel, a single ReluNet (flexible-rate Poisson),
    or a GroundTruthModel. When `factor` is given the stream is assumed to
    live on the scaled axis and the NLL is also reported on the original one.
    """
    if isinstance(model, HawkesModel):
        rep = log_likelihood(model, stream, include_tail=include_tail)
    elif isinstance(model, ReluNet):
        rep = nhpp_log_likelihood(model, stream)
    elif isinstance(model, GroundTruthModel):
        rep = gt_log_likelihood(model, stream, include_tail=include_tail)
    elif isinstance(model, BaseRate):
        rep = _base_rate_report(model, stream)
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    out = {
        "nll": -rep.total_ll,
        "per_dim_nll": (-rep.per_dim_ll).tolist(),
        "n_events": rep.n_events,
        "window": list(rep.window),
    }
    if factor is not None:
        out["nll_original"] = unscale_nll(-rep.total_ll, rep.n_events, factor)
        out["scale_factor"] = float(factor)
    return out


def _base_rate_report(base: BaseRate, stream: EventStream):
    """Exact flexible-Poisson likelihood for a named true rate.

    Same convention as the fitted-net path: full-window integral, log floor
    at events. Closed-form integral, no quadrature.
    """
    from .likelihood import LOG_FLOOR, LikelihoodReport

    if stream.D != 1:
        raise ValueError("a plain rate describes a one-dimensional stream")
    wd = stream.window_dim_times(0)
    logs = float(np.log(np.maximum(base.value(wd), LOG_FLOOR)).sum())
    total = logs - base.integral(stream.t_start, stream.t_end)
    return LikelihoodReport(total_ll=total, per_dim_ll=np.array([total]),
                            n_events=stream.n_events,
                            window=(stream.t_start, stream.t_end))


@dataclass
class ResidualSeries:
    """Compensator increments between consecutive same-dimension events.

    Under the model that generated the data these are i.i.d. Exp(1). The
    first increment of each dimension runs from the window start.
    """

    per_dim: list

    @property
    def pooled(self) -> np.ndarray:
        if not self.per_dim:
            return np.empty(0)
        return np.concatenate([np.asarray(x, dtype=float) for x in self.per_dim])

    @property
    def n(self) -> int:
        return int(sum(len(x) for x in self.per_dim))


def rescaled_residuals(model, stream: EventStream) -> ResidualSeries:
    if isinstance(model, HawkesModel):
        per_dim = [window_increments(model, d, stream) for d in range(model.D)]
    elif isinstance(model, ReluNet):
        wd = stream.window_dim_times(0)
        edges = np.concatenate(([stream.t_start], wd))
        from .network import clamped_net_integral
        per_dim = [np.array([clamped_net_integral(model, edges[i], edges[i + 1])
                             for i in range(wd.size)])]
    elif isinstance(model, GroundTruthModel):
        per_dim = gt_increments(model, stream)
    elif isinstance(model, BaseRate):
        wd = stream.window_dim_times(0)
        edges = np.concatenate(([stream.t_start], wd))
        per_dim = [np.array([model.integral(edges[i], edges[i + 1])
                             for i in range(wd.size)])]
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return ResidualSeries(per_dim=per_dim)


def ks_exponential(res: ResidualSeries) -> tuple[float, float]:
    """KS test of the pooled residuals against the unit exponential."""
    pooled = res.pooled
    if pooled.size == 0:
        raise ValueError("no residuals to test")
    out = stats.kstest(pooled, "expon")
    return float(out.statistic), float(out.pvalue)


def qq_points(res: ResidualSeries) -> tuple[np.ndarray, np.ndarray]:
    """Pooled QQ pairs: theoretical Exp(1) quantiles vs sorted residuals."""
    pooled = np.sort(res.pooled)
    n = pooled.size
    if n == 0:
        raise ValueError("no residuals to plot")
    probs = (np.arange(1, n + 1) - 0.5) / n
    theo = -np.log1p(-probs)
    return theo, pooled


def qq_slope(res: ResidualSeries) -> float:
    """Least-squares slope of empirical on theoretical quantiles."""
    theo, emp = qq_points(res)
    if theo.size < 2:
        raise ValueError("need at least two residuals for a slope")
    return float(stats.linregress(theo, emp).slope)


def kernel_grid(model: HawkesModel, lags: np.ndarray) -> np.ndarray:
    """Raw kernel nets evaluated on a lag grid, shape (D, D, G)."""
    lags = np.asarray(lags, dtype=float)
    out = np.empty((model.D, model.D, lags.size))
    for d in range(model.D):
        for j in range(model.D):
            out[d, j] = net_forward(model.kernels[d][j], lags)
    return out


def base_grid(model: HawkesModel, times: np.ndarray) -> np.ndarray:
    """Raw base rates evaluated on a time grid, shape (D, G)."""
    times = np.asarray(times, dtype=float)
    out = np.empty((model.D, times.size))
    for d in range(model.D):
        b = model.bases[d]
        if isinstance(b, ReluNet):
            out[d] = net_forward(b, times)
        else:
            out[d] = float(b)
    return out


def model_hash(model) -> str:
    """sha256 of the canonical JSON form, for metadata sidecars."""
    if isinstance(model, HawkesModel):
        payload = model_to_json(model)
    elif isinstance(model, ReluNet):
        payload = json.dumps(net_to_dict(model))
    elif isinstance(model, GroundTruthModel):
        payload = gt_to_json(model)
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_table(path, columns: dict) -> None:
    """Comma-delimited table; columns is an ordered name -> array mapping."""
    names = list(columns)
    arrays = [np.asarray(columns[k]).ravel() for k in names]
    n = arrays[0].size if arrays else 0
    for k, a in zip(names, arrays):
        if a.size != n:
            raise ValueError(f"column {k!r} has {a.size} rows, expected {n}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(n):
            w.writerow([repr(float(a[i])) if np.issubdtype(a.dtype, np.floating)
                        else a[i] for a in arrays])


def write_metadata(path, meta: dict) -> None:
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
