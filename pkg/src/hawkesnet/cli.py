"""Command line entry point with three subcommands.

simulate  draw events from a parametric ground truth, write events.csv,
          truth.json and a counting-process figure
fit       scale and split an event file, train the model, write model.json,
          fit_trace.csv and a trace figure; supports checkpoint/resume
eval      reload a fitted model, verify the scale factor, score the test
          window and write residual diagnostics, grids, figures

Configuration comes from a JSON file (--config) merged with a small set of
override flags. Unknown config keys are rejected. Exit codes: 0 success,
1 runtime failure, 2 bad configuration or missing input file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .diagnostics import (
    base_grid,
    kernel_grid,
    ks_exponential,
    model_hash,
    qq_points,
    qq_slope,
    rescaled_residuals,
    test_nll,
    write_metadata,
    write_table,
)
from .events import (
    EventDataError,
    load_events,
    scale_times,
    split_chronological,
    unscale_nll,
)
from .intensity import model_from_dict, model_to_dict
from .network import ReluNet, net_from_dict, net_to_dict
from .optimizer import FitConfig, fit, fit_nhpp
from .simulate import (
    BaseRate,
    GroundTruthModel,
    gt_from_dict,
    gt_to_dict,
    simulate_hawkes,
    simulate_nhpp,
)

__all__ = ["main"]


class ConfigError(Exception):
    """Bad configuration or missing input; maps to exit code 2."""


_FIT_FIELDS = tuple(FitConfig().to_dict())

_SIM_KEYS = ("kind", "horizon", "seed", "max_events", "model", "base", "out_dir")
_FIT_KEYS = ("events", "format", "horizon", "mode", "D", "ratios", "out_dir",
             "checkpoint_interval", "resume") + _FIT_FIELDS
_EVAL_KEYS = ("events", "format", "horizon", "model", "truth", "out_dir",
              "grid_points", "lag_max")

_BASE_KEYS = ("kind", "a", "b", "c", "d")
_KERNEL_KEYS = ("kind", "alpha", "beta", "delta")
_PSI_KEYS = ("kind", "shift")


def _check_keys(d: dict, allowed, ctx: str) -> None:
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {ctx}: {', '.join(unknown)}")


def _require(cfg: dict, key: str, ctx: str):
    if key not in cfg or cfg[key] is None:
        raise ConfigError(f"{ctx} requires {key!r}")
    return cfg[key]


def _input_path(path, ctx: str) -> str:
    path = str(path)
    if not os.path.exists(path):
        raise ConfigError(f"{ctx} file not found: {path}")
    return path


def _load_json(path: str, ctx: str) -> dict:
    try:
        with open(path) as fh:
            out = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {ctx} {path}: {e}") from e
    if not isinstance(out, dict):
        raise ConfigError(f"{ctx} {path} must hold a JSON object")
    return out


def _merge_config(args: argparse.Namespace, flag_names) -> dict:
    cfg: dict = {}
    if args.config is not None:
        cfg.update(_load_json(_input_path(args.config, "config"), "config file"))
    for flag, key in flag_names.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _base_from_cfg(d: dict, ctx: str) -> BaseRate:
    if not isinstance(d, dict):
        raise ConfigError(f"{ctx} must be an object")
    _check_keys(d, _BASE_KEYS, ctx)
    try:
        return BaseRate(**{k: (d[k] if k == "kind" else float(d[k]))
                           for k in d})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad {ctx}: {e}") from e


def _gt_from_cfg(d: dict) -> GroundTruthModel:
    if not isinstance(d, dict):
        raise ConfigError("model must be an object")
    _check_keys(d, ("D", "psi", "bases", "kernels"), "model")
    D = int(_require(d, "D", "model"))
    bases = _require(d, "bases", "model")
    kernels = _require(d, "kernels", "model")
    if len(bases) != D or len(kernels) != D or any(len(r) != D for r in kernels):
        raise ConfigError("model needs D bases and a D x D kernel grid")
    for row in kernels:
        for k in row:
            _check_keys(k, _KERNEL_KEYS, "kernel")
    psi = d.get("psi", {"kind": "max"})
    _check_keys(psi, _PSI_KEYS, "psi")
    spec = {"D": D, "psi": {"kind": psi.get("kind", "max"),
                            "shift": float(psi.get("shift", 2.0))},
            "bases": [], "kernels": kernels}
    gt_bases = [_base_from_cfg(b, "base") if isinstance(b, dict)
                else BaseRate(kind="constant", a=float(b)) for b in bases]
    try:
        gt = gt_from_dict({**spec, "bases": [
            {"kind": b.kind, "a": b.a, "b": b.b, "c": b.c, "d": b.d}
            for b in gt_bases]})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad model: {e}") from e
    return gt


def run_simulate(cfg: dict) -> int:
    _check_keys(cfg, _SIM_KEYS, "simulate config")
    kind = cfg.get("kind", "hawkes")
    if kind not in ("hawkes", "nhpp"):
        raise ConfigError(f"kind must be 'hawkes' or 'nhpp', got {kind!r}")
    horizon = float(_require(cfg, "horizon", "simulate"))
    seed = int(cfg.get("seed", 0))
    out_dir = str(cfg.get("out_dir", "."))
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])

    if kind == "hawkes":
        gt = _gt_from_cfg(_require(cfg, "model", "hawkes simulate"))
        max_events = cfg.get("max_events")
        stream = simulate_hawkes(gt, horizon, rng,
                                 max_events=None if max_events is None
                                 else int(max_events))
        truth: dict = {"kind": "hawkes", "model": gt_to_dict(gt)}
        truth_obj = gt
    else:
        base = _base_from_cfg(_require(cfg, "base", "nhpp simulate"), "base")
        stream = simulate_nhpp(base, horizon, rng)
        truth = {"kind": "nhpp",
                 "base": {"kind": base.kind, "a": base.a, "b": base.b,
                          "c": base.c, "d": base.d}}
        truth_obj = base

    resolved = {"kind": kind, "horizon": horizon, "seed": seed,
                "out_dir": out_dir, "max_events": cfg.get("max_events")}
    if kind == "hawkes":
        resolved["model"] = truth["model"]
    else:
        resolved["base"] = truth["base"]
    _write_json(os.path.join(out_dir, "resolved_config.json"), resolved)

    ev_path = os.path.join(out_dir, "events.csv")
    write_table(ev_path, {"time": stream.times,
                          "dim": stream.dims.astype(int)})
    truth.update(horizon=horizon, seed=seed, n_events=stream.n_events,
                 per_dim_counts=stream.per_dim_counts().tolist())
    _write_json(os.path.join(out_dir, "truth.json"), truth)
    write_metadata(os.path.join(out_dir, "events.meta.json"), {
        "kind": kind, "horizon": horizon, "seed": seed,
        "n_events": stream.n_events, "truth_hash": model_hash(truth_obj)
        if kind == "hawkes" else None,
    })
    from .report import plot_events
    plot_events(stream, os.path.join(out_dir, "events.png"))
    print(f"simulated {stream.n_events} events over [0, {horizon}] "
          f"into {ev_path}")
    return 0


def _fit_config_from(cfg: dict) -> FitConfig:
    kw = {}
    defaults = FitConfig()
    for k in _FIT_FIELDS:
        if k in cfg:
            cast = type(getattr(defaults, k))
            try:
                kw[k] = cast(cfg[k])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"bad value for {k!r}: {cfg[k]!r}") from e
    return FitConfig(**kw)


def _make_checkpoint_hook(path: str, interval: int):
    seen = {"n": 0}

    def hook(state: dict) -> None:
        seen["n"] += 1
        if seen["n"] % interval == 0:
            tmp = path + ".tmp"
            _write_json(tmp, state)
            os.replace(tmp, path)

    return hook


def run_fit(cfg: dict) -> int:
    _check_keys(cfg, _FIT_KEYS, "fit config")
    events_path = _input_path(_require(cfg, "events", "fit"), "events")
    mode = cfg.get("mode", "hawkes")
    if mode not in ("hawkes", "nhpp"):
        raise ConfigError(f"mode must be 'hawkes' or 'nhpp', got {mode!r}")
    out_dir = str(cfg.get("out_dir", "."))
    os.makedirs(out_dir, exist_ok=True)
    fmt = cfg.get("format", "csv")
    horizon = cfg.get("horizon")
    ratios = tuple(float(r) for r in cfg.get("ratios", (0.6, 0.2, 0.2)))
    if len(ratios) != 3:
        raise ConfigError("ratios must have three entries")
    fcfg = _fit_config_from(cfg)
    D = cfg.get("D")
    if mode == "nhpp":
        D = 1
    resume_state = None
    if cfg.get("resume"):
        resume_state = _load_json(_input_path(cfg["resume"], "resume"),
                                  "resume checkpoint")
    interval = int(cfg.get("checkpoint_interval", 0) or 0)
    hook = None
    if interval > 0:
        hook = _make_checkpoint_hook(os.path.join(out_dir, "checkpoint.json"),
                                     interval)

    resolved = {"command": "fit", "events": events_path, "format": fmt,
                "mode": mode, "horizon": horizon, "D": D,
                "ratios": list(ratios), "out_dir": out_dir,
                "checkpoint_interval": interval,
                "resume": cfg.get("resume"), **fcfg.to_dict()}
    _write_json(os.path.join(out_dir, "resolved_config.json"), resolved)

    stream = load_events(events_path, fmt=fmt,
                         D=None if D is None else int(D),
                         horizon=None if horizon is None else float(horizon))
    if mode == "nhpp" and stream.D != 1:
        raise EventDataError("nhpp mode needs one-dimensional events")
    scaled, sinfo = scale_times(stream)
    train, val, test = split_chronological(scaled, ratios)

    if mode == "hawkes":
        model, trace = fit(train, val, fcfg, resume=resume_state,
                           checkpoint_hook=hook)
        model_payload = model_to_dict(model)
    else:
        net, trace = fit_nhpp(train, val, fcfg, resume=resume_state,
                              checkpoint_hook=hook)
        model_payload = {"net": net_to_dict(net)}

    out = {
        "mode": mode,
        "model": model_payload,
        "scale": {"factor": sinfo.factor, "t_max": sinfo.t_max,
                  "n_events": sinfo.n_events},
        "split": {"ratios": list(ratios),
                  "boundaries": [train.t_end, val.t_end],
                  "counts": [train.n_events, val.n_events, test.n_events]},
        "config": fcfg.to_dict(),
        "trace": {"best_iteration": trace.best_iteration,
                  "best_val_nll": trace.best_val_nll,
                  "stop_reason": trace.stop_reason,
                  "n_checks": len(trace.iterations)},
        "events_file": events_path,
        "horizon": horizon,
    }
    model_path = os.path.join(out_dir, "model.json")
    _write_json(model_path, out)
    trace_path = os.path.join(out_dir, "fit_trace.csv")
    trace.to_csv(trace_path)
    fitted = model if mode == "hawkes" else net
    write_metadata(os.path.join(out_dir, "fit_trace.meta.json"), {
        "model_hash": model_hash(fitted), "events": events_path,
        "mode": mode, "stop_reason": trace.stop_reason,
        "best_iteration": trace.best_iteration,
        "best_val_nll": trace.best_val_nll,
    })
    from .report import plot_fit_trace
    plot_fit_trace(trace, os.path.join(out_dir, "fit_trace.png"))
    print(f"fit stopped ({trace.stop_reason}) at best iteration "
          f"{trace.best_iteration}, val NLL {trace.best_val_nll:.4f}; "
          f"wrote {model_path}")
    return 0


def _load_truth(path: str):
    doc = _load_json(path, "truth")
    kind = doc.get("kind", "hawkes")
    if kind == "hawkes":
        return gt_from_dict(doc["model"])
    if kind == "nhpp":
        return BaseRate(**{k: (doc["base"][k] if k == "kind"
                               else float(doc["base"][k]))
                           for k in doc["base"]})
    raise ConfigError(f"truth kind must be 'hawkes' or 'nhpp', got {kind!r}")


def run_eval(cfg: dict) -> int:
    _check_keys(cfg, _EVAL_KEYS, "eval config")
    events_path = _input_path(_require(cfg, "events", "eval"), "events")
    model_path = _input_path(_require(cfg, "model", "eval"), "model")
    out_dir = str(cfg.get("out_dir", "."))
    os.makedirs(out_dir, exist_ok=True)
    fmt = cfg.get("format", "csv")
    grid_points = int(cfg.get("grid_points", 400))
    truth = None
    if cfg.get("truth"):
        truth = _load_truth(_input_path(cfg["truth"], "truth"))

    resolved = {"command": "eval", "events": events_path, "model": model_path,
                "truth": cfg.get("truth"), "format": fmt,
                "horizon": cfg.get("horizon"), "out_dir": out_dir,
                "grid_points": grid_points, "lag_max": cfg.get("lag_max")}
    _write_json(os.path.join(out_dir, "resolved_config.json"), resolved)

    doc = _load_json(model_path, "model")
    mode = doc.get("mode", "hawkes")
    stored = doc.get("scale", {})
    fit_cfg = doc.get("config", {})
    horizon = cfg.get("horizon", doc.get("horizon"))

    if mode == "hawkes":
        fitted = model_from_dict(doc["model"])
        D = fitted.D
    else:
        fitted = net_from_dict(doc["model"]["net"])
        D = 1
    stream = load_events(events_path, fmt=fmt, D=D,
                         horizon=None if horizon is None else float(horizon))
    scaled, sinfo = scale_times(stream)
    stored_factor = float(stored.get("factor", sinfo.factor))
    if abs(sinfo.factor - stored_factor) > 1e-9 * abs(stored_factor):
        raise RuntimeError(
            f"scale factor mismatch: events give {sinfo.factor!r}, "
            f"model stores {stored_factor!r}; wrong event file?")
    ratios = tuple(doc.get("split", {}).get("ratios", (0.6, 0.2, 0.2)))
    _, _, test = split_chronological(scaled, ratios)

    include_tail = bool(fit_cfg.get("include_tail", False))
    metrics = test_nll(fitted, test, factor=sinfo.factor,
                       include_tail=include_tail)
    res = rescaled_residuals(fitted, test)
    ks_stat, ks_p = ks_exponential(res)
    slope = qq_slope(res)
    metrics.update(mode=mode, ks_statistic=ks_stat, ks_pvalue=ks_p,
                   qq_slope=slope, n_residuals=res.n,
                   model_hash=model_hash(fitted))

    if truth is not None:
        orig_test = _original_axis(test, sinfo.factor)
        truth_metrics = test_nll(truth, orig_test, include_tail=include_tail)
        metrics["truth_nll_original"] = truth_metrics["nll"]

    sidecar = {"model_hash": metrics["model_hash"], "events": events_path,
               "mode": mode, "window": metrics["window"]}
    dims = np.concatenate([np.full(len(x), d)
                           for d, x in enumerate(res.per_dim)]) \
        if res.n else np.empty(0)
    order = np.concatenate([np.arange(len(x)) for x in res.per_dim]) \
        if res.n else np.empty(0)
    write_table(os.path.join(out_dir, "residuals.csv"),
                {"dim": dims.astype(int), "index": order.astype(int),
                 "increment": res.pooled})
    write_metadata(os.path.join(out_dir, "residuals.meta.json"), sidecar)
    theo, emp = qq_points(res)
    write_table(os.path.join(out_dir, "qq.csv"),
                {"theoretical": theo, "empirical": emp})
    write_metadata(os.path.join(out_dir, "qq.meta.json"),
                   {**sidecar, "slope": slope})

    from .report import plot_bases, plot_kernels, plot_nhpp_rate, plot_qq

    plot_qq(res, os.path.join(out_dir, "qq.png"), slope=slope)
    f = sinfo.factor
    if mode == "hawkes":
        lag_max = float(cfg.get("lag_max", fitted.max_lag / f))
        lags = np.linspace(0.0, lag_max, grid_points + 1)[1:]
        grid = kernel_grid(fitted, f * lags) * f
        cols = {"lag": lags}
        for d in range(D):
            for j in range(D):
                cols[f"k_{d}_{j}"] = grid[d, j]
        write_table(os.path.join(out_dir, "kernels.csv"), cols)
        write_metadata(os.path.join(out_dir, "kernels.meta.json"),
                       {**sidecar, "axis": "original"})
        times = np.linspace(0.0, float(stream.t_end), grid_points)
        bases = base_grid(fitted, f * times) * f
        bcols = {"time": times}
        for d in range(D):
            bcols[f"base_{d}"] = bases[d]
        write_table(os.path.join(out_dir, "bases.csv"), bcols)
        write_metadata(os.path.join(out_dir, "bases.meta.json"),
                       {**sidecar, "axis": "original"})
        plot_kernels(fitted, os.path.join(out_dir, "kernels.png"), factor=f,
                     lag_max=lag_max,
                     truth=truth if isinstance(truth, GroundTruthModel) else None)
        plot_bases(fitted, os.path.join(out_dir, "bases.png"),
                   t_end=float(stream.t_end), factor=f,
                   truth=truth if isinstance(truth, GroundTruthModel) else None)
    else:
        times = np.linspace(0.0, float(stream.t_end), grid_points)
        from .network import net_forward
        rate = np.maximum(net_forward(fitted, f * times), 0.0) * f
        write_table(os.path.join(out_dir, "rate.csv"),
                    {"time": times, "rate": rate})
        write_metadata(os.path.join(out_dir, "rate.meta.json"),
                       {**sidecar, "axis": "original"})
        plot_nhpp_rate(fitted, os.path.join(out_dir, "rate.png"),
                       t_end=float(stream.t_end), factor=f,
                       truth=truth if isinstance(truth, BaseRate) else None)

    _write_json(os.path.join(out_dir, "metrics.json"), metrics)
    print(f"test NLL {metrics['nll']:.4f} (original axis "
          f"{metrics['nll_original']:.4f}), KS p {ks_p:.4g}, "
          f"QQ slope {slope:.4f}")
    return 0


def _original_axis(stream, factor: float):
    return stream.copy_with(times=stream.times / factor,
                            t_start=stream.t_start / factor,
                            t_end=stream.t_end / factor)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hawkesnet",
        description="simulate, fit and evaluate event-stream intensity models")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw events from a ground truth")
    sim.add_argument("--config", help="JSON config file")
    sim.add_argument("--out-dir", dest="out_dir", help="output directory")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--horizon", type=float)

    fitp = sub.add_parser("fit", help="train a model on an event file")
    fitp.add_argument("--config", help="JSON config file")
    fitp.add_argument("--out-dir", dest="out_dir", help="output directory")
    fitp.add_argument("--seed", type=int)
    fitp.add_argument("--workers", type=int)
    fitp.add_argument("--events", help="event CSV/JSONL path")
    fitp.add_argument("--mode", choices=["hawkes", "nhpp"])
    fitp.add_argument("--max-iters", dest="max_iters", type=int)
    fitp.add_argument("--resume", help="checkpoint JSON to continue from")

    evp = sub.add_parser("eval", help="score a fitted model on held-out data")
    evp.add_argument("--config", help="JSON config file")
    evp.add_argument("--out-dir", dest="out_dir", help="output directory")
    evp.add_argument("--events", help="event CSV/JSONL path")
    evp.add_argument("--model", help="model.json from fit")
    evp.add_argument("--truth", help="truth.json from simulate")
    return parser


_FLAGS = {
    "simulate": {"out_dir": "out_dir", "seed": "seed", "horizon": "horizon"},
    "fit": {"out_dir": "out_dir", "seed": "seed", "workers": "workers",
            "events": "events", "mode": "mode", "max_iters": "max_iters",
            "resume": "resume"},
    "eval": {"out_dir": "out_dir", "events": "events", "model": "model",
             "truth": "truth"},
}

_RUNNERS = {"simulate": run_simulate, "fit": run_fit, "eval": run_eval}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args, _FLAGS[args.command])
        _RUNNERS[args.command](cfg)  # key check happens inside
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (EventDataError, ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
