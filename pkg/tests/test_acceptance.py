"""End-to-end acceptance checks.

Closed-form integrals against Riemann oracles, analytic gradients against
central finite differences, and full simulate-fit-evaluate experiments with
known ground truth. One test per check, so a plain ``pytest -v`` run reads
as a scorecard with one pass/fail line each; measured numbers are printed
and visible with ``-s``. Runtime is dominated by the fitting experiments.
"""

import time

import numpy as np
import pytest

from hawkesnet.diagnostics import (
    ResidualSeries,
    kernel_grid,
    ks_exponential,
    qq_slope,
    rescaled_residuals,
)
from hawkesnet.diagnostics import test_nll as held_out_nll
from hawkesnet.events import EventStream, scale_times, split_chronological
from hawkesnet.intensity import (
    HawkesModel,
    compensator,
    compensator_gradient,
    raw_intensity,
)
from hawkesnet.likelihood import event_gradient, event_term
from hawkesnet.network import ReluNet
from hawkesnet.optimizer import FitConfig, fit, fit_nhpp
from hawkesnet.simulate import (
    BaseRate,
    GroundTruthModel,
    ParametricKernel,
    simulate_hawkes,
    simulate_nhpp,
)

# shared fit recipe for the recovery experiments: every true kernel here
# decays or ends within ~2 scaled lag units, so a 5.0 cap is exact in
# practice; checks every 50 iterations keep early stopping off plateau noise
EXPERIMENT_KW = dict(max_iters=8000, val_check_interval=50, patience=40,
                     max_lag=5.0, seed=1)

COMPENSATOR_REL_TOL = 1e-4
REFINEMENT_MIN_RATIO = 50.0
GRADIENT_REL_TOL = 1e-5
FD_STEP = 1e-6
NHPP_NLL_TOL = 0.05
INHIBITIVE_NLL_TOL = 0.02
KERNEL_L2_TOL = 0.15
BIVARIATE_NLL_FACTOR = 1.03
RATE_REL_TOL = 0.03
KS_ALPHA = 0.01
QQ_SLOPE_BAND = (0.9, 1.1)
SENSITIVITY_SPREAD = 0.005


# ---------------------------------------------------------------------------
# oracle helpers


def random_model(rng: np.random.Generator, D: int = 2, p: int = 2,
                 net_base: bool = False, bias: bool = False,
                 max_lag: float = 100.0) -> HawkesModel:
    def knet() -> ReluNet:
        return ReluNet(a1=rng.uniform(-2.0, 1.0, p), b1=rng.uniform(-0.5, 1.0, p),
                       a2=rng.uniform(-0.8, 0.8, p),
                       b2=rng.uniform(-0.2, 0.2) if bias else 0.0)
    if net_base:
        bases = [ReluNet(a1=rng.uniform(-0.5, 0.5, p), b1=rng.uniform(-0.5, 1.0, p),
                         a2=rng.uniform(-0.5, 0.8, p), b2=rng.uniform(0.0, 0.5))
                 for _ in range(D)]
    else:
        bases = [float(rng.uniform(0.1, 1.0)) for _ in range(D)]
    return HawkesModel(D=D, bases=bases,
                       kernels=[[knet() for _ in range(D)] for _ in range(D)],
                       train_kernel_bias=bias, max_lag=max_lag)


def random_stream(rng: np.random.Generator, D: int = 2, lo: float = 0.1,
                  hi: float = 5.0, t_end: float = 6.0) -> EventStream:
    n = int(rng.integers(3, 9))
    times = np.sort(rng.uniform(lo, hi, n)) + np.arange(n) * 1e-9
    return EventStream(times=times, dims=rng.integers(0, D, n), D=D, t_end=t_end)


def grid_raw(m: HawkesModel, d: int, S: np.ndarray,
             stream: EventStream) -> np.ndarray:
    """Vectorized raw (unclipped) intensity on a grid of times."""
    base = m.bases[d]
    if isinstance(base, ReluNet):
        pre = base.a1[None, :] * S[:, None] + base.b1[None, :]
        out = base.b2 + (np.maximum(pre, 0.0) * base.a2[None, :]).sum(axis=1)
    else:
        out = np.full(S.size, float(base))
    for j in range(m.D):
        net = m.kernels[d][j]
        tk = stream.dim_times(j)
        if tk.size == 0:
            continue
        lag = S[:, None] - tk[None, :]
        vis = (lag > 0.0) & (lag <= m.max_lag)
        for u in range(net.p):
            pre = net.a1[u] * lag + net.b1[u]
            out += net.a2[u] * np.where(vis, np.maximum(pre, 0.0), 0.0).sum(axis=1)
        if m.train_kernel_bias:
            out += net.b2 * vis.sum(axis=1)
    return out


def riemann_compensator(m: HawkesModel, d: int, lo: float, hi: float,
                        stream: EventStream, panels: int) -> float:
    """Midpoint-rule compensator oracle.

    The clipped intensity jumps at event times (units with b1 > 0 switch on
    at lag 0+) and at cap offsets t_k + max_lag; plain midpoint is only
    first-order accurate across a jump, which would mask the refinement
    check below. Partitioning at those points restores second order.
    """
    cuts = [lo, hi]
    for tk in stream.times:
        for x in (tk, tk + m.max_lag):
            if lo < x < hi:
                cuts.append(float(x))
    cuts = np.unique(np.asarray(cuts))
    total_len = hi - lo
    acc = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(round(panels * (b - a) / total_len)))
        h = (b - a) / n
        mids = a + (np.arange(n) + 0.5) * h
        acc += np.maximum(grid_raw(m, d, mids, stream), 0.0).sum() * h
    return acc


def fd_gradient(f, theta: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    g = np.empty_like(theta)
    for k in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (f(up) - f(dn)) / (2.0 * h)
    return g


def min_pre_margin(m: HawkesModel, d: int, t: float,
                   stream: EventStream) -> float:
    """Distance of the closest unit pre-activation to its kink at time t."""
    worst = np.inf
    for j in range(m.D):
        net = m.kernels[d][j]
        for tk in stream.dim_times(j):
            lag = t - tk
            if 0.0 < lag <= m.max_lag:
                worst = min(worst, float(np.min(np.abs(net.a1 * lag + net.b1))))
    b = m.bases[d]
    if isinstance(b, ReluNet):
        worst = min(worst, float(np.min(np.abs(b.a1 * t + b.b1))))
    return worst


def rescale_stream(s: EventStream, factor: float) -> EventStream:
    return s.copy_with(times=s.times * factor, t_start=s.t_start * factor,
                       t_end=s.t_end * factor)


def unscale_stream(s: EventStream, factor: float) -> EventStream:
    return s.copy_with(times=s.times / factor, t_start=s.t_start / factor,
                       t_end=s.t_end / factor)


# ---------------------------------------------------------------------------
# shared ground-truth datasets (module scope: several checks reuse them)


@pytest.fixture(scope="module")
def inhibitive_case():
    gt = GroundTruthModel(
        D=1, bases=[0.9],
        kernels=[[ParametricKernel("exponential", alpha=-0.5, beta=2.0)]])
    t0 = time.time()
    s = simulate_hawkes(gt, 14000.0, np.random.default_rng(42))
    sim_seconds = time.time() - t0
    scaled, info = scale_times(s)
    train, val, test = split_chronological(scaled)
    return {"gt": gt, "stream": s, "info": info, "train": train, "val": val,
            "test": test, "sim_seconds": sim_seconds}


@pytest.fixture(scope="module")
def inhibitive_fit(inhibitive_case):
    cfg = FitConfig(**EXPERIMENT_KW)
    t0 = time.time()
    model, trace = fit(inhibitive_case["train"], inhibitive_case["val"], cfg)
    return {"model": model, "trace": trace, "fit_seconds": time.time() - t0}


@pytest.fixture(scope="module")
def rectangular_case():
    gt = GroundTruthModel(
        D=1, bases=[0.05],
        kernels=[[ParametricKernel("rectangular", alpha=0.7, beta=0.4,
                                   delta=1.0)]])
    s = simulate_hawkes(gt, 60000.0, np.random.default_rng(15))
    return {"gt": gt, "stream": s, "horizon": 60000.0}


# ---------------------------------------------------------------------------
# 1. closed-form compensator vs Riemann oracle


def test_criterion_1_compensator_matches_riemann_oracle():
    rng = np.random.default_rng(123)
    t0 = time.time()
    errs_coarse, errs_fine, rels = [], [], []
    for i in range(100):
        D = int(rng.integers(1, 3))
        m = random_model(rng, D=D, net_base=bool(i % 3 == 1),
                         max_lag=float(rng.uniform(0.5, 3.0)) if i % 4 == 2 else 100.0,
                         bias=bool(i % 5 == 4))
        n = int(rng.integers(3, 9))
        times = np.sort(rng.uniform(0.0, 5.0, n)) + np.arange(n) * 1e-9
        s = EventStream(times=times, dims=rng.integers(0, D, n), D=D, t_end=6.0)
        lo, hi = sorted(rng.uniform(0.0, 6.0, 2))
        if hi - lo < 1e-3:
            hi = lo + 1e-3
        d = int(rng.integers(0, D))
        exact = compensator(m, d, lo, hi, s)[0]
        coarse = riemann_compensator(m, d, lo, hi, s, 100000)
        fine = riemann_compensator(m, d, lo, hi, s, 1000000)
        errs_coarse.append(abs(exact - coarse))
        errs_fine.append(abs(exact - fine))
        rels.append(abs(exact - coarse) / max(abs(coarse), 1e-12))
    elapsed = time.time() - t0
    ratio = sum(errs_coarse) / max(sum(errs_fine), 1e-300)
    print(f"\ncriterion 1: max rel err {max(rels):.2e} (tol {COMPENSATOR_REL_TOL}), "
          f"10x-refinement ratio {ratio:.1f} (min {REFINEMENT_MIN_RATIO}), "
          f"{elapsed:.0f}s")
    assert max(rels) <= COMPENSATOR_REL_TOL
    # error must shrink ~100x when the oracle is refined 10x, proving the
    # residual lives in the oracle, not the closed form
    assert ratio >= REFINEMENT_MIN_RATIO
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 2. analytic gradients vs central finite differences


def test_criterion_2_gradients_match_finite_differences():
    rng = np.random.default_rng(321)
    t0 = time.time()

    worst_ev = 0.0
    done_ev = tries = 0
    while done_ev < 500 and tries < 3000:
        tries += 1
        D = int(rng.integers(1, 3))
        m = random_model(rng, D=D, net_base=bool(tries % 3 == 1),
                         bias=bool(tries % 5 == 4))
        s = random_stream(rng, D=D)
        idx = int(rng.integers(0, s.n_events))
        d = int(s.window_dims[idx])
        tn = float(s.window_times[idx])
        # keep instances away from the lambda > 0 kink and unit kinks,
        # where the one-sided derivative differs from the FD quotient
        if raw_intensity(m, d, tn, s) < 0.05 or min_pre_margin(m, d, tn, s) < 1e-4:
            continue
        theta0 = m.get_params()

        def ev_term(th: np.ndarray) -> float:
            mm = m.copy()
            mm.set_params(th)
            return event_term(mm, s, idx)[0]

        g = event_gradient(m, s, idx)
        gf = fd_gradient(ev_term, theta0)
        rel = np.linalg.norm(g - gf) / max(np.linalg.norm(gf), 1e-10)
        assert rel <= GRADIENT_REL_TOL
        worst_ev = max(worst_ev, rel)
        done_ev += 1
    assert done_ev == 500

    worst_comp = 0.0
    done_comp = 0
    while done_comp < 500:
        D = int(rng.integers(1, 3))
        m = random_model(rng, D=D, net_base=bool(done_comp % 3 == 1),
                         bias=bool(done_comp % 5 == 4),
                         max_lag=float(rng.uniform(0.5, 3.0)) if done_comp % 4 == 2 else 100.0)
        s = random_stream(rng, D=D)
        lo, hi = sorted(rng.uniform(0.0, 6.0, 2))
        if hi - lo < 1e-3:
            hi = lo + 1e-3
        d = int(rng.integers(0, D))
        val, seg = compensator(m, d, lo, hi, s)
        if abs(val) < 1e-6:
            continue
        g = compensator_gradient(m, d, lo, hi, s, segments=seg)
        theta0 = m.get_params()

        def comp_value(th: np.ndarray) -> float:
            mm = m.copy()
            mm.set_params(th)
            return compensator(mm, d, lo, hi, s)[0]

        gf = fd_gradient(comp_value, theta0)
        rel = np.linalg.norm(g - gf) / max(np.linalg.norm(gf), 1e-10)
        assert rel <= GRADIENT_REL_TOL
        worst_comp = max(worst_comp, rel)
        done_comp += 1

    elapsed = time.time() - t0
    print(f"\ncriterion 2: 500 event grads worst rel {worst_ev:.2e}, "
          f"500 compensator grads worst rel {worst_comp:.2e} "
          f"(tol {GRADIENT_REL_TOL}), {elapsed:.0f}s")
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# 3. flexible-Poisson recovery on the four named rate shapes


NHPP_TARGETS = {
    "exponential": (BaseRate("exponential", a=0.5, b=0.001), 2750.0),
    "constant": (BaseRate("constant", a=0.5), 3000.0),
    "parabola": (BaseRate("parabola", a=2e-7, b=1.5, c=2000.0), 3000.0),
    "sine": (BaseRate("sine", a=0.4, b=2 * np.pi * 0.0004, c=1000.0, d=1.1),
             5000.0),
}


def test_criterion_3_nhpp_recovery_four_targets():
    # train, early-stop, and score on three independent realizations of the
    # same rate over the same window: held-out in distribution, and free of
    # the extrapolation a chronological tail split would demand
    gaps = {}
    for k, (name, (base, horizon)) in enumerate(NHPP_TARGETS.items()):
        t0 = time.time()
        a = simulate_nhpp(base, horizon, np.random.default_rng(100 + k))
        b = simulate_nhpp(base, horizon, np.random.default_rng(200 + k))
        c = simulate_nhpp(base, horizon, np.random.default_rng(300 + k))
        train, info = scale_times(a)
        val = rescale_stream(b, info.factor)
        test = rescale_stream(c, info.factor)
        cfg = FitConfig(max_iters=20000, val_check_interval=50, patience=40,
                        seed=1)
        net, trace = fit_nhpp(train, val, cfg)
        fitted = held_out_nll(net, test, factor=info.factor)
        true = held_out_nll(base, c)
        gap = abs(fitted["nll_original"] - true["nll"]) / abs(true["nll"])
        elapsed = time.time() - t0
        gaps[name] = gap
        print(f"\ncriterion 3 [{name}]: fitted {fitted['nll_original']:.1f} "
              f"vs true {true['nll']:.1f}, gap {100 * gap:.2f}% "
              f"(tol {100 * NHPP_NLL_TOL:.0f}%), {elapsed:.0f}s")
        assert gap <= NHPP_NLL_TOL
        assert elapsed <= 600.0
    assert set(gaps) == set(NHPP_TARGETS)


# ---------------------------------------------------------------------------
# 4. inhibitive exponential kernel recovery


def test_criterion_4_inhibitive_recovery(inhibitive_case, inhibitive_fit):
    case, fr = inhibitive_case, inhibitive_fit
    info = case["info"]
    model = fr["model"]
    assert 9000 <= case["stream"].times.size <= 11000

    fitted = held_out_nll(model, case["test"], factor=info.factor)
    true = held_out_nll(case["gt"], unscale_stream(case["test"], info.factor))
    gap = abs(fitted["nll_original"] - true["nll"]) / abs(true["nll"])

    grid = np.linspace(0.0, 3.0, 3001)
    phi_true = -0.5 * np.exp(-2.0 * grid)
    phi_fit = info.factor * kernel_grid(model, info.factor * grid)[0, 0]
    l2_err = np.sqrt(np.trapezoid((phi_fit - phi_true) ** 2, grid))
    l2_ref = np.sqrt(np.trapezoid(phi_true ** 2, grid))
    elapsed = case["sim_seconds"] + fr["fit_seconds"]
    print(f"\ncriterion 4: NLL gap {100 * gap:.2f}% (tol "
          f"{100 * INHIBITIVE_NLL_TOL:.0f}%), kernel L2 err "
          f"{l2_err:.4f} = {100 * l2_err / l2_ref:.1f}% of norm {l2_ref:.2f} "
          f"(tol {100 * KERNEL_L2_TOL:.0f}%), {elapsed:.0f}s")
    assert gap <= INHIBITIVE_NLL_TOL
    assert l2_err <= KERNEL_L2_TOL * l2_ref
    assert elapsed <= 1200.0


# ---------------------------------------------------------------------------
# 5. rectangular kernel plateau recovery


def test_criterion_5_rectangular_recovery(rectangular_case):
    case = rectangular_case
    scaled, info = scale_times(case["stream"])
    train, val, test = split_chronological(scaled)
    cfg = FitConfig(**EXPERIMENT_KW)
    t0 = time.time()
    model, trace = fit(train, val, cfg)
    elapsed = time.time() - t0

    def fitted_kernel(lags: np.ndarray) -> np.ndarray:
        return info.factor * kernel_grid(model, info.factor * lags)[0, 0]

    plateau = np.linspace(1.2, 3.2, 2001)
    mean_plateau = np.trapezoid(fitted_kernel(plateau), plateau) / 2.0
    gap_lo = np.linspace(0.0, 0.8, 801)
    mean_gap = np.trapezoid(fitted_kernel(gap_lo), gap_lo) / 0.8
    print(f"\ncriterion 5: plateau mean {mean_plateau:.4f} "
          f"(0.28 +-30% = [{0.7 * 0.28:.3f}, {1.3 * 0.28:.3f}]), "
          f"pre-delay |mean| {abs(mean_gap):.4f} (tol 0.1), {elapsed:.0f}s")
    assert 0.7 * 0.28 <= mean_plateau <= 1.3 * 0.28
    assert abs(mean_gap) <= 0.1


# ---------------------------------------------------------------------------
# 6. bivariate mixed-kernel recovery


def test_criterion_6_bivariate_mixed_kernels():
    gt = GroundTruthModel(
        D=2, bases=[0.1, 0.2],
        kernels=[[ParametricKernel("exponential", alpha=0.3, beta=3.0),
                  ParametricKernel("rectangular", alpha=0.7, beta=0.4,
                                   delta=1.0)],
                 [ParametricKernel("exponential", alpha=-0.2, beta=1.0),
                  ParametricKernel("exponential", alpha=0.4, beta=2.0)]])
    t0 = time.time()
    s = simulate_hawkes(gt, 19000.0, np.random.default_rng(21))
    assert 8000 <= s.times.size <= 9000
    scaled, info = scale_times(s)
    train, val, test = split_chronological(scaled)
    cfg = FitConfig(**EXPERIMENT_KW)
    model, trace = fit(train, val, cfg)

    fitted = held_out_nll(model, test, factor=info.factor)
    true = held_out_nll(gt, unscale_stream(test, info.factor))
    ratio = fitted["nll_original"] / true["nll"]

    lags = np.linspace(0.0, EXPERIMENT_KW["max_lag"], 5001)
    ints = np.trapezoid(kernel_grid(model, lags), lags, axis=2)
    elapsed = time.time() - t0
    print(f"\ncriterion 6: NLL ratio {ratio:.4f} (max {BIVARIATE_NLL_FACTOR}), "
          f"kernel integrals [[{ints[0, 0]:+.3f}, {ints[0, 1]:+.3f}], "
          f"[{ints[1, 0]:+.3f}, {ints[1, 1]:+.3f}]] "
          f"(true [[+0.1, +0.7], [-0.2, +0.2]]), {elapsed:.0f}s")
    assert ratio <= BIVARIATE_NLL_FACTOR
    assert ints[0, 0] > 0.0
    assert ints[1, 0] < 0.0
    assert ints[1, 1] > 0.0
    assert elapsed <= 2700.0


# ---------------------------------------------------------------------------
# 7. simulator distributional checks


def test_criterion_7_simulator_distributions(rectangular_case):
    t0 = time.time()
    homog = GroundTruthModel(D=1, bases=[0.5],
                             kernels=[[ParametricKernel("zero")]])
    s = simulate_hawkes(homog, 20000.0, np.random.default_rng(8))
    assert s.times.size >= 9000
    gaps = np.diff(np.concatenate([[0.0], s.times]))
    stat, p = ks_exponential(ResidualSeries(per_dim=[gaps * 0.5]))
    elapsed = time.time() - t0

    rect = rectangular_case
    rate = rect["stream"].times.size / rect["horizon"]
    rate_err = abs(rate - 1.0 / 6.0) * 6.0
    print(f"\ncriterion 7: homogeneous KS p {p:.3f} (min {KS_ALPHA}) at "
          f"n={s.times.size}, rectangular rate {rate:.4f} vs 1/6, "
          f"rel err {100 * rate_err:.2f}% (tol {100 * RATE_REL_TOL:.0f}%), "
          f"{elapsed:.0f}s")
    assert p > KS_ALPHA
    assert rate_err < RATE_REL_TOL
    assert elapsed < 300.0


# ---------------------------------------------------------------------------
# 8. residual diagnostics under the generating model


def test_criterion_8_residuals_under_true_model(inhibitive_case):
    res = rescaled_residuals(inhibitive_case["gt"], inhibitive_case["stream"])
    stat, p = ks_exponential(res)
    slope = qq_slope(res)
    print(f"\ncriterion 8: KS p {p:.3f} (min {KS_ALPHA}), QQ slope "
          f"{slope:.4f} (band {QQ_SLOPE_BAND})")
    assert p > KS_ALPHA
    assert QQ_SLOPE_BAND[0] <= slope <= QQ_SLOPE_BAND[1]


# ---------------------------------------------------------------------------
# sensitivity: hidden-layer width should barely move the best validation NLL


def test_sensitivity_kernel_width(inhibitive_case, inhibitive_fit):
    best = {32: inhibitive_fit["trace"].best_val_nll}
    for p in (8, 128):
        cfg = FitConfig(kernel_neurons=p, **EXPERIMENT_KW)
        model, trace = fit(inhibitive_case["train"], inhibitive_case["val"], cfg)
        best[p] = trace.best_val_nll
    vals = np.array([best[p] for p in (8, 32, 128)])
    spread = (vals.max() - vals.min()) / np.abs(vals).max()
    print(f"\nsensitivity: best val NLL by width {best}, spread "
          f"{100 * spread:.3f}% (tol {100 * SENSITIVITY_SPREAD:.1f}%)")
    assert spread <= SENSITIVITY_SPREAD
