"""Unit tests for the scalar ReLU nets.

Closed-form integrals and analytic gradients are checked against slow
reference implementations written independently here: python-loop forward
evaluation, midpoint Riemann integration, and central finite differences.
"""

import json

import numpy as np
import pytest

from hawkesnet.network import (
    NetGradient,
    ReluNet,
    clamped_net_integral,
    clamped_net_integral_gradient,
    init_base_net,
    init_kernel_net,
    kernel_support,
    net_crossings,
    net_forward,
    net_from_dict,
    net_from_json,
    net_gradient,
    net_integral,
    net_to_dict,
    net_to_json,
)

EXACT = 1e-12
RIEMANN_TOL = 1e-8
FD_REL_TOL = 1e-5
FD_STEP = 1e-6
N_PANELS = 200_000


# -- reference implementations ----------------------------------------------


def ref_forward(net: ReluNet, x: float) -> float:
    """Plain-python forward pass."""
    total = net.b2
    for i in range(net.p):
        pre = net.a1[i] * x + net.b1[i]
        if pre > 0.0:
            total += net.a2[i] * pre
    return total


def ref_integral(net: ReluNet, lo: float, hi: float, clamp: bool) -> float:
    """Midpoint Riemann sum; error is O(1/n^2) off the kinks."""
    w = (hi - lo) / N_PANELS
    mids = lo + (np.arange(N_PANELS) + 0.5) * w
    vals = net_forward(net, mids)
    if clamp:
        vals = np.maximum(vals, 0.0)
    return float(vals.sum() * w)


def fd_gradient(f, theta: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    g = np.empty_like(theta)
    for k in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (f(up) - f(dn)) / (2.0 * h)
    return g


def random_net(rng: np.random.Generator, p: int = 4) -> ReluNet:
    return ReluNet(
        a1=rng.uniform(-1.5, 1.5, size=p),
        b1=rng.uniform(-1.0, 1.0, size=p),
        a2=rng.uniform(-1.0, 1.0, size=p),
        b2=rng.uniform(-0.5, 0.5),
    )


def pack(net: ReluNet) -> np.ndarray:
    return np.concatenate([net.a1, net.b1, net.a2, [net.b2]])


def unpack(theta: np.ndarray, p: int) -> ReluNet:
    return ReluNet(a1=theta[:p], b1=theta[p:2 * p], a2=theta[2 * p:3 * p],
                   b2=theta[3 * p])


# -- forward pass ------------------------------------------------------------


def test_forward_hand_values():
    hinge = ReluNet(a1=[-2.0], b1=[1.0], a2=[1.0])
    assert net_forward(hinge, 0.0) == 1.0
    assert net_forward(hinge, 0.25) == 0.5
    assert net_forward(hinge, 0.5) == 0.0
    assert net_forward(hinge, 2.0) == 0.0
    flat = ReluNet(a1=[1.0], b1=[1.0], a2=[0.0], b2=0.3)
    assert net_forward(flat, -7.0) == 0.3
    assert net_forward(flat, 11.0) == 0.3


def test_forward_matches_loop_reference():
    rng = np.random.default_rng(10)
    for _ in range(30):
        net = random_net(rng, p=rng.integers(1, 7))
        for x in rng.uniform(-3.0, 3.0, size=8):
            assert net_forward(net, float(x)) == pytest.approx(
                ref_forward(net, float(x)), abs=EXACT)


def test_forward_vectorized_matches_scalar():
    rng = np.random.default_rng(11)
    net = random_net(rng, p=5)
    xs = rng.uniform(-2.0, 2.0, size=17)
    vec = net_forward(net, xs)
    assert vec.shape == (17,)
    scal = np.array([net_forward(net, float(x)) for x in xs])
    np.testing.assert_allclose(vec, scal, rtol=0.0, atol=EXACT)


def test_forward_is_piecewise_linear_between_kinks():
    rng = np.random.default_rng(12)
    net = random_net(rng, p=6)
    kinks = np.sort(net_crossings(net))
    edges = np.concatenate(([kinks[0] - 1.0], kinks, [kinks[-1] + 1.0]))
    for g, h in zip(edges[:-1], edges[1:]):
        if h - g < 1e-6:
            continue
        x = np.linspace(g, h, 5)[1:-1]  # interior, off the kinks
        y = net_forward(net, x)
        second_diff = y[:-2] - 2.0 * y[1:-1] + y[2:]
        np.testing.assert_allclose(second_diff, 0.0, atol=1e-10)


def test_forward_unit_permutation_invariant():
    rng = np.random.default_rng(13)
    net = random_net(rng, p=6)
    perm = rng.permutation(6)
    shuffled = ReluNet(net.a1[perm], net.b1[perm], net.a2[perm], net.b2)
    xs = rng.uniform(-2.0, 2.0, size=9)
    np.testing.assert_allclose(net_forward(net, xs), net_forward(shuffled, xs),
                               rtol=0.0, atol=EXACT)


def test_relu_net_validates_shapes():
    with pytest.raises(ValueError):
        ReluNet(a1=[1.0, 2.0], b1=[0.0], a2=[1.0])
    with pytest.raises(ValueError):
        ReluNet(a1=[[1.0]], b1=[[0.0]], a2=[[1.0]])


# -- analytic gradient -------------------------------------------------------


def test_gradient_hand_values():
    net = ReluNet(a1=[1.0], b1=[0.0], a2=[2.0])
    g = net_gradient(net, 3.0)
    assert g.d_a2[0] == 3.0
    assert g.d_a1[0] == 6.0
    assert g.d_b1[0] == 2.0
    assert g.d_b2 == 1.0
    g0 = net_gradient(net, -1.0)  # unit inactive
    assert g0.d_a2[0] == 0.0 and g0.d_a1[0] == 0.0 and g0.d_b1[0] == 0.0
    assert g0.d_b2 == 1.0


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(14)
    checked = 0
    while checked < 25:
        net = random_net(rng, p=4)
        x = float(rng.uniform(-3.0, 3.0))
        if np.min(np.abs(net.a1 * x + net.b1)) < 1e-4:
            continue  # too close to a kink for clean differencing
        analytic = net_gradient(net, x).flat()
        fd = fd_gradient(lambda th: net_forward(unpack(th, 4), x), pack(net))
        denom = max(np.linalg.norm(fd), 1e-12)
        assert np.linalg.norm(analytic - fd) / denom < FD_REL_TOL
        checked += 1


def test_gradient_sums_over_array_input():
    rng = np.random.default_rng(15)
    net = random_net(rng, p=5)
    xs = rng.uniform(-2.0, 2.0, size=6)
    total = net_gradient(net, xs)
    acc = np.zeros(net.p * 3 + 1)
    for x in xs:
        acc += net_gradient(net, float(x)).flat()
    np.testing.assert_allclose(total.flat(), acc, rtol=0.0, atol=EXACT)
    assert total.d_b2 == float(xs.size)


def test_net_gradient_flat_ordering():
    g = NetGradient(d_a1=np.array([1.0, 2.0]), d_b1=np.array([3.0, 4.0]),
                    d_a2=np.array([5.0, 6.0]), d_b2=7.0)
    np.testing.assert_array_equal(g.flat(), [1, 2, 3, 4, 5, 6, 7])
    np.testing.assert_array_equal(g.flat(with_bias=False), [1, 2, 3, 4, 5, 6])


# -- integrals ---------------------------------------------------------------


def test_integral_hand_triangle():
    hinge = ReluNet(a1=[-2.0], b1=[1.0], a2=[1.0])
    assert net_integral(hinge, 0.0, 1.0) == pytest.approx(0.25, abs=EXACT)
    assert clamped_net_integral(hinge, 0.0, 1.0) == pytest.approx(0.25, abs=EXACT)


def test_integral_constant_net():
    flat = ReluNet(a1=[1.0], b1=[1.0], a2=[0.0], b2=0.3)
    assert net_integral(flat, 1.0, 3.0) == pytest.approx(0.6, abs=EXACT)
    assert clamped_net_integral(flat, 1.0, 3.0) == pytest.approx(0.6, abs=EXACT)


def test_clamp_differs_when_net_goes_negative():
    # f(x) = 1 - 2x on x >= 0: unclamped integral over [0, 1] cancels to 0
    net = ReluNet(a1=[1.0], b1=[0.0], a2=[-2.0], b2=1.0)
    assert net_integral(net, 0.0, 1.0) == pytest.approx(0.0, abs=EXACT)
    assert clamped_net_integral(net, 0.0, 1.0) == pytest.approx(0.25, abs=EXACT)
    negflat = ReluNet(a1=[0.0], b1=[1.0], a2=[-1.0], b2=0.5)
    assert net_integral(negflat, 0.0, 2.0) == pytest.approx(-1.0, abs=EXACT)
    assert clamped_net_integral(negflat, 0.0, 2.0) == 0.0


def test_integrals_match_riemann_reference():
    rng = np.random.default_rng(16)
    for _ in range(20):
        net = random_net(rng, p=rng.integers(1, 6))
        lo = float(rng.uniform(-2.0, 0.0))
        hi = lo + float(rng.uniform(0.5, 3.0))
        assert net_integral(net, lo, hi) == pytest.approx(
            ref_integral(net, lo, hi, clamp=False), abs=RIEMANN_TOL)
        assert clamped_net_integral(net, lo, hi) == pytest.approx(
            ref_integral(net, lo, hi, clamp=True), abs=RIEMANN_TOL)


def test_integral_additivity():
    rng = np.random.default_rng(17)
    net = random_net(rng, p=5)
    lo, mid, hi = -1.0, 0.3, 2.2
    whole = clamped_net_integral(net, lo, hi)
    parts = clamped_net_integral(net, lo, mid) + clamped_net_integral(net, mid, hi)
    assert whole == pytest.approx(parts, abs=1e-10)


def test_integral_rejects_reversed_bounds():
    net = ReluNet(a1=[1.0], b1=[0.0], a2=[1.0])
    with pytest.raises(ValueError):
        net_integral(net, 1.0, 0.0)
    with pytest.raises(ValueError):
        clamped_net_integral(net, 1.0, 0.0)
    assert clamped_net_integral(net, 1.0, 1.0) == 0.0


def test_clamped_integral_gradient_matches_finite_differences():
    rng = np.random.default_rng(18)
    for _ in range(25):
        net = random_net(rng, p=4)
        lo = float(rng.uniform(-1.5, 0.0))
        hi = lo + float(rng.uniform(0.5, 2.5))
        analytic = clamped_net_integral_gradient(net, lo, hi).flat()
        fd = fd_gradient(
            lambda th: clamped_net_integral(unpack(th, 4), lo, hi), pack(net))
        denom = max(np.linalg.norm(fd), 1e-10)
        assert np.linalg.norm(analytic - fd) / denom < FD_REL_TOL


def test_clamped_integral_gradient_hand_value():
    # I = int_0^1 [b2 + a2*(a1*x + b1)] dx: dI/da1 = a2/2, dI/da2 = a1/2 + b1,
    # dI/db1 = a2, dI/db2 = 1 at a1 = a2 = 1, b1 = b2 = 0
    net = ReluNet(a1=[1.0], b1=[0.0], a2=[1.0])
    g = clamped_net_integral_gradient(net, 0.0, 1.0)
    assert g.d_a1[0] == pytest.approx(0.5, abs=EXACT)
    assert g.d_a2[0] == pytest.approx(0.5, abs=EXACT)
    assert g.d_b1[0] == pytest.approx(1.0, abs=EXACT)
    assert g.d_b2 == pytest.approx(1.0, abs=EXACT)


# -- support and crossings ---------------------------------------------------


def test_kernel_support_cases():
    assert kernel_support(ReluNet(a1=[-1.0], b1=[2.0], a2=[1.0])) == 2.0
    # a unit with zero output weight cannot extend the support
    assert kernel_support(ReluNet(a1=[-1.0, 1.0], b1=[2.0, 0.0],
                                  a2=[1.0, 0.0])) == 2.0
    assert kernel_support(ReluNet(a1=[-1.0, 1.0], b1=[2.0, 0.0],
                                  a2=[1.0, 0.5])) == np.inf
    assert kernel_support(ReluNet(a1=[-1.0], b1=[2.0], a2=[1.0],
                                  b2=0.1)) == np.inf
    assert kernel_support(ReluNet(a1=[0.0], b1=[0.5], a2=[1.0])) == np.inf
    # flat unit that never activates is ignored
    assert kernel_support(ReluNet(a1=[-1.0, 0.0], b1=[2.0, -0.5],
                                  a2=[1.0, 1.0])) == 2.0
    # kink left of zero clips to zero support
    assert kernel_support(ReluNet(a1=[-1.0], b1=[-2.0], a2=[1.0])) == 0.0


def test_net_crossings():
    net = ReluNet(a1=[2.0, 0.0, -1.0], b1=[1.0, 1.0, 3.0], a2=[1.0, 1.0, 1.0])
    np.testing.assert_allclose(np.sort(net_crossings(net)), [-0.5, 3.0])


# -- initialization ----------------------------------------------------------

def test_kernel_init_ranges_and_determinism():
    net = init_kernel_net(32, np.random.default_rng(0))
    assert net.p == 32
    assert np.all(net.a1 >= -0.3) and np.all(net.a1 <= 0.0)
    assert np.all(net.b1 >= 0.0) and np.all(net.b1 <= 0.3)
    assert np.all(net.a2 >= 0.0) and np.all(net.a2 <= 0.2)
    assert net.b2 == 0.0
    again = init_kernel_net(32, np.random.default_rng(0))
    np.testing.assert_array_equal(net.a1, again.a1)
    np.testing.assert_array_equal(net.b1, again.b1)
    np.testing.assert_array_equal(net.a2, again.a2)


def test_base_init_ranges():
    net = init_base_net(50, np.random.default_rng(1))
    assert net.p == 50
    assert np.all(np.abs(net.a1) <= 1e-3)
    assert np.all(np.abs(net.b1) <= 1.0)
    assert np.all(net.a2 >= 0.0) and np.all(net.a2 <= 0.2)
    assert net.b2 == 0.0


def test_kernel_init_starts_nonnegative_with_finite_support():
    # downward hinges with positive weights: valid decaying kernel at start
    net = init_kernel_net(32, np.random.default_rng(2))
    xs = np.linspace(0.0, 50.0, 501)
    assert np.all(net_forward(net, xs) >= 0.0)
    assert np.isfinite(kernel_support(net))


# -- serialization -----------------------------------------------------------


def test_json_round_trip_is_bit_exact():
    rng = np.random.default_rng(19)
    net = random_net(rng, p=7)
    back = net_from_json(net_to_json(net))
    np.testing.assert_array_equal(net.a1, back.a1)
    np.testing.assert_array_equal(net.b1, back.b1)
    np.testing.assert_array_equal(net.a2, back.a2)
    assert net.b2 == back.b2


def test_dict_round_trip_and_p_mismatch():
    net = ReluNet(a1=[-1.0], b1=[0.5], a2=[2.0], b2=0.1)
    d = net_to_dict(net)
    assert d["p"] == 1
    bad = dict(d, p=3)
    with pytest.raises(ValueError):
        net_from_dict(bad)
    ok = net_from_dict(json.loads(json.dumps(d)))
    assert net_forward(ok, 0.2) == net_forward(net, 0.2)
