import math

import numpy as np
import pytest

from heisenberg_mcf.control import control_from_angle
from heisenberg_mcf.errors import PolicyFrameError, PositivityError
from heisenberg_mcf.geometry import ScalarField, constant_field, quadric_field, sphere_field
from heisenberg_mcf.simulate import (
    Policy,
    SimConfig,
    estimate_value_p,
    path_noise,
    power_mean,
    sample_path,
    simulate_terminal,
    step,
    step_euler,
)

SQ2 = math.sqrt(2.0)


def test_step_zero_noise_is_identity():
    x = np.array([0.3, -1.2, 4.0])
    np.testing.assert_array_equal(step(x, control_from_angle(0.4), np.zeros(2), 0.01), x)


def test_step_examples():
    h = 0.1
    nu = np.diag([1.0, 0.0])
    np.testing.assert_allclose(step(np.zeros(3), nu, np.array([h, 0.0]), h * h), (SQ2 * h, 0, 0))
    # two-stage hand expansion: predictor (sqrt2 h, 1, -sqrt2 h / 2); X1 at the midpoint
    # is (1, 0, -1/2) because x2 stays 1, so the corrector reproduces the predictor.
    out = step(np.array([0.0, 1.0, 0.0]), nu, np.array([h, 0.0]), h * h)
    np.testing.assert_allclose(out, (0.14142135623730950, 1.0, -0.070710678118654752), rtol=1e-15)


def test_heun_and_euler_coincide_for_constant_control():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x, dw = rng.normal(size=3), rng.normal(size=2) * 0.1
        nu = control_from_angle(rng.uniform(0, np.pi))
        np.testing.assert_allclose(step(x, nu, dw), step_euler(x, nu, dw), atol=1e-15)


def test_simconfig_validation():
    assert SimConfig(0.0, 1.0, 1e-3, 10, 1).n_steps == 1000
    assert SimConfig(0.0, 0.0, 1e-3, 10, 1).n_steps == 0
    for bad in [dict(T=-1.0), dict(dt=0.0), dict(n_paths=0), dict(seed=-1), dict(dt=0.3)]:
        kw = dict(t0=0.0, T=1.0, dt=0.1, n_paths=5, seed=1)
        kw.update(bad)
        with pytest.raises(ValueError):
            SimConfig(**kw)


def test_constant_path_with_zero_noise():
    cfg = SimConfig(0, 1, 0.1, 1, 0)
    s = sample_path((1, 2, 3), Policy.constant(control_from_angle(0.2)), cfg, noise=np.zeros((10, 2)))
    assert s.states.shape == (11, 3)
    np.testing.assert_array_equal(s.states, np.tile([1.0, 2.0, 3.0], (11, 1)))


def test_seed_determinism_and_stream_independence():
    cfg = SimConfig(0, 0.5, 0.05, 3000, 123)
    pol = Policy.constant(control_from_angle(0.7))
    a = simulate_terminal((0, 0, 0), pol, cfg)
    b = simulate_terminal((0, 0, 0), pol, cfg, threads=3)
    assert np.array_equal(a, b)
    small = simulate_terminal((0, 0, 0), pol, SimConfig(0, 0.5, 0.05, 10, 123))
    assert np.array_equal(a[:10], small)
    s = sample_path((0, 0, 0), pol, cfg, path_index=4)
    np.testing.assert_array_equal(s.states[0], (0, 0, 0))
    assert np.array_equal(s.states[-1], a[4])
    assert not np.array_equal(path_noise(123, 0, 5, 0.1), path_noise(124, 0, 5, 0.1))


def test_moments_constant_control():
    cfg = SimConfig(0, 1.0, 0.05, 20000, 2024)
    x0 = np.array([0.5, -0.3, 0.2])
    term = simulate_terminal(x0, Policy.constant(control_from_angle(1.1)), cfg)
    d3 = term[:, 2] - x0[2]
    assert abs(d3.mean()) <= 3 * d3.std(ddof=1) / math.sqrt(d3.size)
    sq = np.sum((term[:, :2] - x0[:2]) ** 2, axis=1)
    assert abs(sq.mean() - 2.0) <= 3 * sq.std(ddof=1) / math.sqrt(sq.size)


def test_power_mean_gaussian_moment_oracle():
    """p = 2, g = 1 + x1^2 + x2^2: closed-form E[g^2] from the Gaussian marginal."""
    g = quadric_field(1.0, 1.0, 0.0, center=(0, 0, 0)).shifted(2.0)  # = 1 + x1^2 + x2^2
    x0 = np.array([0.4, -0.2, 0.0])
    phi = 0.6
    nu = control_from_angle(phi)
    tau = 0.2
    cfg = SimConfig(0, tau, 0.02, 40000, 99)
    est = estimate_value_p(x0, g, 2.0, [Policy.constant(nu)], cfg)
    # xi12(T) = x12 + Z m, m the retained unit direction, Z ~ N(0, 2 tau)
    m = np.array([-math.sin(phi), math.cos(phi)])
    a = 1 + x0[:2] @ x0[:2]
    b = 2 * x0[:2] @ m
    s2 = 2 * tau
    exact = math.sqrt(a * a + b * b * s2 + 3 * s2 * s2 + 2 * a * s2)
    pe = est.per_policy[0]
    assert abs(pe.estimate - exact) <= 3 * pe.stderr


def test_constant_payoff_and_zero_horizon():
    c = 1.7
    pol = Policy.constant(control_from_angle(0.3))
    for p in (1.5, 10.0, 1000.0):
        assert estimate_value_p((0, 0, 0), constant_field(c), p, [pol], SimConfig(0, 1, 0.1, 50, 5)).value == c
    g = sphere_field().shifted(2.0)
    x0 = np.array([0.3, 0.1, 0.4])
    v = estimate_value_p(x0, g, 3.0, [pol], SimConfig(0.5, 0.5, 0.1, 20, 5)).value
    assert v == pytest.approx(float(g(x0)), rel=1e-15)


def test_policy_set_and_lp_monotonicity():
    g = sphere_field().shifted(2.0)
    cfg = SimConfig(0, 0.2, 0.02, 2000, 17)
    x0 = (1.0, 0.0, 1.0)
    pols = [Policy.constant(control_from_angle(k * np.pi / 3)) for k in range(3)]
    pols.append(Policy.feedback(sphere_field(), 5.0, r_shift=2.0))
    vals = [estimate_value_p(x0, g, 5.0, pols[:k], cfg).value for k in range(1, len(pols) + 1)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    term = g(simulate_terminal(x0, pols[0], cfg))
    means = [power_mean(term, p)[0] for p in (1.5, 2, 5, 10, 100, 1000)]
    assert all(b >= a - 1e-12 * abs(a) for a, b in zip(means, means[1:]))


def test_feedback_not_worse_than_best_constant():
    g = sphere_field().shifted(2.0)
    cfg = SimConfig(0, 0.1, 0.01, 4000, 3)
    pols = [Policy.constant(control_from_angle(k * np.pi / 8), label=str(k)) for k in range(8)]
    pols.append(Policy.feedback(sphere_field(), 5.0, r_shift=2.0))
    est = estimate_value_p((1.0, 0.0, 1.0), g, 5.0, pols, cfg)
    fb = est.per_policy[-1]
    best = min(est.per_policy[:-1], key=lambda e: e.estimate)
    assert fb.estimate <= best.estimate + 3 * best.stderr


def test_feedback_grid_method_matches_batch():
    cfg = SimConfig(0, 0.05, 0.01, 8, 1)
    a = simulate_terminal((1, 0, 1), Policy.feedback(sphere_field(), 4.0, 2.0), cfg)
    b = simulate_terminal((1, 0, 1), Policy.feedback(sphere_field(), 4.0, 2.0, method="grid"), cfg)
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_errors():
    pol = Policy.constant(control_from_angle(0.0))
    with pytest.raises(PositivityError):
        estimate_value_p((0, 0, 1), sphere_field(), 2.0, [pol], SimConfig(0, 0.1, 0.1, 4, 1))
    with pytest.raises(PolicyFrameError):
        simulate_terminal((1, 0, 1), Policy.feedback(sphere_field(), 3.0, r_shift=0.0), SimConfig(0, 0.1, 0.1, 4, 1))
    with pytest.raises(ValueError):
        Policy.constant(np.eye(2))
    with pytest.raises(ValueError):
        estimate_value_p((0, 0, 0), constant_field(1.0), 2.0, [], SimConfig(0, 0.1, 0.1, 4, 1))
