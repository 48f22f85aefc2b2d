import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heisenberg_mcf.control import (
    Frame,
    H_p,
    control_from_angle,
    eig2_sym,
    f_p,
    h_p,
    h_p_raw,
    is_admissible,
    rotation,
)
from heisenberg_mcf.errors import PositivityError


def sup_oracle(frame, p):
    """Exact sup of f_p: f_p = c + Re(e^{2i theta} Z) so the max is c + |Z|.

    Written in original coordinates, independent of the optimiser.
    """
    a = (p - 1) / frame.r * frame.qnorm ** 2
    m = frame.M
    al = frame.alpha
    c = -a / 2 + 0.5 * np.trace(m)
    z = a / 2 - np.exp(2j * al) * ((m[0, 0] - m[1, 1]) / 2 - 1j * m[0, 1])
    return c + abs(z)


def random_frame(rng, qmin=0.05, qmax=5.0):
    qn = rng.uniform(qmin, qmax)
    ang = rng.uniform(0, 2 * np.pi)
    b = rng.normal(size=(2, 2))
    return Frame(rng.uniform(0.2, 3.0), (qn * np.cos(ang), qn * np.sin(ang)), b + b.T)


@pytest.mark.parametrize("phi, expected", [
    (0.0, [[0, 0], [0, 1]]),
    (np.pi / 2, [[1, 0], [0, 0]]),
    (np.pi / 4, [[0.5, -0.5], [-0.5, 0.5]]),
])
def test_control_from_angle_examples(phi, expected):
    np.testing.assert_allclose(control_from_angle(phi - 0.3, 0.3), expected, atol=1e-15)


def test_is_admissible_examples():
    assert not is_admissible(np.eye(2))
    assert is_admissible(control_from_angle(0.3, 1.1))
    assert not is_admissible(np.zeros((2, 2)))
    assert not is_admissible(np.array([[0.5, 0.1], [0.0, 0.5]]))


def test_h_p_examples():
    for th in np.linspace(0, np.pi, 7):
        fr = Frame(1.0, (0, 0), np.diag([3.0, -1.0]))
        assert h_p(fr, 10, control_from_angle(th, 0)) == pytest.approx(
            3 * np.sin(th) ** 2 - np.cos(th) ** 2, abs=1e-14)
    fr = Frame(1.0, (1, 0), np.zeros((2, 2)))
    assert h_p(fr, 10, control_from_angle(0, 0)) == pytest.approx(0, abs=1e-15)
    assert h_p(fr, 10, control_from_angle(np.pi / 2, 0)) == pytest.approx(-9, abs=1e-14)


def test_f_p_examples():
    fr = Frame(1.0, (1, 0), np.diag([1.0, 0.0]))
    assert f_p(fr, 10, 0.0) == 0.0
    assert f_p(fr, 10, np.pi / 2) == pytest.approx(-8, abs=1e-14)
    assert f_p(Frame(1.0, (0, 0), np.diag([3.0, -1.0])), 10, np.pi / 2) == pytest.approx(3, abs=1e-15)
    with pytest.raises(ValueError):
        f_p(Frame(1.0, (1, 0), [[1, 1], [1, 0]]), 10, 0.0)


def test_H_p_examples():
    assert H_p(Frame(1.0, (0, 0), np.diag([1.0, 0.0])), 10) == 1.0
    for lam in (-2.0, 0.0, 3.5):
        assert H_p(Frame(0.7, (0.3, -1.2), lam * np.eye(2)), 10) == pytest.approx(lam, abs=1e-12)
    assert H_p(Frame(1.0, (1, 0), np.diag([1.0, 0.0])), 10) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        H_p(Frame(1.0, (1, 0), np.eye(2)), 10, resolution=4)


def test_frame_invariants():
    rng = np.random.default_rng(1)
    for _ in range(200):
        fr = random_frame(rng)
        o = fr.Odiag
        assert fr.lambda1 >= fr.lambda2
        np.testing.assert_allclose(o.T @ o, np.eye(2), atol=1e-15)
        assert np.linalg.det(o) == pytest.approx(1.0, abs=1e-14)
        assert np.abs(o.T @ fr.M @ o - np.diag([fr.lambda1, fr.lambda2])).max() <= 1e-12 * (1 + np.abs(fr.M).max())
        assert 0 <= fr.alpha < 2 * np.pi
    assert Frame(1, (0, 0), np.diag([2.0, 2.0])).characteristic
    np.testing.assert_array_equal(Frame(1, (0, 1), np.diag([2.0, 2.0])).Odiag, np.eye(2))
    with pytest.raises(PositivityError):
        Frame(0.0, (1, 0), np.eye(2))
    with pytest.raises(ValueError):
        Frame(1.0, (1, 0), [[1, 2], [0, 1]])


def test_eig2_sym_diagonal_is_exact():
    l1, l2, phi = eig2_sym(np.diag([0.1, 0.3]))
    assert (l1, l2) == (0.3, 0.1)
    np.testing.assert_allclose(rotation(phi).T @ np.diag([0.1, 0.3]) @ rotation(phi), np.diag([0.3, 0.1]), atol=1e-16)


angle = st.floats(-10, 10)
vec = st.tuples(st.floats(-5, 5), st.floats(-5, 5))


@settings(max_examples=200)
@given(angle, angle, vec)
def test_projection_and_trace_identities(theta, alpha, q):
    nu = control_from_angle(theta, alpha)
    q = np.array(q)
    n = np.array([np.cos(theta + alpha), np.sin(theta + alpha)])
    assert np.array_equal(nu, nu.T)
    assert np.allclose(nu @ nu, nu, atol=1e-12)
    assert np.allclose(nu @ nu @ q, nu @ q, atol=1e-12 * (1 + np.abs(q).max()))
    assert np.trace(nu @ nu.T @ np.outer(q, q)) == pytest.approx(np.dot(nu @ q, nu @ q), abs=1e-12 * (1 + q @ q))
    assert np.dot(nu @ q, nu @ q) == pytest.approx(q @ q - np.dot(q, n) ** 2, abs=1e-12 * (1 + q @ q))
    lam = np.array([1.7, -0.4])
    assert np.trace(nu @ nu.T @ np.diag(lam)) == pytest.approx(lam[0] * nu[0, 0] + lam[1] * nu[1, 1], abs=1e-12)
    assert is_admissible(nu)


@settings(max_examples=200)
@given(st.floats(0.1, 5), vec, st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
       angle, angle, st.floats(1.01, 1e4))
def test_orthonormal_invariance(r, q, a, b, c, theta, rot, p):
    m = np.array([[a, b], [b, c]])
    nu = control_from_angle(theta)
    o = rotation(rot)
    lhs = h_p_raw(r, q, m, nu, p)
    rhs = h_p_raw(r, o @ np.array(q), o @ m @ o.T, o @ nu, p)
    scale = 1 + abs(p) * np.dot(q, q) / r + np.abs(m).max()
    assert lhs == pytest.approx(rhs, abs=1e-12 * scale)


@settings(max_examples=100)
@given(st.floats(0.1, 5), vec, st.floats(-3, 3), st.floats(-3, 3), st.floats(-10, 10), st.floats(1.01, 100))
def test_f_p_periodic_and_consistent_with_h_p(r, q, l1, l2, theta, p):
    fr = Frame(r, q, np.diag([l1, l2]))
    scale = 1 + p * fr.qnorm ** 2 / r + abs(l1) + abs(l2)
    assert f_p(fr, p, theta) == pytest.approx(f_p(fr, p, theta + np.pi), abs=1e-12 * scale)
    assert f_p(fr, p, theta) == pytest.approx(h_p(fr, p, control_from_angle(theta, fr.alpha)), abs=1e-12 * scale)


def test_H_p_matches_closed_form_supremum():
    rng = np.random.default_rng(11)
    for _ in range(300):
        fr = random_frame(rng)
        p = float(rng.choice([1.5, 10, 100, 1000]))
        assert H_p(fr, p) == pytest.approx(sup_oracle(fr, p), abs=1e-8)


def test_extreme_points_dominate_interior_controls():
    rng = np.random.default_rng(5)
    for _ in range(200):
        fr = random_frame(rng)
        p = float(rng.choice([2, 10, 100]))
        hp = H_p(fr, p)
        for _ in range(10):
            t = rng.uniform()
            o = rotation(rng.uniform(0, 2 * np.pi))
            nu = o @ np.diag([np.sqrt(t), np.sqrt(1 - t)]) @ o.T
            assert is_admissible(nu, 1e-12)
            assert h_p(fr, p, nu) <= hp + 1e-9 * (1 + abs(hp))


def test_H_p_converges_to_levelset_rhs():
    rng = np.random.default_rng(2)
    for _ in range(50):
        fr = random_frame(rng, 0.5, 3.0)
        qh = fr.q / fr.qnorm
        target = np.trace(fr.M) - qh @ fr.M @ qh
        errs = [abs(H_p(fr, p) - target) for p in (1e2, 1e3, 1e4)]
        assert errs[0] >= errs[1] >= errs[2]


def test_p_must_exceed_one():
    with pytest.raises(ValueError):
        h_p(Frame(1, (1, 0), np.eye(2)), 1.0, np.eye(2))
