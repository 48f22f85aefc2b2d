"""Admissible controls, the rotation parameterisation nu_theta and the p-objectives.

A frame is the local data (r, q, M): r > 0 the value of the level-set
function, q the horizontal gradient and M the symmetric horizontal Hessian.
For a frame and an exponent p > 1,

    h_p(nu) = -(p - 1) / r * Tr(nu nu^T q q^T) + Tr(nu nu^T M)

and H_p = sup over admissible nu of h_p.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PositivityError


def check_p(p: float) -> float:
    p = float(p)
    if not p > 1.0:
        raise ValueError(f"p must be > 1, got {p}")
    return p


def rotation(phi) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def eig2_sym(m):
    """Closed-form eigen-decomposition of symmetric 2x2 matrices.

    Returns ``(lam1, lam2, phi)`` with ``lam1 >= lam2`` and ``rotation(phi)``
    diagonalising ``m``: ``R^T m R = diag(lam1, lam2)``.  For already diagonal
    input the eigenvalues are the diagonal entries bit-for-bit, and phi = 0
    whenever m11 >= m22.
    """
    m = np.asarray(m, dtype=float)
    a, b, c = m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1]
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    diag = b == 0
    lam1 = np.where(diag, np.maximum(a, c), mean + rad)
    lam2 = np.where(diag, np.minimum(a, c), mean - rad)
    phi = 0.5 * np.arctan2(2.0 * b, a - c)
    phi = np.where(diag, np.where(a >= c, 0.0, 0.5 * np.pi), phi)
    if np.ndim(lam1) == 0:
        return float(lam1), float(lam2), float(phi)
    return lam1, lam2, phi


@dataclass(frozen=True)
class Frame:
    """Local optimisation data (r, q, M) with derived polar angle and eigen-frame."""

    r: float
    q: np.ndarray
    M: np.ndarray
    char_tol: float = 0.0
    alpha: float = field(init=False)
    lambda1: float = field(init=False)
    lambda2: float = field(init=False)
    Odiag: np.ndarray = field(init=False, repr=False)
    characteristic: bool = field(init=False)

    def __post_init__(self):
        r = float(self.r)
        if not np.isfinite(r) or r <= 0:
            raise PositivityError(f"r must be > 0, got {r}")
        q = np.array(self.q, dtype=float).reshape(2)
        m = np.array(self.M, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(q)) or not np.all(np.isfinite(m)):
            raise ValueError("q and M must be finite")
        if abs(m[0, 1] - m[1, 0]) > 1e-12 * (1.0 + np.abs(m).max()):
            raise ValueError(f"M must be symmetric, got {m.tolist()}")
        m[0, 1] = m[1, 0] = 0.5 * (m[0, 1] + m[1, 0])
        lam1, lam2, phi = eig2_sym(m)
        char = bool(np.hypot(q[0], q[1]) <= self.char_tol)
        alpha = 0.0 if char else float(np.arctan2(q[1], q[0]) % (2 * np.pi))
        q.setflags(write=False)
        m.setflags(write=False)
        for name, val in (("r", r), ("q", q), ("M", m), ("alpha", alpha), ("lambda1", lam1),
                          ("lambda2", lam2), ("Odiag", rotation(phi)), ("characteristic", char)):
            object.__setattr__(self, name, val)

    @property
    def qnorm(self) -> float:
        return float(np.hypot(self.q[0], self.q[1]))

    @property
    def is_diagonal(self) -> bool:
        return self.M[0, 1] == 0.0

    def working_frame(self) -> "Frame":
        """The frame expressed in the eigenbasis of M.

        Already-diagonal frames are returned unchanged, so the diagonal entries
        keep their given order (M = diag(0, 1) stays as is).
        """
        if self.is_diagonal:
            return self
        return Frame(self.r, self.Odiag.T @ self.q, np.diag([self.lambda1, self.lambda2]),
                     char_tol=self.char_tol)


def control_from_angle(theta, alpha=0.0) -> np.ndarray:
    """nu_theta = I - n n^T with n = (cos(theta + alpha), sin(theta + alpha))."""
    phi = np.asarray(theta, dtype=float) + alpha
    s, c = np.sin(phi), np.cos(phi)
    return np.stack([np.stack([s * s, -s * c], -1), np.stack([-s * c, c * c], -1)], -2)


def is_admissible(nu, tol: float = 1e-12) -> bool:
    """Membership in A = {nu sym : nu >= 0, I - nu^2 >= 0, Tr(I - nu^2) = 1}."""
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (2, 2) or abs(nu[0, 1] - nu[1, 0]) > tol:
        return False
    nu = 0.5 * (nu + nu.T)
    rest = np.eye(2) - nu @ nu
    return bool(np.linalg.eigvalsh(nu).min() >= -tol
                and np.linalg.eigvalsh(rest).min() >= -tol
                and abs(np.trace(rest) - 1.0) <= tol)


def h_p_raw(r, q, M, nu, p):
    """Array form of h_p; broadcasts over leading dimensions."""
    q = np.asarray(q, dtype=float)
    nn = np.einsum("...ij,...kj->...ik", nu, nu)
    qq = np.einsum("...i,...j->...ij", q, q)
    tr_q = np.einsum("...ij,...ji->...", nn, qq)
    tr_m = np.einsum("...ij,...ji->...", nn, np.asarray(M, dtype=float))
    return -(p - 1.0) / np.asarray(r, dtype=float) * tr_q + tr_m


def h_p(frame: Frame, p: float, nu) -> float:
    return float(h_p_raw(frame.r, frame.q, frame.M, np.asarray(nu, dtype=float), check_p(p)))


def f_p(frame: Frame, p: float, theta):
    """h_p along nu_theta for a frame whose M is diagonal.

    -(p-1)/r |q|^2 sin^2 theta + M11 sin^2(theta + alpha) + M22 cos^2(theta + alpha)
    """
    if not frame.is_diagonal:
        raise ValueError("f_p needs a diagonal M; use frame.working_frame() first")
    p = check_p(p)
    theta = np.asarray(theta, dtype=float)
    a = (p - 1.0) / frame.r * frame.qnorm ** 2
    out = (-a * np.sin(theta) ** 2 + frame.M[0, 0] * np.sin(theta + frame.alpha) ** 2
           + frame.M[1, 1] * np.cos(theta + frame.alpha) ** 2)
    return float(out) if out.ndim == 0 else out


def H_p(frame: Frame, p: float, resolution: int = 256) -> float:
    """The p-Hamiltonian sup_nu h_p, taken over the extreme controls nu_theta."""
    from .optimizer import optimal_angle_stationary

    p = check_p(p)
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    if frame.characteristic:
        return max(frame.lambda1, frame.lambda2)
    wf = frame.working_frame()
    thetas = np.arange(resolution) * (np.pi / resolution)
    best = float(np.max(f_p(wf, p, thetas)))
    return max(best, optimal_angle_stationary(wf, p).value)
