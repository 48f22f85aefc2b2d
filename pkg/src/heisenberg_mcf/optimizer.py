"""Maximising angle of f_p and the resulting optimal control.

Three independent routes are provided for q != 0: a brute-force grid with
golden-section refinement, an exact solve of f_p'(theta) = 0, and the
large-p formula theta ~ Cbar / p with Cbar = (lam1 - lam2) sin(2 alpha) / (2 |q|^2 / r).
At q = 0 the maximiser is read off the eigenvalues of M.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .control import Frame, check_p, control_from_angle, eig2_sym, f_p
from .errors import CharacteristicInput

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
METHODS = ("grid", "stationary", "asymptotic", "characteristic")


class AsymptoticConstants(NamedTuple):
    C1: float
    C2: float
    Cbar: float


@dataclass(frozen=True)
class OptimalAngleResult:
    theta_star: float
    value: float
    method: str
    degenerate: bool = False
    constants: Optional[AsymptoticConstants] = None
    regime_warning: bool = False


def _tie_tol(*vals) -> float:
    return 1e-12 * (1.0 + sum(abs(v) for v in vals))


def golden_max(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200):
    """Golden-section search for the maximum of a unimodal f on [a, b]."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def optimal_angle_characteristic(frame: Frame) -> OptimalAngleResult:
    """q = 0: retain the eigendirection of the larger eigenvalue (theta = pi/2 or 0)."""
    wf = frame.working_frame()
    la, lb = float(wf.M[0, 0]), float(wf.M[1, 1])
    # every direction is optimal only on an exact tie; near-ties still have a unique maximiser
    degenerate = la == lb
    theta = 0.5 * math.pi if la > lb else 0.0
    return OptimalAngleResult(theta, max(la, lb), "characteristic", degenerate)


def optimal_angle_grid(frame: Frame, p: float, n: int = 1024) -> OptimalAngleResult:
    """Brute-force argmax of f_p on theta_k = k pi / n, refined by golden section."""
    p = check_p(p)
    if n < 64:
        raise ValueError("grid size n must be >= 64")
    wf = frame.working_frame()
    h = math.pi / n
    thetas = np.arange(n) * h
    vals = f_p(wf, p, thetas)
    k = int(np.argmax(vals))
    vmax = float(vals[k])
    if vmax - float(vals.min()) <= 1e-12 * (1.0 + abs(vmax)):
        return OptimalAngleResult(float(thetas[k]), vmax, "grid", degenerate=True)
    x, fx = golden_max(lambda t: f_p(wf, p, t), thetas[k] - h, thetas[k] + h)
    if fx < vmax:
        x, fx = thetas[k], vmax
    return OptimalAngleResult(float(x % math.pi), float(fx), "grid")


def _stationary_roots(a, b, alpha):
    """Both roots in [0, pi) of -a sin 2t + b sin(2t + 2 alpha) = 0.

    Rearranged: tan 2t = b sin 2alpha / (a - b cos 2alpha).
    """
    phi = 0.5 * np.arctan2(b * np.sin(2 * alpha), a - b * np.cos(2 * alpha))
    return np.mod(phi, np.pi), np.mod(phi + 0.5 * np.pi, np.pi)


def optimal_angle_stationary(frame: Frame, p: float) -> OptimalAngleResult:
    """Exact maximiser from the two stationary points of f_p in [0, pi)."""
    p = check_p(p)
    if frame.characteristic or frame.qnorm == 0.0:
        raise CharacteristicInput("stationary solve needs q != 0")
    wf = frame.working_frame()
    a = (p - 1.0) / wf.r * wf.qnorm ** 2
    b = float(wf.M[0, 0] - wf.M[1, 1])
    num, den = b * math.sin(2 * wf.alpha), a - b * math.cos(2 * wf.alpha)
    if abs(num) <= _tie_tol(a, b) and abs(den) <= _tie_tol(a, b):
        return OptimalAngleResult(0.0, f_p(wf, p, 0.0), "stationary", degenerate=True)
    t1, t2 = (float(t) for t in _stationary_roots(a, b, wf.alpha))
    v1, v2 = f_p(wf, p, t1), f_p(wf, p, t2)
    if v1 > v2 or (v1 == v2 and t1 < t2):
        return OptimalAngleResult(t1, v1, "stationary")
    return OptimalAngleResult(t2, v2, "stationary")


def asymptotic_constants(frame: Frame) -> AsymptoticConstants:
    wf = frame.working_frame()
    c1 = float(wf.M[0, 0] - wf.M[1, 1]) * math.sin(2 * wf.alpha)
    c2 = 2.0 * wf.qnorm ** 2 / wf.r
    return AsymptoticConstants(c1, c2, c1 / c2)


def optimal_angle_asymptotic(frame: Frame, p: float) -> OptimalAngleResult:
    """Large-p approximation theta* = Cbar / p (reduced to [0, pi))."""
    p = check_p(p)
    if frame.characteristic or frame.qnorm == 0.0:
        raise CharacteristicInput("asymptotic formula needs q != 0")
    consts = asymptotic_constants(frame)
    theta = (consts.Cbar / p) % math.pi
    warn = p * frame.qnorm ** 2 <= frame.lambda1 - frame.lambda2
    return OptimalAngleResult(theta, f_p(frame.working_frame(), p, theta), "asymptotic",
                              constants=consts, regime_warning=bool(warn))


_SOLVERS = {
    "grid": optimal_angle_grid,
    "stationary": optimal_angle_stationary,
    "asymptotic": optimal_angle_asymptotic,
}


def optimal_control(frame: Frame, p: float, method: str = "stationary"):
    """Optimal control nu and the angle result it was built from.

    For q != 0 the angle is found in the eigenbasis of M and nu_theta is
    conjugated back; for q = 0 nu projects onto the eigendirection of the
    largest eigenvalue (degenerate when the eigenvalues tie).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    wf = frame.working_frame()
    rot = wf is not frame
    if frame.characteristic or frame.qnorm == 0.0:
        res = optimal_angle_characteristic(frame)
        e = np.zeros(2)
        e[0 if wf.M[0, 0] >= wf.M[1, 1] else 1] = 1.0
        nu = np.outer(e, e)
    else:
        if method == "characteristic":
            raise CharacteristicInput("characteristic branch needs q = 0")
        res = _SOLVERS[method](wf, p)
        nu = control_from_angle(res.theta_star, wf.alpha)
    if rot:
        nu = frame.Odiag @ nu @ frame.Odiag.T
    return 0.5 * (nu + nu.T), res


def optimal_controls_batch(r, q, M, p: float, char_tol: float = 0.0) -> np.ndarray:
    """Vectorised stationary-method optimal controls for arrays of frames.

    ``r`` has shape (n,), ``q`` (n, 2), ``M`` (n, 2, 2); returns (n, 2, 2).
    """
    p = check_p(p)
    r = np.asarray(r, dtype=float)
    q = np.asarray(q, dtype=float)
    lam1, lam2, phi = eig2_sym(M)
    lam1, lam2, phi = np.atleast_1d(lam1), np.atleast_1d(lam2), np.atleast_1d(phi)
    c, s = np.cos(phi), np.sin(phi)
    # q in the eigenbasis of M
    qw = np.stack([c * q[..., 0] + s * q[..., 1], -s * q[..., 0] + c * q[..., 1]], -1)
    qn2 = np.sum(q * q, axis=-1)
    alpha = np.arctan2(qw[..., 1], qw[..., 0])
    a = (p - 1.0) / r * qn2
    b = lam1 - lam2
    t1, t2 = _stationary_roots(a, b, alpha)

    def fw(t):
        return -a * np.sin(t) ** 2 + lam1 * np.sin(t + alpha) ** 2 + lam2 * np.cos(t + alpha) ** 2

    v1, v2 = fw(t1), fw(t2)
    theta = np.where((v1 > v2) | ((v1 == v2) & (t1 < t2)), t1, t2)
    ang = theta + alpha + phi
    nu = control_from_angle(ang)
    char = np.sqrt(qn2) <= char_tol
    if np.any(char):
        e = np.stack([c, s], -1)[char]
        nu[char] = np.einsum("...i,...j->...ij", e, e)
    return nu


def retained_direction(nu) -> np.ndarray:
    """Unit eigenvector of a projection control for eigenvalue 1, sign-normalised.

    The sign is fixed so that the first nonzero component is positive.
    """
    nu = np.asarray(nu, dtype=float)
    w, v = np.linalg.eigh(nu)
    e = v[:, int(np.argmax(w))]
    if e[0] < 0 or (e[0] == 0 and e[1] < 0):
        e = -e
    return e / np.linalg.norm(e)


def switch_locus(p: float, r: float = 1.0, lambda1: float = 1.0, lambda2: float = 0.0,
                 n: int = 64, rtol: float = 1e-9) -> Optional[float]:
    """Critical |q|^2 where the grid argmax on the alpha = 0 slice jumps from pi/2 to 0.

    Returns None when lambda1 <= lambda2 (argmax is 0 for all q != 0).
    """
    p = check_p(p)
    if lambda1 <= lambda2:
        return None
    m = np.diag([lambda1, lambda2])

    def near_half_pi(s):
        res = optimal_angle_grid(Frame(r, (math.sqrt(s), 0.0), m), p, n)
        return abs(res.theta_star - 0.5 * math.pi) < 0.25 * math.pi

    lo, hi = 0.0, 1.0
    while near_half_pi(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if near_half_pi(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quoted_switch_locus(p: float, lambda1: float = 1.0, lambda2: float = 0.0) -> float:
    """The locus p |q|^2 = lambda1 - lambda2 as quoted alongside the direction-field figure."""
    return (lambda1 - lambda2) / check_p(p)
