"""Monte-Carlo simulation of the controlled horizontal diffusion

    d xi = sqrt(2) sigma(xi)^T o (nu dB),

integrated in the Stratonovich sense, and of the p-value function
V_p(t, x) = inf_nu E[g(xi(T))^p]^(1/p) over a finite list of policies.

Noise is reproducible per path: path ``i`` draws its Gaussian increments
from a Philox stream keyed by ``(seed, i)``, so results do not depend on the
number of paths simulated alongside it or on the thread count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .control import Frame, check_p, is_admissible
from .errors import PolicyFrameError, PositivityError
from .geometry import (
    DEFAULT_CHAR_TOL,
    ScalarField,
    as_points,
    horizontal_gradient,
    horizontal_hessian_sym,
    sigma,
)
from .optimizer import optimal_control, optimal_controls_batch

SQRT2 = math.sqrt(2.0)
CHUNK = 2048
THREADS_ENV = "HEISENBERG_MCF_THREADS"


@dataclass(frozen=True)
class SimConfig:
    t0: float
    T: float
    dt: float
    n_paths: int
    seed: int

    def __post_init__(self):
        if self.T < self.t0:
            raise ValueError("T must be >= t0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n_paths) < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        ratio = (self.T - self.t0) / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"(T - t0) / dt = {ratio} is not an integer")

    @property
    def n_steps(self) -> int:
        return int(round((self.T - self.t0) / self.dt))


@dataclass(frozen=True)
class Policy:
    """Either a constant admissible matrix or a feedback rule built from a field's jet."""

    kind: str
    nu: Optional[np.ndarray] = None
    field: Optional[ScalarField] = None
    p: float = 2.0
    r_shift: float = 0.0
    method: str = "stationary"
    char_tol: float = DEFAULT_CHAR_TOL
    label: str = ""

    @classmethod
    def constant(cls, nu, label: str = "") -> "Policy":
        nu = np.asarray(nu, dtype=float)
        if not is_admissible(nu, 1e-12):
            raise ValueError(f"control {nu.tolist()} is not admissible")
        return cls("constant", nu=nu, label=label or "constant")

    @classmethod
    def feedback(cls, field: ScalarField, p: float, r_shift: float = 0.0,
                 method: str = "stationary", char_tol: float = DEFAULT_CHAR_TOL,
                 label: str = "") -> "Policy":
        return cls("feedback", field=field, p=check_p(p), r_shift=r_shift, method=method,
                   char_tol=char_tol, label=label or "feedback")

    def controls(self, x: np.ndarray) -> np.ndarray:
        """Controls at states ``x`` of shape (n, 3); returns (n, 2, 2) or (2, 2)."""
        if self.kind == "constant":
            return self.nu
        r = self.field(x) + self.r_shift
        if np.any(~np.isfinite(r)) or np.any(r <= 0):
            bad = x[np.argmin(np.where(np.isfinite(r), r, -np.inf))]
            raise PolicyFrameError(f"r = u + shift is not positive at state {tuple(bad)}")
        q = horizontal_gradient(self.field, x)
        m = horizontal_hessian_sym(self.field, x)
        if self.method == "stationary":
            return optimal_controls_batch(r, q, m, self.p, self.char_tol)
        return np.stack([optimal_control(Frame(ri, qi, mi, self.char_tol), self.p, self.method)[0]
                         for ri, qi, mi in zip(r, q, m)])


@dataclass
class PathSample:
    states: np.ndarray
    terminal_payoff: float = float("nan")


@dataclass(frozen=True)
class PolicyEstimate:
    label: str
    estimate: float
    stderr: float


@dataclass(frozen=True)
class ValueEstimate:
    value: float
    per_policy: list = field(default_factory=list)
    n_paths: int = 0
    seed: int = 0


def _increment(x, nu, dW):
    nu_dw = np.einsum("...ij,...j->...i", nu, dW)
    return SQRT2 * np.einsum("...ji,...j->...i", sigma(x), nu_dw)


def step(x, nu, dW, dt: float = 0.0) -> np.ndarray:
    """One midpoint (Heun) step of the Stratonovich equation.

    ``dt`` is carried for interface symmetry; the increment ``dW`` already has
    variance dt.
    """
    x = np.asarray(x, dtype=float)
    pred = x + _increment(x, nu, dW)
    return x + _increment(0.5 * (x + pred), nu, dW)


def step_euler(x, nu, dW, dt: float = 0.0) -> np.ndarray:
    """One Euler-Maruyama step (no drift correction)."""
    x = np.asarray(x, dtype=float)
    return x + _increment(x, nu, dW)


_SCHEMES = {"heun": step, "euler": step_euler}


def path_noise(seed: int, path_index: int, n_steps: int, dt: float) -> np.ndarray:
    """Gaussian increments (n_steps, 2) with covariance dt I for one path."""
    key = (int(seed) & (2**64 - 1)) | (int(path_index) << 64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_normal((n_steps, 2)) * math.sqrt(dt)


def _run(x0, policy: Policy, cfg: SimConfig, start: int, stop: int, scheme: str,
         record: bool = False):
    stepper = _SCHEMES[scheme]
    n = stop - start
    noise = np.stack([path_noise(cfg.seed, i, cfg.n_steps, cfg.dt) for i in range(start, stop)]) \
        if cfg.n_steps else np.zeros((n, 0, 2))
    x = np.broadcast_to(as_points(x0), (n, 3)).copy()
    states = [x.copy()] if record else None
    for k in range(cfg.n_steps):
        x = stepper(x, policy.controls(x), noise[:, k], cfg.dt)
        if record:
            states.append(x.copy())
    return np.stack(states, axis=1) if record else x


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def simulate_terminal(x0, policy: Policy, cfg: SimConfig, scheme: str = "heun",
                      threads: Optional[int] = None) -> np.ndarray:
    """Terminal states xi(T), shape (n_paths, 3), ordered by path index."""
    if scheme not in _SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    bounds = [(s, min(s + CHUNK, cfg.n_paths)) for s in range(0, cfg.n_paths, CHUNK)]
    threads = threads or default_threads()
    if threads == 1 or len(bounds) == 1:
        parts = [_run(x0, policy, cfg, a, b, scheme) for a, b in bounds]
    else:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda ab: _run(x0, policy, cfg, ab[0], ab[1], scheme), bounds))
    return np.concatenate(parts, axis=0)


def sample_path(x0, policy: Policy, cfg: SimConfig, path_index: int = 0, noise=None,
                payoff: Optional[ScalarField] = None, scheme: str = "heun") -> PathSample:
    """A single recorded path; ``noise`` overrides the keyed stream if given."""
    if noise is None:
        states = _run(x0, policy, cfg, path_index, path_index + 1, scheme, record=True)[0]
    else:
        noise = np.asarray(noise, dtype=float).reshape(cfg.n_steps, 2)
        x = as_points(x0).astype(float).reshape(1, 3)
        states = [x[0].copy()]
        for k in range(cfg.n_steps):
            x = _SCHEMES[scheme](x, policy.controls(x), noise[k:k + 1], cfg.dt)
            states.append(x[0].copy())
        states = np.array(states)
    g = float(payoff(states[-1])) if payoff is not None else float("nan")
    return PathSample(states, g)


def power_mean(values, p: float):
    """(mean(values^p))^(1/p) and its delta-method standard error.

    Evaluated as max * mean((v / max)^p)^(1/p) to avoid overflow at large p.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no samples")
    if np.any(~(v > 0)):
        raise PositivityError(f"payoff must be positive on all samples (min {v.min():.6g})")
    top = v.max()
    w = (v / top) ** p
    mw = np.mean(w)
    est = top * mw ** (1.0 / p)
    if v.size < 2:
        return float(est), 0.0
    se_w = np.std(w, ddof=1) / math.sqrt(v.size)
    return float(est), float(est / (p * mw) * se_w)


def estimate_value_p(x0, g: ScalarField, p: float, policies: Sequence[Policy], cfg: SimConfig,
                     scheme: str = "heun", threads: Optional[int] = None) -> ValueEstimate:
    """min over policies of the Monte-Carlo estimate of E[g(xi(T))^p]^(1/p)."""
    p = check_p(p)
    if not policies:
        raise ValueError("at least one policy is required")
    per = []
    for pol in policies:
        term = simulate_terminal(x0, pol, cfg, scheme, threads)
        est, se = power_mean(g(term), p)
        per.append(PolicyEstimate(pol.label, est, se))
    return ValueEstimate(min(e.estimate for e in per), per, cfg.n_paths, cfg.seed)
