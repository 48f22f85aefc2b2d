"""Parameter sweeps that produce the data behind the landscape and control-field plots."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .control import Frame, check_p, f_p
from .errors import OffSurfaceError, PositivityError
from .geometry import (
    DEFAULT_CHAR_TOL,
    ScalarField,
    as_points,
    ellipsoid_field,
    horizontal_gradient,
    horizontal_hessian_sym,
    sphere_field,
)
from .optimizer import OptimalAngleResult, optimal_control, retained_direction

ON_SURFACE_TOL = 1e-8


@dataclass(frozen=True)
class LandscapeGrid:
    theta_axis: np.ndarray
    q_axis: np.ndarray
    values: np.ndarray          # shape (len(q_axis), len(theta_axis))
    argmax_branch: np.ndarray   # maximising theta per q


@dataclass(frozen=True)
class SurfaceFieldSample:
    point: np.ndarray
    horizontal_normal: Optional[np.ndarray]
    control_direction: np.ndarray
    characteristic: bool
    frame: Frame
    result: OptimalAngleResult


@dataclass(frozen=True)
class QPlaneSample:
    q: np.ndarray
    control_direction: np.ndarray
    theta_star: float
    characteristic: bool
    regime_warning: bool


def frame_at(u: ScalarField, x, r_shift: float = 0.0, char_tol: float = DEFAULT_CHAR_TOL) -> Frame:
    """Frame (r, q, M) of ``u`` at ``x`` with r = u(x) + r_shift."""
    x = as_points(x)
    r = float(u(x)) + r_shift
    if not r > 0:
        raise PositivityError(f"r = u(x) + shift = {r} is not positive at {tuple(x)}")
    return Frame(r, horizontal_gradient(u, x), horizontal_hessian_sym(u, x), char_tol=char_tol)


def fp_landscape(alpha: float, p: float, lambda1: float, lambda2: float, r: float,
                 q_range: tuple, theta_range: tuple = (0.0, math.pi, 181)) -> LandscapeGrid:
    """Tabulate f_p over |q| x theta for M = diag(lambda1, lambda2)."""
    p = check_p(p)
    qlo, qhi, nq = q_range
    tlo, thi, nt = theta_range
    if int(nq) < 2 or int(nt) < 2 or not qhi > qlo or not thi > tlo or qlo < 0:
        raise ValueError("ranges need lo < hi, counts >= 2 and |q| >= 0")
    if not r > 0:
        raise PositivityError(f"r must be > 0, got {r}")
    qs = np.linspace(qlo, qhi, int(nq))
    ts = np.linspace(tlo, thi, int(nt))
    m = np.diag([lambda1, lambda2])
    values = np.empty((qs.size, ts.size))
    for i, qn in enumerate(qs):
        if qn > 0:
            values[i] = f_p(Frame(r, (qn * math.cos(alpha), qn * math.sin(alpha)), m), p, ts)
        else:
            # a q = 0 frame has no polar angle; keep the requested alpha as reference
            values[i] = lambda1 * np.sin(ts + alpha) ** 2 + lambda2 * np.cos(ts + alpha) ** 2
    branch = ts[np.argmax(values, axis=1)]
    return LandscapeGrid(ts, qs, values, branch)


def control_field_qplane(p: float, lambda1: float, lambda2: float, r: float,
                         q_lim: float, n: int, method: str = "stationary") -> list:
    """Optimal control direction over a square grid in the (q1, q2) plane."""
    p = check_p(p)
    axis = np.linspace(-q_lim, q_lim, int(n))
    m = np.diag([lambda1, lambda2])
    out = []
    for q2 in axis:
        for q1 in axis:
            fr = Frame(r, (q1, q2), m)
            nu, res = optimal_control(fr, p, method)
            out.append(QPlaneSample(np.array([q1, q2]), retained_direction(nu), res.theta_star,
                                    fr.characteristic, res.regime_warning or
                                    p * fr.qnorm ** 2 <= fr.lambda1 - fr.lambda2))
    return out


def sweep_surface(u: ScalarField, points: Sequence, p: float, r_shift: float = 2.0,
                  char_tol: float = DEFAULT_CHAR_TOL, method: str = "stationary") -> list:
    p = check_p(p)
    out = []
    for x in points:
        x = as_points(x)
        res_u = abs(float(u(x)))
        if res_u > ON_SURFACE_TOL:
            raise OffSurfaceError(x, res_u)
        fr = frame_at(u, x, r_shift, char_tol)
        nu, res = optimal_control(fr, p, method)
        normal = None if fr.characteristic else fr.q / fr.qnorm
        out.append(SurfaceFieldSample(x, normal, retained_direction(nu), fr.characteristic, fr, res))
    return out


SURFACES = {
    "sphere_unit_c001": sphere_field,
    "ellipsoid_2x2_y2_z2": ellipsoid_field,
}


def surface_grid(kind: str, n_lat: int, n_lon: int) -> list:
    """Latitude-longitude sample of a named quadric; each pole appears once.

    Latitudes run from the bottom pole (0, 0, 0) to the top pole (0, 0, 2).
    """
    if kind not in SURFACES:
        raise ValueError(f"unknown surface {kind!r}; expected one of {sorted(SURFACES)}")
    if n_lat < 4 or n_lon < 4:
        raise ValueError("n_lat and n_lon must be >= 4")
    sx = 1.0 / math.sqrt(2.0) if kind.startswith("ellipsoid") else 1.0
    pts = [np.array([0.0, 0.0, 0.0])]
    for i in range(1, n_lat - 1):
        phi = math.pi * i / (n_lat - 1)
        for j in range(n_lon):
            lam = 2 * math.pi * j / n_lon
            pts.append(np.array([sx * math.sin(phi) * math.cos(lam),
                                 math.sin(phi) * math.sin(lam),
                                 1.0 - math.cos(phi)]))
    pts.append(np.array([0.0, 0.0, 2.0]))
    return pts


def lift(x, h) -> np.ndarray:
    """Horizontal lift h1 X1(x) + h2 X2(x) of a 2-vector to R^3."""
    x = as_points(x)
    return np.array([h[0], h[1], 0.5 * (-x[1] * h[0] + x[0] * h[1])])
