"""Differential operators of the first Heisenberg group H^1 = (R^3, X1, X2).

The horizontal vector fields are

    X1(x) = (1, 0, -x2/2),    X2(x) = (0, 1, x1/2),

stacked as the rows of ``sigma(x)``.  Every operator here accepts either a
single point of shape ``(3,)`` or a batch of shape ``(..., 3)`` and returns
arrays with the matching leading shape.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CharacteristicPoint

DEFAULT_CHAR_TOL = 1e-10
FD_STEP = 1e-5

# d X_j / d x_k, indexed [j, k, :]; the fields are linear in (x1, x2) and
# independent of x3, so these are constant.
_DX = np.zeros((2, 3, 3))
_DX[0, 1, 2] = -0.5
_DX[1, 0, 2] = 0.5


def as_points(x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != 3:
        raise ValueError(f"expected points with trailing dimension 3, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point coordinates must be finite")
    return pts


def sigma(x) -> np.ndarray:
    """Return the 2x3 matrix whose rows are X1(x) and X2(x)."""
    x = as_points(x)
    out = np.zeros(x.shape[:-1] + (2, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    out[..., 0, 2] = -0.5 * x[..., 1]
    out[..., 1, 2] = 0.5 * x[..., 0]
    return out


@dataclass(frozen=True)
class ScalarField:
    """A level-set function u: R^3 -> R with its Euclidean derivatives.

    The callables must accept arrays of shape ``(..., 3)``; ``gradient`` returns
    ``(..., 3)`` and ``hessian`` returns ``(..., 3, 3)``.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    name: str = "field"

    def __call__(self, x):
        return self.value(as_points(x))

    def grad(self, x) -> np.ndarray:
        return np.asarray(self.gradient(as_points(x)), dtype=float)

    def hess(self, x) -> np.ndarray:
        h = np.asarray(self.hessian(as_points(x)), dtype=float)
        return 0.5 * (h + np.swapaxes(h, -1, -2))

    def shifted(self, c: float) -> "ScalarField":
        """The field u + c (same derivatives)."""
        return ScalarField(lambda x: self.value(x) + c, self.gradient, self.hessian,
                           name=f"{self.name}+{c:g}")

    def check_gradient(self, x, step: float = FD_STEP, rtol: float = 1e-5) -> bool:
        """Compare the analytic gradient with central differences of the value."""
        x = as_points(x)
        fd = np.empty(x.shape)
        for k in range(3):
            e = np.zeros(3)
            e[k] = step
            fd[..., k] = (self.value(x + e) - self.value(x - e)) / (2 * step)
        g = self.grad(x)
        scale = np.maximum(1.0, np.abs(g).max(axis=-1, keepdims=True))
        return bool(np.all(np.abs(fd - g) <= rtol * scale))

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], step: float = FD_STEP,
                      name: str = "fd-field") -> "ScalarField":
        """Wrap a value-only field; derivatives come from central differences."""
        eye = np.eye(3)

        def grad(x):
            cols = [(f(x + step * eye[k]) - f(x - step * eye[k])) / (2 * step) for k in range(3)]
            return np.stack(cols, axis=-1)

        def hess(x):
            h = np.empty(np.shape(x)[:-1] + (3, 3))
            fx = f(x)
            for i in range(3):
                ei = step * eye[i]
                h[..., i, i] = (f(x + ei) - 2 * fx + f(x - ei)) / step**2
                for j in range(i + 1, 3):
                    ej = step * eye[j]
                    hij = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * step**2)
                    h[..., i, j] = h[..., j, i] = hij
            return h

        return cls(f, grad, hess, name=name)


def quadric_field(a: float, b: float, c: float, center=(0.0, 0.0, 1.0), name: str = "quadric") -> ScalarField:
    """u(x) = a (x1-c1)^2 + b (x2-c2)^2 + c (x3-c3)^2 - 1."""
    w = np.array([a, b, c], dtype=float)
    c0 = np.asarray(center, dtype=float)

    def value(x):
        return np.sum(w * (x - c0) ** 2, axis=-1) - 1.0

    def gradient(x):
        return 2.0 * w * (x - c0)

    def hessian(x):
        return np.broadcast_to(np.diag(2.0 * w), np.shape(x)[:-1] + (3, 3)).copy()

    return ScalarField(value, gradient, hessian, name=name)


def sphere_field() -> ScalarField:
    """Unit sphere centred at (0, 0, 1)."""
    return quadric_field(1.0, 1.0, 1.0, name="sphere")


def ellipsoid_field() -> ScalarField:
    """The ellipsoid 2 x1^2 + x2^2 + (x3 - 1)^2 = 1."""
    return quadric_field(2.0, 1.0, 1.0, name="ellipsoid")


def linear_field(coeffs, offset: float = 0.0, name: str = "plane") -> ScalarField:
    w = np.asarray(coeffs, dtype=float)

    def value(x):
        return x @ w + offset

    def gradient(x):
        return np.broadcast_to(w, np.shape(x)).copy()

    def hessian(x):
        return np.zeros(np.shape(x)[:-1] + (3, 3))

    return ScalarField(value, gradient, hessian, name=name)


def constant_field(c: float) -> ScalarField:
    return linear_field((0.0, 0.0, 0.0), offset=c, name=f"const{c:g}")


def horizontal_gradient(u: ScalarField, x) -> np.ndarray:
    """(X1 u, X2 u) = sigma(x) grad u(x)."""
    x = as_points(x)
    return np.einsum("...ij,...j->...i", sigma(x), u.grad(x))


def horizontal_hessian_sym(u: ScalarField, x) -> np.ndarray:
    """Symmetrised horizontal Hessian ((X_i X_j u + X_j X_i u) / 2).

    X_i(X_j u) = X_i . grad(X_j u) with grad(X_j u) = H X_j + (dX_j)^T grad u.
    """
    x = as_points(x)
    s = sigma(x)
    g = u.grad(x)
    h = u.hess(x)
    grad_xj = np.einsum("...kl,...jl->...jk", h, s) + np.einsum("jkl,...l->...jk", _DX, g)
    xixj = np.einsum("...ik,...jk->...ij", s, grad_xj)
    return 0.5 * (xixj + np.swapaxes(xixj, -1, -2))


def is_characteristic(u: ScalarField, x, tol: float = DEFAULT_CHAR_TOL):
    if tol < 0:
        raise ValueError("tol must be non-negative")
    q = horizontal_gradient(u, x)
    out = np.linalg.norm(q, axis=-1) <= tol
    return bool(out) if out.ndim == 0 else out


def _noncharacteristic_jet(u, x, tol):
    q = horizontal_gradient(u, x)
    qn = np.linalg.norm(q, axis=-1)
    if np.any(qn <= tol):
        bad = np.asarray(as_points(x)).reshape(-1, 3)[np.atleast_1d(qn <= tol).ravel()][0]
        raise CharacteristicPoint(f"horizontal gradient vanishes at {tuple(bad)}")
    return q, qn


def horizontal_normal(u: ScalarField, x, tol: float = DEFAULT_CHAR_TOL) -> np.ndarray:
    q, qn = _noncharacteristic_jet(u, x, tol)
    return q / qn[..., None]


def levelset_rhs(u: ScalarField, x, tol: float = DEFAULT_CHAR_TOL):
    """Tr M - <M qhat, qhat>, the level-set speed for horizontal mean curvature flow."""
    q, qn = _noncharacteristic_jet(u, x, tol)
    m = horizontal_hessian_sym(u, x)
    qh = q / qn[..., None]
    out = np.trace(m, axis1=-2, axis2=-1) - np.einsum("...i,...ij,...j->...", qh, m, qh)
    return float(out) if np.ndim(out) == 0 else out


def horizontal_mean_curvature(u: ScalarField, x, tol: float = DEFAULT_CHAR_TOL):
    """Horizontal divergence of the horizontal normal, (Tr M - <M qhat, qhat>) / |q|."""
    _, qn = _noncharacteristic_jet(u, x, tol)
    out = levelset_rhs(u, x, tol) / qn
    return float(out) if np.ndim(out) == 0 else out
