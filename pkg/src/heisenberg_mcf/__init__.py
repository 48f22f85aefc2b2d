"""Optimal controls for the p-regularised horizontal mean curvature flow in H^1."""

from .errors import (
    CharacteristicInput,
    CharacteristicPoint,
    OffSurfaceError,
    PolicyFrameError,
    PositivityError,
)
from .geometry import (
    ScalarField,
    ellipsoid_field,
    horizontal_gradient,
    horizontal_hessian_sym,
    horizontal_mean_curvature,
    horizontal_normal,
    is_characteristic,
    levelset_rhs,
    sigma,
    sphere_field,
)
from .control import Frame, H_p, control_from_angle, f_p, h_p, is_admissible
from .optimizer import (
    OptimalAngleResult,
    optimal_angle_asymptotic,
    optimal_angle_grid,
    optimal_angle_stationary,
    optimal_control,
    switch_locus,
)

__version__ = "0.1.0"
