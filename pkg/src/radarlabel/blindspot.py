"""LiDAR blind-spot cone membership and the piecewise optical combination."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CartesianPoint


@dataclass(frozen=True)
class BlindspotCone:
    """Cone under a roof-mounted LiDAR at (x_l, 0, z_l), opening half-angle alpha."""

    x_l_m: float
    z_l_m: float
    alpha_rad: float

    def __post_init__(self) -> None:
        if not self.z_l_m > 0:
            raise ValueError("z_l_m must be > 0")
        if not 0 < self.alpha_rad < math.pi / 2:
            raise ValueError("alpha_rad must lie in (0, pi/2)")


def in_blindspot(p: CartesianPoint | np.ndarray, cone: BlindspotCone) -> bool | np.ndarray:
    """Membership test; accepts a single point or an (N, 3) array."""
    pts = p.as_array().reshape(1, 3) if isinstance(p, CartesianPoint) else np.asarray(p, dtype=float).reshape(-1, 3)
    radial = np.hypot(pts[:, 0] - cone.x_l_m, pts[:, 1])
    inside = (
        (pts[:, 2] >= 0.0)
        & (pts[:, 2] <= cone.z_l_m)
        & (radial <= (cone.z_l_m - pts[:, 2]) / math.tan(cone.alpha_rad))
    )
    return bool(inside[0]) if isinstance(p, CartesianPoint) else inside


def combine_optical(
    w_lm: float | None,
    w_cm: float | None,
    p: CartesianPoint | np.ndarray,
    cone: BlindspotCone,
) -> float | None:
    """Camera score inside the blind spot, LiDAR score elsewhere.

    When the selected branch has no evidence the other one is used; None means
    neither branch produced evidence.
    """
    preferred, fallback = (w_cm, w_lm) if in_blindspot(p, cone) else (w_lm, w_cm)
    return preferred if preferred is not None else fallback
