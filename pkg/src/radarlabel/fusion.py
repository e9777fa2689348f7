"""Combine optical and tracking scores under the azimuth reliability profile."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import normalize_azimuth


@dataclass(frozen=True)
class AzimuthReliabilityProfile:
    """Piecewise-linear gamma(azimuth) >= 1 with wrap-around over (-pi, pi]."""

    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.breakpoints:
            raise ValueError("profile needs at least one breakpoint")
        azimuths = [b[0] for b in self.breakpoints]
        if any(not -math.pi < a <= math.pi for a in azimuths):
            raise ValueError("breakpoint azimuths must lie in (-pi, pi]")
        if any(a2 <= a1 for a1, a2 in zip(azimuths, azimuths[1:])):
            raise ValueError("breakpoint azimuths must be strictly increasing")
        if any(b[1] < 1.0 for b in self.breakpoints):
            raise ValueError("gamma must be >= 1 everywhere")
        object.__setattr__(self, "breakpoints", tuple((float(a), float(g)) for a, g in self.breakpoints))


DEFAULT_PROFILE = AzimuthReliabilityProfile(
    breakpoints=((-80 * math.pi / 180, 1.5), (0.0, 1.0), (80 * math.pi / 180, 1.5))
)


def gamma_at(profile: AzimuthReliabilityProfile, azimuth_rad: float) -> float:
    az = normalize_azimuth(azimuth_rad)
    xs = [b[0] for b in profile.breakpoints]
    ys = [b[1] for b in profile.breakpoints]
    return float(np.interp(az, xs, ys, period=2 * math.pi))


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = 0.55
    w0: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.w0 <= 1.0:
            raise ValueError("w0 must lie in [0, 1]")


def fuse_and_label(
    w_opt: float | None,
    w_tr: float | None,
    azimuth_rad: float,
    profile: AzimuthReliabilityProfile,
    cfg: FusionConfig,
) -> tuple[float, int]:
    """Fused plausibility and binary label.

    An unavailable branch hands its alpha share to the other one; with no
    evidence at all the detection is labeled an artifact outright. The
    threshold is inclusive: w_fused == w0 counts as plausible.
    """
    if w_opt is None and w_tr is None:
        return 0.0, 0
    gamma = gamma_at(profile, azimuth_rad)
    if w_opt is None:
        fused = w_tr / gamma
    elif w_tr is None:
        fused = w_opt / gamma
    else:
        fused = (cfg.alpha * w_opt + (1.0 - cfg.alpha) * w_tr) / gamma
    return fused, int(fused >= cfg.w0)
