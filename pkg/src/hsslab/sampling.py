"""Seeded random points of the orbit and of its neighbourhoods U_rho."""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .lie_models import SpaceModel
from .orbit_geometry import curvature_operator, from_frame, tangent_frame


def point_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per sample so results do not depend on evaluation order."""
    return np.random.default_rng([int(seed), int(index)])


def random_group_element(model: SpaceModel, rng: np.random.Generator, scale: float = 0.7) -> np.ndarray:
    return expm(model.from_coords(rng.normal(size=model.dim) * scale))


def random_base(model: SpaceModel, rng: np.random.Generator, scale: float = 0.7) -> np.ndarray:
    g = random_group_element(model, rng, scale)
    return g @ model.base_point @ np.linalg.inv(g)


def random_tangent(model: SpaceModel, x, rng: np.random.Generator, frame=None) -> np.ndarray:
    if frame is None:
        frame = tangent_frame(model, x)
    return from_frame(frame, rng.normal(size=len(frame)))


def random_tm_point(model: SpaceModel, rng: np.random.Generator, speed: float = 0.5,
                    unorm_max: float | None = None):
    """(x, v, frame) with |v| of order ``speed``; v is shrunk until u_norm <= unorm_max."""
    x = random_base(model, rng)
    frame = tangent_frame(model, x)
    c = rng.normal(size=len(frame))
    v = from_frame(frame, c * speed / np.sqrt(len(frame)))
    if unorm_max is not None:
        un = curvature_operator(model, x, v, frame).u_norm()
        if un > unorm_max:
            # u_norm is quadratic in v
            v = v * np.sqrt(unorm_max / un) * rng.uniform(0.5, 1.0)
    return x, v, frame
