"""Moment maps, their defining-property residual, and moment-triangle checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .lie_models import SpaceModel, br
from .orbit_geometry import curvature_operator, frame_coords, from_frame, tangent_frame
from .spectral_calculus import F_tilde
from .symplecto_maps import MapId, apply_map
from .tangent_forms import chart, form_callable, split, FormId

_TAGS = ("mu_lambda", "mu_eta", "mu_tau", "mu_inclusion", "mu_twisted", "mu_K", "mu_fc", "mu_product")


@dataclass(frozen=True)
class MomentId:
    tag: str
    s: float | None = None
    R: float | None = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise UsageError(f"unknown moment map '{self.tag}'")
        if (self.tag in ("mu_twisted", "mu_fc")) != (self.s is not None):
            raise UsageError(f"parameter s mismatch for '{self.tag}'")
        if (self.tag == "mu_product") != (self.R is not None):
            raise UsageError(f"parameter R mismatch for '{self.tag}'")


def mu_K(model: SpaceModel, x, v):
    """[v, j Ft(op) v] + x."""
    op = curvature_operator(model, x, v)
    ev, U = np.linalg.eigh(op.matrix)
    if model.kappa < 0 and ev.min() <= -1.0:
        raise DomainError(f"mu_K requires eigenvalues > -1, got {ev.min():g}")
    c = frame_coords(model, op.frame, v)
    w = from_frame(op.frame, U @ (F_tilde(ev) * (U.T @ c)))
    return br(v, br(x, w)) + x


def moment(model: SpaceModel, mid: MomentId, p, q):
    """Moment value at (x, v) = (p, q), or at the product point (a, b) = (p, q)."""
    t = mid.tag
    if t == "mu_lambda":
        return br(p, q)
    if t == "mu_eta":
        return q.copy()
    if t == "mu_tau":
        return -br(br(p, q), q)
    if t == "mu_inclusion":
        return p.copy()
    if t == "mu_twisted":
        return br(p, q) + mid.s * p
    if t == "mu_K":
        return mu_K(model, p, q)
    if t == "mu_fc":
        return -0.5 * br(br(p, q), q) + mid.s * p
    return p - mid.R * q


def fundamental_field(x, v, a):
    """(h, u) split of a^# with ambient pair ([a, x], [a, v])."""
    return split(x, v, br(a, x), br(a, v))


def defining_residual(model: SpaceModel, mid: MomentId, fid: FormId, x, v, a,
                      step: float = 1e-5, frame=None) -> float:
    """max over a TTM basis of |d<mu, a>(xi) - omega(a^#, xi)|."""
    if frame is None:
        frame = tangent_frame(model, x)
    om = form_callable(fid)
    ha, ua = fundamental_field(x, v, a)
    zero = np.zeros_like(x)
    worst = 0.0
    basis = [(e, zero) for e in frame] + [(zero, e) for e in frame]
    for h, u in basis:
        vals = []
        for t in (step, -step):
            X, V = chart(x, v, t * h, t * u)
            vals.append(model.pairing(moment(model, mid, X, V), a))
        deriv = (vals[0] - vals[1]) / (2 * step)
        worst = max(worst, abs(deriv - om(model, x, v, ha, ua, h, u)))
    return worst


TRIANGLES = {
    "twist_to_hk": (MomentId("mu_twisted", s=1.0), MomentId("mu_K")),
    "hk_to_fc": (MomentId("mu_K"), MomentId("mu_fc", s=1.0)),
}


def triangle_moments(mid: MapId) -> tuple[MomentId, MomentId]:
    if mid.tag == "diag":
        return MomentId("mu_twisted", s=1.0 - mid.R), MomentId("mu_product", R=mid.R)
    if mid.tag == "composite":
        return MomentId("mu_twisted", s=1.0), MomentId("mu_fc", s=1.0)
    return TRIANGLES[mid.tag]


def triangle_residual(model: SpaceModel, mid: MapId, x, v, mu_src: MomentId | None = None,
                      mu_dst: MomentId | None = None) -> float:
    """||mu_dst(phi(x, v)) - mu_src(x, v)||, an exact matrix identity."""
    if mu_src is None or mu_dst is None:
        mu_src, mu_dst = triangle_moments(mid)
    p, q = apply_map(model, mid, x, v)
    return float(np.linalg.norm(moment(model, mu_dst, p, q) - moment(model, mu_src, x, v)))
