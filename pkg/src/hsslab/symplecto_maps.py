"""The twist-to-hyperkahler, hyperkahler-to-fiberwise-constant and diagonal maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from .errors import DomainError, UsageError
from .lie_models import SpaceModel, br
from .orbit_geometry import (
    curvature_operator,
    frame_coords,
    from_frame,
    norm,
    project_tangent,
    tangent_frame,
)
from .spectral_calculus import a as a_fn
from .spectral_calculus import a_bar, b as b_fn, solve_c1_c2_array
from .tangent_forms import FormId, curve_point, form_callable, split

DIFF_STEP = 1e-5


@dataclass(frozen=True)
class MapId:
    tag: str
    direction: str = "forward"
    R: float | None = None

    def __post_init__(self):
        if self.tag not in ("twist_to_hk", "hk_to_fc", "diag", "composite"):
            raise UsageError(f"unknown map '{self.tag}'")
        if self.direction not in ("forward", "inverse"):
            raise UsageError(f"unknown direction '{self.direction}'")
        if (self.tag == "diag") != (self.R is not None):
            raise UsageError("ratio R is required exactly for the diagonal map")
        if self.R is not None and not self.R > 0:
            raise DomainError(f"ratio R must be positive, got {self.R}")


def _spectral_apply(model, x, v, fn, w=None, lower=None, eigs=None):
    """fn(op) applied to w (default v) with op = jR_{jv,v}; returns the tangent vector."""
    op = curvature_operator(model, x, v)
    ev, U = np.linalg.eigh(op.matrix)
    if lower is not None and len(ev) and ev.min() <= lower:
        raise DomainError(f"curvature operator eigenvalue {ev.min():g} outside domain (> {lower:g})")
    target = v if w is None else w
    c = frame_coords(model, op.frame, target)
    return from_frame(op.frame, U @ (fn(ev) * (U.T @ c)))


def _noncompact_u1(model, x, v):
    if model.kappa < 0:
        op = curvature_operator(model, x, v)
        if not op.in_U(1.0):
            raise DomainError(f"point outside U_1 (operator norm {op.u_norm():.6g})")


def twist_to_hk(model: SpaceModel, x, v, direction: str = "forward"):
    """(x, v) -> (exp_x(+-b(op) jv), transported v)."""
    if direction == "forward":
        _noncompact_u1(model, x, v)
        sgn = 1.0
    elif direction == "inverse":
        _noncompact_u1(model, x, v)
        sgn = -1.0
    else:
        raise UsageError(f"unknown direction '{direction}'")
    w = sgn * _spectral_apply(model, x, v, b_fn, br(x, v))
    g = expm(br(x, w))
    gi = np.linalg.inv(g)
    return g @ x @ gi, g @ v @ gi


def hk_to_fc(model: SpaceModel, x, v, direction: str = "forward"):
    """Fiber rescaling v -> e^{a(op)} v, inverse v -> e^{a_bar(op)} v."""
    if direction == "forward":
        _noncompact_u1(model, x, v)
        return x, _spectral_apply(model, x, v, lambda y: np.exp(a_fn(y)))
    if direction == "inverse":
        if model.kappa < 0:
            # the forward image of U_1 is u_norm < 2: y -> y e^{2a(y)} maps (-1, 0] onto (-2, 0]
            op = curvature_operator(model, x, v)
            if not op.in_U(np.sqrt(2.0)):
                raise DomainError(f"point outside the image u_norm < 2 (operator norm {op.u_norm():.6g})")
        return x, _spectral_apply(model, x, v, lambda y: np.exp(a_bar(y)))
    raise UsageError(f"unknown direction '{direction}'")


def composite(model: SpaceModel, x, v, direction: str = "forward"):
    if direction == "forward":
        return hk_to_fc(model, *twist_to_hk(model, x, v), "forward")
    return twist_to_hk(model, *hk_to_fc(model, x, v, "inverse"), "inverse")


def diag_embed(model: SpaceModel, x, v, R: float):
    """(x, v) -> (exp_x(2 c1(op) jv), exp_x(-2 c2(op) jv))."""
    if model.kappa < 0:
        raise DomainError("the diagonal embedding is defined for compact models only")
    op = curvature_operator(model, x, v)
    if not op.in_U(2.0 * np.sqrt(R)):
        raise DomainError(f"point outside U_(2 sqrt R) (operator norm {op.u_norm():.6g}, bound {4 * R:g})")
    ev, U = np.linalg.eigh(op.matrix)
    c1, c2 = solve_c1_c2_array(np.maximum(ev, 0.0), R)
    cj = U.T @ frame_coords(model, op.frame, br(x, v))
    w1 = from_frame(op.frame, U @ (2 * c1 * cj))
    w2 = from_frame(op.frame, U @ (-2 * c2 * cj))
    g1, g2 = expm(br(x, w1)), expm(br(x, w2))
    return g1 @ x @ np.linalg.inv(g1), g2 @ x @ np.linalg.inv(g2)


def _simple_projector(x, lam_simple, lam_other):
    return (x - lam_other * np.eye(x.shape[0])) / (lam_simple - lam_other)


def _factor_distance(model, i, a, b):
    """Geodesic distance of two points in a rank-one factor (curvature +1)."""
    off, size, _ = model.blocks[i]
    Zi = model.base_point[off:off + size, off:off + size]
    ev = np.linalg.eigvals(Zi)
    keys = np.round(ev, 8)
    vals, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
    means = [ev[inv == k].mean() for k in range(len(vals))]
    k_simple = int(np.argmin(counts)) if counts[0] != counts[-1] else 0
    simple, other = means[k_simple], means[1 - k_simple]
    Pa = _simple_projector(a[off:off + size, off:off + size], simple, other)
    Pb = _simple_projector(b[off:off + size, off:off + size], simple, other)
    # |Pa - Pb|^2 = 2 sin^2(d/2) and tr(Pa Pb) = cos^2(d/2); atan2 keeps both ends accurate
    sin_half = np.linalg.norm(Pa - Pb) / np.sqrt(2.0)
    cos_half = np.sqrt(max(np.trace(Pa @ Pb).real, 0.0))
    return 2.0 * float(np.arctan2(sin_half, cos_half))


def _rank_one_inverse(model, i, a, b, R):
    """Recover (x, v) on the rank-one factor i from the endpoint pair (a, b)."""
    dist = _factor_distance(model, i, a, b)
    if dist < 1e-14:
        return a.copy(), np.zeros_like(a)
    if np.pi - dist < 1e-9:
        raise DomainError("antipodal pair: (a, b) lies on the excluded anti-diagonal")

    def total(y):
        c1, c2 = solve_c1_c2_array([y], R)
        return 2 * (c1[0] + c2[0]) * np.sqrt(y) - dist

    y_max = 4 * R * (1 - 1e-14)
    if total(y_max) < 0:
        raise DomainError(f"pair at distance {dist:.12g} is too close to antipodal to invert")
    y = brentq(total, 0.0, y_max, xtol=1e-15, rtol=1e-15, maxiter=200)
    c1, _ = solve_c1_c2_array([y], R)
    s1 = 2 * c1[0] * np.sqrt(y)
    t = project_tangent(a, b)
    t = t / np.sqrt(model.pairing(t, t))
    g = expm(br(a, s1 * t))
    gi = np.linalg.inv(g)
    x = g @ a @ gi
    jv = -np.sqrt(y) * (g @ t @ gi)
    return x, -br(x, jv)


def _geo(x, t, s):
    g = expm(br(x, s * t))
    return g @ x @ np.linalg.inv(g)


def diag_inverse(model: SpaceModel, a, b, R: float):
    """Inverse of diag_embed for products of rank-one factors."""
    if model.rank != len(model.blocks):
        raise UsageError("diagonal inverse is implemented for products of rank-one factors only")
    xs, vs = np.zeros_like(a), np.zeros_like(a)
    for i in range(len(model.blocks)):
        xi, vi = _rank_one_inverse(model, i, model.block(a, i), model.block(b, i), R)
        xs, vs = xs + xi, vs + vi
    return xs, vs


def apply_map(model: SpaceModel, mid: MapId, x, v):
    if mid.tag == "twist_to_hk":
        return twist_to_hk(model, x, v, mid.direction)
    if mid.tag == "hk_to_fc":
        return hk_to_fc(model, x, v, mid.direction)
    if mid.tag == "composite":
        return composite(model, x, v, mid.direction)
    if mid.direction == "forward":
        return diag_embed(model, x, v, mid.R)
    return diag_inverse(model, x, v, mid.R)


def differential(model: SpaceModel, mid: MapId, x, v, h, u, step: float = DIFF_STEP):
    """Central-difference differential along the chart curve generating (h, u).

    Returns the (h, u) split at the image point for TM-valued maps and the pair of
    tangent vectors (da, db) for the diagonal map.
    """
    pts = [apply_map(model, mid, *curve_point(x, v, h, u, t)) for t in (step, -step)]
    p0 = apply_map(model, mid, x, v)
    d0 = (pts[0][0] - pts[1][0]) / (2 * step)
    d1 = (pts[0][1] - pts[1][1]) / (2 * step)
    if mid.tag == "diag" and mid.direction == "forward":
        return p0, (project_tangent(p0[0], d0), project_tangent(p0[1], d1))
    return p0, split(p0[0], p0[1], d0, d1)


def product_sigma(model: SpaceModel, R: float, a, b, da1, db1, da2, db2):
    """(sigma (-) R sigma) on M x M."""
    return model.pairing(br(a, da1), da2) - R * model.pairing(br(b, db1), db2)


def _jacobian(model, mid, x, v, frame, step):
    """Image point and central-difference images of the TTM frame basis (e, 0), (0, e)."""
    zero = np.zeros_like(x)
    p0 = apply_map(model, mid, x, v)
    cols = []
    for h, u in [(e, zero) for e in frame] + [(zero, e) for e in frame]:
        pts = [apply_map(model, mid, *curve_point(x, v, h, u, t)) for t in (step, -step)]
        cols.append(((pts[0][0] - pts[1][0]) / (2 * step), (pts[0][1] - pts[1][1]) / (2 * step)))
    return p0, (np.array([c[0] for c in cols]), np.array([c[1] for c in cols]))


def _push(model, mid, p0, cols, ch, cu):
    c = np.concatenate([ch, cu])
    d0 = np.tensordot(c, cols[0], axes=(0, 0))
    d1 = np.tensordot(c, cols[1], axes=(0, 0))
    if mid.tag == "diag" and mid.direction == "forward":
        return project_tangent(p0[0], d0), project_tangent(p0[1], d1)
    return split(p0[0], p0[1], d0, d1)


def pullback_residual(model: SpaceModel, mid: MapId, src: FormId, dst: FormId | None, x, v,
                      rng: np.random.Generator, n_pairs: int = 10, step: float = DIFF_STEP) -> float:
    """max |omega_dst(dphi xi, dphi zeta) - omega_src(xi, zeta)| over random pairs.

    dphi is assembled once from central differences along the frame basis. For the
    diagonal map ``dst`` is ignored and the target form is sigma (-) R sigma.
    """
    frame = tangent_frame(model, x)
    fsrc = form_callable(src)
    fdst = form_callable(dst) if dst is not None else None
    p0, cols = _jacobian(model, mid, x, v, frame, step)
    worst = 0.0
    for _ in range(n_pairs):
        c = rng.normal(size=(4, len(frame)))
        h1, u1, h2, u2 = (from_frame(frame, ci) for ci in c)
        base = fsrc(model, x, v, h1, u1, h2, u2)
        A1, B1 = _push(model, mid, p0, cols, c[0], c[1])
        A2, B2 = _push(model, mid, p0, cols, c[2], c[3])
        if mid.tag == "diag":
            img = product_sigma(model, mid.R, p0[0], p0[1], A1, B1, A2, B2)
        else:
            img = fdst(model, p0[0], p0[1], A1, B1, A2, B2)
        worst = max(worst, abs(img - base) / max(1.0, abs(base)))
    return worst


def adjoint_point(g, x, v):
    gi = np.linalg.inv(g)
    return g @ x @ gi, g @ v @ gi


def equivariance_residual(model: SpaceModel, mid: MapId, x, v, g) -> float:
    gi = np.linalg.inv(g)
    p = apply_map(model, mid, x, v)
    q = apply_map(model, mid, g @ x @ gi, g @ v @ gi)
    return float(max(np.linalg.norm(q[0] - g @ p[0] @ gi), np.linalg.norm(q[1] - g @ p[1] @ gi)))


def upsilon_isotropy(model: SpaceModel, mid: MapId, dst: FormId | None, x, v, step: float = DIFF_STEP) -> float:
    """max_{i,j} |omega_dst(dphi Y_i, dphi Y_j)| with Y_i the vertical lifts of j v_i."""
    if not model.is_product:
        if model.rank == 1:
            return 0.0
        raise UsageError("isotropy check needs a product model")
    zero = np.zeros_like(x)
    fields = [(zero, br(x, model.block(v, i))) for i in range(len(model.blocks))]
    if any(norm(model, f[1]) == 0 for f in fields):
        raise DomainError("point is not regular: a factor component vanishes")
    fdst = form_callable(dst) if dst is not None else None
    imgs = [differential(model, mid, x, v, h, u, step) for h, u in fields]
    worst = 0.0
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            p0 = imgs[i][0]
            (A1, B1), (A2, B2) = imgs[i][1], imgs[j][1]
            if mid.tag == "diag":
                val = product_sigma(model, mid.R, p0[0], p0[1], A1, B1, A2, B2)
            else:
                val = fdst(model, p0[0], p0[1], A1, B1, A2, B2)
            worst = max(worst, abs(val))
    return worst

