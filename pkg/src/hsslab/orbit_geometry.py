"""The orbit O_Z as a Kahler manifold: frames, metric, geodesics, transport, curvature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DomainError
from .lie_models import TOL_NUMERIC, SpaceModel, br

MEMBERSHIP_MARGIN = 1e-9
CLUSTER_TOL = 1e-6
RANK_TOL = 1e-7


@dataclass(frozen=True)
class OrbitPoint:
    x: np.ndarray
    model_id: str

    def check(self, model: SpaceModel, tol: float = TOL_NUMERIC) -> None:
        if orbit_residual(model, self.x) > tol:
            raise DomainError("point is not on the orbit of the base point")


@dataclass(frozen=True)
class TangentVector:
    base: OrbitPoint
    v: np.ndarray

    def check(self, model: SpaceModel, tol: float = TOL_NUMERIC) -> None:
        if tangent_residual(model, self.base.x, self.v) > tol * max(1.0, np.linalg.norm(self.v)):
            raise DomainError("vector is not tangent to the orbit")


def orbit_residual(model: SpaceModel, x: np.ndarray) -> float:
    """Distance between the sorted spectra of x and of the base point."""
    ev, ez = [], []
    for o, s, _ in model.blocks:
        ev.append(_sorted_spectrum(x[o:o + s, o:o + s]))
        ez.append(_sorted_spectrum(model.base_point[o:o + s, o:o + s]))
    return float(np.max(np.abs(np.concatenate(ev) - np.concatenate(ez))))


def _sorted_spectrum(m: np.ndarray) -> np.ndarray:
    e = np.linalg.eigvals(m)
    return e[np.lexsort((e.real, np.round(e.imag, 8)))]


def project_tangent(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Tangent component of w at x; ad_x^2 acts as -1 on T_xM and 0 on its complement."""
    return -br(x, br(x, w))


def tangent_residual(model: SpaceModel, x: np.ndarray, w: np.ndarray) -> float:
    return float(np.linalg.norm(w - project_tangent(x, w)))


def tangent_frame(model: SpaceModel, x: np.ndarray) -> np.ndarray:
    """g-orthonormal basis of T_xM = image(ad_x), shape (dim_p, n, n)."""
    B = np.asarray(model.basis)
    C = model.coords_many(x @ B - B @ x).T
    U, s, _ = np.linalg.svd(C)
    k = int(np.sum(s > 1e-9 * s[0]))
    if k != model.dim_p:
        raise DomainError(f"tangent space has dimension {k}, expected {model.dim_p}")
    Q = U[:, :k]
    L = np.linalg.cholesky(Q.T @ model.metric_gram @ Q)
    F = Q @ np.linalg.inv(L).T
    return (F.T @ B.reshape(len(B), -1)).reshape(k, *x.shape)


def frame_coords(model: SpaceModel, frame: np.ndarray, w: np.ndarray) -> np.ndarray:
    return model.coords_many(frame) @ (model.metric_gram @ model.coords(w))


def from_frame(frame: np.ndarray, c: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    return (np.asarray(c) @ frame.reshape(len(frame), -1)).reshape(frame.shape[1:])


def metric(model: SpaceModel, v: np.ndarray, w: np.ndarray) -> float:
    return model.pairing(v, w)


def norm(model: SpaceModel, v: np.ndarray) -> float:
    return float(np.sqrt(max(model.pairing(v, v), 0.0)))


def complex_structure(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return br(x, v)


def kahler_eval(model: SpaceModel, x: np.ndarray, v: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """(g_x(v, w), sigma_x(v, w)) with sigma = g(j., .)."""
    return model.pairing(v, w), model.pairing(br(x, v), w)


def symplectic(model: SpaceModel, x: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    return model.pairing(br(x, v), w)


def transvection(x: np.ndarray, w: np.ndarray, t: float = 1.0) -> np.ndarray:
    return expm(t * br(x, w))


def geodesic_exp(x: np.ndarray, v: np.ndarray, t: float = 1.0) -> np.ndarray:
    g = transvection(x, v, t)
    return g @ x @ np.linalg.inv(g)


def exp_map(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return geodesic_exp(x, v, 1.0)


def parallel_transport(x: np.ndarray, w: np.ndarray, u: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Transport u along t -> geodesic_exp(x, w, t) by the transvection exp(t[x, w])."""
    g = transvection(x, w, t)
    return g @ u @ np.linalg.inv(g)


def curvature(model: SpaceModel, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """R(a, b)c with the calibrated sign."""
    return -model.curvature_sign * br(br(a, b), c)


def sectional_curvature(model: SpaceModel, a: np.ndarray, b: np.ndarray) -> float:
    """K(a, b) = g(R(a, b)a, b) / |a ^ b|^2."""
    den = model.pairing(a, a) * model.pairing(b, b) - model.pairing(a, b) ** 2
    return model.pairing(curvature(model, a, b, a), b) / den


@dataclass(frozen=True)
class SelfAdjointOperator:
    frame: np.ndarray
    matrix: np.ndarray

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def u_norm(self) -> float:
        return float(np.max(np.abs(self.spectrum()))) if self.matrix.size else 0.0

    def in_U(self, rho: float, margin: float = MEMBERSHIP_MARGIN) -> bool:
        return self.u_norm() <= rho ** 2 - margin

    def symmetry_residual(self) -> float:
        return float(np.linalg.norm(self.matrix - self.matrix.T))


def curvature_operator(model: SpaceModel, x: np.ndarray, v: np.ndarray,
                       frame: np.ndarray | None = None) -> SelfAdjointOperator:
    """Matrix of w -> j R(jv, v) w in a g-orthonormal frame of T_xM."""
    if frame is None:
        frame = tangent_frame(model, x)
    frame = np.asarray(frame)
    jv = br(x, v)
    A = br(jv, v)
    AE = -model.curvature_sign * (A @ frame - frame @ A)
    cols = x @ AE - AE @ x
    M = model.coords_many(frame) @ model.metric_gram @ model.coords_many(cols).T
    return SelfAdjointOperator(frame, 0.5 * (M + M.T))


def is_regular(model: SpaceModel, x: np.ndarray, v: np.ndarray, frame: np.ndarray | None = None) -> bool:
    nv = norm(model, v)
    if nv == 0.0:
        return False
    if frame is None:
        frame = tangent_frame(model, x)
    C = np.column_stack([model.coords(br(v, e)) for e in frame])
    s = np.linalg.svd(C, compute_uv=False)
    s_scaled = s / np.sqrt(np.max(np.abs(model.metric_gram)))
    nullity = int(np.sum(s_scaled < RANK_TOL * nv)) + (len(frame) - len(s))
    return nullity == model.rank


@dataclass(frozen=True)
class PolyFactor:
    eigenvalue: float
    component: np.ndarray
    merged: bool = False


def polyfactors(model: SpaceModel, x: np.ndarray, v: np.ndarray) -> list[PolyFactor]:
    """Decompose v along polysphere/polydisc factors with eigenvalues kappa |v_i|^2."""
    if model.is_product:
        out = []
        for i in range(len(model.blocks)):
            vi = model.block(v, i)
            out.append(PolyFactor(model.kappa * model.pairing(vi, vi), vi))
        return out
    op = curvature_operator(model, x, v)
    evals, evecs = np.linalg.eigh(op.matrix)
    cv = frame_coords(model, op.frame, v)
    scale = max(1.0, float(np.max(np.abs(evals))))
    groups: list[list[int]] = []
    for i, lam in enumerate(evals):
        if groups and abs(lam - evals[groups[-1][-1]]) < CLUSTER_TOL * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    out = []
    for grp in groups:
        P = evecs[:, grp]
        ci = P @ (P.T @ cv)
        if np.linalg.norm(ci) <= 1e-12 * max(1.0, np.linalg.norm(cv)):
            continue
        y = float(np.mean(evals[grp]))
        merged = abs(y - model.kappa * float(ci @ ci)) > CLUSTER_TOL * scale
        out.append(PolyFactor(y, from_frame(op.frame, ci), merged))
    return out
