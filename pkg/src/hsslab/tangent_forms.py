"""TM and T(TM): lifts, one-forms, block two-forms, the Kahler potential, numerical d."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import expm, expm_frechet

from .errors import DomainError, UsageError
from .lie_models import SpaceModel, br, build_model
from .orbit_geometry import curvature, curvature_operator, frame_coords, project_tangent, tangent_frame
from .spectral_calculus import F as F_scalar

FD_STEP = 1e-4

ONE_FORMS = ("lambda", "eta", "tau", "dE")
TWO_FORMS = ("dlambda", "deta", "dtau", "omega_sigma", "omega_fc", "omega_K")


@dataclass(frozen=True)
class TMPoint:
    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class TTMVector:
    at: TMPoint
    h: np.ndarray
    u: np.ndarray

    def ambient(self) -> tuple[np.ndarray, np.ndarray]:
        return ambient_pair(self.at.x, self.at.v, self.h, self.u)


@dataclass(frozen=True)
class FormId:
    tag: str
    s: float | None = None

    def __post_init__(self):
        if self.tag not in ONE_FORMS + TWO_FORMS:
            raise UsageError(f"unknown form '{self.tag}'")
        if (self.tag in ("omega_sigma", "omega_fc")) != (self.s is not None):
            raise UsageError(f"parameter s mismatch for form '{self.tag}'")


def ambient_pair(x, v, h, u):
    """Velocity in g x g of the TM-curve with horizontal part h and vertical part u."""
    return h, br(br(x, h), v) + u


def split(x, v, xdot, vdot):
    """Inverse of ambient_pair: (h, u) from an ambient velocity."""
    h = project_tangent(x, xdot)
    return h, project_tangent(x, vdot - br(br(x, h), v))


def lift(point: TMPoint, w: np.ndarray, kind: str) -> TTMVector:
    if kind == "horizontal":
        return TTMVector(point, w, np.zeros_like(w))
    if kind == "vertical":
        return TTMVector(point, np.zeros_like(w), w)
    raise UsageError(f"unknown lift kind '{kind}'")


def rotate_K(x, h, u):
    """K = j (-) j acting on the (h, u) split."""
    return br(x, h), -br(x, u)


# one-forms; signature (model, x, v, h, u)

def lam(model, x, v, h, u):
    return model.pairing(v, h)


def eta(model, x, v, h, u):
    return model.pairing(br(x, v), h)


def tau(model, x, v, h, u):
    return model.pairing(br(x, v), u)


def dE(model, x, v, h, u):
    return model.pairing(v, u)


_ONE = {"lambda": lam, "eta": eta, "tau": tau, "dE": dE}


def one_form(model: SpaceModel, tag: str, xi: TTMVector) -> float:
    if tag not in _ONE:
        raise UsageError(f"unknown one-form '{tag}'")
    return _ONE[tag](model, xi.at.x, xi.at.v, xi.h, xi.u)


# two-forms on split pairs

def _sigma(model, x, a, b):
    return model.pairing(br(x, a), b)


def d_lambda(model, x, v, h1, u1, h2, u2):
    return model.pairing(u1, h2) - model.pairing(u2, h1)


def d_eta(model, x, v, h1, u1, h2, u2):
    return _sigma(model, x, u1, h2) + _sigma(model, x, h1, u2)


def d_tau(model, x, v, h1, u1, h2, u2):
    # curvature block is g(v, R(h1, h2) jv) = -g(jv, R(h1, h2) v) with the calibrated R
    return model.pairing(v, curvature(model, h1, h2, br(x, v))) + 2.0 * _sigma(model, x, u1, u2)


# The fibre blocks enter with a minus sign: with a^# = ([a, x], [a, v]) and
# d<mu, a> = iota_{a^#} omega, this is the sign for which [x, v] + s x and
# -[[x, v], v]/2 + s x are the moment maps.

def omega_sigma(model, x, v, h1, u1, h2, u2, s=1.0):
    return s * _sigma(model, x, h1, h2) - d_lambda(model, x, v, h1, u1, h2, u2)


def omega_fc(model, x, v, h1, u1, h2, u2, s=1.0):
    return s * _sigma(model, x, h1, h2) - 0.5 * d_tau(model, x, v, h1, u1, h2, u2)


def form_callable(fid: FormId) -> Callable:
    """Two-form as a callable (model, x, v, h1, u1, h2, u2) -> float."""
    t = fid.tag
    if t == "dlambda":
        return d_lambda
    if t == "deta":
        return d_eta
    if t == "dtau":
        return d_tau
    if t == "omega_sigma":
        return lambda m, x, v, h1, u1, h2, u2: omega_sigma(m, x, v, h1, u1, h2, u2, fid.s)
    if t == "omega_fc":
        return lambda m, x, v, h1, u1, h2, u2: omega_fc(m, x, v, h1, u1, h2, u2, fid.s)
    if t == "omega_K":
        return lambda m, x, v, h1, u1, h2, u2: omega_K(m, x, v, h1, u1, h2, u2)
    raise UsageError(f"'{t}' is not a two-form")


def two_form(model: SpaceModel, fid: FormId | str, xi: TTMVector, zeta: TTMVector) -> float:
    if isinstance(fid, str):
        fid = FormId(fid)
    if xi.at is not zeta.at and not (np.array_equal(xi.at.x, zeta.at.x) and np.array_equal(xi.at.v, zeta.at.v)):
        raise UsageError("tangent vectors are anchored at different points")
    return form_callable(fid)(model, xi.at.x, xi.at.v, xi.h, xi.u, zeta.h, zeta.u)


def sasaki_metric(model, x, v, h1, u1, h2, u2):
    return model.pairing(h1, h2) + model.pairing(u1, u2)


# chart machinery

def chart(x0, v0, a, u):
    """Phi(a, u) = (Ad_E x0, Ad_E (v0 + u)) with E = exp([x0, a])."""
    E = expm(br(x0, a))
    Ei = np.linalg.inv(E)
    return E @ x0 @ Ei, E @ (v0 + u) @ Ei


def chart_point_and_velocity(x0, v0, a, u, da, du):
    """Phi(a, u) and the ambient velocity dPhi_(a,u)(da, du)."""
    A = br(x0, a)
    E, dEm = expm_frechet(A, br(x0, da))
    Ei = np.linalg.inv(E)
    W = dEm @ Ei
    X = E @ x0 @ Ei
    V = E @ (v0 + u) @ Ei
    return X, V, br(W, X), br(W, V) + E @ du @ Ei


def chart_velocity_split(x0, v0, a, u, da, du):
    """Point Phi(a, u) and the (h, u) split of dPhi(da, du) there."""
    X, V, xd, vd = chart_point_and_velocity(x0, v0, a, u, da, du)
    h, w = split(X, V, xd, vd)
    return X, V, h, w


def curve_point(x0, v0, h, u, t):
    """Point at parameter t of the chart curve with initial velocity (h, u)."""
    return chart(x0, v0, t * h, t * u)


def numerical_d(model: SpaceModel, alpha: Callable, x, v, xi, zeta, step: float = FD_STEP) -> float:
    """d alpha(xi, zeta) by central differences along commuting chart coordinate fields.

    ``xi`` and ``zeta`` are (h, u) pairs at (x, v); ``alpha`` has the one-form
    signature (model, x, v, h, u).
    """
    if step < 1e-8:
        raise DomainError(f"finite-difference step {step:g} underflows")

    def along(e_move, e_eval):
        vals = []
        for t in (step, -step):
            X, V, h, w = chart_velocity_split(x, v, t * e_move[0], t * e_move[1], e_eval[0], e_eval[1])
            vals.append(alpha(model, X, V, h, w))
        return (vals[0] - vals[1]) / (2 * step)

    return along(xi, zeta) - along(zeta, xi)


# Kahler potential of the hyperkahler form

def nu_potential(model: SpaceModel, x, v, frame=None) -> float:
    op = curvature_operator(model, x, v, frame)
    ev, U = np.linalg.eigh(op.matrix)
    if len(ev) and ev.min() <= -1.0:
        raise DomainError(f"potential requires eigenvalues > -1, got {ev.min():g}")
    c = frame_coords(model, op.frame, v)
    cu = U.T @ c
    return float(np.sum(F_scalar(ev) * cu * cu))


def d_nu(model: SpaceModel, x, v, h, u, step: float = 1e-5) -> float:
    vals = [nu_potential(model, *curve_point(x, v, h, u, t)) for t in (step, -step)]
    return (vals[0] - vals[1]) / (2 * step)


def dc_nu(model: SpaceModel, x, v, h, u, sign: int | None = None) -> float:
    """d^c nu = sign * d nu o K."""
    if sign is None:
        sign = dc_sign(model.name)
    kh, ku = rotate_K(x, h, u)
    return sign * d_nu(model, x, v, kh, ku)


@lru_cache(maxsize=None)
def dc_sign(model_name: str) -> int:
    """Sign of d^c fixed by positivity omega_K(xi, K xi) > 0 for a vertical xi.

    On vertical vectors the pullback of sigma vanishes, so the sign of dd^c nu
    alone decides positivity.
    """
    model = build_model(model_name)
    x = model.base_point
    fr = tangent_frame(model, x)
    v = 0.2 * fr[0]
    zero = np.zeros_like(x)
    u = fr[1]
    ku = -br(x, u)
    dd = numerical_d(model, lambda m, X, V, hh, uu: dc_nu(m, X, V, hh, uu, 1), x, v, (zero, u), (zero, ku))
    return 1 if dd > 0 else -1


def omega_K(model: SpaceModel, x, v, h1, u1, h2, u2, step: float = FD_STEP) -> float:
    dd = numerical_d(model, dc_nu, x, v, (h1, u1), (h2, u2), step)
    return _sigma(model, x, h1, h2) + dd
