"""Magnetic geodesic flow, circle-action Hamiltonians, critical values and the Mane action."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .errors import DomainError, NumericalError, UsageError
from .lie_models import SpaceModel, br
from .orbit_geometry import (
    curvature_operator,
    frame_coords,
    from_frame,
    orbit_residual,
    project_tangent,
)
from .spectral_calculus import h as h_fn
from .spectral_calculus import h_tilde

DRIFT_TOL = 1e-6
RETURN_TOL = 1e-4
ESCAPE_RADIUS = 1e3


@dataclass(frozen=True)
class FlowState:
    x: np.ndarray
    v: np.ndarray
    t: float


@dataclass(frozen=True)
class TrajectoryRecord:
    times: np.ndarray
    xs: np.ndarray
    vs: np.ndarray
    energy: np.ndarray
    drift: np.ndarray
    verdict: str | None = None
    period: float | None = None
    meta: dict = field(default_factory=dict)

    def states(self) -> list[FlowState]:
        return [FlowState(x, v, float(t)) for t, x, v in zip(self.times, self.xs, self.vs)]

    @property
    def max_energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / (abs(e0) if e0 else 1.0))

    def write_csv(self, path) -> None:
        """Columns: t, Re/Im of the flattened x entries, the same for v, E, drift."""
        n = self.xs.shape[1]
        idx = [f"{i}{j}" for i in range(n) for j in range(n)]
        header = (["t"] + [f"x{k}_{p}" for k in idx for p in ("re", "im")]
                  + [f"v{k}_{p}" for k in idx for p in ("re", "im")] + ["E", "drift"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, x, v, e, d in zip(self.times, self.xs, self.vs, self.energy, self.drift):
                row = [repr(float(t))]
                for m in (x, v):
                    for z in m.ravel():
                        row += [repr(float(z.real)), repr(float(z.imag))]
                w.writerow(row + [repr(float(e)), repr(float(d))])


def magnetic_field(model: SpaceModel, x, v, s: float):
    """(h, u) = (v, s jv): the Lorentz force of s sigma is s j."""
    return v.copy(), s * br(x, v)


def energy(model: SpaceModel, v) -> float:
    return 0.5 * model.pairing(v, v)


# projection back to the orbit: each block has exactly two eigenvalues, so the
# spectral projector of x is the idempotent limit of P <- 3P^2 - 2P^3

def _block_spectra(model: SpaceModel):
    out = []
    for o, s, _ in model.blocks:
        ev = np.linalg.eigvals(model.base_point[o:o + s, o:o + s])
        vals = np.unique(np.round(ev, 12))
        if len(vals) != 2:
            raise DomainError("orbit projection needs two eigenvalues per block")
        out.append((o, s, vals[0], vals[1]))
    return out


def project_orbit(model: SpaceModel, x, spectra=None, iters: int = 3):
    if spectra is None:
        spectra = _block_spectra(model)
    y = x.copy()
    for o, s, l1, l2 in spectra:
        I = np.eye(s)
        P = (x[o:o + s, o:o + s] - l2 * I) / (l1 - l2)
        for _ in range(iters):
            P2 = P @ P
            P = 3 * P2 - 2 * P2 @ P
        y[o:o + s, o:o + s] = l2 * I + (l1 - l2) * P
    return y


def _rhs(x, v, s):
    jv = br(x, v)
    return v, br(jv, v) + s * jv


def _rk4(x, v, s, dt):
    k1x, k1v = _rhs(x, v, s)
    k2x, k2v = _rhs(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v, s)
    k3x, k3v = _rhs(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v, s)
    k4x, k4v = _rhs(x + dt * k3x, v + dt * k3v, s)
    return (x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
            v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v))


def integrate_flow(model: SpaceModel, x0, v0, s: float, dt: float, steps: int,
                   sample_every: int = 1, drift_tol: float = DRIFT_TOL,
                   stop_radius: float | None = None) -> TrajectoryRecord:
    """RK4 for x' = v, v' = [[x, v], v] + s[x, v] with orbit and tangency re-projection.

    With ``stop_radius`` the run ends early once |x - x0| exceeds it; the record's
    meta then carries ``stopped_at``.
    """
    if steps < 0 or dt <= 0 or sample_every < 1:
        raise UsageError("need dt > 0, steps >= 0 and sample_every >= 1")
    if np.linalg.norm(v0 - project_tangent(x0, v0)) > 1e-8 * max(1.0, np.linalg.norm(v0)):
        raise DomainError("initial velocity is not tangent to the orbit")
    spectra = _block_spectra(model)
    x, v = x0.copy(), v0.copy()
    e0 = energy(model, v)
    ts, xs, vs, es, ds = [0.0], [x.copy()], [v.copy()], [e0], [scaled_drift(model, x)]
    stopped = None
    for k in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            x, v = _rk4(x, v, s, dt)
            x = project_orbit(model, x, spectra)
            v = project_tangent(x, v)
        if not (np.isfinite(x).all() and np.isfinite(v).all()):
            raise NumericalError(f"state overflowed at step {k}; reduce dt")
        if stop_radius is not None and np.linalg.norm(x - x0) > stop_radius:
            stopped = k * dt
        if k % sample_every == 0 or k == steps or stopped is not None:
            d = scaled_drift(model, x)
            if d > drift_tol:
                raise NumericalError(f"orbit drift {d:.3g} exceeds {drift_tol:g} at step {k}")
            ts.append(k * dt)
            xs.append(x.copy())
            vs.append(v.copy())
            es.append(energy(model, v))
            ds.append(d)
        if stopped is not None:
            break
    meta = {"model": model.name, "s": s, "dt": dt, "steps": steps, "stopped_at": stopped}
    return TrajectoryRecord(np.array(ts), np.array(xs), np.array(vs), np.array(es), np.array(ds), meta=meta)


def scaled_drift(model: SpaceModel, x) -> float:
    """Orbit-spectrum residual relative to the eigenvalue conditioning |x|^2."""
    return orbit_residual(model, x) / max(1.0, float(np.linalg.norm(x)) ** 2)


def _state_distance(x, v, x0, v0) -> float:
    return float(np.sqrt(np.linalg.norm(x - x0) ** 2 + np.linalg.norm(v - v0) ** 2))


def _refine_return(x, v, x0, v0, s, dt):
    """Minimise the state distance over one step either side of a sampled minimum."""
    def dist(tau):
        return _state_distance(*_rk4(x, v, s, tau), x0, v0)

    res = minimize_scalar(dist, bounds=(-dt, dt), method="bounded", options={"xatol": 1e-12})
    return float(res.fun), float(res.x)


def classify_trajectory(model: SpaceModel, x0, v0, s: float, dt: float, t_max: float = 50.0,
                        tol: float = RETURN_TOL) -> tuple[str, float | None]:
    """Verdict in {periodic, escaping, inconclusive} and the return time if periodic.

    Escaping means |x - x0| grows monotonically until it leaves ESCAPE_RADIUS or
    the window ends; beyond that radius the ambient coordinates lose the orbit
    constraint to rounding, so the run is cut there.
    """
    steps = int(round(t_max / dt))
    radius = ESCAPE_RADIUS * (1.0 + float(np.linalg.norm(x0)))
    rec = integrate_flow(model, x0, v0, s, dt, steps, stop_radius=radius)
    dist = np.array([_state_distance(x, v, x0, v0) for x, v in zip(rec.xs, rec.vs)])
    far = np.flatnonzero(dist > 100 * tol)
    if len(far):
        start = far[0]
        for k in range(start + 1, len(dist) - 1):
            if dist[k] <= dist[k - 1] and dist[k] <= dist[k + 1] and dist[k] < 10 * dt * (1 + np.max(dist)):
                d, shift = _refine_return(rec.xs[k], rec.vs[k], x0, v0, s, dt)
                if d < tol:
                    return "periodic", float(rec.times[k] + shift)
    xdist = np.array([np.linalg.norm(x - x0) for x in rec.xs])
    monotone = bool(np.all(np.diff(xdist) >= -1e-12 * (1.0 + xdist[1:])))
    if monotone and (rec.meta["stopped_at"] is not None or xdist[-1] > 10 * xdist[len(xdist) // 10]):
        return "escaping", None
    return "inconclusive", None


def periodicity_verdict(model: SpaceModel, x0, v0, s: float, dt: float, t_max: float = 50.0):
    """Classify at dt and dt/2; the verdict stands only if both agree."""
    a = classify_trajectory(model, x0, v0, s, dt, t_max)
    b = classify_trajectory(model, x0, v0, s, dt / 2, t_max)
    if a[0] != b[0]:
        return "inconclusive", None, (a, b)
    return a[0], a[1], (a, b)


# circle-action Hamiltonians

def _op_apply(model, x, v, fn, target, lower=None):
    op = curvature_operator(model, x, v)
    ev, U = np.linalg.eigh(op.matrix)
    if lower is not None and len(ev) and ev.min() <= lower:
        raise DomainError(f"spectrum must stay above {lower:g}, got {ev.min():g}")
    c = frame_coords(model, op.frame, target)
    return from_frame(op.frame, U @ (fn(ev) * (U.T @ c))), ev


def _check_h_domain(model, x, v, s):
    if model.kappa > 0:
        raise UsageError("the circle Hamiltonian H is defined for noncompact models")
    if not s >= 1:
        raise DomainError(f"twist s must be at least 1, got {s}")
    op = curvature_operator(model, x, v)
    if not op.in_U(1.0):
        raise DomainError(f"point outside U_1 (operator norm {op.u_norm():.6g})")


def circle_hamiltonian(model: SpaceModel, x, v, s: float, check_domain: bool = True) -> float:
    """H(x, v) = g(h(op) v, v).

    With ``check_domain=False`` only s^2 + y > 0 is required of the spectrum, which
    lets sampling reach the boundary of the unit disc bundle.
    """
    if check_domain:
        _check_h_domain(model, x, v, s)
    hv, _ = _op_apply(model, x, v, lambda y: h_fn(y, s), v, lower=-s * s)
    return model.pairing(hv, v)


def circle_field(model: SpaceModel, x, v, s: float):
    """X_H as an (h, u) pair: 2 (h~ v)^H + 2 s (h~ jv)^V.

    With h~ = pi / sqrt(s^2 + y) this is dH / dE times the magnetic field on each
    polydisc factor, which is the normalization giving period one.
    """
    f = lambda y: h_tilde(y, s)
    hv, _ = _op_apply(model, x, v, f, v)
    hj, _ = _op_apply(model, x, v, f, br(x, v))
    return 2.0 * hv, 2.0 * s * hj


def _field_rhs(model, x, v, s):
    hh, uu = circle_field(model, x, v, s)
    return hh, br(br(x, hh), v) + uu


def integrate_circle_flow(model: SpaceModel, x0, v0, s: float, t: float = 1.0, steps: int = 400):
    """RK4 for the flow of X_H; returns the end state."""
    spectra = _block_spectra(model)
    x, v = x0.copy(), v0.copy()
    dt = t / steps
    for _ in range(steps):
        k1 = _field_rhs(model, x, v, s)
        k2 = _field_rhs(model, x + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1], s)
        k3 = _field_rhs(model, x + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1], s)
        k4 = _field_rhs(model, x + dt * k3[0], v + dt * k3[1], s)
        x = x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        x = project_orbit(model, x, spectra)
        v = project_tangent(x, v)
    return x, v


def nu_height(model: SpaceModel, x) -> float:
    """nu(x) = 2 pi <Z, x>_g."""
    if model.kappa < 0:
        raise UsageError("the height function is defined for compact models")
    return 2 * np.pi * model.pairing(model.base_point, x)


def nu_field(model: SpaceModel, x):
    """X_nu = 2 pi Z^#, the ambient vector 2 pi [Z, x]."""
    return 2 * np.pi * br(model.base_point, x)


def integrate_nu_flow(model: SpaceModel, x0, t: float = 1.0, steps: int = 400):
    spectra = _block_spectra(model)
    x = x0.copy()
    dt = t / steps
    for _ in range(steps):
        k1 = nu_field(model, x)
        k2 = nu_field(model, x + 0.5 * dt * k1)
        k3 = nu_field(model, x + 0.5 * dt * k2)
        k4 = nu_field(model, x + dt * k3)
        x = project_orbit(model, x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), spectra)
    return x


def fixed_points(model: SpaceModel) -> list[np.ndarray]:
    """Zeros of X_nu: conjugates of Z by permutations of its eigenbasis, blockwise."""
    if model.kappa < 0:
        raise UsageError("critical values are defined for compact models")
    per_block = []
    for o, s, _ in model.blocks:
        Zb = model.base_point[o:o + s, o:o + s]
        ev, U = np.linalg.eig(Zb)
        Ui = np.linalg.inv(U)
        perms = sorted(set(itertools.permutations(np.round(ev, 12).tolist(), s)),
                       key=lambda p: tuple((z.imag, z.real) for z in p))
        per_block.append((o, s, [U @ np.diag(p) @ Ui for p in perms]))
    out = []
    for combo in itertools.product(*[b[2] for b in per_block]):
        X = np.zeros_like(model.base_point)
        for (o, s, _), blk in zip(per_block, combo):
            X[o:o + s, o:o + s] = blk
        out.append(X)
    return out


@dataclass(frozen=True)
class CriticalValues:
    values: tuple[float, ...]
    multiplicities: tuple[int, ...]

    @property
    def min(self) -> float:
        return self.values[0]

    @property
    def smin(self) -> float:
        return self.values[1] if len(self.values) > 1 else self.values[0]

    @property
    def max(self) -> float:
        return self.values[-1]

    @property
    def osc(self) -> float:
        return self.max - self.min


def critical_values(model: SpaceModel, decimals: int = 9) -> CriticalValues:
    vals = [nu_height(model, X) for X in fixed_points(model)]
    keys, counts = np.unique(np.round(vals, decimals), return_counts=True)
    exact = [float(np.mean([v for v in vals if round(v, decimals) == k])) for k in keys]
    return CriticalValues(tuple(exact), tuple(int(c) for c in counts))


# Mane action of the polydisc circle family

def _circle_geometry(model: SpaceModel, i: int, radius: float, quad_limit: int = 200):
    """Length of the geodesic circle of the given radius about the base point of
    factor i, and the sigma-area it encloses, both by quadrature."""
    o, sz, _ = model.blocks[i]
    Z = model.base_point
    cands = [project_tangent(Z, b) for b in model.basis[model.factor_basis_slices[i]]]
    e = max(cands, key=lambda w: model.pairing(w, w))
    e = e / np.sqrt(model.pairing(e, e))
    Zi = np.zeros_like(Z)
    Zi[o:o + sz, o:o + sz] = Z[o:o + sz, o:o + sz]

    def point_and_radial(rho):
        g = expm(rho * br(Z, e))
        gi = np.linalg.inv(g)
        return g @ Z @ gi, g @ e @ gi

    def rotation_velocity(p):
        # the stabiliser of Z rotates T_Z by j, so Ad_{exp(phi Zi)} has period 2 pi in phi
        return br(Zi, p)

    def dlength(phi):
        p, _ = point_and_radial(radius)
        g = expm(phi * Zi)
        q = g @ p @ np.linalg.inv(g)
        w = rotation_velocity(q)
        return np.sqrt(model.pairing(w, w))

    def darea(rho):
        p, d = point_and_radial(rho)
        return model.pairing(br(p, d), rotation_velocity(p))

    length, _ = quad(dlength, 0.0, 2 * np.pi, limit=quad_limit, epsabs=1e-13, epsrel=1e-13)
    area, _ = quad(darea, 0.0, radius, limit=quad_limit, epsabs=1e-13, epsrel=1e-13)
    return length, 2 * np.pi * abs(area)


def mane_action(model: SpaceModel, k: float, radius: float) -> float:
    """Action of L + k on the polydisc family of circles of the given radius.

    Per factor the speed minimising the kinetic part gives l sqrt(2k/r), and the
    magnetic potential contributes minus the enclosed area.
    """
    if model.kappa > 0:
        raise UsageError("the Mane action experiment is defined for noncompact models")
    if not k > 0 or not radius > 0:
        raise DomainError("need k > 0 and a positive radius")
    r = len(model.blocks)
    if model.rank != r:
        raise UsageError("the circle family needs a polydisc model")
    total = 0.0
    for i in range(r):
        length, area = _circle_geometry(model, i, radius)
        total += np.sqrt(2 * k / r) * length - area
    return float(total)


def mane_closed_form(rank: int, k: float, radius: float) -> float:
    l = 2 * np.pi * np.sinh(radius)
    A = 2 * np.pi * (np.cosh(radius) - 1)
    return rank * (np.sqrt(2 * k / rank) * l - A)


def mane_critical_value(model: SpaceModel) -> float:
    if model.kappa > 0:
        raise UsageError("the Mane critical value is defined for noncompact models")
    return model.rank / 2.0
