"""Verification suites: named residual checks swept over seeded sample points."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dynamics as dyn
from .errors import UsageError
from .lie_models import SpaceModel, br, build_model
from .moment_maps import MomentId, defining_residual, triangle_residual
from .sampling import point_rng, random_group_element, random_tangent, random_tm_point
from .symplecto_maps import DIFF_STEP, MapId, apply_map, diag_embed, diag_inverse, equivariance_residual, pullback_residual
from .tangent_forms import (
    FD_STEP,
    FormId,
    curve_point,
    d_eta,
    d_lambda,
    d_tau,
    dE,
    eta,
    lam,
    numerical_d,
    omega_sigma,
    tau,
)

SUITES = ("maps", "moments", "forms", "dynamics")
DIAG_RATIOS = (0.25, 1.0, 4.0)


@dataclass(frozen=True)
class CheckRecord:
    name: str
    n_samples: int
    max_residual: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    fn: Callable[..., float]
    max_samples: int | None = None
    uses_step: bool = False


def thread_cap() -> int:
    raw = os.environ.get("HSS_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"HSS_LAB_THREADS must be an integer, got '{raw}'")
    return max(1, n)


def _sample(model, rng, unorm_max=None, speed=0.5):
    if unorm_max is None and model.kappa < 0:
        unorm_max = 0.8
    return random_tm_point(model, rng, speed, unorm_max)


# maps

def _roundtrip(tag):
    def fn(model, rng):
        x, v, _ = _sample(model, rng)
        p = apply_map(model, MapId(tag), x, v)
        q = apply_map(model, MapId(tag, "inverse"), *p)
        return float(np.linalg.norm(q[0] - x) + np.linalg.norm(q[1] - v))
    return fn


def _composite_pullback(model, rng, step=DIFF_STEP):
    x, v, _ = _sample(model, rng)
    return pullback_residual(model, MapId("composite"), FormId("omega_sigma", s=1.0),
                             FormId("omega_fc", s=1.0), x, v, rng, n_pairs=10, step=step)


def _diag_pullback(R):
    def fn(model, rng, step=DIFF_STEP):
        x, v, _ = _sample(model, rng, unorm_max=0.9 * 4 * R)
        return pullback_residual(model, MapId("diag", R=R), FormId("omega_sigma", s=1.0 - R), None, x, v, rng, 10,
                                 step=step)
    return fn


def _diag_roundtrip(R):
    def fn(model, rng):
        x, v, _ = _sample(model, rng, unorm_max=0.9 * 4 * R)
        a, b = diag_embed(model, x, v, R)
        X, V = diag_inverse(model, a, b, R)
        return float(np.linalg.norm(X - x) + np.linalg.norm(V - v))
    return fn


def _map_equivariance(mid):
    def fn(model, rng):
        x, v, _ = _sample(model, rng, unorm_max=0.5 if mid.tag == "diag" else None)
        g = random_group_element(model, rng, 0.3)
        return equivariance_residual(model, mid, x, v, g)
    return fn


# moments

def _triangle(mid):
    def fn(model, rng):
        x, v, _ = _sample(model, rng, unorm_max=0.9 * 4 * mid.R if mid.tag == "diag" else None)
        return triangle_residual(model, mid, x, v)
    return fn


def _defining(mu, form):
    def fn(model, rng, step=DIFF_STEP):
        x, v, _ = _sample(model, rng)
        a = model.from_coords(rng.normal(size=model.dim))
        a = a / math.sqrt(abs(model.pairing(a, a)) or 1.0)
        return defining_residual(model, mu, form, x, v, a, step=step)
    return fn


def _inclusion_defining(model, rng, step=DIFF_STEP):
    x, _, frame = _sample(model, rng)
    a = model.from_coords(rng.normal(size=model.dim))
    worst = 0.0
    for e in frame:
        st = step
        xp, _ = curve_point(x, np.zeros_like(x), e, np.zeros_like(x), st)
        xm, _ = curve_point(x, np.zeros_like(x), e, np.zeros_like(x), -st)
        deriv = (model.pairing(xp, a) - model.pairing(xm, a)) / (2 * st)
        worst = max(worst, abs(deriv - model.pairing(br(x, br(a, x)), e)))
    return worst


# forms

_ONE_FORMS = {"lambda": (lam, d_lambda), "eta": (eta, d_eta), "tau": (tau, d_tau)}


def _exterior(tag):
    alpha, block = _ONE_FORMS[tag]

    def fn(model, rng, step=FD_STEP):
        x, v, frame = _sample(model, rng)
        xi = (random_tangent(model, x, rng, frame), random_tangent(model, x, rng, frame))
        ze = (random_tangent(model, x, rng, frame), random_tangent(model, x, rng, frame))
        num = numerical_d(model, alpha, x, v, xi, ze, step)
        return abs(num - block(model, x, v, xi[0], xi[1], ze[0], ze[1])) / max(1.0, abs(num))
    return fn


def _dE_closed(model, rng, step=FD_STEP):
    x, v, frame = _sample(model, rng)
    xi = (random_tangent(model, x, rng, frame), random_tangent(model, x, rng, frame))
    ze = (random_tangent(model, x, rng, frame), random_tangent(model, x, rng, frame))
    return abs(numerical_d(model, dE, x, v, xi, ze, step))


def _omega_k(model, rng, step=DIFF_STEP):
    x, v, _ = _sample(model, rng, unorm_max=0.8)
    return pullback_residual(model, MapId("hk_to_fc"), FormId("omega_K"), FormId("omega_fc", s=1.0), x, v, rng, 3,
                             step=step)


# dynamics

def _energy_drift(model, rng):
    x, v, _ = _sample(model, rng)
    rec = dyn.integrate_flow(model, x, v, 1.0, 1e-3, 2000, sample_every=100)
    return rec.max_energy_drift


def _nu_period(model, rng):
    x, _, _ = _sample(model, rng)
    return float(np.linalg.norm(dyn.integrate_nu_flow(model, x) - x))


def _circle_period(model, rng):
    x, v, _ = _sample(model, rng, unorm_max=0.8)
    X, V = dyn.integrate_circle_flow(model, x, v, 1.25)
    return float(np.linalg.norm(X - x) + np.linalg.norm(V - v))


def _intertwining(model, rng):
    x, v, _ = _sample(model, rng, unorm_max=0.8)
    _, q = apply_map(model, MapId("composite"), x, v)
    return abs(2 * math.pi * 0.5 * model.pairing(q, q) - dyn.circle_hamiltonian(model, x, v, 1.0))


def _dH_convention(model, rng, step=DIFF_STEP):
    s = 1.25
    x, v, frame = _sample(model, rng, unorm_max=0.8)
    hh, uu = dyn.circle_field(model, x, v, s)
    zero = np.zeros_like(x)
    worst, st = 0.0, step
    for e in frame:
        for h, u in ((e, zero), (zero, e)):
            hp = dyn.circle_hamiltonian(model, *curve_point(x, v, h, u, st), s)
            hm = dyn.circle_hamiltonian(model, *curve_point(x, v, h, u, -st), s)
            worst = max(worst, abs((hp - hm) / (2 * st) - omega_sigma(model, x, v, hh, uu, h, u, s)))
    return worst


def _critical_values(model, rng):
    cv = dyn.critical_values(model)
    err = abs(cv.osc - 4 * math.pi * model.rank)
    if len(cv.values) > 1:
        err = max(err, abs(cv.smin - cv.min - 4 * math.pi))
    return err


def checks_for(model: SpaceModel, suite: str) -> list[Check]:
    compact = model.kappa > 0
    rank_one_factors = model.rank == len(model.blocks)
    out: list[Check] = []
    if suite == "maps":
        out += [Check("maps.twist_to_hk.roundtrip", 1e-9, _roundtrip("twist_to_hk")),
                Check("maps.hk_to_fc.roundtrip", 1e-9, _roundtrip("hk_to_fc")),
                Check("maps.composite.pullback", 1e-6, _composite_pullback, uses_step=True)]
        for tag in ("twist_to_hk", "hk_to_fc"):
            out.append(Check(f"maps.{tag}.equivariance", 1e-9, _map_equivariance(MapId(tag))))
        if compact:
            for R in DIAG_RATIOS:
                out.append(Check(f"maps.diag[R={R:g}].pullback", 1e-6, _diag_pullback(R), uses_step=True))
                if rank_one_factors:
                    out.append(Check(f"maps.diag[R={R:g}].roundtrip", 1e-9, _diag_roundtrip(R)))
            out.append(Check("maps.diag[R=1].equivariance", 1e-9, _map_equivariance(MapId("diag", R=1.0))))
    elif suite == "moments":
        out += [Check("moments.triangle.twist_to_hk", 1e-9, _triangle(MapId("twist_to_hk"))),
                Check("moments.triangle.hk_to_fc", 1e-9, _triangle(MapId("hk_to_fc"))),
                Check("moments.triangle.composite", 1e-9, _triangle(MapId("composite")))]
        if compact:
            for R in DIAG_RATIOS:
                out.append(Check(f"moments.triangle.diag[R={R:g}]", 1e-9, _triangle(MapId("diag", R=R))))
        out += [Check("moments.defining.inclusion", 1e-7, _inclusion_defining, uses_step=True),
                Check("moments.defining.twisted", 1e-6,
                      _defining(MomentId("mu_twisted", s=1.0), FormId("omega_sigma", s=1.0)), uses_step=True),
                Check("moments.defining.fc", 1e-6,
                      _defining(MomentId("mu_fc", s=1.0), FormId("omega_fc", s=1.0)), uses_step=True)]
    elif suite == "forms":
        out += [Check(f"forms.d{t}.block", 1e-6, _exterior(t), uses_step=True) for t in ("lambda", "eta", "tau")]
        out += [Check("forms.dE.closed", 1e-6, _dE_closed, uses_step=True),
                Check("forms.omega_K.crosscheck", 1e-4, _omega_k, max_samples=20, uses_step=True)]
    elif suite == "dynamics":
        out.append(Check("dynamics.energy_drift", 1e-8, _energy_drift, max_samples=5))
        if compact:
            out += [Check("dynamics.nu_period", 1e-6, _nu_period, max_samples=10),
                    Check("dynamics.critical_values", 1e-10, _critical_values, max_samples=1)]
        elif rank_one_factors:
            out += [Check("dynamics.circle_period", 1e-5, _circle_period, max_samples=3),
                    Check("dynamics.intertwining", 1e-9, _intertwining),
                    Check("dynamics.dH_convention", 1e-6, _dH_convention, max_samples=10, uses_step=True)]
    else:
        raise UsageError(f"unknown suite '{suite}'")
    return out


def run_check(model: SpaceModel, check: Check, samples: int, seed: int, tol: float | None = None,
              index: int = 0, fd_step: float | None = None) -> CheckRecord:
    n = samples if check.max_samples is None else min(samples, check.max_samples)
    base = seed * 1000 + index

    kw = {"step": fd_step} if (fd_step is not None and check.uses_step) else {}

    def one(i):
        return float(check.fn(model, point_rng(base, i), **kw))

    threads = thread_cap()
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, range(n)))
    else:
        vals = [one(i) for i in range(n)]
    worst = max(vals) if vals else 0.0
    if any(not math.isfinite(v) for v in vals):
        worst = float("nan")
    t = check.tolerance if tol is None else tol
    return CheckRecord(check.name, n, worst, t, bool(math.isfinite(worst) and worst < t))


def run_suite(model_name: str, suite: str, samples: int, seed: int, tol: float | None = None,
              overrides: dict[str, float] | None = None, fd_step: float | None = None) -> list[CheckRecord]:
    if samples <= 0:
        raise UsageError(f"sample count must be positive, got {samples}")
    if fd_step is not None and not 1e-8 <= fd_step <= 1e-2:
        raise UsageError(f"finite-difference step {fd_step:g} outside [1e-8, 1e-2]")
    if tol is not None and not tol > 0:
        raise UsageError(f"tolerance must be positive, got {tol}")
    model = build_model(model_name)
    names = SUITES if suite == "all" else (suite,)
    if suite != "all" and suite not in SUITES:
        raise UsageError(f"unknown suite '{suite}'")
    overrides = overrides or {}
    out = []
    for s in names:
        for i, chk in enumerate(checks_for(model, s)):
            t = overrides.get(chk.name, tol)
            out.append(run_check(model, chk, samples, seed, t, index=SUITES.index(s) * 100 + i, fd_step=fd_step))
    return out
