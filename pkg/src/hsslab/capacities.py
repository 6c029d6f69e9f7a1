"""Closed-form capacity values, sub-level inclusion sampling and the admissible profile."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

from .dynamics import circle_hamiltonian
from .errors import DomainError, UsageError
from .lie_models import SpaceModel, build_model
from .orbit_geometry import project_tangent

QUANTITIES = (
    "cG_U", "cHZ_U", "cHZ0_U", "cHZ_disk_untwisted", "cHZ_bounds_noncompact",
    "cHZ_sublevel", "cG_M", "cHZ_M", "product_capacities",
)

# length of the shortest closed geodesic once the maximal sectional curvature is 1
CLOSED_GEODESIC_LENGTH = 2 * np.pi


@dataclass(frozen=True)
class CapacityQuery:
    model: str
    quantity: str
    R: float | None = None
    s: float | None = None
    rho: float | None = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise UsageError(f"unknown capacity quantity '{self.quantity}'")
        if self.R is not None and not self.R > 0:
            raise DomainError(f"ratio R must be positive, got {self.R}")
        if self.s is not None and not self.s > 1:
            raise DomainError(f"twist s must exceed 1, got {self.s}")
        if self.rho is not None and not 0 < self.rho < 2:
            raise DomainError(f"radius rho must lie in (0, 2), got {self.rho}")


def _need(value, name, quantity):
    if value is None:
        raise UsageError(f"'{quantity}' needs parameter {name}")
    return value


def _compact(model: SpaceModel, quantity: str):
    if model.kappa < 0:
        raise UsageError(f"'{quantity}' is defined for compact models")


def _noncompact(model: SpaceModel, quantity: str):
    if model.kappa > 0:
        raise UsageError(f"'{quantity}' is defined for noncompact models")


def thz_bounds(rank: int, s: float) -> tuple[float, float]:
    lower = 2 * np.pi * (s - np.sqrt(s * s - 1.0 / rank))
    upper = 2 * np.pi * rank * (s - np.sqrt(s * s - 1.0))
    return float(lower), float(upper)


def factor_ranks(model: SpaceModel) -> list[int]:
    return [build_model(f).rank for _, _, f in model.blocks]


def evaluate(query: CapacityQuery):
    """Value of the requested capacity; bounds come back as a (lower, upper) pair."""
    model = build_model(query.model)
    q = query.quantity
    if q in ("cG_U", "cHZ_U", "cHZ0_U"):
        _compact(model, q)
        R = _need(query.R, "R", q)
        return float(min(1.0, R) * 4 * np.pi)
    if q == "cHZ_disk_untwisted":
        _compact(model, q)
        return float(CLOSED_GEODESIC_LENGTH)
    if q == "cHZ_bounds_noncompact":
        _noncompact(model, q)
        return thz_bounds(model.rank, _need(query.s, "s", q))
    if q == "cHZ_sublevel":
        _noncompact(model, q)
        _need(query.s, "s", q)
        rho = _need(query.rho, "rho", q)
        return float(np.pi * rho * rho)
    if q == "cG_M":
        _compact(model, q)
        return float(4 * np.pi)
    if q == "cHZ_M":
        _compact(model, q)
        return float(4 * np.pi * model.rank)
    _compact(model, q)
    ranks = factor_ranks(model)
    w = query.weights if query.weights is not None else (1.0,) * len(ranks)
    if len(w) != len(ranks):
        raise UsageError(f"need {len(ranks)} weights, got {len(w)}")
    chz = sum(abs(a) * 4 * np.pi * r for a, r in zip(w, ranks))
    cg_lower = min(abs(a) * 4 * np.pi for a in w)
    return {"cHZ": float(chz), "cG_lower": float(cg_lower)}


def capacity_table(model_name: str, R: float | None = None, s: float | None = None,
                   rho: float | None = None) -> list[tuple[str, object]]:
    """All quantities that make sense for the model and the given parameters."""
    model = build_model(model_name)
    if model.kappa > 0:
        names = ["cG_M", "cHZ_M", "cHZ_disk_untwisted"]
        if R is not None:
            names = ["cG_U", "cHZ_U", "cHZ0_U"] + names
        if model.is_product:
            names.append("product_capacities")
    else:
        names = []
        if s is not None:
            names.append("cHZ_bounds_noncompact")
            if rho is not None:
                names.append("cHZ_sublevel")
    return [(n, evaluate(CapacityQuery(model_name, n, R=R, s=s, rho=rho))) for n in names]


# sub-level inclusions

@dataclass
class InclusionReport:
    n_samples: int
    lower_counterexamples: int = 0
    upper_counterexamples: int = 0
    lower_level: float = 0.0
    upper_level: float = 0.0
    details: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.lower_counterexamples == 0 and self.upper_counterexamples == 0


def _random_group_element(model: SpaceModel, rng, scale=0.8):
    return expm(model.from_coords(rng.normal(size=model.dim) * scale))


def _polydisc_velocity(model: SpaceModel, x, g, norms, rng):
    """Sum over factors of g-vectors with the given norms, transported to x."""
    Z = model.base_point
    gi = np.linalg.inv(g)
    v = np.zeros_like(Z)
    for i, nrm in enumerate(norms):
        sl = model.factor_basis_slices[i]
        w = project_tangent(Z, model.from_coords(np.concatenate([
            np.zeros(sl.start), rng.normal(size=sl.stop - sl.start), np.zeros(model.dim - sl.stop)])))
        w = w / np.sqrt(model.pairing(w, w))
        v = v + nrm * w
    return g @ v @ gi


def _sample_norms(r, s, rng, adversarial):
    if adversarial is not None:
        return np.full(r, adversarial)
    # uniform in a ball of radius 1.2 for the factor norms, so both sides of the
    # unit disc bundle are hit; each factor stays inside the domain |v_i| < s of H
    d = rng.normal(size=r)
    d = np.abs(d) / np.linalg.norm(d)
    rad = 1.2 * rng.random() ** (1.0 / r)
    return np.minimum(d * rad, 0.99 * s)


def sublevel_inclusion_check(model_name: str, s: float, n_samples: int, seed: int = 0,
                             tol: float = 1e-9) -> InclusionReport:
    """Sample both inclusions H <= lower => |v| <= 1 and |v| <= 1 => H <= upper."""
    model = build_model(model_name)
    _noncompact(model, "sublevel inclusions")
    if not s > 1:
        raise DomainError(f"twist s must exceed 1, got {s}")
    if model.rank != len(model.blocks):
        raise UsageError("sub-level sampling needs a polydisc model")
    r = model.rank
    lo, up = thz_bounds(r, s)
    rep = InclusionReport(n_samples, lower_level=lo, upper_level=up)
    rng = np.random.default_rng(seed)
    adversarial = [1.0 / np.sqrt(r), 1.0 - 1e-12]
    for k in range(n_samples):
        g = _random_group_element(model, rng)
        x = g @ model.base_point @ np.linalg.inv(g)
        adv = adversarial[k % 2] if k < 2 * 16 else None
        v = _polydisc_velocity(model, x, g, _sample_norms(r, s, rng, adv), rng)
        H = circle_hamiltonian(model, x, v, s, check_domain=False)
        vn = np.sqrt(model.pairing(v, v))
        if H <= lo and vn > 1 + tol:
            rep.lower_counterexamples += 1
            rep.details.append(("lower", float(H), float(vn)))
        if vn <= 1 and H > up + tol:
            rep.upper_counterexamples += 1
            rep.details.append(("upper", float(H), float(vn)))
    return rep


# admissible profile

def _step(t):
    """C-infinity transition from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        p = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        q = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return p / (p + q)


@dataclass(frozen=True)
class AdmissibleProfile:
    a: float
    b: float
    eps: float
    slope: float
    width: float

    def bump(self, x):
        w = self.width
        return _step((x - self.a - w) / w) * _step((self.b - w - x) / w)

    def fprime(self, x):
        return self.slope * self.bump(x)

    def f(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([quad(self.fprime, self.a, min(max(xi, self.a), self.b), epsabs=1e-13, epsrel=1e-13)[0]
                        for xi in x])
        return out if out.size > 1 else float(out[0])

    def period(self, E):
        """T(E) = 1 / f'(E) where f' > 0, infinite on the flat ends."""
        d = np.asarray(self.fprime(E), dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), np.inf)


def admissibility_profile(a: float, b: float, eps: float) -> AdmissibleProfile:
    """Smooth monotone f with f = 0 near a, f = b - a - eps near b and 0 <= f' < 1."""
    if not a < b:
        raise DomainError("need a < b")
    if not 0 < eps < b - a:
        raise DomainError(f"infeasible eps {eps}: need 0 < eps < b - a")
    w = eps / 4.0
    prof = AdmissibleProfile(a, b, eps, 1.0, w)
    mass = quad(prof.bump, a, b, epsabs=1e-12, epsrel=1e-12, limit=200, points=[a + w, a + 2 * w, b - 2 * w, b - w])[0]
    return AdmissibleProfile(a, b, eps, (b - a - eps) / mass, w)
