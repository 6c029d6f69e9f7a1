"""Scalar spectral functions, the c1/c2 solver, and functional calculus on operators.

Near y = 0 every function switches to a degree-4 Taylor polynomial:

    b(y)  = 1 - y/3 + y^2/5 - y^3/7 + y^4/9
    a(y)  = -y/8 + 3y^2/64 - 5y^3/192 + 35y^4/2048
    a_bar = y/8 - y^2/64 + y^3/384 - y^4/2048
    F(y)  = 1/4 - y/32 + y^2/96 - 5y^3/1024 + 7y^4/2560
    h(y)  = pi/s - pi y/(4 s^3) + pi y^2/(8 s^5) - 5 pi y^3/(64 s^7) + 7 pi y^4/(128 s^9)

F_tilde = 1/(sqrt(1+y) + 1) and h_tilde = pi/sqrt(s^2 + y) have no removable
singularity and are always evaluated in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, UsageError
from .orbit_geometry import SelfAdjointOperator

SERIES_THRESHOLD = 1e-4

_DOMAINS = {"b": -1.0, "a": -1.0, "F": -1.0, "F_tilde": -1.0, "a_bar": -4.0}


@dataclass(frozen=True)
class SpectralFunctionId:
    name: str
    s: float | None = None

    def __post_init__(self):
        if self.name not in ("b", "a", "a_bar", "F", "F_tilde", "h", "h_tilde"):
            raise UsageError(f"unknown spectral function '{self.name}'")
        needs = self.name in ("h", "h_tilde")
        if needs != (self.s is not None):
            raise UsageError(f"parameter s is {'required' if needs else 'not allowed'} for {self.name}")

    def lower_bound(self) -> float:
        if self.name in ("h", "h_tilde"):
            return -self.s ** 2
        return _DOMAINS[self.name]


def _poly(c, y):
    return c[0] + y * (c[1] + y * (c[2] + y * (c[3] + y * c[4])))


def b(y):
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < SERIES_THRESHOLD
    r = np.sqrt(np.abs(np.where(small, 1.0, y)))
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.where(y > 0, np.arctan(r) / r, np.arctanh(r) / r)
    return np.where(small, _poly([1, -1 / 3, 1 / 5, -1 / 7, 1 / 9], y), big)


def a(y):
    # (2/y)(sqrt(1+y) - 1) = 2 / (1 + sqrt(1+y))
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < SERIES_THRESHOLD
    ys = np.where(small, 0.0, y)
    big = 0.5 * (np.log(2.0) - np.log1p(np.sqrt(1.0 + ys)))
    return np.where(small, _poly([0, -1 / 8, 3 / 64, -5 / 192, 35 / 2048], y), big)


def a_bar(y):
    # (1/y)((y/2 + 1)^2 - 1) = 1 + y/4
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < SERIES_THRESHOLD
    big = 0.5 * np.log1p(np.where(small, 0.0, y) / 4.0)
    return np.where(small, _poly([0, 1 / 8, -1 / 64, 1 / 384, -1 / 2048], y), big)


def F(y):
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < SERIES_THRESHOLD
    ys = np.where(small, 1.0, y)
    q = ys / (np.sqrt(1.0 + ys) + 1.0)
    big = (q - np.log1p(q / 2.0)) / ys
    return np.where(small, _poly([1 / 4, -1 / 32, 1 / 96, -5 / 1024, 7 / 2560], y), big)


def F_tilde(y):
    y = np.asarray(y, dtype=float)
    return 1.0 / (np.sqrt(1.0 + y) + 1.0)


def h(y, s):
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < SERIES_THRESHOLD
    ys = np.where(small, 1.0, y)
    big = 2 * np.pi / (np.sqrt(s * s + ys) + s)
    ser = np.pi * _poly([1 / s, -1 / (4 * s ** 3), 1 / (8 * s ** 5), -5 / (64 * s ** 7), 7 / (128 * s ** 9)], y)
    return np.where(small, ser, big)


def h_tilde(y, s):
    """h'(y) y + h(y) = d(y h)/dy = pi / sqrt(s^2 + y)."""
    y = np.asarray(y, dtype=float)
    return np.pi / np.sqrt(s * s + y)


def exp_2a(y):
    """e^{2a(y)} = 2 / (1 + sqrt(1 + y))."""
    return 2.0 / (1.0 + np.sqrt(1.0 + np.asarray(y, dtype=float)))


_FUNCS = {"b": b, "a": a, "a_bar": a_bar, "F": F, "F_tilde": F_tilde}


def evaluate(fid: SpectralFunctionId | str, y):
    """Evaluate a spectral function, raising DomainError at or beyond its branch point."""
    if isinstance(fid, str):
        fid = SpectralFunctionId(fid)
    arr = np.asarray(y, dtype=float)
    lo = fid.lower_bound()
    if np.any(arr <= lo) or not np.all(np.isfinite(arr)):
        bad = float(np.min(arr))
        raise DomainError(f"{fid.name} requires y > {lo:g}; got {bad:g} (branch point at {lo:g})")
    if fid.name == "h":
        out = h(arr, fid.s)
    elif fid.name == "h_tilde":
        out = h_tilde(arr, fid.s)
    else:
        out = _FUNCS[fid.name](arr)
    return float(out) if np.ndim(out) == 0 else out


def _residual(c1, c2, y, R):
    r = np.sqrt(y)
    return (np.sin(2 * c1 * r) + R * np.sin(2 * c2 * r) - r,
            np.cos(2 * c1 * r) - R * np.cos(2 * c2 * r) - (1 - R))


def c_linear(R: float) -> tuple[float, float]:
    """Limit y -> 0 of the solver: 2c1 + 2Rc2 = 1 with c1 = sqrt(R) c2."""
    c2 = 1.0 / (2.0 * np.sqrt(R) * (1.0 + np.sqrt(R)))
    return np.sqrt(R) * c2, c2


def _sinc(x):
    return np.sinc(x / np.pi)


def _scaled(c1, c2, r, R):
    # first equation divided by r, second by r^2: regular as r -> 0
    g1 = 2 * c1 * _sinc(2 * c1 * r) + 2 * R * c2 * _sinc(2 * c2 * r) - 1.0
    g2 = R * (c2 * _sinc(c2 * r)) ** 2 - (c1 * _sinc(c1 * r)) ** 2
    return g1, g2


def _newton(c1, c2, y, R, max_iter):
    """Damped Newton on the rescaled 2x2 system, vectorized over y."""
    r = np.sqrt(y)
    for _ in range(max_iter):
        f1, f2 = _scaled(c1, c2, r, R)
        f0 = np.hypot(f1, f2)
        if np.all(f0 < 1e-15):
            break
        j11, j12 = 2 * np.cos(2 * c1 * r), 2 * R * np.cos(2 * c2 * r)
        j21, j22 = -2 * c1 * _sinc(2 * c1 * r), 2 * R * c2 * _sinc(2 * c2 * r)
        det = j11 * j22 - j12 * j21
        safe = np.where(det != 0, det, 1.0)
        d1 = np.where(det != 0, (-f1 * j22 + f2 * j12) / safe, 0.0)
        d2 = np.where(det != 0, (f1 * j21 - f2 * j11) / safe, 0.0)
        lam = np.ones_like(y)
        for _ in range(14):
            t1, t2 = _scaled(c1 + lam * d1, c2 + lam * d2, r, R)
            bad = (np.hypot(t1, t2) >= f0) & (f0 >= 1e-14)
            if not np.any(bad):
                break
            lam = np.where(bad, lam * 0.5, lam)
        c1, c2 = c1 + lam * d1, c2 + lam * d2
    f1, f2 = _residual(c1, c2, y, R)
    return c1, c2, np.maximum(np.abs(f1), np.abs(f2))


def circle_guess(y, R: float):
    """Branch of the system via circle intersection.

    With alpha = 2 c1 sqrt(y), beta = 2 c2 sqrt(y) the system reads
    e^{i alpha} - R e^{-i beta} = P := (1 - R) + i sqrt(y), so e^{i alpha} is the
    intersection of |z| = 1 and |z - P| = R on the branch continuing z = 1 at y = 0.
    """
    r = np.sqrt(y)
    P = (1.0 - R) + 1j * r
    d = np.abs(P)
    m = np.clip((1.0 + d * d - R * R) / (2.0 * d), -1.0, 1.0)
    z = (P / d) * (m - 1j * np.sqrt(1.0 - m * m))
    alpha = np.angle(z)
    beta = -np.angle((z - P) / R)
    return alpha / (2.0 * r), beta / (2.0 * r)


def _continuation(y, R, steps, max_iter):
    l1, l2 = c_linear(R)
    c1 = np.full_like(y, l1)
    c2 = np.full_like(y, l2)
    if not np.any(y > 0):
        return c1, c2, np.zeros_like(y)
    n = max(1, min(steps, int(np.ceil(steps * y.max() / (4 * R)))))
    for k in range(1, n + 1):
        c1, c2, res = _newton(c1, c2, y * k / n, R, max_iter)
    return c1, c2, res


def solve_c1_c2_array(y, R: float, method: str = "circle", steps: int = 32, max_iter: int = 40):
    """Vectorized solver: arrays (c1, c2) for an array of y sharing the ratio R.

    ``method='circle'`` polishes the circle-intersection branch with Newton;
    ``method='continuation'`` runs damped Newton along a homotopy from y = 0.
    """
    if not R > 0:
        raise DomainError(f"ratio R must be positive, got {R}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y < 0) or np.any(y >= 4 * R):
        raise DomainError(f"solver requires 0 <= y < 4R = {4 * R:g}, got {y.min():g}..{y.max():g}")
    if method == "circle":
        l1, l2 = c_linear(R)
        with np.errstate(divide="ignore", invalid="ignore"):
            g1, g2 = circle_guess(y, R)
        small = y < 1e-6 * R
        g1, g2 = np.where(small, l1, g1), np.where(small, l2, g2)
        c1, c2, res = _newton(g1, g2, y, R, 8)
        if np.any(res > 1e-13) or np.any(c1 <= 0) or np.any(c2 <= 0):
            c1, c2, res = _continuation(y, R, steps, max_iter)
    elif method == "continuation":
        c1, c2, res = _continuation(y, R, steps, max_iter)
    else:
        raise UsageError(f"unknown solver method '{method}'")
    if np.any(res > 1e-12) or np.any(c1 <= 0) or np.any(c2 <= 0):
        i = int(np.argmax(res))
        raise NumericalError(
            f"c1/c2 solver failed at y={y[i]:g}, R={R:g}: residual {res[i]:.2e}, c=({c1[i]:g}, {c2[i]:g})")
    return c1, c2


def solve_c1_c2(y: float, R: float, method: str = "circle") -> tuple[float, float]:
    """Positive branch (c1, c2) of the trigonometric system, continuous from y = 0."""
    c1, c2 = solve_c1_c2_array([y], R, method)
    return float(c1[0]), float(c2[0])


def c1_c2_residual(y: float, R: float, c1: float, c2: float) -> float:
    f1, f2 = _residual(c1, c2, y, R)
    return float(max(abs(f1), abs(f2)))


def apply(f, op: SelfAdjointOperator, lower: float | None = None) -> SelfAdjointOperator:
    """f(op) = U f(D) U^T for a scalar function or SpectralFunctionId."""
    evals, U = np.linalg.eigh(op.matrix)
    if isinstance(f, (SpectralFunctionId, str)):
        vals = np.array([evaluate(f, lam) for lam in evals]) if len(evals) else evals
    else:
        if lower is not None and np.any(evals <= lower):
            raise DomainError(f"eigenvalue {float(np.min(evals)):g} outside domain (> {lower:g})")
        vals = np.asarray(f(evals), dtype=float)
    return SelfAdjointOperator(op.frame, (U * vals) @ U.T)


def apply_c(op: SelfAdjointOperator, R: float) -> tuple[SelfAdjointOperator, SelfAdjointOperator]:
    """(c1(op), c2(op)) from the solver applied eigenvalue-wise."""
    evals, U = np.linalg.eigh(op.matrix)
    c1, c2 = solve_c1_c2_array(np.maximum(evals, 0.0), R)
    return SelfAdjointOperator(op.frame, (U * c1) @ U.T), SelfAdjointOperator(op.frame, (U * c2) @ U.T)
