"""Matrix Lie algebra kernel and the catalog of Hermitian symmetric space models."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import block_diag, expm

from .errors import DomainError, UsageError

TOL_ALGEBRA = 1e-10
TOL_NUMERIC = 1e-8

IRREDUCIBLE = ("cp1", "ch1", "cp2", "gr24")


def br(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix commutator ab - ba."""
    return a @ b - b @ a


@dataclass(frozen=True)
class AlgebraElement:
    entries: np.ndarray
    model_id: str

    def check(self, model: "SpaceModel", tol: float = TOL_ALGEBRA) -> None:
        m = self.entries
        if abs(np.trace(m)) >= tol:
            raise DomainError(f"trace {abs(np.trace(m)):.3e} exceeds tolerance")
        J = model.signature
        if np.linalg.norm(m.conj().T @ J + J @ m) >= tol * max(1.0, np.linalg.norm(m)):
            raise DomainError("matrix is not anti-self-adjoint for the model signature")


@dataclass(frozen=True)
class GroupElement:
    entries: np.ndarray
    model_id: str

    def check(self, model: "SpaceModel", tol: float = TOL_ALGEBRA) -> None:
        g = self.entries
        J = model.signature
        scale = max(1.0, np.linalg.norm(g) ** 2)
        if np.linalg.norm(g.conj().T @ J @ g - J) >= tol * scale:
            raise DomainError("group element does not preserve the signature form")
        if abs(np.linalg.det(g) - 1.0) >= tol * scale:
            raise DomainError("group element does not have unit determinant")


@dataclass(frozen=True, eq=False)
class SpaceModel:
    """Calibrated orbit model O_Z inside a matrix Lie algebra.

    ``blocks`` lists (offset, size, factor_name) for each irreducible factor;
    irreducible models have a single block.
    """

    name: str
    n: int
    kappa: int
    rank: int
    base_point: np.ndarray
    metric_scale: float | tuple[float, ...]
    curvature_sign: int
    basis: tuple[np.ndarray, ...]
    signature: np.ndarray
    blocks: tuple[tuple[int, int, str], ...]
    factor_scales: tuple[float, ...]
    factor_basis_slices: tuple[slice, ...]
    _vec_pinv: np.ndarray = field(repr=False)
    killing_gram: np.ndarray = field(repr=False)
    metric_gram: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def dim_p(self) -> int:
        return sum(2 * _factor_half_dim(f) for _, _, f in self.blocks)

    @property
    def is_product(self) -> bool:
        return len(self.blocks) > 1

    @property
    def compact(self) -> bool:
        return self.kappa > 0

    def coords(self, X: np.ndarray) -> np.ndarray:
        vec = np.concatenate([X.real.ravel(), X.imag.ravel()])
        return self._vec_pinv @ vec

    def coords_many(self, Xs) -> np.ndarray:
        """Row-wise coords of a stack of matrices, shape (k, dim)."""
        Xs = np.asarray(Xs)
        flat = Xs.reshape(len(Xs), -1)
        return np.concatenate([flat.real, flat.imag], axis=1) @ self._vec_pinv.T

    def from_coords(self, c: np.ndarray) -> np.ndarray:
        return np.tensordot(c, np.asarray(self.basis), axes=(0, 0))

    def ad_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([self.coords(br(X, e)) for e in self.basis])

    def killing(self, X: np.ndarray, Y: np.ndarray) -> float:
        return float(self.coords(X) @ self.killing_gram @ self.coords(Y))

    def pairing(self, X: np.ndarray, Y: np.ndarray) -> float:
        """Scaled duality <X, Y> = -kappa * c * B(X, Y), the metric on tangent vectors."""
        return float(self.coords(X) @ self.metric_gram @ self.coords(Y))

    def block(self, X: np.ndarray, i: int) -> np.ndarray:
        """Embedding of the i-th diagonal block of X (other blocks zeroed)."""
        off, size, _ = self.blocks[i]
        out = np.zeros_like(X)
        out[off:off + size, off:off + size] = X[off:off + size, off:off + size]
        return out

    def element(self, X: np.ndarray) -> AlgebraElement:
        return AlgebraElement(np.asarray(X, dtype=complex), self.name)


def _factor_half_dim(name: str) -> int:
    return {"cp1": 1, "ch1": 1, "cp2": 2, "gr24": 4}[name]


def su2_generators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a1 = 0.5 * np.array([[1j, 0], [0, -1j]])
    a2 = 0.5 * np.array([[0, 1j], [1j, 0]])
    a3 = 0.5 * np.array([[0, 1], [-1, 0]], dtype=complex)
    return a1, a2, a3


def su11_generators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generators of su(1,1) with [a1,a2] = a3, [a3,a1] = -a2, [a3,a2] = a1.

    Obtained from the real split generators of sl(2,R) by Cayley conjugation,
    so that they are anti-self-adjoint for J = diag(1, -1).
    """
    s1 = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
    s2 = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
    s3 = 0.5 * np.array([[0, 1], [-1, 0]], dtype=complex)
    C = np.array([[1, 1j], [1j, 1]]) / np.sqrt(2)
    Ci = np.linalg.inv(C)
    return tuple(C @ s @ Ci for s in (s1, s2, s3))


def su_basis(n: int) -> list[np.ndarray]:
    basis = []
    for k in range(n - 1):
        d = np.zeros((n, n), dtype=complex)
        d[k, k], d[k + 1, k + 1] = 1j, -1j
        basis.append(d)
    for j in range(n):
        for k in range(j + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[j, k], e[k, j] = 1, -1
            basis.append(e)
            f = np.zeros((n, n), dtype=complex)
            f[j, k], f[k, j] = 1j, 1j
            basis.append(f)
    return basis


def _factor_data(name: str):
    """(basis, base point Z, kappa, signature, calibration vector)."""
    if name == "cp1":
        a1, a2, a3 = su2_generators()
        return [a1, a2, a3], a3, 1, np.eye(2), a1
    if name == "ch1":
        a1, a2, a3 = su11_generators()
        return [a1, a2, a3], a3, -1, np.diag([1.0, -1.0]).astype(complex), a1
    if name == "cp2":
        basis = su_basis(3)
        Z = (1j / 3) * np.diag([1, 1, -2]).astype(complex)
        v = np.zeros((3, 3), dtype=complex)
        v[0, 2], v[2, 0] = 1, -1
        return basis, Z, 1, np.eye(3), v
    if name == "gr24":
        basis = su_basis(4)
        Z = 0.5j * np.diag([1, 1, -1, -1]).astype(complex)
        v = np.zeros((4, 4), dtype=complex)
        v[0, 2], v[2, 0] = 1, -1
        return basis, Z, 1, np.eye(4), v
    raise UsageError(f"unknown model factor '{name}'")


def _vec_pinv(basis) -> np.ndarray:
    M = np.column_stack([np.concatenate([e.real.ravel(), e.imag.ravel()]) for e in basis])
    return np.linalg.pinv(M)


def _killing_gram(basis, pinv) -> np.ndarray:
    def coords(X):
        return pinv @ np.concatenate([X.real.ravel(), X.imag.ravel()])

    ads = [np.column_stack([coords(br(a, e)) for e in basis]) for a in basis]
    d = len(basis)
    K = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            K[i, j] = K[j, i] = np.trace(ads[i] @ ads[j])
    return K


def _raw_jR(Z, v, sign):
    """j R(jv, v) v at Z with R(a, b)c = sign * (-[[a, b], c])."""
    jv = br(Z, v)
    return br(Z, sign * -br(br(jv, v), v))


def _calibrate(basis, Z, kappa, v):
    pinv = _vec_pinv(basis)
    K = _killing_gram(basis, pinv)
    w = _raw_jR(Z, v, 1)
    mu = np.vdot(v.ravel(), w.ravel()).real / np.vdot(v.ravel(), v.ravel()).real
    if np.linalg.norm(w - mu * v) > 1e-10 * max(1.0, abs(mu)):
        raise DomainError("calibration vector is not an eigenvector of the curvature operator")
    cv = pinv @ np.concatenate([v.real.ravel(), v.imag.ravel()])
    Bvv = cv @ K @ cv
    eps = int(np.sign(mu) * kappa)
    c = abs(mu) / (-kappa * Bvv)
    return c, eps, pinv, K


@lru_cache(maxsize=None)
def build_model(name: str) -> SpaceModel:
    """Return the calibrated model for ``name`` (e.g. 'cp1', 'gr24', 'cp1xcp1')."""
    factors = name.split("x") if name not in IRREDUCIBLE else [name]
    if not factors or any(f not in IRREDUCIBLE for f in factors):
        raise UsageError(f"unknown model '{name}'")
    data = [_factor_data(f) for f in factors]
    kappas = {d[2] for d in data}
    if len(kappas) != 1:
        raise UsageError("product factors must share the same type")
    kappa = kappas.pop()

    scales, signs = [], []
    for basis, Z, k, _, v in data:
        c, eps, _, _ = _calibrate(basis, Z, k, v)
        scales.append(c)
        signs.append(eps)
    if len(set(signs)) != 1:
        raise DomainError("factor calibrations disagree on the curvature sign")

    sizes = [d[1].shape[0] for d in data]
    offs = np.cumsum([0] + sizes[:-1])
    n = int(sum(sizes))
    basis, slices = [], []
    for (fb, _, _, _, _), off, size in zip(data, offs, sizes):
        start = len(basis)
        for e in fb:
            E = np.zeros((n, n), dtype=complex)
            E[off:off + size, off:off + size] = e
            basis.append(E)
        slices.append(slice(start, len(basis)))
    Z = block_diag(*[d[1] for d in data]).astype(complex)
    J = block_diag(*[d[3] for d in data]).astype(complex)
    pinv = _vec_pinv(basis)
    K = _killing_gram(basis, pinv)
    scale_diag = np.concatenate([[c] * (s.stop - s.start) for c, s in zip(scales, slices)])
    G = -kappa * np.sqrt(scale_diag)[:, None] * K * np.sqrt(scale_diag)[None, :]
    ranks = {"cp1": 1, "ch1": 1, "cp2": 1, "gr24": 2}
    return SpaceModel(
        name=name,
        n=n,
        kappa=kappa,
        rank=sum(ranks[f] for f in factors),
        base_point=Z,
        metric_scale=scales[0] if len(set(scales)) == 1 else tuple(scales),
        curvature_sign=signs[0],
        basis=tuple(basis),
        signature=J,
        blocks=tuple((int(o), s, f) for o, s, f in zip(offs, sizes, factors)),
        factor_scales=tuple(scales),
        factor_basis_slices=tuple(slices),
        _vec_pinv=pinv,
        killing_gram=K,
        metric_gram=G,
    )


def _same(a: AlgebraElement, b: AlgebraElement) -> None:
    if a.model_id != b.model_id:
        raise UsageError(f"model mismatch: {a.model_id} vs {b.model_id}")


def bracket(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    _same(a, b)
    return AlgebraElement(br(a.entries, b.entries), a.model_id)


def killing_form(a: AlgebraElement, b: AlgebraElement) -> float:
    _same(a, b)
    return build_model(a.model_id).killing(a.entries, b.entries)


def group_exp(a: AlgebraElement, t: float = 1.0) -> GroupElement:
    if not np.all(np.isfinite(a.entries)) or not np.isfinite(t):
        raise DomainError("non-finite input to the exponential")
    return GroupElement(expm(t * a.entries), a.model_id)


def Ad(g: np.ndarray, X: np.ndarray) -> np.ndarray:
    return g @ X @ np.linalg.inv(g)


def adjoint(g: GroupElement, a: AlgebraElement) -> AlgebraElement:
    if g.model_id != a.model_id:
        raise UsageError(f"model mismatch: {g.model_id} vs {a.model_id}")
    if abs(np.linalg.det(g.entries)) < 1e-14:
        raise DomainError("singular group element")
    return AlgebraElement(Ad(g.entries, a.entries), a.model_id)


def cartan_split(model: SpaceModel, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a into its ker(ad_Z) part and its (-1)-eigenspace of ad_Z^2 part."""
    Z = model.base_point
    p = -br(Z, br(Z, a))
    return a - p, p


def p_basis(model: SpaceModel) -> list[np.ndarray]:
    return [e for e in model.basis if np.linalg.norm(cartan_split(model, e)[0]) < TOL_ALGEBRA]


def k_basis(model: SpaceModel) -> list[np.ndarray]:
    return [e for e in model.basis if np.linalg.norm(cartan_split(model, e)[1]) < TOL_ALGEBRA]
