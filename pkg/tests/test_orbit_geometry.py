import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ALL_MODELS
from hsslab.lie_models import br, build_model, su11_generators, su2_generators
from hsslab.orbit_geometry import (
    complex_structure,
    curvature,
    curvature_operator,
    frame_coords,
    from_frame,
    geodesic_exp,
    is_regular,
    kahler_eval,
    orbit_residual,
    parallel_transport,
    polyfactors,
    sectional_curvature,
    tangent_frame,
    tangent_residual,
)
from hsslab.sampling import point_rng, random_base, random_tangent

seeds = st.integers(0, 100_000)


def test_frame_at_cp1_base_point():
    m = build_model("cp1")
    a1, a2, _ = su2_generators()
    fr = tangent_frame(m, m.base_point)
    assert len(fr) == 2
    span = np.array([a1.ravel(), a2.ravel()]).T
    for e in fr:
        coef = np.linalg.lstsq(span, e.ravel(), rcond=None)[0]
        assert np.linalg.norm(span @ coef - e.ravel()) < 1e-12


@pytest.mark.parametrize("name,size", [("cp1", 2), ("cp2", 4), ("gr24", 8), ("ch1xch1", 4)])
def test_frame_is_orthonormal(name, size):
    m = build_model(name)
    x = random_base(m, point_rng(3, 0))
    fr = tangent_frame(m, x)
    assert len(fr) == size
    G = np.array([[m.pairing(a, b) for b in fr] for a in fr])
    assert np.allclose(G, np.eye(size), atol=1e-10)


def test_kahler_values_at_base_point():
    m = build_model("cp1")
    a1, a2, a3 = su2_generators()
    g, s = kahler_eval(m, a3, a1, a1)
    assert g == pytest.approx(1.0) and s == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(complex_structure(a3, a1), -a2)


@pytest.mark.parametrize("name", ALL_MODELS)
def test_sigma_matches_killing_formula(name):
    m = build_model(name)
    c = m.factor_scales[0]
    worst = 0.0
    for i in range(20):
        rng = point_rng(5, i)
        x = random_base(m, rng)
        v, w = random_tangent(m, x, rng), random_tangent(m, x, rng)
        ref = -m.kappa * c * m.killing(x, br(v, w))
        worst = max(worst, abs(kahler_eval(m, x, v, w)[1] - ref))
    assert worst < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(ALL_MODELS), seeds)
def test_j_is_an_orthogonal_complex_structure(name, seed):
    m = build_model(name)
    rng = point_rng(seed, 0)
    x = random_base(m, rng)
    v, w = random_tangent(m, x, rng), random_tangent(m, x, rng)
    assert np.linalg.norm(br(x, br(x, v)) + v) < 1e-10 * max(1, np.linalg.norm(v))
    assert abs(m.pairing(br(x, v), w) + m.pairing(v, br(x, w))) < 1e-10
    assert tangent_residual(m, x, br(x, v)) < 1e-10


def test_rank_one_geodesic_closed_form():
    a1, a2, a3 = su2_generators()
    for t in (0.0, 0.4, np.pi / 2, 2.0):
        gamma = geodesic_exp(a3, -a2, t)
        ref = 0.5 * np.array([[0, np.exp(-1j * t)], [-np.exp(1j * t), 0]])
        assert np.allclose(gamma, ref, atol=1e-12)
    assert np.allclose(geodesic_exp(a3, np.zeros_like(a3), 3.0), a3)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(ALL_MODELS), seeds, st.floats(-2, 2))
def test_geodesics_and_transport_stay_on_orbit(name, seed, t):
    m = build_model(name)
    rng = point_rng(seed, 1)
    x = random_base(m, rng)
    w, u, u2 = (random_tangent(m, x, rng) for _ in range(3))
    y = geodesic_exp(x, w, t)
    assert orbit_residual(m, y) < 1e-10
    pu, pu2 = parallel_transport(x, w, u, t), parallel_transport(x, w, u2, t)
    assert tangent_residual(m, y, pu) < 1e-9 * max(1, np.linalg.norm(pu))
    assert m.pairing(pu, pu2) == pytest.approx(m.pairing(u, u2), abs=1e-10 * max(1, abs(m.pairing(u, u2))))


def _rk4_transport(x, w, u, n=2000):
    """Ambient ODE du/dt = [[gamma, gamma'], u] along gamma(t) = geodesic_exp(x, w, t)."""
    h = 1.0 / n

    def f(t, uu):
        return br(br(geodesic_exp(x, w, t), parallel_transport(x, w, w, t)), uu)

    t = 0.0
    for _ in range(n):
        k1 = f(t, u)
        k2 = f(t + h / 2, u + h / 2 * k1)
        k3 = f(t + h / 2, u + h / 2 * k2)
        k4 = f(t + h, u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return u


@pytest.mark.parametrize("name", ["cp1", "ch1"])
def test_transport_matches_ode_oracle(name):
    m = build_model(name)
    rng = point_rng(9, 0)
    x = random_base(m, rng)
    w, u = random_tangent(m, x, rng), random_tangent(m, x, rng)
    assert np.linalg.norm(br(br(x, w), x) - w) < 1e-10
    assert np.linalg.norm(parallel_transport(x, w, u, 1.0) - _rk4_transport(x, w, u, 400)) < 1e-6


def test_complex_structure_is_parallel():
    # j commutes with transport, so the Nijenhuis tensor and the torsion term vanish
    for name in ("cp2", "gr24", "ch1"):
        m = build_model(name)
        rng = point_rng(11, 0)
        x = random_base(m, rng)
        w, u = random_tangent(m, x, rng), random_tangent(m, x, rng)
        y = geodesic_exp(x, w, 0.7)
        lhs = parallel_transport(x, w, br(x, u), 0.7)
        rhs = br(y, parallel_transport(x, w, u, 0.7))
        assert np.linalg.norm(lhs - rhs) < 1e-10


@pytest.mark.parametrize("name", ALL_MODELS)
def test_curvature_symmetries(name):
    m = build_model(name)
    rng = point_rng(13, 0)
    x = random_base(m, rng)
    a, b, c, d = (random_tangent(m, x, rng) for _ in range(4))
    assert np.linalg.norm(curvature(m, a, a, c)) < 1e-12
    assert abs(m.pairing(curvature(m, a, b, c), d) + m.pairing(curvature(m, a, b, d), c)) < 1e-10


def test_rank_one_sectional_curvature_calibrated():
    for name, gens, k in (("cp1", su2_generators, 1.0), ("ch1", su11_generators, -1.0)):
        m = build_model(name)
        a1, a2, _ = gens()
        assert sectional_curvature(m, a1, a2) == pytest.approx(k, abs=1e-12)


@pytest.mark.parametrize("name,sign", [("cp1", 1), ("ch1", -1)])
def test_curvature_operator_rank_one(name, sign):
    m = build_model(name)
    x = m.base_point
    fr = tangent_frame(m, x)
    assert curvature_operator(m, x, np.zeros_like(x)).u_norm() == 0.0
    r = 0.7
    op = curvature_operator(m, x, r * fr[0])
    assert np.allclose(op.spectrum(), [sign * r * r] * 2, atol=1e-12)
    assert op.symmetry_residual() < 1e-12
    if sign < 0:
        assert op.in_U(1.0)
        assert not curvature_operator(m, x, 1.01 * fr[0]).in_U(1.0)


def test_polyfactors_of_product():
    m = build_model("cp1xcp1")
    x = random_base(m, point_rng(17, 0))
    v = random_tangent(m, x, point_rng(17, 1))
    parts = polyfactors(m, x, v)
    assert len(parts) == 2
    assert np.allclose(sum(p.component for p in parts), v)
    for i, p in enumerate(parts):
        vi = m.block(v, i)
        assert p.eigenvalue == pytest.approx(m.pairing(vi, vi))


def _gr24_tangent(s1, s2):
    """Tangent vector at the base point with p-block singular values (s1, s2)."""
    m = build_model("gr24")
    Z = m.base_point
    B = np.array([[s1, 0], [0, s2]], dtype=complex)
    raw = np.zeros((4, 4), dtype=complex)
    raw[:2, 2:] = B
    raw[2:, :2] = -B.conj().T
    return m, Z, raw / np.sqrt(m.pairing(raw, raw)) * np.sqrt(s1 ** 2 + s2 ** 2)


def test_gr24_curvature_spectrum_matches_svd():
    m, Z, v = _gr24_tangent(0.9, 0.4)
    op = curvature_operator(m, Z, v)
    blk = v[:2, 2:]
    sv = np.linalg.svd(blk, compute_uv=False)
    sv = sv / np.sqrt(np.sum(sv ** 2)) * np.sqrt(m.pairing(v, v))
    # polysphere directions carry s_i^2; the mixed directions carry their mean
    expected = np.repeat([sv[1] ** 2, (sv[0] ** 2 + sv[1] ** 2) / 2, sv[0] ** 2], [2, 4, 2])
    assert np.allclose(op.spectrum(), expected, atol=1e-12)
    fac = polyfactors(m, Z, v)
    assert sorted(f.eigenvalue for f in fac) == pytest.approx(sorted(sv ** 2))
    assert np.allclose(sum(f.component for f in fac), v, atol=1e-12)


def test_gr24_regularity():
    m, Z, v = _gr24_tangent(0.9, 0.4)
    assert is_regular(m, Z, v)
    _, _, single = _gr24_tangent(1.0, 0.0)
    assert not is_regular(m, Z, single)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(ALL_MODELS), seeds)
def test_frame_coordinates_roundtrip(name, seed):
    m = build_model(name)
    rng = point_rng(seed, 2)
    x = random_base(m, rng)
    fr = tangent_frame(m, x)
    c = rng.normal(size=len(fr))
    assert np.allclose(frame_coords(m, fr, from_frame(fr, c)), c, atol=1e-10)
