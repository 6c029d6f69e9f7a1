import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ALL_MODELS, NONCOMPACT
from hsslab.errors import DomainError, UsageError
from hsslab.lie_models import br, build_model, su11_generators, su2_generators
from hsslab.moment_maps import MomentId, defining_residual, moment, mu_K, triangle_residual
from hsslab.sampling import point_rng, random_group_element, random_tm_point
from hsslab.symplecto_maps import MapId
from hsslab.tangent_forms import FormId

TAGS = [MomentId("mu_lambda"), MomentId("mu_eta"), MomentId("mu_tau"), MomentId("mu_inclusion"),
        MomentId("mu_twisted", s=1.3), MomentId("mu_K"), MomentId("mu_fc", s=0.7)]


def _tm(name, seed, unorm_max=None):
    m = build_model(name)
    if unorm_max is None and m.kappa < 0:
        unorm_max = 0.8
    return (m,) + random_tm_point(m, point_rng(seed, 0), 0.5, unorm_max)


def test_rank_one_values():
    m = build_model("cp1")
    a1, a2, a3 = su2_generators()
    r = 0.6
    assert np.allclose(moment(m, MomentId("mu_lambda"), a3, r * a1), -r * a2)
    assert np.allclose(moment(m, MomentId("mu_twisted", s=1.0), a3, r * a1), a3 - r * a2)


@pytest.mark.parametrize("name,gens,kappa,radii", [
    ("cp1", su2_generators, 1, (0.1, 0.5, 0.9, 2.0, 10.0)), ("ch1", su11_generators, -1, (0.1, 0.5, 0.9)),
])
def test_mu_K_rank_one(name, gens, kappa, radii):
    m = build_model(name)
    a1, _, a3 = gens()
    for r in radii:
        assert np.linalg.norm(mu_K(m, a3, r * a1) - math.sqrt(1 + kappa * r * r) * a3) < 1e-10


def test_mu_K_domain():
    m = build_model("ch1")
    a1, _, a3 = su11_generators()
    with pytest.raises(DomainError):
        mu_K(m, a3, 1.05 * a1)


@pytest.mark.parametrize("r", [0.1, 1.0, 10.0])
def test_rank_one_twist_triangle(r):
    m = build_model("cp1")
    a1, _, a3 = su2_generators()
    assert triangle_residual(m, MapId("twist_to_hk"), a3, r * a1) < 1e-10


def test_rank_one_fibrewise_triangle():
    m = build_model("ch1")
    a1, _, a3 = su11_generators()
    for r in (0.2, 0.6, 0.95):
        assert triangle_residual(m, MapId("hk_to_fc"), a3, r * a1) < 1e-10


def test_gr24_diag_triangle():
    m = build_model("gr24")
    worst = 0.0
    for i in range(100):
        x, v, _ = random_tm_point(m, point_rng(20, i), 0.5, unorm_max=0.9 * 4 * 0.5)
        worst = max(worst, triangle_residual(m, MapId("diag", R=0.5), x, v))
    assert worst < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(ALL_MODELS), st.integers(0, 10_000))
def test_moment_equivariance(name, seed):
    m, x, v, _ = _tm(name, seed)
    g = random_group_element(m, point_rng(seed, 1), 0.4)
    gi = np.linalg.inv(g)
    for mid in TAGS:
        lhs = moment(m, mid, g @ x @ gi, g @ v @ gi)
        rhs = g @ moment(m, mid, x, v) @ gi
        assert np.linalg.norm(lhs - rhs) < 1e-9 * max(1.0, np.linalg.norm(rhs))


@pytest.mark.parametrize("name", ALL_MODELS)
@pytest.mark.parametrize("mu,form", [
    (MomentId("mu_twisted", s=1.0), FormId("omega_sigma", s=1.0)),
    (MomentId("mu_twisted", s=-0.4), FormId("omega_sigma", s=-0.4)),
    (MomentId("mu_fc", s=1.0), FormId("omega_fc", s=1.0)),
    (MomentId("mu_fc", s=2.5), FormId("omega_fc", s=2.5)),
    # lambda enters the forms with a minus sign, so mu_lambda is the moment of -dlambda = omega_sigma(0)
    (MomentId("mu_lambda"), FormId("omega_sigma", s=0.0)),
    (MomentId("mu_eta"), FormId("deta")),
])
def test_defining_property(name, mu, form):
    m, x, v, _ = _tm(name, 30)
    a = m.from_coords(point_rng(30, 1).normal(size=m.dim))
    assert defining_residual(m, mu, form, x, v, a) < 1e-6 * max(1.0, np.linalg.norm(a))


def test_tau_moment_sign():
    # with a^# = ([a, x], [a, v]) the fibrewise moment is -mu_tau / 2 + s x for s sigma - d tau / 2
    m, x, v, _ = _tm("cp2", 31)
    a = m.from_coords(point_rng(31, 1).normal(size=m.dim))
    assert defining_residual(m, MomentId("mu_fc", s=0.0), FormId("omega_fc", s=0.0), x, v, a) < 1e-6


def test_tau_moment_rotation_invariant():
    m, x, v, _ = _tm("gr24", 32)
    for th in (0.3, 1.7):
        rv = math.cos(th) * v + math.sin(th) * br(x, v)
        assert np.allclose(moment(m, MomentId("mu_tau"), x, rv), moment(m, MomentId("mu_tau"), x, v), atol=1e-12)


@pytest.mark.parametrize("name", ["cp1xcp1", "ch1xch1"])
def test_mu_K_is_blockwise_on_products(name):
    m, x, v, _ = _tm(name, 33)
    full = mu_K(m, x, v)
    for i, (o, s, f) in enumerate(m.blocks):
        fac = build_model(f)
        blk = mu_K(fac, x[o:o + s, o:o + s], v[o:o + s, o:o + s])
        assert np.linalg.norm(full[o:o + s, o:o + s] - blk) < 1e-10


def test_moment_id_validation():
    with pytest.raises(UsageError):
        MomentId("mu_twisted")
    with pytest.raises(UsageError):
        MomentId("mu_product")
    with pytest.raises(UsageError):
        MomentId("mu_unknown")


@pytest.mark.parametrize("name", NONCOMPACT)
def test_noncompact_triangles(name):
    worst = 0.0
    for i in range(20):
        m, x, v, _ = _tm(name, 500 + i)
        for tag in ("twist_to_hk", "hk_to_fc", "composite"):
            worst = max(worst, triangle_residual(m, MapId(tag), x, v))
    assert worst < 1e-9
