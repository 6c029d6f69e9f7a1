import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import COMPACT
from hsslab import dynamics as dyn
from hsslab.errors import DomainError, NumericalError, UsageError
from hsslab.lie_models import br, build_model
from hsslab.orbit_geometry import tangent_frame
from hsslab.sampling import point_rng, random_tm_point
from hsslab.symplecto_maps import MapId, apply_map
from hsslab.tangent_forms import curve_point, omega_sigma


def _unit(name):
    m = build_model(name)
    x = m.base_point
    return m, x, tangent_frame(m, x)[0]


def test_magnetic_field_is_lorentz_rotation():
    m, x, e = _unit("cp1")
    h, u = dyn.magnetic_field(m, x, 0.3 * e, 2.0)
    assert np.allclose(h, 0.3 * e)
    assert np.allclose(u, 0.6 * br(x, e))
    assert dyn.energy(m, 0.3 * e) == pytest.approx(0.045)


def test_zero_velocity_is_stationary():
    m, x, e = _unit("cp2")
    rec = dyn.integrate_flow(m, x, np.zeros_like(x), 1.0, 0.01, 50)
    assert np.allclose(rec.xs[-1], x) and rec.max_energy_drift == 0.0


@pytest.mark.parametrize("name,kappa", [("cp1", 1.0), ("ch1", -1.0)])
@pytest.mark.parametrize("r", [0.3, 0.5, 0.8])
def test_rank_one_magnetic_period(name, kappa, r):
    # constant curvature kappa, field strength one: circles of period 2 pi / sqrt(1 + kappa r^2)
    m, x, e = _unit(name)
    verdict, period = dyn.classify_trajectory(m, x, r * e, 1.0, 0.01, t_max=12.0)
    assert verdict == "periodic"
    assert period == pytest.approx(2 * math.pi / math.sqrt(1 + kappa * r * r), abs=1e-6)


def test_untwisted_geodesic_period():
    m, x, e = _unit("cp1")
    verdict, period = dyn.classify_trajectory(m, x, e, 0.0, 0.01, t_max=8.0)
    assert verdict == "periodic" and period == pytest.approx(2 * math.pi, abs=1e-6)


def test_supercritical_speed_escapes():
    m, x, e = _unit("ch1")
    verdict, period, (a, b) = dyn.periodicity_verdict(m, x, 1.5 * e, 1.0, 0.01)
    assert verdict == "escaping" and period is None
    assert a[0] == b[0]


@settings(max_examples=8, deadline=None)
@given(st.sampled_from(["cp1", "ch1", "cp2", "cp1xcp1"]), st.integers(0, 10_000))
def test_energy_and_orbit_are_conserved(name, seed):
    m = build_model(name)
    x, v, _ = random_tm_point(m, point_rng(seed, 0), 0.5, 0.8 if m.kappa < 0 else None)
    rec = dyn.integrate_flow(m, x, v, 1.3, 1e-3, 1000, sample_every=100)
    assert rec.max_energy_drift < 1e-8
    assert np.max(rec.drift) < 1e-10


def test_drift_abort():
    m, x, e = _unit("cp1")
    with pytest.raises(NumericalError):
        dyn.integrate_flow(m, x, 0.5 * e, 1.0, 0.5, 10, drift_tol=0.0)


def test_flow_argument_checks():
    m, x, e = _unit("cp1")
    with pytest.raises(UsageError):
        dyn.integrate_flow(m, x, e, 1.0, -0.1, 10)
    with pytest.raises(DomainError):
        dyn.integrate_flow(m, x, x, 1.0, 0.1, 10)


def test_csv_layout(tmp_path):
    m, x, e = _unit("cp1")
    rec = dyn.integrate_flow(m, x, 0.5 * e, 1.0, 0.01, 20, sample_every=5)
    path = tmp_path / "t.csv"
    rec.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0][0] == "t" and rows[0][-2:] == ["E", "drift"]
    assert len(rows[0]) == 1 + 2 * 2 * 4 + 2
    assert len(rows) == 1 + 5
    assert float(rows[-1][0]) == pytest.approx(0.2)
    assert len(rec.states()) == 5


# circle action on the noncompact side

def test_polydisc_hamiltonian_formula():
    m = build_model("ch1xch1")
    x = m.base_point
    fr = tangent_frame(m, x)
    norms = (0.4, 0.7)
    # one unit vector from each factor
    v = np.zeros_like(x)
    for i, r in enumerate(norms):
        e = next(f for f in fr if np.linalg.norm(m.block(f, i)) > 0.5 * np.linalg.norm(f))
        v = v + r * e
    s = 1.25
    ref = sum(2 * math.pi * (s - math.sqrt(s * s - r * r)) for r in norms)
    assert dyn.circle_hamiltonian(m, x, v, s) == pytest.approx(ref, abs=1e-12)


def test_hamiltonian_vanishes_on_zero_section():
    m, x, _ = _unit("ch1")
    assert dyn.circle_hamiltonian(m, x, np.zeros_like(x), 1.0) == 0.0


def test_hamiltonian_domain():
    m, x, e = _unit("ch1")
    with pytest.raises(DomainError):
        dyn.circle_hamiltonian(m, x, 1.01 * e, 1.0)
    with pytest.raises(DomainError):
        dyn.circle_hamiltonian(m, x, 0.5 * e, 0.9)
    assert math.isfinite(dyn.circle_hamiltonian(m, x, 1.05 * e, 1.25, check_domain=False))
    with pytest.raises(UsageError):
        dyn.circle_hamiltonian(build_model("cp1"), *_unit("cp1")[1:], 1.0)


@pytest.mark.parametrize("name", ["ch1", "ch1xch1"])
def test_intertwining_with_fibrewise_map(name):
    m = build_model(name)
    for i in range(5):
        x, v, _ = random_tm_point(m, point_rng(40, i), 0.5, 0.8)
        _, q = apply_map(m, MapId("composite"), x, v)
        assert dyn.circle_hamiltonian(m, x, v, 1.0) == pytest.approx(math.pi * m.pairing(q, q), abs=1e-9)


@pytest.mark.parametrize("name", ["ch1", "ch1xch1"])
def test_field_satisfies_dH_convention(name):
    s = 1.25
    m = build_model(name)
    x, v, frame = random_tm_point(m, point_rng(41, 0), 0.5, 0.8)
    hh, uu = dyn.circle_field(m, x, v, s)
    zero = np.zeros_like(x)
    st_ = 1e-5
    for e in frame:
        for h, u in ((e, zero), (zero, e)):
            hp = dyn.circle_hamiltonian(m, *curve_point(x, v, h, u, st_), s)
            hm = dyn.circle_hamiltonian(m, *curve_point(x, v, h, u, -st_), s)
            assert (hp - hm) / (2 * st_) == pytest.approx(omega_sigma(m, x, v, hh, uu, h, u, s), abs=1e-6)


@pytest.mark.parametrize("name", ["ch1", "ch1xch1"])
def test_circle_flow_has_period_one(name):
    m = build_model(name)
    x, v, _ = random_tm_point(m, point_rng(42, 0), 0.5, 0.8)
    X, V = dyn.integrate_circle_flow(m, x, v, 1.25)
    assert np.linalg.norm(X - x) + np.linalg.norm(V - v) < 1e-5
    Xh, _ = dyn.integrate_circle_flow(m, x, v, 1.25, t=0.5, steps=200)
    assert np.linalg.norm(Xh - x) > 1e-3


def test_field_is_blockwise_on_products():
    m = build_model("ch1xch1")
    x, v, _ = random_tm_point(m, point_rng(43, 0), 0.5, 0.8)
    hh, uu = dyn.circle_field(m, x, v, 1.25)
    for i, (o, sz, f) in enumerate(m.blocks):
        fac = build_model(f)
        hb, ub = dyn.circle_field(fac, x[o:o + sz, o:o + sz], v[o:o + sz, o:o + sz], 1.25)
        assert np.allclose(hh[o:o + sz, o:o + sz], hb, atol=1e-12)
        assert np.allclose(uu[o:o + sz, o:o + sz], ub, atol=1e-12)


# height function on the compact side

@pytest.mark.parametrize("name", COMPACT)
def test_height_flow_has_period_one(name):
    m = build_model(name)
    x, _, _ = random_tm_point(m, point_rng(44, 0))
    assert np.linalg.norm(dyn.integrate_nu_flow(m, x) - x) < 1e-6


@pytest.mark.parametrize("name,values,mult", [
    ("cp1", (-2 * math.pi, 2 * math.pi), (1, 1)),
    ("cp1xcp1", (-4 * math.pi, 0.0, 4 * math.pi), (1, 2, 1)),
    ("gr24", (-4 * math.pi, 0.0, 4 * math.pi), (1, 4, 1)),
    ("cp2", (-4 * math.pi / 3, 8 * math.pi / 3), (2, 1)),
])
def test_critical_values(name, values, mult):
    cv = dyn.critical_values(build_model(name))
    assert cv.values == pytest.approx(values, abs=1e-12)
    assert cv.multiplicities == mult
    assert cv.osc == pytest.approx(4 * math.pi * build_model(name).rank, abs=1e-12)


def test_fixed_points_are_zeros_of_the_field():
    m = build_model("gr24")
    for X in dyn.fixed_points(m):
        assert np.linalg.norm(dyn.nu_field(m, X)) < 1e-12


def test_height_only_on_compact_models():
    m = build_model("ch1")
    with pytest.raises(UsageError):
        dyn.nu_height(m, m.base_point)
    with pytest.raises(UsageError):
        dyn.critical_values(m)


# Mane action of the circle family

@pytest.mark.parametrize("k,radius,expected", [(0.5, 5.0, 2 * math.pi * (1 - math.exp(-5.0))),
                                               (0.32, 5.0, 2 * math.pi * (0.8 * math.sinh(5.0) - math.cosh(5.0) + 1))])
def test_mane_examples(k, radius, expected):
    got = dyn.mane_action(build_model("ch1"), k, radius)
    assert got == pytest.approx(expected, rel=1e-9)
    if k == 0.32:
        assert round(got, 1) == -87.0


@pytest.mark.parametrize("name", ["ch1", "ch1xch1"])
def test_mane_quadrature_matches_closed_form(name):
    m = build_model(name)
    for k in (0.2, 1.0):
        for radius in (0.3, 3.0):
            ref = dyn.mane_closed_form(m.rank, k, radius)
            assert dyn.mane_action(m, k, radius) == pytest.approx(ref, rel=1e-9)


def test_mane_critical_value_sign_change():
    for name in ("ch1", "ch1xch1"):
        m = build_model(name)
        c = dyn.mane_critical_value(m)
        assert c == m.rank / 2
        # above c the action stays positive for large circles, below it goes negative
        assert dyn.mane_closed_form(m.rank, 1.01 * c, 12.0) > 0
        assert dyn.mane_closed_form(m.rank, 0.99 * c, 12.0) < 0
    with pytest.raises(DomainError):
        dyn.mane_action(build_model("ch1"), 0.0, 1.0)
    with pytest.raises(UsageError):
        dyn.mane_action(build_model("cp1"), 1.0, 1.0)
