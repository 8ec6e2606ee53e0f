import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hullopt.criteria import (
    Criteria,
    PenaltyConfig,
    QoiVector,
    YieldLimits,
    check_buckling,
    check_yield,
    compute_qois,
    critical_stresses,
    mass,
    mass_gap,
    penalized_mass,
    vcg,
    write_qoi_csv,
)
from hullopt.errors import ConfigError, DataError, DomainError
from hullopt.hull_model import StressSnapshot

from conftest import make_space


def tensor(sx=0.0, sy=0.0, sz=0.0, txy=0.0, txz=0.0, tyz=0.0):
    return np.array([sx, sy, sz, txy, txz, tyz])


def vm_oracle(s):
    sx, sy, sz, txy, txz, tyz = s
    return math.sqrt(0.5 * ((sx - sy) ** 2 + (sy - sz) ** 2 + (sz - sx) ** 2) + 3 * (txy**2 + txz**2 + tyz**2))


# -- yield -------------------------------------------------------------------------


def test_allowables_are_ah36():
    lim = YieldLimits()
    assert (lim.direct, lim.shear, lim.von_mises) == (245.0, 153.0, 307.0)


def test_direct_stress_above_allowable_yields():
    assert check_yield(tensor(sx=250.0))


def test_zero_stress_does_not_yield():
    assert not check_yield(tensor())


def test_pure_shear_yields_through_von_mises():
    s = tensor(txy=180.0)
    assert vm_oracle(s) == pytest.approx(311.769, abs=1e-3)
    assert check_yield(s)
    # 180 is above the shear allowable too; a von Mises-only case:
    assert check_yield(tensor(sx=200.0, sy=-200.0)) == (vm_oracle(tensor(sx=200.0, sy=-200.0)) > 307.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-400, 400), min_size=6, max_size=6), st.integers(0, 5), st.floats(0, 200))
def test_yield_is_monotone_in_each_absolute_component(s, k, extra):
    s = np.array(s)
    bigger = s.copy()
    bigger[k] = np.sign(s[k] or 1.0) * (abs(s[k]) + extra)
    if check_yield(s):
        assert check_yield(bigger)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-400, 400), min_size=6, max_size=6))
def test_yield_matches_scalar_oracle(s):
    s = np.array(s)
    expected = (np.abs(s[:3]).max() > 245) or (np.abs(s[3:]).max() > 153) or (vm_oracle(s) > 307)
    assert check_yield(s) == expected


def test_limits_are_configurable():
    assert not check_yield(tensor(sx=250.0), YieldLimits(direct=300.0, von_mises=400.0))


# -- buckling ------------------------------------------------------------------------


def test_critical_stress_hand_value():
    sig, _ = critical_stresses(10.0, 0.7, 2.5)
    expected = 4 * math.pi**2 * 206000 / (12 * (1 - 0.3**2)) * (10 / 700) ** 2
    assert sig == pytest.approx(expected, rel=1e-12)
    assert sig == pytest.approx(152.0, abs=0.1)


def test_compressive_stress_buckles():
    eta = check_buckling(tensor(sx=-160.0), 10.0, 0.7, 2.5)
    assert eta[0] == pytest.approx(160.0 / 152.0, rel=2e-3)
    assert eta.max() > 1.0


def test_tension_never_buckles():
    assert not np.any(check_buckling(tensor(sx=200.0), 10.0, 0.7, 2.5))


def test_shear_usage_uses_aspect_ratio():
    b, a = 0.7, 2.5
    base = math.pi**2 * 206000 / (12 * 0.91) * (10 / 700) ** 2
    tau_cr = (5.34 + 4 * (b / a) ** 2) * base
    eta = check_buckling(tensor(txy=-50.0), 10.0, b, a)
    assert eta[2] == pytest.approx(50.0 / tau_cr, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-300, 300), min_size=6, max_size=6), st.floats(1, 30))
def test_doubling_thickness_quarters_usage(s, t):
    s = np.array(s)
    e1 = check_buckling(s, t, 0.7, 2.5)
    e2 = check_buckling(s, 2 * t, 0.7, 2.5)
    np.testing.assert_allclose(e2, e1 / 4.0, rtol=1e-12, atol=1e-15)


def test_non_positive_geometry_is_domain_error():
    with pytest.raises(DomainError):
        check_buckling(tensor(sx=-1.0), 0.0, 0.7, 2.5)
    with pytest.raises(DomainError):
        check_buckling(tensor(sx=-1.0), 10.0, -0.7, 2.5)


# -- QoIs and the objective -------------------------------------------------------------


def test_mass_hand_example():
    sp = make_space([[10.0], [5.0]], dens=[1.0, 2.0])
    pen = PenaltyConfig(m_fixed=100.0, m_bar=0.05)
    assert float(mass([10.0, 5.0], sp, pen, 10)) == pytest.approx(120.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(5, 30), min_size=3, max_size=3))
def test_vcg_constant_when_all_vcgs_equal(x):
    sp = make_space([[5.0, 30.0]] * 3, dens=[1.0, 2.0, 3.0], vcgs=[10.0, 10.0, 10.0])
    pen = PenaltyConfig(m_fixed=50.0, vcg_fixed=10.0)
    assert float(vcg(x, sp, pen)) == pytest.approx(10.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(5, 30), min_size=3, max_size=3), st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.integers(0, 50))
def test_mass_is_affine_at_fixed_counts(x, dx, n_b):
    sp = make_space([[1.0, 40.0]] * 3, dens=[1.5, 2.0, 0.5])
    pen = PenaltyConfig(m_fixed=50.0, m_bar=0.1)
    x, dx = np.array(x), np.array(dx)
    diff = float(mass(x + dx, sp, pen, n_b)) - float(mass(x, sp, pen, n_b))
    assert diff == pytest.approx(float(sp.d @ dx), abs=1e-9)


def test_penalty_inactive_within_thresholds():
    pen = PenaltyConfig(c_y=1.0, c_b=1.0, y_crit=10, b_crit=10)
    assert penalized_mass(QoiVector(10, 3, 0.0, 120.5, 5.0), pen) == 120.5


def test_penalty_hand_example():
    pen = PenaltyConfig(c_y=0.01, c_b=1.0, y_crit=200, b_crit=50)
    assert penalized_mass(QoiVector(210, 10, 0.0, 120.5, 5.0), pen) == pytest.approx(121.5)


def test_penalty_is_quadratic():
    pen = PenaltyConfig(c_y=0.3, c_b=0.0, y_crit=5)
    p1 = penalized_mass(QoiVector(8, 0, 0.0, 0.0, 0.0), pen)
    p2 = penalized_mass(QoiVector(11, 0, 0.0, 0.0, 0.0), pen)
    assert p2 == pytest.approx(4 * p1)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 500), st.integers(0, 500), st.floats(1, 1000), st.integers(0, 300), st.integers(0, 300))
def test_penalized_mass_bounds_mass(n_y, n_b, m, yc, bc):
    pen = PenaltyConfig(c_y=0.2, c_b=0.05, y_crit=yc, b_crit=bc)
    f = penalized_mass(QoiVector(n_y, n_b, 0.0, m, 1.0), pen)
    assert f >= m
    assert (f == m) == (n_y <= yc and n_b <= bc)


def test_deflection_term_only_when_configured():
    q = QoiVector(0, 0, 12.0, 100.0, 1.0)
    assert penalized_mass(q, PenaltyConfig()) == 100.0
    assert penalized_mass(q, PenaltyConfig(deflection_crit=10.0, c_d=0.5)) == pytest.approx(102.0)


def test_negative_penalty_weights_rejected():
    with pytest.raises(ConfigError):
        PenaltyConfig(c_y=-1.0)


def test_mass_gap_examples():
    sp = make_space([[10.0, 12.0, 13.0], [20.0, 23.0]], dens=[1.0, 1.0])
    # d . x_LB = 30; scale dens so that it is 100
    sp100 = make_space([[10.0, 12.0, 13.0], [90.0, 93.0]], dens=[1.0, 1.0])
    pen = PenaltyConfig()
    q0 = QoiVector(0, 0, 0.0, 0.0, 0.0)
    assert mass_gap(sp.lower, q0, pen, sp.lower, sp) == 0.0
    assert mass_gap([12.0, 93.0], q0, pen, sp100.lower, sp100) == pytest.approx(5.0)


def test_mass_gap_at_midship_reference_scale():
    # d . x_LB = 975.55 t: one extra tonne of plating is a 0.1025 % gap
    sp = make_space([[1.0, 2.0]], dens=[975.55])
    gap = mass_gap([1.0 + 1.0 / 975.55], QoiVector(0, 0, 0.0, 0.0, 0.0), PenaltyConfig(m_fixed=1108.21),
                   sp.lower, sp)
    assert gap == pytest.approx(100.0 / 975.55, rel=1e-9)


def test_mass_gap_zero_denominator():
    sp = make_space([[1.0, 2.0]])
    with pytest.raises(DomainError):
        mass_gap([1.0], QoiVector(0, 0, 0.0, 0.0, 0.0), PenaltyConfig(), [0.0], sp)


def test_zero_load_snapshot_has_no_failures(demo_model, demo_pen, demo_criteria):
    sp = demo_model.space
    x = demo_model.default_config
    snap = StressSnapshot(tuple(x), sp.patch_thickness(x), np.zeros((2, 6, demo_model.n_elements)),
                          np.zeros((2, demo_model.n_nodes, 2)))
    q = compute_qois(snap, sp, demo_pen, demo_model.monitored_node, demo_criteria)
    assert (q.n_y, q.n_b, q.deflection) == (0, 0, 0.0)
    assert q.mass > 0 and q.vcg >= 0


def test_qois_match_elementwise_oracle(demo_model, demo_pen, demo_criteria):
    sp = demo_model.space
    x = demo_model.default_config
    snap = demo_model.solve_hifi(x)
    q = compute_qois(snap, sp, demo_pen, demo_model.monitored_node, demo_criteria)
    t = demo_model.element_thickness(sp.patch_thickness(x))
    n_y = n_b = 0
    for e in range(0, demo_model.n_elements):
        y = any(check_yield(snap.stress[l, :, e]) for l in range(2))
        b = any(check_buckling(snap.stress[l, :, e], t[e], demo_model.panel_b[e], demo_model.panel_a[e]).max() > 1
                for l in range(2))
        n_y += y
        n_b += b
    assert (q.n_y, q.n_b) == (n_y, n_b)
    assert q.mass == pytest.approx(demo_pen.m_fixed + sp.d @ np.array(x) + demo_pen.m_bar * n_b)
    assert 0 <= q.n_y <= demo_model.n_elements


def test_buckled_count_equals_sum_of_patch_counts(demo_model, demo_criteria):
    snap = demo_model.solve_hifi(demo_model.default_config)
    state = demo_criteria.failure_state(snap)
    per_patch = demo_criteria.patch_counts(state.buckled)
    owned = demo_model.element_patch >= 0
    assert per_patch.sum() == int(state.buckled[owned].sum())
    assert state.n_b == per_patch.sum() + int(state.buckled[~owned].sum())
    # buckled iff the largest usage factor exceeds one
    assert np.array_equal(state.buckled, state.usage_factors.max(axis=1) > 1.0)


def test_inconsistent_element_count_is_data_error(demo_model, demo_pen, demo_criteria):
    snap = StressSnapshot((1.0,), np.ones(1), np.zeros((2, 6, 3)), np.zeros((2, 4, 2)))
    with pytest.raises(DataError):
        compute_qois(snap, demo_model.space, demo_pen, 0, demo_criteria)


def test_qoi_csv_columns(tmp_path):
    pen = PenaltyConfig(c_y=1.0, y_crit=0)
    path = tmp_path / "q.csv"
    write_qoi_csv(path, [((1.0, 2.0), QoiVector(2, 0, 3.0, 10.0, 4.0))], pen, 2)
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,x2,n_y,n_b,deflection,mass,vcg,penalized"
    assert lines[1].split(",")[-1] == "14.0"
