import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hullopt.criteria import QoiVector
from hullopt.errors import DataError
from hullopt.rom.crossval import cross_validate, fold_indices, summarize, write_cv_csv
from hullopt.rom.database import SnapshotDatabase
from hullopt.rom.gpr import condition, gpr_fit, log_likelihood, se_ard_kernel
from hullopt.rom.pod import DegenerateBasisError, energy_rank, pod_fit, reconstruction_error
from hullopt.rom.surrogate import RankPolicy, singular_value_table, surrogate_fit


# -- POD ---------------------------------------------------------------------------


def test_single_snapshot_basis_is_normalized_snapshot():
    s = np.array([3.0, 0.0, 4.0])
    b = pod_fit(s[:, None])
    assert b.rank == 1
    np.testing.assert_allclose(b.basis[:, 0], s / 5.0)
    assert b.singular_values[0] == pytest.approx(5.0)


def test_orthogonal_columns_are_recovered():
    M = np.array([[2.0, 0, 0], [0, 1.0, 0], [0, 0, 0.5], [0, 0, 0]])
    b = pod_fit(M, energy_tol=0.0)
    assert b.basis.shape == (4, 3)
    np.testing.assert_allclose(b.singular_values, [2.0, 1.0, 0.5])
    np.testing.assert_allclose(np.abs(b.basis[:3]), np.eye(3), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(3, 12), st.integers(1, 6)), elements=st.floats(-1e3, 1e3)))
def test_pod_invariants(M):
    if not np.any(np.abs(M) > 1e-6):
        return
    full = pod_fit(M, rank=min(M.shape))
    U = full.basis
    np.testing.assert_allclose(U.T @ U, np.eye(U.shape[1]), atol=1e-9)
    # Frobenius norm equals the root sum of squared singular values
    assert np.linalg.norm(M) == pytest.approx(np.sqrt(np.sum(full.singular_values**2)), rel=1e-9)
    for r in range(1, full.rank + 1):
        tr = full.truncated(r)
        # discarded energy equals the tail of the spectrum
        tail = np.sqrt(np.sum(full.singular_values[r:] ** 2))
        assert reconstruction_error(M, tr) == pytest.approx(tail, rel=1e-6, abs=1e-6 * np.linalg.norm(M))
        # projection is orthogonal: |s|^2 = |Pi s|^2 + |s - Pi s|^2
        s = M[:, 0]
        proj = tr.reconstruct(tr.reduce(s))
        assert s @ s == pytest.approx(proj @ proj + (s - proj) @ (s - proj), rel=1e-9, abs=1e-9)


def test_energy_rank_policy():
    s = np.array([10.0, 5.0, 0.2, 0.05, 0.0])
    assert energy_rank(s, 0.01) == 3
    assert energy_rank(s, 0.5) == 2
    assert energy_rank(s, 0.0) == 5  # nothing is below a zero threshold
    assert energy_rank(np.zeros(3)) == 0


def test_fixed_rank_is_clamped():
    M = np.random.default_rng(0).normal(size=(6, 3))
    assert pod_fit(M, rank=10).rank == 3


def test_reduce_reconstruct_shapes_and_errors():
    M = np.random.default_rng(1).normal(size=(8, 4))
    b = pod_fit(M, rank=2)
    assert b.reduce(M).shape == (2, 4)
    assert b.reconstruct(b.reduce(M)).shape == (8, 4)
    with pytest.raises(DataError):
        b.reduce(np.ones(7))
    with pytest.raises(DataError):
        b.reconstruct(np.ones(3))


def test_degenerate_matrix():
    with pytest.raises(DegenerateBasisError):
        pod_fit(np.zeros((5, 3)))
    with pytest.raises(DataError):
        pod_fit(np.full((2, 2), np.nan))


# -- GPR ---------------------------------------------------------------------------


def test_log_likelihood_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(9, 2))
    Y = np.column_stack([np.sin(3 * X[:, 0]) + X[:, 1], np.cos(2 * X[:, 1])])
    theta = np.log([0.8, 0.4, 0.7, 1e-2])
    _, g = log_likelihood(theta, X, Y)
    h = 1e-6
    for k in range(len(theta)):
        e = np.zeros_like(theta)
        e[k] = h
        fd = (log_likelihood(theta + e, X, Y, with_grad=False) - log_likelihood(theta - e, X, Y, with_grad=False)) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_log_likelihood_matches_dense_oracle():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(6, 1))
    y = rng.normal(size=6)
    theta = np.log([1.3, 0.5, 0.1])
    K = se_ard_kernel(X, X, 1.3, [0.5]) + 0.1 * np.eye(6)
    expected = -0.5 * y @ np.linalg.solve(K, y) - 0.5 * np.linalg.slogdet(K)[1] - 3 * np.log(2 * np.pi)
    assert log_likelihood(theta, X, y, with_grad=False) == pytest.approx(expected, rel=1e-12)


def test_kernel_diagonal_is_signal_variance():
    X = np.random.default_rng(4).uniform(size=(5, 3))
    np.testing.assert_allclose(np.diag(se_ard_kernel(X, X, 2.5, [0.1, 1.0, 3.0])), 2.5)


def test_prediction_far_from_data_reverts_to_prior():
    X = np.linspace(0, 1, 5)[:, None]
    g = condition(X, np.sin(X), np.log([2.0, 0.1, 1e-6]))
    mean, var = g.predict([[50.0]])
    assert abs(mean[0, 0]) < 1e-12
    assert var[0] == pytest.approx(2.0)


def test_interpolates_linear_function():
    X = np.linspace(0, 1, 7)[:, None]
    g = gpr_fit(X, X[:, 0], restarts=3, seed=0)
    mean, var = g.predict(X)
    np.testing.assert_allclose(mean[:, 0], X[:, 0], atol=1e-6)
    assert np.all(var <= g.noise + 1e-8)


def test_batch_and_single_predictions_agree():
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(10, 2))
    g = gpr_fit(X, np.column_stack([X.sum(1), X[:, 0] ** 2]), restarts=2, seed=1)
    Xs = rng.uniform(size=(6, 2))
    mean, var = g.predict(Xs)
    for i, x in enumerate(Xs):
        m1, v1 = g.predict(x[None])
        np.testing.assert_allclose(m1[0], mean[i], rtol=1e-12, atol=1e-12)
        assert v1[0] == pytest.approx(var[i], rel=1e-12, abs=1e-12)


def test_predict_with_grad_matches_finite_differences():
    rng = np.random.default_rng(6)
    X = rng.uniform(size=(8, 2))
    g = gpr_fit(X, np.sin(4 * X[:, 0]) * X[:, 1], restarts=2, seed=0)
    x = np.array([0.31, 0.62])
    _, _, dmean, dstd = g.predict_with_grad(x)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        mp, vp = g.predict((x + e)[None])
        mm, vm = g.predict((x - e)[None])
        assert dmean[k, 0] == pytest.approx((mp[0, 0] - mm[0, 0]) / (2 * h), rel=1e-4, abs=1e-6)
        assert dstd[k] == pytest.approx((np.sqrt(vp[0]) - np.sqrt(vm[0])) / (2 * h), rel=1e-4, abs=1e-6)


def test_fit_rejects_bad_data():
    with pytest.raises(DataError):
        gpr_fit(np.zeros((1, 2)), np.zeros(1))
    with pytest.raises(DataError):
        gpr_fit(np.zeros((3, 1)), np.array([0.0, np.inf, 1.0]))


def test_fit_is_deterministic():
    X = np.random.default_rng(7).uniform(size=(8, 2))
    y = X[:, 0] - X[:, 1] ** 2
    a, b = gpr_fit(X, y, restarts=3, seed=4), gpr_fit(X, y, restarts=3, seed=4)
    assert np.array_equal(a.theta, b.theta)


# -- database ------------------------------------------------------------------------


def test_database_persists_and_rejects_duplicates(tmp_path, demo_model, demo_db):
    db = SnapshotDatabase(tmp_path / "db")
    for e in demo_db.entries[:3]:
        db.add(e.snapshot, e.qoi, e.provenance)
    with pytest.raises(DataError):
        db.add(demo_db.entries[0].snapshot, demo_db.entries[0].qoi, "manual")
    with pytest.raises(DataError):
        db.add(demo_db.entries[4].snapshot, demo_db.entries[4].qoi, "not-a-tag")
    again = SnapshotDatabase(tmp_path / "db")
    assert len(again) == 3
    assert np.array_equal(again.configs(demo_model.space), db.configs(demo_model.space))
    assert again.entries[1].snapshot.checksum() == db.entries[1].snapshot.checksum()
    assert again.entries[2].qoi == db.entries[2].qoi


# -- surrogate ----------------------------------------------------------------------------


def test_two_entry_fit_has_rank_at_most_two(demo_db, demo_model, demo_criteria):
    model = surrogate_fit(demo_db.subset([0, 1]), demo_model.space, demo_criteria, restarts=1)
    assert model.ranks and max(model.ranks.values()) <= 2


def test_degenerate_fields_are_skipped(demo_surrogate):
    # out-of-plane components are exactly zero under plane stress
    degenerate = {k for k, f in demo_surrogate.fields.items() if f.degenerate}
    assert degenerate == {f"{l}_{c}" for l in ("hogging", "sagging") for c in ("sigma_z", "tau_xz", "tau_yz")}
    assert len(demo_surrogate.ranks) == 6


def test_surrogate_reproduces_training_points(demo_surrogate, demo_db, demo_model, demo_pen):
    X = demo_db.configs(demo_model.space)
    pred = demo_surrogate.predict_fields(X[:3])
    for i in range(3):
        truth = demo_db.entries[i].snapshot.stress
        err = np.linalg.norm(pred[i] - truth) / np.linalg.norm(truth)
        assert err < 0.05
    q = demo_surrogate.predict_qois(X, demo_pen)
    assert q.shape == (len(X), 5)
    np.testing.assert_allclose(q[:, 4], [e.qoi.vcg for e in demo_db.entries], rtol=1e-12)


def test_save_load_is_bit_identical(tmp_path, demo_surrogate, demo_criteria, demo_model, demo_pen):
    demo_surrogate.save(tmp_path / "s")
    back = type(demo_surrogate).load(tmp_path / "s", demo_criteria, demo_model.space)
    rng = np.random.default_rng(8)
    sp = demo_model.space
    X = np.array([[rng.choice(sp.domain(i)) for i in range(sp.n_params)] for _ in range(5)])
    assert np.array_equal(back.predict_fields(X), demo_surrogate.predict_fields(X))
    assert np.array_equal(back.predict_qois(X, demo_pen), demo_surrogate.predict_qois(X, demo_pen))
    assert back.ranks == demo_surrogate.ranks


def test_rank_bump_after_refinement(demo_surrogate):
    policy = demo_surrogate.policy.bumped(demo_surrogate.ranks, 2)
    for name, r in demo_surrogate.ranks.items():
        assert policy.floors[name] == r + 2
        assert policy.rank_for(name, np.ones(50), 50) >= r + 2
        # never more than the number of snapshots
        assert policy.rank_for(name, np.ones(50), 3) <= 3


def test_singular_value_table_flags(demo_surrogate):
    rows = singular_value_table(demo_surrogate)
    assert rows
    for row in rows:
        assert row["flagged"] == (row["retained"] and row["normalized"] < demo_surrogate.policy.tau)
        assert 0.0 <= row["normalized"] <= 1.0 + 1e-12
    fixed = RankPolicy(fixed=20)
    assert fixed.rank_for("x", np.array([1.0, 1e-5]), 10) == 2


# -- cross-validation --------------------------------------------------------------------


def test_fold_indices_partition():
    parts = fold_indices(11, 4, seed=3)
    assert sorted(np.concatenate(parts).tolist()) == list(range(11))
    assert all(2 <= len(p) <= 3 for p in parts)
    loo = fold_indices(5, 5)
    assert all(len(p) == 1 for p in loo)
    with pytest.raises(DataError):
        fold_indices(3, 5)


def test_crossval_rows_and_csv(tmp_path, demo_db, demo_model, demo_criteria, demo_pen):
    db = demo_db.subset(range(10))
    rows = cross_validate(db, demo_model.space, demo_criteria, demo_pen, ranks=[2, 3], folds=5, restarts=1)
    assert len(rows) == 2 * 10
    for r in (2, 3):
        assert sorted(row["entry"] for row in rows if row["rank"] == r) == list(range(10))
    raw, summary = write_cv_csv(rows, tmp_path / "cv.csv")
    assert raw.read_text().splitlines()[0] == "rank,fold,entry,err_n_y,err_n_b"
    lines = summary.read_text().splitlines()
    assert lines[0] == "rank,qoi,count,min,q1,median,q3,max"
    assert len(lines) == 1 + 4
    s = summarize(rows)
    assert all(r["min"] <= r["q1"] <= r["median"] <= r["q3"] <= r["max"] for r in s)


def test_crossval_constant_targets_give_zero_error(demo_db, demo_model, demo_criteria):
    # identical snapshots at every point: the surrogate is exact, counts are exact
    from hullopt.criteria import PenaltyConfig
    from hullopt.hull_model import StressSnapshot

    sp = demo_model.space
    base = demo_db.entries[0].snapshot
    db = SnapshotDatabase()
    for e in demo_db.entries[:6]:
        snap = StressSnapshot(e.snapshot.config, e.snapshot.patch_thickness, base.stress, base.displacement)
        y, b, _ = demo_criteria.failure(base.stress[None], demo_model.element_thickness(e.patch_thickness)[None])
        db.add(snap, QoiVector(int(y.sum()), int(b.sum()), 0.0, 0.0, 0.0), "manual")
    rows = cross_validate(db, sp, demo_criteria, PenaltyConfig(), ranks=[1], folds=3, restarts=1)
    assert max(abs(r["err_n_y"]) for r in rows) == 0.0
    assert max(abs(r["err_n_b"]) for r in rows) == 0.0
