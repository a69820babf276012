import math

import numpy as np
import pytest

from hankelspec import certificate, hankel, model


def separated_signal(rng, dims, r, sep):
    while True:
        f = rng.random((r, len(dims)))
        ok = True
        for i in range(r):
            for j in range(i + 1, r):
                d = np.abs(f[i] - f[j])
                d = np.minimum(d, 1 - d)
                if d.min() < sep:
                    ok = False
        if ok:
            amps = np.exp(2j * np.pi * rng.random(r)) * (0.5 + rng.random(r))
            return model.SpectralSignal(dims, [tuple(x) for x in f], amps)


def make_instance(seed=0, dims=(4, 4), r=2, pencils=None):
    rng = np.random.default_rng(seed)
    sig = separated_signal(rng, dims, r, 0.1)
    if pencils is None:
        pencils = hankel.default_pencils(dims)
    emap = hankel.EnhancementMap(hankel.PencilShape(dims, pencils))
    tspace = certificate.TangentSpace.from_signal(sig, pencils)
    return sig, emap, tspace


def oracle_gap_norm(tspace, emap, counts, rescale):
    """Spectral radius via the group-space Gram trick: the operator
    P_T (A - rescale * A_omega) P_T has the same nonzero spectrum as
    G^(1/2) diag(c) G^(1/2) with G[a, b] = <A_a, P_T A_b> and
    c_a = 1 - rescale * counts_a."""
    total = emap.pencil.size
    g = np.zeros((total, total), dtype=complex)
    for b in range(total):
        proj = certificate.tangent_project(hankel.basis_matrix(b, emap), tspace)
        g[:, b] = emap.group_sums(proj) / np.sqrt(emap.mults)
    w, q = np.linalg.eigh(g)
    root = q @ np.diag(np.sqrt(np.clip(w, 0, None))) @ q.conj().T
    c = 1.0 - rescale * np.asarray(counts, dtype=float)
    m = root @ np.diag(c) @ root
    return float(np.max(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))


def test_tangent_space_from_signal_orthonormal():
    _, emap, tspace = make_instance(seed=1)
    r = tspace.rank
    assert np.max(np.abs(tspace.u.conj().T @ tspace.u - np.eye(r))) <= 1e-10
    assert np.max(np.abs(tspace.v.conj().T @ tspace.v - np.eye(r))) <= 1e-10
    assert tspace.u.shape == (emap.pencil.rows, r)
    assert tspace.v.shape == (emap.pencil.cols, r)


def test_tangent_space_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        certificate.TangentSpace(np.ones((4, 2), dtype=complex), np.ones((4, 2), dtype=complex))


def test_tangent_project_fixes_sign_matrix():
    _, _, tspace = make_instance(seed=2)
    uv = tspace.u @ tspace.v.conj().T
    assert np.max(np.abs(certificate.tangent_project(uv, tspace) - uv)) <= 1e-12


def test_tangent_project_idempotent_and_pythagoras():
    rng = np.random.default_rng(3)
    _, emap, tspace = make_instance(seed=3)
    m = rng.standard_normal(emap.pencil.matrix_shape) + 1j * rng.standard_normal(
        emap.pencil.matrix_shape
    )
    pt = certificate.tangent_project(m, tspace)
    assert np.max(np.abs(certificate.tangent_project(pt, tspace) - pt)) <= 1e-12
    pn = certificate.normal_project(m, tspace)
    assert np.max(np.abs(pt + pn - m)) <= 1e-12
    total = np.linalg.norm(m) ** 2
    assert total == pytest.approx(np.linalg.norm(pt) ** 2 + np.linalg.norm(pn) ** 2, rel=1e-10)
    assert np.max(np.abs(certificate.tangent_project(pn, tspace))) <= 1e-12


def test_apply_sampling_full_counts_is_structure_projection():
    rng = np.random.default_rng(4)
    _, emap, _ = make_instance(seed=4)
    m = rng.standard_normal(emap.pencil.matrix_shape) + 1j * rng.standard_normal(
        emap.pencil.matrix_shape
    )
    counts = np.ones(emap.pencil.size, dtype=int)
    got = certificate.apply_sampling(m, counts, emap)
    want = hankel.structure_project(m, emap)
    assert np.max(np.abs(got - want)) <= 1e-12


def test_apply_sampling_duplicates_double_the_term():
    rng = np.random.default_rng(5)
    _, emap, _ = make_instance(seed=5)
    m = rng.standard_normal(emap.pencil.matrix_shape) + 1j * rng.standard_normal(
        emap.pencil.matrix_shape
    )
    single = np.zeros(emap.pencil.size, dtype=int)
    single[3] = 1
    double = 2 * single
    got1 = certificate.apply_sampling(m, single, emap)
    got2 = certificate.apply_sampling(m, double, emap)
    assert np.max(np.abs(got2 - 2 * got1)) <= 1e-12


def test_apply_sampling_binary_counts_idempotent():
    rng = np.random.default_rng(6)
    _, emap, _ = make_instance(seed=6)
    m = rng.standard_normal(emap.pencil.matrix_shape) + 1j * rng.standard_normal(
        emap.pencil.matrix_shape
    )
    counts = (rng.random(emap.pencil.size) < 0.5).astype(int)
    once = certificate.apply_sampling(m, counts, emap)
    twice = certificate.apply_sampling(once, counts, emap)
    assert np.max(np.abs(twice - once)) <= 1e-12


def test_apply_sampling_validates_counts():
    _, emap, _ = make_instance(seed=7)
    m = np.zeros(emap.pencil.matrix_shape, dtype=complex)
    with pytest.raises(ValueError):
        certificate.apply_sampling(m, np.ones(3, dtype=int), emap)
    bad = np.zeros(emap.pencil.size, dtype=int)
    bad[0] = -1
    with pytest.raises(ValueError):
        certificate.apply_sampling(m, bad, emap)


def test_sampling_operator_matrices_match_action():
    rng = np.random.default_rng(8)
    _, emap, _ = make_instance(seed=8, dims=(4, 3), pencils=(2, 2))
    counts = rng.integers(0, 3, emap.pencil.size)
    a_full, a_omega = certificate.sampling_operator_matrices(emap, counts)
    m = rng.standard_normal(emap.pencil.matrix_shape) + 1j * rng.standard_normal(
        emap.pencil.matrix_shape
    )
    vec = m.reshape(-1)
    want_full = hankel.structure_project(m, emap).reshape(-1)
    want_omega = certificate.apply_sampling(m, counts, emap).reshape(-1)
    assert np.max(np.abs(a_full @ vec - want_full)) <= 1e-12
    assert np.max(np.abs(a_omega @ vec - want_omega)) <= 1e-12
    assert np.max(np.abs(a_full - a_full.T)) == 0.0


def test_sampling_operator_matrices_respect_cap():
    _, emap, _ = make_instance(seed=9, dims=(8, 8))
    with pytest.raises(ValueError):
        certificate.sampling_operator_matrices(
            emap, np.ones(emap.pencil.size, dtype=int), operator_cap=10
        )


def test_concentration_norm_matches_eigen_oracle():
    rng = np.random.default_rng(10)
    for seed in range(3):
        _, emap, tspace = make_instance(seed=20 + seed, dims=(6, 6), r=2)
        total = emap.pencil.size
        counts = rng.integers(0, 2, total)
        m = max(int(counts.sum()), 1)
        got = certificate.concentration_norm(tspace, emap, counts, m=m)
        want = oracle_gap_norm(tspace, emap, counts, total / m)
        assert got == pytest.approx(want, rel=1e-8, abs=1e-10)


def test_concentration_norm_exhaustive_observation_is_zero():
    _, emap, tspace = make_instance(seed=11, dims=(6, 6), r=2)
    counts = np.ones(emap.pencil.size, dtype=int)
    got = certificate.concentration_norm(tspace, emap, counts, m=emap.pencil.size)
    assert got <= 1e-12


def test_concentration_norm_power_iteration_matches_dense():
    rng = np.random.default_rng(12)
    _, emap, tspace = make_instance(seed=12, dims=(6, 6), r=2)
    counts = rng.integers(0, 2, emap.pencil.size)
    m = max(int(counts.sum()), 1)
    dense = certificate.concentration_norm(tspace, emap, counts, m=m)
    iterative = certificate.concentration_norm(tspace, emap, counts, m=m, operator_cap=1)
    assert iterative == pytest.approx(dense, rel=1e-5, abs=1e-8)


def test_certificate_gate_full_observation_passes():
    _, emap, tspace = make_instance(seed=13, dims=(6, 6), r=2)
    counts = np.ones(emap.pencil.size, dtype=int)
    gate = certificate.certificate_gate(tspace, emap, counts, m=emap.pencil.size)
    assert gate.passed and gate.norm <= 1e-12 and gate.threshold == 0.5


def test_make_golfing_plan_bernoulli():
    plan = certificate.make_golfing_plan(64, 48, epsilon=0.25, seed=0)
    assert plan.j0 == 9
    assert plan.q == pytest.approx(1 - 0.25 ** (1 / 9), rel=1e-12)
    assert len(plan.batch_counts) == 9
    for counts in plan.batch_counts:
        assert counts.shape == (64,)
        assert set(np.unique(counts)).issubset({0, 1})
    again = certificate.make_golfing_plan(64, 48, epsilon=0.25, seed=0)
    for a, b in zip(plan.batch_counts, again.batch_counts):
        assert np.array_equal(a, b)
    other = certificate.make_golfing_plan(64, 48, epsilon=0.25, seed=1)
    assert any(
        not np.array_equal(a, b) for a, b in zip(plan.batch_counts, other.batch_counts)
    )
    assert 0 < plan.union_count <= 64


def test_make_golfing_plan_iid():
    plan = certificate.make_golfing_plan(64, 48, epsilon=0.25, scheme="iid", seed=3)
    per_batch = math.ceil(48 / plan.j0)
    assert plan.q == pytest.approx(per_batch / 64, rel=1e-12)
    for counts in plan.batch_counts:
        assert int(counts.sum()) == per_batch
    assert plan.union_count <= 64


def test_make_golfing_plan_validation():
    with pytest.raises(ValueError):
        certificate.make_golfing_plan(64, 0)
    with pytest.raises(ValueError):
        certificate.make_golfing_plan(64, 65)
    with pytest.raises(ValueError):
        certificate.make_golfing_plan(64, 32, epsilon=1.5)
    with pytest.raises(ValueError):
        certificate.make_golfing_plan(0, 1)


def test_golfing_full_sampling_gives_zero_certificate():
    sig, emap, tspace = make_instance(seed=14, dims=(4, 4), r=2)
    w, report = certificate.golfing_certificate(sig, m=emap.pencil.size, seed=14)
    assert np.max(np.abs(w)) <= 1e-12
    assert report.support_residual <= 1e-12
    assert report.tangent_residual <= 1e-12
    assert report.normal_norm <= 1e-12
    assert report.condition_support and report.condition_tangent and report.condition_normal


def test_golfing_support_residual_vanishes():
    for seed in range(5):
        sig, emap, _ = make_instance(seed=30 + seed, dims=(6, 6), r=2)
        _, report = certificate.golfing_certificate(sig, m=27, seed=seed)
        assert report.support_residual <= 1e-9


def test_golfing_contraction_bounded_by_batch_operator_norm():
    sig, emap, _ = make_instance(seed=15, dims=(6, 6), r=2)
    _, report = certificate.golfing_certificate(sig, m=27, seed=15)
    assert len(report.batch_operator_norms) == report.j0
    assert len(report.batch_contractions) == report.j0
    for ratio, bound in zip(report.batch_contractions, report.batch_operator_norms):
        if not math.isnan(ratio):
            assert ratio <= bound + 1e-9


def test_golfing_iid_scheme_runs():
    sig, _, _ = make_instance(seed=16, dims=(6, 6), r=2)
    w, report = certificate.golfing_certificate(sig, m=27, scheme="iid", seed=16)
    assert report.support_residual <= 1e-9
    assert w.shape == (
        hankel.PencilShape((6, 6), hankel.default_pencils((6, 6))).rows,
        hankel.PencilShape((6, 6), hankel.default_pencils((6, 6))).cols,
    )


def test_golfing_report_fields_and_json():
    sig, emap, _ = make_instance(seed=17, dims=(6, 6), r=2)
    _, report = certificate.golfing_certificate(sig, m=27, seed=17)
    assert report.j0 == math.ceil(3 * math.log(36) / math.log(4))
    assert report.tangent_threshold == pytest.approx(1 / (2 * 36.0**2), rel=1e-12)
    assert report.normal_threshold == 0.5
    assert 0 < report.union_count <= 36
    obj = report.to_json_dict()
    for key in (
        "support_residual",
        "tangent_residual",
        "normal_norm",
        "condition_support",
        "condition_tangent",
        "condition_normal",
        "batch_operator_norms",
        "batch_contractions",
        "union_count",
        "q",
        "j0",
        "scheme",
    ):
        assert key in obj
