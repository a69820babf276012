import math

import numpy as np
import pytest

from hankelspec import experiments, model, solver


FAST = solver.SolverConfig(
    max_iters=300,
    rel_tol=1e-8,
    schedule=solver.ThresholdSchedule(kind="geometric", fraction=0.3, decay=0.92),
)


def test_draw_trial_signal_respects_separation_floor():
    rng = model.derive_rng(0, 1)
    for _ in range(50):
        sig = experiments.draw_trial_signal(rng, (15, 15), 4)
        freqs = np.array(sig.freqs)
        for i in range(4):
            for j in range(i + 1, 4):
                d = np.abs(freqs[i] - freqs[j])
                d = np.minimum(d, 1 - d)
                assert d.min() >= 1 / 60 - 1e-12
        assert np.allclose(np.abs(sig.amps), 1.0)


def test_draw_trial_signal_deterministic():
    a = experiments.draw_trial_signal(model.derive_rng(3, 5), (8, 8), 3)
    b = experiments.draw_trial_signal(model.derive_rng(3, 5), (8, 8), 3)
    assert a == b


def test_phase_transition_full_observation_rate_one():
    cells = experiments.phase_transition((8, 8), [1], [64], trials=3, seed=0, config=FAST)
    assert len(cells) == 1
    assert cells[0].successes == 3
    assert cells[0].success_rate == 1.0


def test_phase_transition_zero_m_fails_without_solver():
    cells = experiments.phase_transition((8, 8), [2], [0], trials=2, seed=0, config=FAST)
    assert cells[0].successes == 0
    assert cells[0].success_rate == 0.0


def test_phase_transition_grid_shape_and_rate_steps():
    cells = experiments.phase_transition(
        (6, 6), [1, 2], [0, 36], trials=2, seed=1, config=FAST
    )
    assert [(c.r, c.m) for c in cells] == [(1, 0), (1, 36), (2, 0), (2, 36)]
    for cell in cells:
        assert cell.trials == 2
        assert cell.success_rate in (0.0, 0.5, 1.0)


def test_phase_transition_threads_match_serial():
    kwargs = dict(trials=4, seed=2, config=FAST)
    serial = experiments.phase_transition((6, 6), [1], [18, 36], threads=1, **kwargs)
    parallel = experiments.phase_transition((6, 6), [1], [18, 36], threads=2, **kwargs)
    assert [(c.r, c.m, c.successes) for c in serial] == [
        (c.r, c.m, c.successes) for c in parallel
    ]


def test_phase_threshold_profile_and_linear_fit():
    cells = [
        experiments.PhaseCell(r=1, m=10, trials=4, successes=4),
        experiments.PhaseCell(r=1, m=5, trials=4, successes=2),
        experiments.PhaseCell(r=2, m=10, trials=4, successes=3),
        experiments.PhaseCell(r=2, m=20, trials=4, successes=4),
        experiments.PhaseCell(r=3, m=20, trials=4, successes=0),
    ]
    profile = experiments.phase_threshold_profile(cells, level=0.95)
    assert profile == [(1, 10), (2, 20), (3, None)]
    slope, intercept, residual = experiments.fit_threshold_line([(1, 10), (2, 20), (3, 30)])
    assert slope == pytest.approx(10.0)
    assert residual == pytest.approx(0.0, abs=1e-9)


def test_noisy_demo_small_instance():
    report, table = experiments.noisy_demo(
        dims=(12, 12), r=2, m=110, snr=10.0, seed=4, config=FAST, include_noiseless=True
    )
    assert report.delta > 0
    assert report.nmse <= 0.3
    assert report.noiseless_nmse < report.nmse
    assert report.error_fro <= report.stability_bound
    assert report.bound_holds
    assert len(table) == 100
    first = table[0]
    assert first[0] == 0 and len(first) == 5


def test_noisy_demo_delta_matches_realized_noise():
    report, _ = experiments.noisy_demo(
        dims=(10, 10), r=1, m=60, snr=5.0, seed=5, config=FAST, include_noiseless=False
    )
    sig = experiments.draw_trial_signal(model.derive_rng(5, 0), (10, 10), 1)
    data = model.synthesize(sig)
    idx = model.sample_uniform((10, 10), 60, model.derive_rng(5, 1))
    obs = model.make_observations(data, idx, snr_amplitude=5.0, seed=model.derive_rng(5, 2))
    assert report.delta == pytest.approx(obs.noise_level, rel=1e-12)
    assert report.noiseless_nmse is None


def test_superres_spec_validation():
    good = [((0.2, 0.3), 1.0)]
    with pytest.raises(ValueError):
        experiments.SuperresSpec(sources=[], f_lo=4, f_hi=8)
    with pytest.raises(ValueError):
        experiments.SuperresSpec(sources=good, f_lo=8, f_hi=4)
    with pytest.raises(ValueError):
        experiments.SuperresSpec(sources=good, f_lo=0, f_hi=4)
    with pytest.raises(ValueError):
        experiments.SuperresSpec(sources=[((1.2, 0.3), 1.0)], f_lo=4, f_hi=8)
    with pytest.raises(ValueError):
        experiments.SuperresSpec(sources=good, f_lo=4, f_hi=8, render_grid=8)


def test_superres_signal_matches_direct_transform():
    spec = experiments.SuperresSpec(
        sources=[((0.3, 0.7), 2.0), ((0.6, 0.2), 1.0 - 0.5j)], f_lo=3, f_hi=5
    )
    sig = experiments.superres_signal(spec)
    grid = model.synthesize(sig)
    side = 2 * spec.f_hi + 1
    assert grid.shape == (side, side)
    for t1 in range(side):
        for t2 in range(side):
            k1, k2 = t1 - spec.f_hi, t2 - spec.f_hi
            want = sum(
                amp * np.exp(-2j * np.pi * (k1 * p[0] + k2 * p[1]))
                for p, amp in spec.sources
            )
            assert abs(grid[t1, t2] - want) <= 1e-12


def test_superres_observation_block():
    spec = experiments.SuperresSpec(sources=[((0.5, 0.5), 1.0)], f_lo=2, f_hi=4)
    idx = experiments.superres_observation_indices(spec)
    assert idx.shape == ((2 * 2 + 1) ** 2, 2)
    for t in idx:
        assert abs(t[0] - 4) <= 2 and abs(t[1] - 4) <= 2


def test_superres_identity_when_no_extrapolation():
    spec = experiments.SuperresSpec(
        sources=[((0.25, 0.5), 1.0), ((0.7, 0.1), 1.0)], f_lo=4, f_hi=4, render_grid=32
    )
    result = experiments.superres_demo(spec, config=FAST)
    assert np.array_equal(result.recovered_spectrum, result.lowres_spectrum)
    assert np.array_equal(result.recovered_image, result.lowres_image)
    assert result.spectrum_nmse <= 1e-12


def test_superres_single_centered_source_dirichlet_oracle():
    spec = experiments.SuperresSpec(
        sources=[((0.5, 0.5), 1.0)], f_lo=3, f_hi=6, render_grid=64
    )
    result = experiments.superres_demo(spec, config=FAST)
    grid = 64
    x = np.arange(grid)

    def dirichlet_image(u):
        out = np.empty(len(u))
        for i, ui in enumerate(u):
            if abs(math.sin(math.pi * ui)) < 1e-15:
                out[i] = 2 * spec.f_hi + 1
            else:
                out[i] = math.sin(math.pi * (2 * spec.f_hi + 1) * ui) / math.sin(math.pi * ui)
        return out

    want = np.outer(dirichlet_image(x / grid - 0.5), dirichlet_image(x / grid - 0.5))
    assert np.max(np.abs(result.recovered_image - want)) <= 1e-6 * np.max(np.abs(want))
    assert result.peaks == [(32, 32)]
    assert np.max(np.abs(result.recovered_image.imag)) <= 1e-10


def test_detect_peaks_wraparound_corner():
    img = np.zeros((16, 16))
    img[0, 0] = 3.0
    img[15, 0] = 1.0
    img[8, 8] = 2.0
    peaks = experiments.detect_peaks(img, threshold_ratio=0.5)
    assert (0, 0) in peaks and (8, 8) in peaks
    assert (15, 0) not in peaks


def test_superres_six_sources_small_scale():
    rng = model.derive_rng(9, 0)
    sources = experiments.make_random_sources(6, rng, min_sep=0.13)
    spec = experiments.SuperresSpec(sources=sources, f_lo=6, f_hi=12, render_grid=128)
    result = experiments.superres_demo(spec, config=FAST)
    assert result.spectrum_nmse <= 1e-4
    assert len(result.peaks) == len(result.source_match_cells) == 6
    assert max(result.source_match_cells) <= 1.0
    assert result.spurious_peaks == 0
    assert np.max(np.abs(result.recovered_image.imag)) <= 1e-10


def test_make_random_sources_separation_and_determinism():
    a = experiments.make_random_sources(5, model.derive_rng(11, 0), min_sep=0.1)
    b = experiments.make_random_sources(5, model.derive_rng(11, 0), min_sep=0.1)
    assert a == b
    pos = np.array([p for p, _ in a])
    for i in range(5):
        for j in range(i + 1, 5):
            d = np.abs(pos[i] - pos[j])
            d = np.minimum(d, 1 - d)
            assert d.max() >= 0.1 - 1e-12
    assert all(amp == 1.0 for _, amp in a)
