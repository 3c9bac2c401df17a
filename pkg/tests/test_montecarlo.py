import math

import numpy as np
import pytest
from scipy import stats

from haar_fluctuations.laws import ExpMixture, MatrixSpectral, gaussian_law, law_for_target
from haar_fluctuations.montecarlo import (
    SAMPLE_COLUMNS,
    ExperimentConfig,
    InsufficientSamplesError,
    evaluate,
    histogram,
    ks_one_sample,
    ks_threshold,
    ks_two_sample,
    load_samples,
    run_experiment,
    save_samples,
)
from haar_fluctuations.randmat import RngStream

SEED = 1234


@pytest.fixture
def small_fig2(fig2_spec):
    return fig2_spec.with_n(40)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"num_samples": 0},
        {"kappa": 0},
        {"normalizer": 0},
        {"target": 6},
        {"seed": -1},
    ],
)
def test_config_validation(small_fig2, kwargs):
    base = {"target": 1, "kappa": 2, "num_samples": 10, "seed": SEED}
    with pytest.raises(ValueError):
        ExperimentConfig(spec=small_fig2, **{**base, **kwargs})


def test_config_for_limit(small_fig2):
    config = ExperimentConfig.for_limit(small_fig2, 2, kappa=2, num_samples=10, seed=SEED)
    assert config.target == 1
    assert config.scale == pytest.approx(40)
    with pytest.raises(ValueError):
        ExperimentConfig.for_limit(small_fig2, 7, kappa=2, num_samples=10, seed=SEED)


def test_run_is_reproducible_across_workers(small_fig2):
    config = ExperimentConfig(spec=small_fig2, target=1, kappa=2, num_samples=60, seed=SEED)
    one = run_experiment(config, n_jobs=1)
    three = run_experiment(config, n_jobs=3)
    np.testing.assert_array_equal(one.deviations, three.deviations)
    np.testing.assert_array_equal(one.matched, three.matched)
    assert one.deviations.shape == (60,)
    assert one.label == "2#1"


def test_matched_eigenvalues_stay_near_their_limits(small_fig2):
    config = ExperimentConfig(spec=small_fig2, target=0, kappa=2, num_samples=30, seed=SEED)
    samples = run_experiment(config)
    errors = np.abs(samples.matched - np.asarray(samples.limits.values)[None, :])
    assert np.median(errors) < 1.0


@pytest.mark.parametrize(
    "fixture, limit, kappa, band",
    [
        ("rotation_spec", 4, 1, 0.5),
        ("fig2_spec", 2, 2, 0.3),
        ("fig3_spec", 2, 2, 0.75),
    ],
)
def test_target_eigenvalue_is_assigned_to_its_limit(request, fixture, limit, kappa, band):
    spec = request.getfixturevalue(fixture)
    config = ExperimentConfig.for_limit(spec, limit, kappa=kappa, num_samples=300, seed=SEED)
    samples = run_experiment(config)
    distances = np.abs(samples.matched[:, config.target] - limit)
    assert np.mean(distances <= band) >= 0.99


def test_retarget_reuses_the_draws(small_fig2):
    first = run_experiment(ExperimentConfig(spec=small_fig2, target=1, kappa=2, num_samples=40, seed=SEED))
    direct = run_experiment(
        ExperimentConfig(spec=small_fig2, target=3, kappa=1, num_samples=40, seed=SEED, normalizer=2)
    )
    moved = first.retarget(3, 1, normalizer=2)
    np.testing.assert_allclose(moved.deviations, direct.deviations)
    assert moved.label == direct.label
    np.testing.assert_array_equal(first.deviations, run_experiment(first.config).deviations)


def test_samples_frame(small_fig2):
    samples = run_experiment(ExperimentConfig(spec=small_fig2, target=1, kappa=2, num_samples=20, seed=SEED))
    frame = samples.to_frame()
    assert list(frame.columns) == SAMPLE_COLUMNS
    assert (frame["limit_label"] == "2#1").all()
    assert frame["sample_index"].tolist() == list(range(20))


def test_save_and_load(tmp_path, small_fig2):
    samples = run_experiment(ExperimentConfig(spec=small_fig2, target=1, kappa=2, num_samples=20, seed=SEED))
    path = save_samples(samples, tmp_path / "nested" / "samples.csv")
    frame = load_samples(path)
    np.testing.assert_allclose(frame["scaled_deviation_re"], samples.deviations.real)

    broken = tmp_path / "broken.csv"
    broken.write_text("sample_index,value\n0,1.0\n")
    with pytest.raises(ValueError, match="Missing columns"):
        load_samples(broken)


def test_histogram_has_unit_area(gen):
    values = gen.standard_normal(1000)
    hist = histogram(values)
    assert hist.counts.size == math.ceil(2 * 1000 ** (1 / 3))
    assert hist.area == pytest.approx(1.0)
    assert hist.counts.sum() == 1000
    assert hist.out_of_range == 0


def test_histogram_with_width_and_range(gen):
    values = gen.standard_normal(500)
    hist = histogram(values, bin_width=0.5, value_range=(-1, 1))
    np.testing.assert_allclose(hist.edges, [-1, -0.5, 0, 0.5, 1])
    assert hist.out_of_range == np.sum(np.abs(values) > 1)
    assert hist.area == pytest.approx(1.0)
    frame = hist.to_frame(overlay=stats.norm.pdf)
    assert list(frame.columns) == ["left", "right", "center", "count", "height", "theory"]


def test_histogram_edge_cases():
    single = histogram([3.0])
    np.testing.assert_allclose(single.edges, [2.5, 3.5])
    assert single.heights[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        histogram([])
    with pytest.raises(ValueError):
        histogram([1.0, 2.0], bins=4, bin_width=0.1)
    with pytest.raises(ValueError):
        histogram([1.0, 2.0], value_range=(2, 1))


def test_ks_helpers(gen):
    a = gen.standard_normal(500)
    assert ks_one_sample(a, stats.norm.cdf) < 0.1
    assert ks_one_sample(a + 3, stats.norm.cdf) > 0.5
    assert ks_two_sample(a, gen.standard_normal(800)) < 0.15
    with pytest.raises(InsufficientSamplesError):
        ks_one_sample(a[:50], stats.norm.cdf)
    with pytest.raises(InsufficientSamplesError):
        ks_two_sample(a, a[:10])


def test_ks_threshold():
    assert ks_threshold(400) == pytest.approx(2 * 1.628 / 20)
    assert ks_threshold(100, 100) == pytest.approx(2 * 1.628 / math.sqrt(50))


def test_evaluate_one_sample(rotation_spec):
    spec = rotation_spec.with_n(100)
    config = ExperimentConfig(spec=spec, target=0, kappa=1, num_samples=200, seed=SEED, normalizer=4)
    report = evaluate(run_experiment(config), gaussian_law(4), bins=20)
    assert report.method == "one-sample"
    assert report.threshold == pytest.approx(ks_threshold(200))
    assert report.law["variant"] == "GaussianScaled"
    assert report.law["coefficient"] == pytest.approx(1 / math.sqrt(2))
    assert report.histogram.counts.size == 20
    assert report.verdict in ("pass", "fail")


def test_evaluate_two_sample_is_seeded(multiplicity_spec):
    spec = multiplicity_spec.with_n(60)
    config = ExperimentConfig.for_limit(spec, 2, kappa=2, num_samples=120, seed=SEED)
    samples = run_experiment(config)
    law = law_for_target(spec, config.target)
    assert isinstance(law, MatrixSpectral)
    first = evaluate(samples, law, oracle_draws=2000)
    second = evaluate(samples, law, oracle_draws=2000)
    assert first.method == "two-sample"
    assert first.ks_statistic == second.ks_statistic
    other = evaluate(samples, law, oracle_draws=2000, rng=RngStream(5))
    assert other.threshold == pytest.approx(ks_threshold(120, 2000))


def test_evaluate_threshold_override(small_fig2):
    samples = run_experiment(ExperimentConfig(spec=small_fig2, target=1, kappa=2, num_samples=150, seed=SEED))
    report = evaluate(samples, ExpMixture((12.0, 6.0, -14 / 3)), threshold=1.0)
    assert report.threshold == 1.0
    assert report.passed


@pytest.mark.slow
def test_fig1_protocol(rotation_spec):
    config = ExperimentConfig.for_limit(rotation_spec, 4, kappa=1, num_samples=400, seed=SEED, normalizer=4)
    report = evaluate(run_experiment(config, n_jobs=2), gaussian_law(4))
    assert report.passed


@pytest.mark.slow
def test_fig2_protocol(fig2_spec):
    config = ExperimentConfig.for_limit(fig2_spec, 2, kappa=2, num_samples=2000, seed=SEED)
    report = evaluate(run_experiment(config, n_jobs=2), law_for_target(fig2_spec, config.target))
    assert report.method == "one-sample"
    assert report.passed
