import numpy as np
import pytest

from haar_fluctuations.model import ModelKind, ModelSpec, build_reduced
from haar_fluctuations.ncpoly import parse_polynomial
from haar_fluctuations.perturb import (
    DegenerateGridError,
    LimitSpectrum,
    MultipleLimitError,
    RepeatedEigenvalueError,
    auto_grid,
    check_grid,
    estimate_exponent,
    fluctuation_series_approx,
    limiting_eigenvalues,
    match_to_limits,
    pi1,
    pi2,
)
from haar_fluctuations.randmat import RngStream, ginibre


def test_conjugation_limits(fig2_spec):
    limits = limiting_eigenvalues(fig2_spec)
    np.testing.assert_allclose(limits.values, [5, 2, 1, 4, 3, -1])
    assert limits.simple
    assert limits.label(1) == "2#1"


def test_conjugation_limits_use_the_pure_powers():
    spec = ModelSpec(
        kind=ModelKind.CONJUGATION,
        alphas=(2,),
        betas=(3,),
        n=10,
        poly=parse_polynomial("x^2 - x + 2*y + x*y*x"),
    )
    np.testing.assert_allclose(limiting_eigenvalues(spec).values, [2, 6])


def test_rotation_limits(rotation_spec):
    np.testing.assert_allclose(limiting_eigenvalues(rotation_spec).values, [4, 2, 1, -4, -2, -1])


def test_multiplicity_clusters(multiplicity_spec):
    limits = limiting_eigenvalues(multiplicity_spec)
    assert limits.multiplicities == (3, 2, 1)
    np.testing.assert_allclose(limits.distinct, [2, 1, -1])
    assert limits.index_of(2, 3) == 2
    assert limits.rank_of(4) == 2
    assert limits.label(4) == "1#2"
    with pytest.raises(ValueError):
        limits.index_of(2, 4)
    with pytest.raises(ValueError):
        limits.index_of(7)


def test_general_limits_come_from_m_part():
    spec = ModelSpec(kind=ModelKind.GENERAL, alphas=(2,), betas=(3,), n=10, poly=parse_polynomial("x*y"))
    np.testing.assert_allclose(limiting_eigenvalues(spec).values, [6, 0], atol=1e-12)


def test_pi_terms_on_a_two_by_two():
    lambdas = np.array([1.0, 2.0])
    x = np.array([[0.5, 1.0], [1.0, 0.0]])
    assert pi1(x, 0) == 0.5
    assert pi2(lambdas, x, 0) == pytest.approx(-1.0)
    assert pi2(lambdas, x, 1) == pytest.approx(1.0)


def test_series_matches_an_exact_eigenvalue():
    lambdas = np.array([1.0, 2.0, 4.0])
    x = np.array([[0.3, 1.0, -0.5], [0.2, -0.1, 0.7], [0.4, 0.6, 0.2]])
    eps = 1e-3
    eigs = np.linalg.eigvals(np.diag(lambdas) + eps * x)
    for p in range(3):
        exact = eigs[np.argmin(np.abs(eigs - lambdas[p]))]
        approx = lambdas[p] + eps * pi1(x, p) + eps**2 * pi2(lambdas, x, p)
        assert abs(exact - approx) < 1e-7


def test_pi_errors():
    with pytest.raises(RepeatedEigenvalueError):
        pi2([1.0, 1.0], np.ones((2, 2)), 0)
    with pytest.raises(IndexError):
        pi1(np.eye(2), 2)
    with pytest.raises(ValueError):
        pi1(np.ones((2, 3)), 0)


def test_match_to_limits_orders_clusters():
    limits = LimitSpectrum.from_values([2, 2, 1])
    matched = match_to_limits([1.01, 1.98, 2.03], limits)
    np.testing.assert_allclose(matched, [2.03, 1.98, 1.01])
    with pytest.raises(ValueError):
        match_to_limits([1.0, 2.0], limits)


def test_series_approximation_remainder_decays(fig2_spec, gen):
    g = ginibre(3, 3, gen)
    ratios = []
    for i in range(6):
        errors = []
        for t in (1e-2, 5e-3):
            u_hat = t * g
            eigs = np.linalg.eigvals(build_reduced(fig2_spec, u_hat).total)
            mu = limiting_eigenvalues(fig2_spec).values[i]
            exact = eigs[np.argmin(np.abs(eigs - mu))]
            errors.append(abs(exact - fluctuation_series_approx(fig2_spec, u_hat, i)))
        assert errors[1] < 1e-4
        ratios.append(errors[0] / errors[1])
    assert np.median(ratios) >= 6


def test_series_needs_simple_limits(multiplicity_spec):
    with pytest.raises(MultipleLimitError):
        fluctuation_series_approx(multiplicity_spec, np.zeros((3, 3)), 0)


def test_grid_checks():
    assert check_grid([400, 100, 200, 100]) == (100, 200, 400)
    with pytest.raises(DegenerateGridError):
        check_grid([100, 200])
    with pytest.raises(DegenerateGridError):
        check_grid([100, 200, 300])


def test_auto_grid_respects_the_minimum_size():
    spec = ModelSpec(kind=ModelKind.SUM_CONJUGATION, alphas=(1, 2, 3), betas=(1,), n=64)
    grid = auto_grid(spec)
    assert grid[-1] == 64
    assert min(grid) >= 8
    check_grid(grid)


def test_exact_model_has_no_exponent():
    spec = ModelSpec(kind=ModelKind.GENERAL, alphas=(2,), betas=(3,), n=64, poly=parse_polynomial("x*y"))
    estimate = estimate_exponent(spec, 0, (8, 16, 32, 64), 20, RngStream(1))
    assert estimate.exact
    with pytest.raises(ValueError):
        estimate.as_kappa()


@pytest.mark.slow
def test_rotation_exponent_is_one(rotation_spec):
    estimate = estimate_exponent(rotation_spec, 0, (50, 100, 200, 400, 800), 400, RngStream(3))
    assert 0.8 <= estimate.kappa_hat <= 1.2
    assert estimate.as_kappa() == 1


def test_exponent_does_not_depend_on_workers(fig2_spec):
    grid = (20, 40, 80)
    one = estimate_exponent(fig2_spec, 1, grid, 30, RngStream(5), n_jobs=1)
    two = estimate_exponent(fig2_spec, 1, grid, 30, RngStream(5), n_jobs=2)
    assert one.medians == two.medians
    assert one.kappa_hat == two.kappa_hat


@pytest.mark.parametrize("fixture", ["rotation_spec", "fig2_spec", "fig3_spec"])
def test_limits_are_the_small_corner_limit(request, fixture, gen):
    spec = request.getfixturevalue(fixture)
    limits = limiting_eigenvalues(spec)
    direction = ginibre(*spec.u_hat_shape, gen)
    direction /= np.linalg.norm(direction, 2)
    deltas = (1e-3, 1e-4, 1e-5)
    errors = []
    for delta in deltas:
        eigs = np.linalg.eigvals(build_reduced(spec, delta * direction).total)
        errors.append(np.max(np.abs(match_to_limits(eigs, limits) - np.asarray(limits.values))))
    slope = errors[0] / deltas[0]
    for delta, error in zip(deltas[1:], errors[1:]):
        assert error <= 5 * slope * delta + 1e-9
    assert errors[-1] < 1e-3


@pytest.mark.parametrize(
    "spec, limit",
    [
        (ModelSpec(kind=ModelKind.ROTATION, alphas=(4, 2, 1), n=200), 4),
        (ModelSpec(kind=ModelKind.SUM_CONJUGATION, alphas=(3, 1), betas=(2, -1), n=200), 1),
    ],
    ids=["rotation", "sum"],
)
def test_exponent_does_not_depend_on_the_scale(spec, limit):
    grid = (25, 50, 100, 200)
    base = estimate_exponent(spec, limiting_eigenvalues(spec).index_of(limit), grid, 60, RngStream(11))
    doubled_spec = spec.scaled(2)
    doubled = estimate_exponent(
        doubled_spec, limiting_eigenvalues(doubled_spec).index_of(2 * limit), grid, 60, RngStream(11)
    )
    np.testing.assert_allclose(doubled.medians, 2 * np.asarray(base.medians), rtol=1e-8)
    assert abs(doubled.kappa_hat - base.kappa_hat) <= 0.2
