import pytest

from haar_fluctuations import acceptance
from haar_fluctuations.acceptance import CRITERIA, Criterion, SuiteContext, random_spec, run_suite, select
from haar_fluctuations.model import ModelKind
from haar_fluctuations.randmat import RngStream

NAMES = {
    "fig1",
    "fig2",
    "fig3",
    "fig2_monte_carlo",
    "fig6_multiplicity",
    "fig4_mixed_scaling",
    "fig5_equal_pairs",
    "trivial_eigenvalues",
    "perturbation_series",
    "minors_identity",
    "exponents",
    "haar_statistics",
}


def test_registry():
    assert set(CRITERIA) == NAMES
    assert all(c.description for c in CRITERIA.values())


def test_select():
    assert [c.name for c in select("fig2")] == ["fig2"]
    assert {c.name for c in select("fig2_")} == {"fig2_monte_carlo"}
    assert len(select(None)) == len(NAMES)
    assert all("fig" in c.name for c in select("fig"))
    with pytest.raises(ValueError, match="No acceptance criterion"):
        select("nope")


def test_duplicate_registration():
    with pytest.raises(ValueError):
        acceptance.criterion("fig2", "again")(lambda ctx: (True, ""))


def test_random_specs_are_valid():
    gen = RngStream(3).generator()
    for _ in range(40):
        spec = random_spec(gen, 30)
        assert spec.n == 30
        if spec.kind is ModelKind.GENERAL:
            assert spec.r == spec.s
        if spec.kind in (ModelKind.GENERAL, ModelKind.CONJUGATION):
            assert spec.poly is not None


def test_context_streams_differ():
    ctx = SuiteContext(seed=1)
    a = ctx.stream(1).generator().random(3)
    b = ctx.stream(2).generator().random(3)
    assert not (a == b).all()


@pytest.mark.parametrize("name", ["fig2", "fig3", "minors_identity", "perturbation_series", "trivial_eigenvalues"])
def test_cheap_criteria_pass(name):
    [result] = run_suite(name)
    assert result.passed, result.detail
    assert result.runtime >= 0


def test_exceptions_become_failures(monkeypatch):
    def boom(ctx):
        raise RuntimeError("boom")

    monkeypatch.setitem(CRITERIA, "fig2", Criterion("fig2", "broken", boom))
    [result] = run_suite("fig2")
    assert not result.passed
    assert result.detail == "RuntimeError: boom"


def test_wrong_coefficients_fail_fig2(monkeypatch):
    monkeypatch.setattr(acceptance.laws, "mixture_coefficients", lambda *args, **kwargs: (12.0, 6.0, -4.0))
    [result] = run_suite("fig2")
    assert not result.passed


@pytest.mark.slow
@pytest.mark.parametrize("name", ["haar_statistics", "fig1", "fig5_equal_pairs", "exponents"])
def test_statistical_criteria_pass(name):
    [result] = run_suite(name, n_jobs=2)
    assert result.passed, result.detail
