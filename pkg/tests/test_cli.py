import json
from pathlib import Path

import pytest

from haar_fluctuations import laws
from haar_fluctuations.cli import EXIT_ACCEPTANCE, EXIT_INVALID, EXIT_OK, main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_limits(capsys, configs_dir):
    code, out, _ = _run(capsys, "limits", "--config", str(configs_dir / "fig2.json"))
    assert code == EXIT_OK
    payload = json.loads(out)
    assert [entry["value"] for entry in payload["limits"]] == [5.0, 2.0, 1.0, 4.0, 3.0, -1.0]
    assert payload["simple"] is True


def test_law(capsys, configs_dir, tmp_path):
    code, out, _ = _run(
        capsys, "law", "--config", str(configs_dir / "fig1.json"), "--table", "--out", str(tmp_path)
    )
    assert code == EXIT_OK
    [payload] = json.loads(out)
    assert payload["law"]["variant"] == "GaussianScaled"
    assert Path(payload["table"]).exists()


def test_invalid_config(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"model": {"kind": "Lattice", "alphas": [1]}, "experiment": {"target": 0}}))
    code, _, err = _run(capsys, "limits", "--config", str(path))
    assert code == EXIT_INVALID
    assert err.startswith("error:")


def test_missing_config(capsys, tmp_path):
    code, _, err = _run(capsys, "limits", "--config", str(tmp_path / "none.json"))
    assert code == EXIT_INVALID
    assert "none.json" in err


def test_bad_environment(capsys, configs_dir, monkeypatch):
    monkeypatch.setenv("HAAR_THREADS", "zero")
    code, _, err = _run(capsys, "limits", "--config", str(configs_dir / "fig2.json"))
    assert code == EXIT_INVALID
    assert err.startswith("error:")


def test_bad_seed_flag(configs_dir):
    with pytest.raises(SystemExit):
        main(["limits", "--config", str(configs_dir / "fig2.json"), "--seed", "-3"])


def test_simulate_and_hist(capsys, configs_dir, tmp_path):
    config = str(configs_dir / "fig1.json")
    code, out, _ = _run(capsys, "simulate", "--config", config, "--samples", "200", "--out", str(tmp_path))
    assert code == EXIT_OK
    [report] = json.loads(out)
    assert report["label"] == "4#1"
    assert report["samples"] == 200
    assert report["threshold"] == 0.08
    assert report["verdict"] in ("pass", "fail")
    samples = report["files"]["samples"]
    assert Path(samples).exists()

    code, out, _ = _run(capsys, "hist", "--config", config, "--input", samples, "--out", str(tmp_path))
    assert code == EXIT_OK
    written = json.loads(out)
    assert Path(written["4#1"]).exists()


def test_verify_one_criterion(capsys):
    code, out, _ = _run(capsys, "verify", "--filter", "fig2")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["passed"] is True
    assert [c["name"] for c in payload["criteria"]] == ["fig2"]


def test_verify_unknown_filter(capsys):
    code, _, err = _run(capsys, "verify", "--filter", "does-not-exist")
    assert code == EXIT_INVALID
    assert "No acceptance criterion" in err


def test_verify_catches_a_wrong_formula(capsys, monkeypatch):
    def wrong(p, alphas, betas, *, side, index):
        return tuple(2 * c for c in original(p, alphas, betas, side=side, index=index))

    original = laws.mixture_coefficients
    monkeypatch.setattr(laws, "mixture_coefficients", wrong)
    code, out, _ = _run(capsys, "verify", "--filter", "fig3")
    assert code == EXIT_ACCEPTANCE
    assert json.loads(out)["passed"] is False
