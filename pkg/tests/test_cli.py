"""Tests for the kdesign command line."""

import csv
import json
from pathlib import Path
from typing import Any

import pytest
from typer.testing import CliRunner

from kdesign import __version__
from kdesign.cli import app
from kdesign.revcircuit import ReversibleCircuit

runner = CliRunner()


@pytest.fixture(autouse=True)
def clean_env(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    """Strip KDESIGN_* variables so only explicit options apply."""
    for name in (
        "KDESIGN_MASTER_SEED",
        "KDESIGN_BOOTSTRAP_RESAMPLES",
        "KDESIGN_WORKERS",
        "KDESIGN_LOG_LEVEL",
    ):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("KDESIGN_OUTPUT_DIR", str(tmp_path))


def _run(args: list[str], out: Path) -> dict[str, Any]:
    result = runner.invoke(app, [*args, "--out", str(out)])
    assert result.exit_code == 0, result.output
    return json.loads(out.read_text(encoding="utf-8"))


def test_version() -> None:
    """Test --version prints the package version."""
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.stdout


def test_verify_fact1(tmp_path: Path) -> None:
    """Test the exhaustive PFC identity through the CLI."""
    report = _run(["verify", "fact1", "--n", "1", "--k", "2"], tmp_path / "fact1.json")
    assert report["op"] == "verify fact1"
    assert report["residual"] < 1e-10
    assert report["params"] == {"n": 1, "k": 2}


def test_state_error_is_reproducible(tmp_path: Path) -> None:
    """Test that two runs with one seed give identical reports."""
    out = tmp_path / "state.json"
    args = [
        "state-error",
        "--family",
        "RandomPhase",
        "--n",
        "2",
        "--k",
        "2",
        "--mode",
        "monte_carlo",
        "--trials",
        "200",
        "--resamples",
        "50",
        "--seed",
        "5",
    ]
    first = _run(args, out)
    second = _run(args, out)
    first.pop("elapsed_ms")
    second.pop("elapsed_ms")
    assert first == second
    assert first["master_seed"] == 5
    assert first["samples"] == 200
    assert first["estimate"] >= 0


def test_unknown_flag_is_a_usage_error(tmp_path: Path) -> None:
    """Test that typer rejects unknown options with exit code 2."""
    out = tmp_path / "nope.json"
    result = runner.invoke(app, ["verify", "fact1", "--bogus", "--out", str(out)])
    assert result.exit_code == 2
    assert not out.exists()


def test_precondition_exit_code(tmp_path: Path) -> None:
    """Test that an unsupported patch size exits with 2."""
    out = tmp_path / "blocked.json"
    result = runner.invoke(
        app, ["verify", "blocked-identity", "--xi", "3", "--n", "3", "--out", str(out)]
    )
    assert result.exit_code == 2
    assert not out.exists()


def test_resource_limit_exit_code(tmp_path: Path) -> None:
    """Test that an oversized exhaustive check exits with 3."""
    result = runner.invoke(
        app, ["verify", "fact1", "--n", "3", "--out", str(tmp_path / "big.json")]
    )
    assert result.exit_code == 3


def test_invalid_environment(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    """Test that an out-of-range KDESIGN_WORKERS is rejected."""
    monkeypatch.setenv("KDESIGN_WORKERS", "0")
    result = runner.invoke(app, ["verify", "fact1", "--out", str(tmp_path / "env.json")])
    assert result.exit_code == 2


def test_resources_table_csv(tmp_path: Path) -> None:
    """Test the four-row resource table in CSV form."""
    out = tmp_path / "table.csv"
    result = runner.invoke(
        app,
        ["resources", "table", "--n", "8", "--k", "1", "--eps", "1", "--format", "csv"]
        + ["--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    with out.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 4
    assert {row["xi"] for row in rows} == {"5"}


def test_resources_table_filters(tmp_path: Path) -> None:
    """Test that --family and --mode pin the table to one row."""
    report = _run(
        ["resources", "table", "--n", "8", "--k", "1", "--eps", "1"]
        + ["--family", "blocked_phase", "--mode", "low_ancilla"],
        tmp_path / "one.json",
    )
    assert [(row["family"], row["mode"]) for row in report["rows"]] == [
        ("blocked_phase", "low_ancilla")
    ]
    assert report["params"]["family"] == "blocked_phase"


def test_kwise_verify(tmp_path: Path) -> None:
    """Test the exact k-wise distribution check over GF(4)."""
    report = _run(["kwise", "verify", "--m", "2", "--k", "2"], tmp_path / "kwise.json")
    assert report["residual"] == 0.0
    assert report["samples"] == 4 * 4 + 6 * 16
    assert [row["violations"] for row in report["rows"]] == [0, 0]


def test_field_selftest(tmp_path: Path) -> None:
    """Test the field self-test with a small random sample."""
    report = _run(
        ["field", "selftest", "--m-max", "3", "--random-pairs", "100"], tmp_path / "field.json"
    )
    assert report["residual"] == 0.0
    assert report["details"]["reducible_widths"] == []


@pytest.mark.slow
def test_field_selftest_default_sample(tmp_path: Path) -> None:
    """Test that the self-test checks 10^5 random pairs per wide field by default."""
    report = _run(["field", "selftest", "--m-max", "1"], tmp_path / "field.json")
    assert report["residual"] == 0.0
    assert report["params"]["random_pairs"] == 100_000
    assert report["samples"] == 4 + 3 * 100_000


def test_circuit_build_writes_circuit(tmp_path: Path) -> None:
    """Test that the saved circuit parses back with the same wire roles."""
    circ = tmp_path / "kwise.circ"
    report = _run(
        ["circuit", "build", "--m", "3", "--k", "2", "--check", "200"]
        + ["--circuit-out", str(circ)],
        tmp_path / "circuit.json",
    )
    assert report["residual"] == 0.0
    parsed = ReversibleCircuit.from_text(circ.read_text(encoding="utf-8"))
    assert len(parsed.inputs) == 3
    assert len(parsed.seeds) == 6
    assert report["details"]["depth"] == parsed.depth


def test_distinguish_product_state(tmp_path: Path) -> None:
    """Test that a product state is told apart from Haar states."""
    report = _run(
        ["distinguish", "--product-state", "--n", "4", "--xi", "1", "--trials", "2000"]
        + ["--seed", "11"],
        tmp_path / "lb.json",
    )
    assert report["estimate"] > 0.1
    assert len(report["rows"]) == 4
    assert report["details"]["product_bound"] == pytest.approx(2 / 3)
    assert report["params"]["xi"] == 1


def test_measurable_identity_plan(tmp_path: Path) -> None:
    """Test the identity ensemble against Haar on the trivial plan."""
    report = _run(
        ["measurable", "--family", "Identity", "--n", "2", "--k", "1"]
        + ["--m-anc", "0", "--identity-plan"],
        tmp_path / "measurable.json",
    )
    assert report["estimate"] == pytest.approx(1.5)


def test_verify_fact5(tmp_path: Path) -> None:
    """Test the post-selection identity on three random plans."""
    report = _run(["verify", "fact5", "--plans", "3"], tmp_path / "fact5.json")
    assert report["estimate"] == pytest.approx(0.5)
    assert report["residual"] < 1e-8
    assert len(report["details"]["values"]) == 3
