"""End-to-end tests for the command-line driver: exit codes, JSON
output, tracing, and the corpus runner."""

import json
import os
from importlib import resources

import pytest

from rqcheck.cli import main

CORPUS = resources.files("rqcheck") / "corpus"
GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def corpus_path(name: str) -> str:
    return str(CORPUS / name)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# check


def test_check_accepted_prints_the_type(capsys):
    code, out, _ = run(capsys, "check", corpus_path("id.rq"))
    assert code == 0
    assert out.strip() == "(id(x: Ref[Int]^{*}) => Ref[Int]^{x})^{}"


def test_check_rejection_is_exit_one_with_the_code(capsys):
    code, _, err = run(capsys, "check", corpus_path("fakeid.rq"))
    assert code == 1
    assert "QualifierMismatch" in err


def test_check_parse_error_is_exit_two(capsys):
    code, _, err = run(capsys, "check", corpus_path("malformed.rq"))
    assert code == 2
    assert "parse error" in err


def test_check_json_matches_the_golden_file(capsys):
    code, out, _ = run(capsys, "check", corpus_path("id.rq"), "--json")
    assert code == 0
    with open(os.path.join(GOLDEN, "check_id.json"), encoding="utf-8") as fh:
        assert json.loads(out) == json.load(fh)


def test_check_json_rejection_schema(capsys):
    code, out, _ = run(capsys, "check", corpus_path("fakeid.rq"), "--json")
    assert code == 1
    record = json.loads(out)
    assert record["status"] == "rejected"
    assert record["error"]["code"] == "QualifierMismatch"
    assert "detail" in record["error"]


# ---------------------------------------------------------------------------
# eval


def test_eval_prints_value_and_store_size(capsys):
    code, out, _ = run(capsys, "eval", corpus_path("assign_read.rq"), "--json")
    assert code == 0
    record = json.loads(out)
    assert record == {"status": "value", "value": "2", "store_size": 1,
                      "steps": record["steps"]}


def test_eval_fuel_exhaustion_is_exit_three(capsys):
    code, _, err = run(capsys, "eval", corpus_path("diverge.rq"),
                       "--fuel", "50")
    assert code == 3
    assert "fuel" in err


def test_eval_trace_emits_one_json_line_per_event(capsys, tmp_path):
    src = tmp_path / "ref0.rq"
    src.write_text("ref 0\n", encoding="utf-8")
    code, out, _ = run(capsys, "eval", str(src), "--trace", "--json")
    lines = [json.loads(line) for line in out.strip().splitlines()]
    assert code == 0
    assert {"rule": "ref", "loc": 0} in lines


def test_eval_verify_preservation_reports_every_step(capsys):
    code, out, _ = run(capsys, "eval", corpus_path("counter.rq"),
                       "--verify-preservation")
    assert code == 0
    assert "all steps verified" in out
    assert out.count("ok") >= 10


def test_eval_rejects_ill_typed_input(capsys):
    code, _, err = run(capsys, "eval", corpus_path("ref_content_fresh.rq"))
    assert code == 1
    assert "RefContentFresh" in err


# ---------------------------------------------------------------------------
# sep


def test_sep_verdict_separate(capsys):
    code, out, _ = run(capsys, "sep", corpus_path("sep_alloc_assign.rq"))
    assert code == 0
    assert out.strip().endswith("verdict SEPARATE")


# ---------------------------------------------------------------------------
# corpus


def test_corpus_runs_clean(capsys):
    code, out, _ = run(capsys, "corpus")
    assert code == 0
    assert "0 failed" in out


def test_corpus_filter_by_tag(capsys):
    code, out, _ = run(capsys, "corpus", "--filter", "pair")
    assert code == 0
    lines = [l for l in out.splitlines() if l.strip().startswith("ok")]
    assert len(lines) >= 5
    assert all("pair" in l or "counter" in l for l in lines)


def test_corpus_filter_capture_selects_the_capture_entries(capsys):
    code, out, _ = run(capsys, "corpus", "--filter", "capture")
    assert code == 0
    assert "check-retfresh" in out and "check-retconst" in out


# ---------------------------------------------------------------------------
# styling


def test_color_disabled_by_environment(monkeypatch):
    from rqcheck import cli
    monkeypatch.setattr("sys.stdout.isatty", lambda: True)
    monkeypatch.setenv("RQ_COLOR", "0")
    assert cli._style("boom", "31") == "boom"
    monkeypatch.setenv("RQ_COLOR", "1")
    assert cli._style("boom", "31") == "\x1b[31mboom\x1b[0m"
