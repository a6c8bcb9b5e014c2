"""Command-line interface: generation runs, stamp idempotency, proof and
step emission, scripted evaluation and reporting."""

import json
from pathlib import Path

import pytest

from tcsbench.cli import main

GOOD_RESPONSE = "```lean4\ntheorem ok : True := by\n  trivial\n```"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture()
def bb_out(tmp_path, capsys):
    out = tmp_path / "out"
    code, *_ = run(["gen-bb", "--out", str(out), "--seed", "5", "--n", "1,2",
                    "--per-class", "3"], capsys)
    assert code == 0
    return out


@pytest.fixture()
def mba_out(tmp_path, capsys):
    out = tmp_path / "out"
    code, *_ = run(["gen-mba", "--out", str(out), "--seed", "9", "--linear", "3",
                    "--nonlinear", "1", "--terms-min", "6", "--terms-max", "8"],
                   capsys)
    assert code == 0
    return out


# ── Generation + stamps ──


def test_gen_bb_layout_and_idempotency(bb_out, capsys):
    manifest = bb_out / "bb" / "manifest.jsonl"
    rows = [json.loads(l) for l in manifest.read_text().splitlines()]
    assert len(rows) == 12  # 2 state counts x 3 halting x 2 classes
    before = {p: p.read_bytes() for p in bb_out.rglob("*.lean")}
    code, *_ = run(["gen-bb", "--out", str(bb_out), "--seed", "5", "--n", "1,2",
                    "--per-class", "3"], capsys)
    assert code == 0
    assert {p: p.read_bytes() for p in bb_out.rglob("*.lean")} == before


def test_gen_bb_stamp_refuses_parameter_change(bb_out, capsys):
    code, _, err = run(["gen-bb", "--out", str(bb_out), "--seed", "6", "--n", "1,2",
                        "--per-class", "3"], capsys)
    assert code == 2
    assert "--force" in err
    code, *_ = run(["gen-bb", "--out", str(bb_out), "--seed", "6", "--n", "1",
                    "--per-class", "2", "--force"], capsys)
    assert code == 0


def test_gen_bb_requires_seed(tmp_path, capsys):
    code, _, err = run(["gen-bb", "--out", str(tmp_path / "o")], capsys)
    assert code == 1
    assert "--seed" in err


def test_gen_mba_layout(mba_out):
    rows = [json.loads(l) for l in (mba_out / "mba" / "manifest.jsonl").read_text().splitlines()]
    assert len(rows) == 4
    kinds = [r["kind"] for r in rows]
    assert kinds.count("linear") == 3 and kinds.count("nonlinear") == 1
    for r in rows:
        assert (mba_out / r["lean_file"]).exists()
        assert (mba_out / r["prompt_file"]).exists()


def test_gen_mba_rerun_byte_identical(mba_out, capsys):
    before = {p: p.read_bytes() for p in mba_out.rglob("*") if p.is_file()}
    code, *_ = run(["gen-mba", "--out", str(mba_out), "--seed", "9", "--linear", "3",
                    "--nonlinear", "1", "--terms-min", "6", "--terms-max", "8"],
                   capsys)
    assert code == 0
    assert {p: p.read_bytes() for p in mba_out.rglob("*") if p.is_file()} == before


def test_config_file_supplies_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 4, "linear": 2, "nonlinear": 0,
                               "out": str(tmp_path / "o")}))
    code, out, _ = run(["gen-mba", "--config", str(cfg)], capsys)
    assert code == 0
    assert "wrote 2 challenges" in out


# ── Proof / step emission ──


def test_emit_proofs_and_gen_steps(mba_out, capsys):
    code, out, _ = run(["emit-proofs", "--out", str(mba_out)], capsys)
    assert code == 0
    assert "3 ground-truth proofs, 1 nonlinear skipped" in out
    proofs = list((mba_out / "mba" / "ground_truth").glob("*_proof.lean"))
    assert len(proofs) == 3
    assert all(p.read_text().rstrip().endswith("simp") for p in proofs)

    code, out, _ = run(["gen-steps", "--out", str(mba_out)], capsys)
    assert code == 0
    bundles = list((mba_out / "mba" / "steps").glob("*_steps.jsonl"))
    assert len(bundles) == 3
    for bundle in bundles:
        for line in bundle.read_text().splitlines():
            row = json.loads(line)
            assert set(row) == {"step_index", "side", "lemma_name", "statement_text",
                                "tactic_text", "expected_rule", "prompt_file"}
            assert (mba_out / row["prompt_file"]).read_text().startswith("Theorem library:")


def test_emit_proofs_without_manifest_fails(tmp_path, capsys):
    code, _, err = run(["emit-proofs", "--out", str(tmp_path / "empty")], capsys)
    assert code == 2
    assert "gen-mba" in err


# ── Evaluation ──


def test_evaluate_scripted_bb(bb_out, tmp_path, capsys, mock_verifier_url):
    script = tmp_path / "transcript.json"
    script.write_text(json.dumps([GOOD_RESPONSE] * 4))
    code, out, _ = run(
        ["evaluate", "--out", str(bb_out), "--kind", "bb", "--n", "2",
         "--scripted", str(script), "--verifier", mock_verifier_url],
        capsys,
    )
    assert code == 0
    assert "pass@2 = 1.000" in out
    rows = [json.loads(l) for l in (bb_out / "attempts.jsonl").read_text().splitlines()]
    assert len(rows) == 12  # one first-attempt pass per challenge
    assert all(r["verdict"] == "pass" for r in rows)


def test_evaluate_mba_applies_default_denylist(mba_out, tmp_path, capsys, mock_verifier_url):
    script = tmp_path / "transcript.json"
    script.write_text(json.dumps(
        ["```lean4\ntheorem t : x = y := by bv_decide\n```"] * 3
    ))
    code, out, _ = run(
        ["evaluate", "--out", str(mba_out), "--kind", "mba", "--n", "1",
         "--scripted", str(script), "--verifier", mock_verifier_url],
        capsys,
    )
    assert code == 0
    assert "pass@1 = 0.000" in out
    rows = [json.loads(l) for l in (mba_out / "attempts.jsonl").read_text().splitlines()]
    assert all("denylisted" in r["diagnostics"][0]["message"] for r in rows)


def test_evaluate_requires_a_model_source(bb_out, capsys, mock_verifier_url):
    code, _, err = run(
        ["evaluate", "--out", str(bb_out), "--kind", "bb",
         "--verifier", mock_verifier_url],
        capsys,
    )
    assert code == 1
    assert "--scripted" in err


def test_evaluate_exit_3_when_model_always_out(bb_out, tmp_path, capsys, mock_verifier_url):
    # Empty transcript -> every issuance is a transport failure.
    script = tmp_path / "transcript.json"
    script.write_text(json.dumps([]))
    code, out, _ = run(
        ["evaluate", "--out", str(bb_out), "--kind", "bb", "--n", "1",
         "--scripted", str(script), "--verifier", mock_verifier_url],
        capsys,
    )
    assert code == 3
    assert "infra-exhausted" in out


# ── Classification + report ──


@pytest.fixture()
def attempts_log(mba_out, tmp_path, capsys, mock_verifier_url):
    responses = [
        "```lean4\ntheorem t : True := by sorry\n```",
        GOOD_RESPONSE + "\n-- MOCK_UNSOLVED inside prose only",
    ]
    script = tmp_path / "transcript.json"
    script.write_text(json.dumps(responses))
    code, *_ = run(
        ["evaluate", "--out", str(mba_out), "--kind", "mba", "--n", "2",
         "--scripted", str(script), "--verifier", mock_verifier_url],
        capsys,
    )
    assert code == 0
    return mba_out / "attempts.jsonl"


def test_classify_errors_output(mba_out, attempts_log, capsys):
    code, out, _ = run(
        ["classify-errors", "--out", str(mba_out), "--attempts-log", str(attempts_log),
         "--n", "2"],
        capsys,
    )
    assert code == 0
    assert "VoluntaryGiveUp" in out
    assert out.count("%") == 5


def test_report_outputs(mba_out, attempts_log, tmp_path, capsys):
    rep = tmp_path / "rep"
    code, out, _ = run(
        ["report", "--out", str(mba_out), "--n", "2", "--report-dir", str(rep),
         f"model-x={attempts_log}"],
        capsys,
    )
    assert code == 0
    assert (rep / "summary.txt").read_text().count("model-x") >= 1
    assert "linear" in (rep / "summary.csv").read_text()
    for png in ("pass_rates.png", "error_modes.png"):
        assert (rep / png).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 1
    assert "error:" in capsys.readouterr().err
