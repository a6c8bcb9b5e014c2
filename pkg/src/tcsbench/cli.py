"""Command-line entry point: generation, proof emission, step-task
generation, evaluation and reporting as subcommands over a shared JSON
config.

Exit codes: 0 success, 1 usage error, 2 generation/verification failure,
3 external-service failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import bb_gen, harness, mba_gen, rewrite
from .mba_ast import LinearTerm
from .turing import DEFAULT_BB_BOUNDS

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GENERATION = 2
EXIT_EXTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class CliError(RuntimeError):
    def __init__(self, message: str, code: int = EXIT_GENERATION):
        super().__init__(message)
        self.code = code


# ── Run stamps (seed idempotency) ──


def _stamp_path(out_dir: Path, family: str) -> Path:
    return out_dir / f".run_stamp_{family}.json"


def _check_stamp(out_dir: Path, family: str, params: dict, force: bool) -> None:
    digest = hashlib.sha256(
        json.dumps(params, sort_keys=True).encode()
    ).hexdigest()
    stamp = _stamp_path(out_dir, family)
    if stamp.exists():
        prior = json.loads(stamp.read_text())
        if prior.get("digest") != digest and not force:
            raise CliError(
                f"{family}: existing outputs in {out_dir} were generated with "
                "different parameters; re-run with --force to overwrite"
            )
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp.write_text(json.dumps({"digest": digest, "params": params}, indent=2) + "\n")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_USAGE)


def _cfg(args, config: dict, key: str, default=None):
    """Flag value if given, else config-file value, else default."""
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    return config.get(key, default)


# ── Subcommands ──


def cmd_gen_bb(args) -> int:
    config = _load_config(args.config)
    out_dir = Path(_cfg(args, config, "out", "out"))
    seed = _cfg(args, config, "seed")
    if seed is None:
        raise CliError("gen-bb requires --seed", EXIT_USAGE)
    n_list = [int(s) for s in str(_cfg(args, config, "n", "1,2,3,4")).split(",")]
    per_class = int(_cfg(args, config, "per_class", 25))
    bounds = dict(DEFAULT_BB_BOUNDS)
    for item in (_cfg(args, config, "bounds", "") or "").split(","):
        if item:
            k, v = item.split("=")
            bounds[int(k)] = int(v)
    params = {"cmd": "gen-bb", "seed": seed, "n": n_list, "per_class": per_class,
              "bounds": {str(k): v for k, v in bounds.items()}}
    _check_stamp(out_dir, "bb", params, args.force)
    challenges = []
    for n in n_list:
        challenges.extend(
            bb_gen.sample_machines(n, per_class, per_class, seed + n, bounds)
        )
    manifest = bb_gen.write_challenges(challenges, out_dir)
    print(f"gen-bb: wrote {len(challenges)} challenges ({manifest})")
    return EXIT_OK


def _generate_mba(seed: int, linear: int, nonlinear: int, terms_min: int,
                  terms_max: int, rhs_count: int, wrap_budget: int):
    import random

    rng = random.Random(seed)
    equations = []
    for i in range(linear):
        n_terms = rng.randint(terms_min, terms_max)
        equations.append(mba_gen.generate_linear(seed * 100_003 + i, n_terms, rhs_count))
    for i in range(nonlinear):
        n_terms = rng.randint(terms_min, terms_max)
        base = mba_gen.generate_linear(seed * 100_003 + linear + i, n_terms, rhs_count)
        equations.append(mba_gen.make_nonlinear(base, seed * 7 + i, wrap_budget))
    return equations


def cmd_gen_mba(args) -> int:
    config = _load_config(args.config)
    out_dir = Path(_cfg(args, config, "out", "out"))
    seed = _cfg(args, config, "seed")
    if seed is None:
        raise CliError("gen-mba requires --seed", EXIT_USAGE)
    linear = int(_cfg(args, config, "linear", 100))
    nonlinear = int(_cfg(args, config, "nonlinear", 0))
    terms_min = int(_cfg(args, config, "terms_min", 6))
    terms_max = int(_cfg(args, config, "terms_max", 12))
    rhs_count = int(_cfg(args, config, "rhs_count", 1))
    wrap_budget = int(_cfg(args, config, "wrap_budget", 4))
    with_lemmas = bool(_cfg(args, config, "with_lemmas", False))
    params = {"cmd": "gen-mba", "seed": seed, "linear": linear,
              "nonlinear": nonlinear, "terms": [terms_min, terms_max],
              "rhs_count": rhs_count, "wrap_budget": wrap_budget,
              "with_lemmas": with_lemmas}
    _check_stamp(out_dir, "mba", params, args.force)
    try:
        equations = _generate_mba(seed, linear, nonlinear, terms_min, terms_max,
                                  rhs_count, wrap_budget)
    except (mba_gen.GenerationError, mba_gen.InternalConsistencyError) as exc:
        raise CliError(f"gen-mba: {exc}")
    for eq in equations:
        if not mba_gen.verify_equation(eq):
            raise CliError(f"gen-mba: oracle rejected {eq.theorem_name}")
    manifest = mba_gen.write_challenges(
        equations, out_dir, with_lemmas, mba_gen.library_text()
    )
    print(f"gen-mba: wrote {len(equations)} challenges ({manifest})")
    return EXIT_OK


def _equations_from_manifest(out_dir: Path):
    manifest = out_dir / "mba" / "manifest.jsonl"
    if not manifest.exists():
        raise CliError(f"no MBA manifest at {manifest}; run gen-mba first")
    for line in manifest.read_text().splitlines():
        row = json.loads(line)
        yield row


def _linear_eq_from_row(row: dict) -> mba_gen.MbaEquation:
    return mba_gen.MbaEquation(
        lhs_terms=tuple(LinearTerm(c, b) for c, b in row["lhs_terms"]),
        rhs_terms=tuple(LinearTerm(c, b) for c, b in row["rhs_terms"]),
        seed=row["seed"],
        id_override=row["challenge_id"],
    )


def cmd_emit_proofs(args) -> int:
    out_dir = Path(args.out)
    gt_dir = out_dir / "mba" / "ground_truth"
    gt_dir.mkdir(parents=True, exist_ok=True)
    emitted = skipped = 0
    for row in _equations_from_manifest(out_dir):
        if row["kind"] != "linear":
            skipped += 1
            continue
        eq = _linear_eq_from_row(row)
        try:
            trace = rewrite.normalize_with_trace(eq.lhs_expr, eq.rhs_expr)
        except rewrite.NormalizationError as exc:
            raise CliError(f"emit-proofs: {eq.theorem_name}: {exc}")
        script = rewrite.emit_proof_script(
            eq.theorem_name, mba_gen.render_mba_informal(eq), trace
        )
        (gt_dir / f"{eq.theorem_name}_proof.lean").write_text(script)
        emitted += 1
    print(f"emit-proofs: {emitted} ground-truth proofs, {skipped} nonlinear skipped")
    return EXIT_OK


def cmd_gen_steps(args) -> int:
    out_dir = Path(args.out)
    steps_dir = out_dir / "mba" / "steps"
    prompts_dir = steps_dir / "prompts"
    prompts_dir.mkdir(parents=True, exist_ok=True)
    library = mba_gen.library_text()
    total = 0
    for row in _equations_from_manifest(out_dir):
        if row["kind"] != "linear":
            continue
        eq = _linear_eq_from_row(row)
        informal = mba_gen.render_mba_informal(eq)
        trace = rewrite.normalize_with_trace(eq.lhs_expr, eq.rhs_expr)
        lemmas = rewrite.extract_step_lemmas(eq.theorem_name, trace)
        bundle = steps_dir / f"{eq.theorem_name}_steps.jsonl"
        with bundle.open("w") as fh:
            for j, lemma in enumerate(lemmas):
                prompt = rewrite.emit_step_challenge(
                    library, eq.theorem_name, informal, trace, lemmas, j
                )
                prompt_file = prompts_dir / f"{lemma.name}.txt"
                prompt_file.write_text(prompt)
                fh.write(
                    json.dumps(
                        {
                            "step_index": lemma.step_index,
                            "side": lemma.side,
                            "lemma_name": lemma.name,
                            "statement_text": lemma.statement_text,
                            "tactic_text": lemma.tactic_text,
                            "expected_rule": lemma.expected_rule,
                            "prompt_file": f"mba/steps/prompts/{lemma.name}.txt",
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
                total += 1
    print(f"gen-steps: wrote {total} step challenges under {steps_dir}")
    return EXIT_OK


def _eval_challenges(args, out_dir: Path) -> list[harness.EvalChallenge]:
    kind = args.kind
    denylist = tuple(t for t in (args.denylist or "").split(",") if t)
    challenges = []
    if kind == "bb":
        manifest = out_dir / "bb" / "manifest.jsonl"
        if not manifest.exists():
            raise CliError(f"no BB manifest at {manifest}")
        for line in manifest.read_text().splitlines():
            row = json.loads(line)
            stem = Path(row["file_name"]).stem
            prompt = (out_dir / "bb" / "prompts" / f"{stem}.txt").read_text()
            challenges.append(
                harness.EvalChallenge(
                    challenge_id=stem,
                    prompt=prompt,
                    group=f"BB({row['n_states']})",
                    denylist=denylist,
                )
            )
    else:
        if args.denylist is None:
            denylist = ("bv_decide",)
        for row in _equations_from_manifest(out_dir):
            prompt = (out_dir / row["prompt_file"]).read_text()
            group = row["kind"] + ("+lemmas" if row["with_lemmas"] else "")
            challenges.append(
                harness.EvalChallenge(
                    challenge_id=row["challenge_id"],
                    prompt=prompt,
                    group=group,
                    denylist=denylist,
                )
            )
    return challenges


def cmd_evaluate(args) -> int:
    out_dir = Path(args.out)
    challenges = _eval_challenges(args, out_dir)
    if args.scripted:
        transcript = json.loads(Path(args.scripted).read_text())

        def model_factory():
            return harness.ScriptedModel(list(transcript))

    elif args.model_base_url and args.model_name:
        def model_factory():
            return harness.HttpChatModel(args.model_base_url, args.model_name)

    else:
        raise CliError(
            "evaluate needs either --scripted FILE or --model-base-url + --model-name",
            EXIT_USAGE,
        )
    verifier = harness.VerifierClient(args.verifier)
    try:
        report = harness.run_pass_at_n(
            challenges,
            model_factory,
            verifier,
            n=args.n,
            timeout_s=args.timeout,
            max_concurrency=args.concurrency,
        )
    except RuntimeError as exc:
        raise CliError(f"evaluate: {exc}", EXIT_EXTERNAL)
    exhausted = report.infra_exhausted_ids()
    log_path = Path(args.attempts_log or out_dir / "attempts.jsonl")
    harness.write_attempt_log(report, log_path)
    print(
        f"evaluate: pass@{args.n} = {report.pass_at(args.n):.3f} "
        f"over {len(challenges)} challenges ({log_path})"
    )
    if exhausted:
        print(f"evaluate: infra-exhausted challenges: {', '.join(exhausted)}")
        return EXIT_EXTERNAL
    return EXIT_OK


def _report_from_log(path: Path, n: int, groups: dict[str, str]) -> harness.PassAtNReport:
    by_id: dict[str, list[harness.AttemptRecord]] = {}
    for line in Path(path).read_text().splitlines():
        row = json.loads(line)
        rec = harness.AttemptRecord(
            challenge_id=row["challenge_id"],
            attempt_index=row["attempt_index"],
            raw_response=row.get("raw_response"),
            extracted_code=row.get("extracted_code"),
            verdict=row["verdict"],
            diagnostics=tuple(
                harness.Diagnostic(d["severity"], d["message"], d.get("line"))
                for d in row.get("diagnostics", [])
            ),
            error_category=row.get("error_category"),
        )
        by_id.setdefault(rec.challenge_id, []).append(rec)
    results = []
    for cid, records in by_id.items():
        counted = [r for r in records if r.verdict != "infra_failure"]
        solved = any(r.verdict == "pass" for r in counted)
        results.append(
            harness.ChallengeResult(
                challenge_id=cid,
                group=groups.get(cid, "all"),
                solved=solved,
                attempts_used=len(counted),
                infra_exhausted=len(counted) < n and not solved,
                records=tuple(records),
            )
        )
    return harness.PassAtNReport(n=n, results=tuple(results))


def _load_groups(out_dir: Path) -> dict[str, str]:
    groups: dict[str, str] = {}
    bb_manifest = out_dir / "bb" / "manifest.jsonl"
    if bb_manifest.exists():
        for line in bb_manifest.read_text().splitlines():
            row = json.loads(line)
            groups[Path(row["file_name"]).stem] = f"BB({row['n_states']})"
    mba_manifest = out_dir / "mba" / "manifest.jsonl"
    if mba_manifest.exists():
        for line in mba_manifest.read_text().splitlines():
            row = json.loads(line)
            groups[row["challenge_id"]] = row["kind"] + (
                "+lemmas" if row["with_lemmas"] else ""
            )
    return groups


def cmd_classify_errors(args) -> int:
    out_dir = Path(args.out)
    report = _report_from_log(Path(args.attempts_log), args.n, _load_groups(out_dir))
    tally = report.error_tally()
    total = sum(tally.values())
    for cat in harness.ERROR_CATEGORIES:
        pct = (100.0 * tally[cat] / total) if total else 0.0
        print(f"{cat}: {pct:.2f}% ({tally[cat]})")
    return EXIT_OK


def cmd_report(args) -> int:
    out_dir = Path(args.out)
    groups = _load_groups(out_dir)
    reports = {}
    for spec_item in args.attempts:
        if "=" in spec_item:
            name, path = spec_item.split("=", 1)
        else:
            name, path = Path(spec_item).stem, spec_item
        reports[name] = _report_from_log(Path(path), args.n, groups)
    report_dir = Path(args.report_dir or out_dir / "report")
    report_dir.mkdir(parents=True, exist_ok=True)
    pass_table = harness.render_pass_table(reports)
    error_table = harness.render_error_table(reports)
    (report_dir / "summary.txt").write_text(pass_table + "\n" + error_table)
    harness.write_csv_summary(reports, report_dir / "summary.csv")
    harness.save_pass_figure(reports, report_dir / "pass_rates.png")
    harness.save_error_figure(reports, report_dir / "error_modes.png")
    print(pass_table)
    print(error_table)
    print(f"report: wrote summary + figures under {report_dir}")
    return EXIT_OK


# ── Argument wiring ──


def build_parser() -> _Parser:
    parser = _Parser(prog="tcsbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output directory (default: out)")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--force", action="store_true",
                       help="overwrite outputs generated with different parameters")

    p = sub.add_parser("gen-bb", help="generate halting-problem challenges")
    common(p)
    p.add_argument("--n", default=None, help="comma-separated state counts")
    p.add_argument("--per-class", type=int, default=None, dest="per_class")
    p.add_argument("--bounds", default=None,
                   help="step-bound overrides, e.g. 4=107,5=47176870")
    p.set_defaults(func=cmd_gen_bb)

    p = sub.add_parser("gen-mba", help="generate MBA equivalence challenges")
    common(p)
    p.add_argument("--linear", type=int, default=None)
    p.add_argument("--nonlinear", type=int, default=None)
    p.add_argument("--terms-min", type=int, default=None, dest="terms_min")
    p.add_argument("--terms-max", type=int, default=None, dest="terms_max")
    p.add_argument("--rhs-count", type=int, default=None, dest="rhs_count")
    p.add_argument("--wrap-budget", type=int, default=None, dest="wrap_budget")
    p.add_argument("--with-lemmas", action="store_const", const=True, default=None,
                   dest="with_lemmas", help="embed the lemma library in prompts")
    p.set_defaults(func=cmd_gen_mba)

    p = sub.add_parser("emit-proofs", help="emit ground-truth proofs for linear MBA")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_emit_proofs)

    p = sub.add_parser("gen-steps", help="emit step-lemma challenges for linear MBA")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_gen_steps)

    p = sub.add_parser("evaluate", help="run the pass@n protocol")
    p.add_argument("--out", default="out")
    p.add_argument("--kind", choices=("bb", "mba"), required=True)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--verifier", default="http://127.0.0.1:8000")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--concurrency", type=int, default=1)
    p.add_argument("--denylist", default=None,
                   help="comma-separated banned tactics (default for mba: bv_decide)")
    p.add_argument("--scripted", default=None,
                   help="JSON transcript file for a scripted model")
    p.add_argument("--model-base-url", default=None)
    p.add_argument("--model-name", default=None)
    p.add_argument("--attempts-log", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("classify-errors", help="tally failure categories from a log")
    p.add_argument("--out", default="out")
    p.add_argument("--attempts-log", required=True)
    p.add_argument("--n", type=int, default=16)
    p.set_defaults(func=cmd_classify_errors)

    p = sub.add_parser("report", help="render summary tables and figures")
    p.add_argument("--out", default="out")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--report-dir", default=None)
    p.add_argument("attempts", nargs="+",
                   help="attempt logs, each `name=path` or a bare path")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (bb_gen.SamplingBudgetError, rewrite.NormalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERATION


if __name__ == "__main__":
    sys.exit(main())
