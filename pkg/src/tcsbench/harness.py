"""Pass@n evaluation protocol: prompt a model, extract Lean code from the
response, check it with an external verification server, and classify
failures.

Infrastructure failures (unreachable model or verifier, malformed replies)
never count as attempts: the trial is reissued, up to a hard cap of three
times the attempt budget.  A proof passes only when the server reports no
error-severity diagnostics and the code contains no ``sorry``.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests


# ── Code extraction ──

_FENCE_RE = re.compile(r"```([A-Za-z0-9_+-]*)[ \t]*\n(.*?)```", re.DOTALL)


def extract_lean(response: str) -> str | None:
    """The last ```lean4 fenced block; falls back to ```lean, then to the
    last untagged block containing the token `theorem`."""
    blocks = _FENCE_RE.findall(response or "")
    for tag in ("lean4", "lean"):
        tagged = [body for t, body in blocks if t == tag]
        if tagged:
            return tagged[-1]
    untagged = [
        body
        for t, body in blocks
        if t == "" and re.search(r"\btheorem\b", body)
    ]
    if untagged:
        return untagged[-1]
    return None


def contains_sorry(code: str) -> bool:
    return re.search(r"\bsorry\b", code) is not None


# ── Verifier client ──


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    line: int | None = None


@dataclass(frozen=True)
class VerifyResult:
    # verdict in {"pass", "fail", "infra_failure"}
    verdict: str
    diagnostics: tuple[Diagnostic, ...] = ()
    raw: str | None = None


class VerifierClient:
    """Client for a batch proof-checking server: POST /verify with
    ``{"codes": [...], "timeout": seconds}``."""

    def __init__(self, base_url: str, session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.session = session or requests.Session()

    def verify_batch(self, codes: list[str], timeout_s: float = 60.0) -> list[VerifyResult]:
        try:
            resp = self.session.post(
                f"{self.base_url}/verify",
                json={"codes": codes, "timeout": timeout_s},
                timeout=timeout_s + 30,
            )
            resp.raise_for_status()
            payload = resp.json()
            results = payload["results"]
            if len(results) != len(codes):
                raise KeyError("result count mismatch")
        except (requests.RequestException, ValueError, KeyError) as exc:
            raw = repr(exc)
            return [VerifyResult("infra_failure", raw=raw) for _ in codes]
        out = []
        for code, entry in zip(codes, results):
            try:
                diags = tuple(
                    Diagnostic(d.get("severity", "error"), d.get("message", ""), d.get("line"))
                    for d in entry.get("errors", [])
                )
                passed = bool(entry["pass"])
            except (AttributeError, KeyError, TypeError) as exc:
                out.append(VerifyResult("infra_failure", raw=repr(exc)))
                continue
            has_error = any(d.severity == "error" for d in diags)
            if passed and not has_error and not contains_sorry(code):
                out.append(VerifyResult("pass", diags))
            else:
                out.append(VerifyResult("fail", diags))
        return out


# ── Models ──


class ModelTransportError(RuntimeError):
    """Transient model-endpoint failure; the attempt is reissued."""


class ScriptedModel:
    """Deterministic stand-in: replays a per-prompt (or global) transcript.

    Entries may be response strings or the sentinel ``ModelTransportError``
    class/instance to simulate an outage.
    """

    def __init__(self, transcript):
        self._transcript = list(transcript)
        self._cursor = 0

    def complete(self, prompt: str) -> str:
        if self._cursor >= len(self._transcript):
            raise ModelTransportError("scripted transcript exhausted")
        entry = self._transcript[self._cursor]
        self._cursor += 1
        if entry is ModelTransportError or isinstance(entry, ModelTransportError):
            raise ModelTransportError("scripted outage")
        return entry


class HttpChatModel:
    """Chat-completion endpoint client; key from MODEL_API_KEY unless given."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        temperature: float = 0.0,
        timeout_s: float = 300.0,
        session: requests.Session | None = None,
    ):
        key = api_key or os.environ.get("MODEL_API_KEY")
        if not key:
            raise RuntimeError(
                "no API key: pass api_key or set the MODEL_API_KEY environment variable"
            )
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = key
        self.temperature = temperature
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        try:
            resp = self.session.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise ModelTransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise RuntimeError(
                f"model endpoint rejected credentials (HTTP {resp.status_code}); "
                "check MODEL_API_KEY"
            )
        try:
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (requests.RequestException, ValueError, KeyError, IndexError) as exc:
            raise ModelTransportError(repr(exc)) from exc


# ── Error taxonomy ──

ERROR_CATEGORIES = (
    "IrrelevantHallucination",
    "TacticMisuse",
    "VoluntaryGiveUp",
    "TypeMismatch",
    "Others",
)

_HALLUCINATION_RE = re.compile(r"unknown identifier|unknown constant|unknown tactic", re.I)
_TYPE_MISMATCH_RE = re.compile(r"type mismatch", re.I)
_TACTIC_MISUSE_RE = re.compile(r"unsolved goals|tactic .* failed|simp made no progress", re.I)


def classify_error(extracted_code: str | None, diagnostics: list[Diagnostic]) -> str:
    """Fixed-precedence bucketing of a failed attempt."""
    if extracted_code is None or contains_sorry(extracted_code):
        return "VoluntaryGiveUp"
    messages = " \n ".join(d.message for d in diagnostics)
    if _HALLUCINATION_RE.search(messages):
        return "IrrelevantHallucination"
    if _TYPE_MISMATCH_RE.search(messages):
        return "TypeMismatch"
    if _TACTIC_MISUSE_RE.search(messages):
        return "TacticMisuse"
    return "Others"


# ── Pass@n protocol ──


@dataclass(frozen=True)
class EvalChallenge:
    challenge_id: str
    prompt: str
    group: str = "all"
    denylist: tuple[str, ...] = ()


@dataclass(frozen=True)
class AttemptRecord:
    challenge_id: str
    attempt_index: int  # position among counted attempts; -1 for infra
    raw_response: str | None
    extracted_code: str | None
    verdict: str  # pass | fail | infra_failure
    diagnostics: tuple[Diagnostic, ...] = ()
    error_category: str | None = None

    def to_json(self) -> dict:
        return {
            "challenge_id": self.challenge_id,
            "attempt_index": self.attempt_index,
            "raw_response": self.raw_response,
            "extracted_code": self.extracted_code,
            "verdict": self.verdict,
            "diagnostics": [
                {"severity": d.severity, "message": d.message, "line": d.line}
                for d in self.diagnostics
            ],
            "error_category": self.error_category,
        }


@dataclass(frozen=True)
class ChallengeResult:
    challenge_id: str
    group: str
    solved: bool
    attempts_used: int  # counted (non-infra) attempts actually issued
    infra_exhausted: bool
    records: tuple[AttemptRecord, ...]

    def counted(self) -> list[AttemptRecord]:
        return [r for r in self.records if r.verdict != "infra_failure"]


@dataclass(frozen=True)
class PassAtNReport:
    n: int
    results: tuple[ChallengeResult, ...]

    def pass_at(self, k: int) -> float:
        if not self.results:
            return 0.0
        solved = sum(
            1
            for r in self.results
            if any(a.verdict == "pass" for a in r.counted()[:k])
        )
        return solved / len(self.results)

    def group_summary(self) -> dict[str, tuple[int, int]]:
        out: dict[str, list[int]] = {}
        for r in self.results:
            s, t = out.setdefault(r.group, [0, 0])
            out[r.group] = [s + int(r.solved), t + 1]
        return {g: (s, t) for g, (s, t) in out.items()}

    def error_tally(self) -> dict[str, int]:
        tally = {c: 0 for c in ERROR_CATEGORIES}
        for r in self.results:
            for a in r.counted():
                if a.verdict == "fail":
                    tally[a.error_category] += 1
        return tally

    def infra_exhausted_ids(self) -> list[str]:
        return [r.challenge_id for r in self.results if r.infra_exhausted]


def _run_one(
    challenge: EvalChallenge,
    model,
    verifier: VerifierClient,
    n: int,
    timeout_s: float,
) -> ChallengeResult:
    records: list[AttemptRecord] = []
    counted = 0
    issued = 0
    while counted < n and issued < 3 * n:
        issued += 1
        try:
            response = model.complete(challenge.prompt)
        except ModelTransportError:
            records.append(
                AttemptRecord(challenge.challenge_id, -1, None, None, "infra_failure")
            )
            continue
        code = extract_lean(response)
        if code is None or contains_sorry(code):
            verdict, diags = "fail", ()
        elif any(re.search(rf"\b{re.escape(t)}\b", code) for t in challenge.denylist):
            verdict = "fail"
            diags = (
                Diagnostic("error", "policy: denylisted tactic in proof"),
            )
        else:
            result = verifier.verify_batch([code], timeout_s)[0]
            verdict, diags = result.verdict, result.diagnostics
        if verdict == "infra_failure":
            records.append(
                AttemptRecord(challenge.challenge_id, -1, response, code, "infra_failure")
            )
            continue
        category = classify_error(code, list(diags)) if verdict == "fail" else None
        records.append(
            AttemptRecord(
                challenge.challenge_id, counted, response, code, verdict, tuple(diags), category
            )
        )
        counted += 1
        if verdict == "pass":
            break
    return ChallengeResult(
        challenge_id=challenge.challenge_id,
        group=challenge.group,
        solved=any(r.verdict == "pass" for r in records),
        attempts_used=counted,
        infra_exhausted=counted < n
        and issued >= 3 * n
        and not any(r.verdict == "pass" for r in records),
        records=tuple(records),
    )


def run_pass_at_n(
    challenges: list[EvalChallenge],
    model_factory,
    verifier: VerifierClient,
    n: int = 16,
    timeout_s: float = 60.0,
    max_concurrency: int = 1,
) -> PassAtNReport:
    """Evaluate every challenge with n counted attempts each.

    model_factory() must return a fresh model client per challenge so that
    scripted transcripts and HTTP sessions do not interleave across threads;
    results are ordered by input order regardless of completion order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if max_concurrency <= 1 or len(challenges) <= 1:
        results = [
            _run_one(c, model_factory(), verifier, n, timeout_s) for c in challenges
        ]
    else:
        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            futures = [
                pool.submit(_run_one, c, model_factory(), verifier, n, timeout_s)
                for c in challenges
            ]
            results = [f.result() for f in futures]
    return PassAtNReport(n=n, results=tuple(results))


# ── Reporting ──


def write_attempt_log(report: PassAtNReport, path: Path) -> None:
    with Path(path).open("w") as fh:
        for result in report.results:
            for record in result.records:
                fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")


def render_pass_table(reports: dict[str, PassAtNReport], groups: list[str] | None = None) -> str:
    """Solved-counts table: one row per model, one column per group, cells
    ``solved/total``, trailing total with percentage."""
    all_groups = groups or sorted(
        {g for rep in reports.values() for g in rep.group_summary()}
    )
    header = ["Model"] + all_groups + ["Total"]
    lines = [" | ".join(header)]
    for model_name, rep in reports.items():
        summary = rep.group_summary()
        cells = [model_name]
        solved_total, n_total = 0, 0
        for g in all_groups:
            s, t = summary.get(g, (0, 0))
            solved_total += s
            n_total += t
            cells.append(f"{s}/{t}")
        pct = (100.0 * solved_total / n_total) if n_total else 0.0
        cells.append(f"{solved_total}/{n_total} ({pct:.1f}%)")
        lines.append(" | ".join(cells))
    return "\n".join(lines) + "\n"


def render_error_table(reports: dict[str, PassAtNReport]) -> str:
    """Failure-mode distribution across all models' counted attempts."""
    tally = {c: 0 for c in ERROR_CATEGORIES}
    for rep in reports.values():
        for cat, count in rep.error_tally().items():
            tally[cat] += count
    total = sum(tally.values())
    lines = ["Error Message Type | % | #Errors"]
    for cat, count in sorted(tally.items(), key=lambda kv: -kv[1]):
        pct = (100.0 * count / total) if total else 0.0
        lines.append(f"{cat} | {pct:.2f}% | {count}")
    return "\n".join(lines) + "\n"


def write_csv_summary(reports: dict[str, PassAtNReport], path: Path) -> None:
    import csv

    groups = sorted({g for rep in reports.values() for g in rep.group_summary()})
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model"] + groups + ["solved", "total", "percent"])
        for model_name, rep in reports.items():
            summary = rep.group_summary()
            row = [model_name]
            solved_total, n_total = 0, 0
            for g in groups:
                s, t = summary.get(g, (0, 0))
                solved_total += s
                n_total += t
                row.append(f"{s}/{t}")
            pct = (100.0 * solved_total / n_total) if n_total else 0.0
            row.extend([solved_total, n_total, f"{pct:.1f}"])
            writer.writerow(row)


def save_pass_figure(reports: dict[str, PassAtNReport], path: Path) -> None:
    """Grouped bar chart of per-bucket solve rates, one bar group per model."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups = sorted({g for rep in reports.values() for g in rep.group_summary()})
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(groups)), 4))
    width = 0.8 / max(1, len(reports))
    for i, (model_name, rep) in enumerate(reports.items()):
        summary = rep.group_summary()
        rates = [
            (summary.get(g, (0, 0))[0] / summary.get(g, (0, 1))[1])
            if summary.get(g, (0, 0))[1]
            else 0.0
            for g in groups
        ]
        xs = [j + i * width for j in range(len(groups))]
        ax.bar(xs, rates, width=width, label=model_name)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(groups))])
    ax.set_xticklabels(groups, rotation=30, ha="right")
    ax.set_ylabel("solve rate")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_figure(reports: dict[str, PassAtNReport], path: Path) -> None:
    """Bar chart of the aggregated failure-mode distribution."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tally = {c: 0 for c in ERROR_CATEGORIES}
    for rep in reports.values():
        for cat, count in rep.error_tally().items():
            tally[cat] += count
    fig, ax = plt.subplots(figsize=(7, 4))
    cats = list(ERROR_CATEGORIES)
    ax.bar(cats, [tally[c] for c in cats], color="tab:red")
    ax.set_ylabel("# failed attempts")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
