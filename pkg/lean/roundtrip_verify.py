#!/usr/bin/env python3
"""Round-trip verification of emitted proof artifacts through a real
proof-checking server.

Checks the vendored lemma library first, then every ``.lean`` file under
the given artifact directories (ground-truth proofs, step lemmas, BB
statements), prepending the library to files that cite ``bv32_*`` rules.
Prints one pass/fail line per file and exits nonzero on any rejection.

When no server is reachable the script exits with status 75 (EX_TEMPFAIL)
and an explicit "secondary not available" message so callers can treat
the run as skipped rather than failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from tcsbench.harness import VerifierClient

HERE = Path(__file__).parent
LIBRARY = HERE / "Bv32Lemmas.lean"
EXIT_UNAVAILABLE = 75


def collect(paths: list[str]) -> list[Path]:
    files: list[Path] = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            files.extend(sorted(path.rglob("*.lean")))
        elif path.exists():
            files.append(path)
        else:
            sys.exit(f"error: no such file or directory: {p}")
    return files


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("artifacts", nargs="*",
                        help="directories or .lean files to verify")
    parser.add_argument("--server", default="http://127.0.0.1:8000",
                        help="proof-checking server base URL")
    parser.add_argument("--timeout", type=float, default=600.0)
    parser.add_argument("--batch-size", type=int, default=8)
    args = parser.parse_args(argv)

    library = LIBRARY.read_text()
    client = VerifierClient(args.server)
    (probe,) = client.verify_batch([library], args.timeout)
    if probe.verdict == "infra_failure":
        print(f"secondary not available: no proof-checking server at {args.server}")
        return EXIT_UNAVAILABLE
    statuses = {LIBRARY: probe.verdict}

    files = collect(args.artifacts)
    for start in range(0, len(files), args.batch_size):
        chunk = files[start : start + args.batch_size]
        codes = []
        for f in chunk:
            text = f.read_text()
            if "bv32_" in text and "theorem bv32_and_not_self" not in text:
                text = library + "\n" + text
            codes.append(text)
        for f, result in zip(chunk, client.verify_batch(codes, args.timeout)):
            statuses[f] = result.verdict
            if result.verdict != "pass":
                for d in result.diagnostics:
                    print(f"  {f.name}: {d.severity}: {d.message.splitlines()[0]}")

    failures = 0
    for f, verdict in statuses.items():
        print(f"{'PASS' if verdict == 'pass' else 'FAIL'} {f}")
        failures += verdict != "pass"
    print(f"roundtrip: {len(statuses) - failures}/{len(statuses)} verified")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
