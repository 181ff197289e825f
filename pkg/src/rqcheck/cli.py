"""Command-line driver: check, eval, sep, corpus.

Exit codes: 0 accepted, 1 rejected or property violation, 2 parse or
internal error, 3 fuel exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from importlib import resources
from typing import List, Optional

from .errors import RqError
from .machine import (
    DEFAULT_EVAL_FUEL, check_preservation, eval_term, separation_experiment,
)
from .subtyping import DEFAULT_FUEL
from .surface import (
    ParseError, ScopeError, SourceProgram, elaborate, parse, parse_pair,
    pretty,
)
from .syntax import StoreTyping, TermBind, TypeEnv
from .typecheck import CheckError, TypingResult, check_program, synthesize

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_ERROR = 2
EXIT_FUEL = 3


def _color_enabled() -> bool:
    return sys.stdout.isatty() and os.environ.get("RQ_COLOR", "1") != "0"


def _style(text: str, code: str) -> str:
    if _color_enabled():
        return f"\x1b[{code}m{text}\x1b[0m"
    return text


def check_source(text: str, fuel: int = DEFAULT_FUEL) -> TypingResult:
    """Check a program: declarations stay in the environment and the
    final expression's qualified type is reported under them."""
    prog = parse(text)
    env = TypeEnv()
    store = StoreTyping()
    for decl in prog.decls:
        if decl[0] == "assume":
            _, name, ann = decl
            env = env.extended(TermBind(name, ann))
        else:
            _, name, rhs = decl
            result = synthesize(env, store, env.dom(), rhs, fuel)
            env = env.extended(TermBind(name, result.qtype))
    return synthesize(env, store, env.dom(), prog.main, fuel)


def _parse_program_file(path: str) -> str:
    with open(path, encoding="utf-8") as handle:
        return handle.read()


def cmd_check(args) -> int:
    try:
        text = _parse_program_file(args.path)
        result = check_source(text, args.fuel)
    except (ParseError, OSError) as exc:
        if args.json:
            print(json.dumps({"status": "error", "error": {"detail": str(exc)}}))
        else:
            print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ScopeError as exc:
        return _report_rejection(args, "ScopeError", str(exc))
    except CheckError as exc:
        return _report_rejection(args, exc.code, exc.detail)
    if args.json:
        print(json.dumps({
            "status": "accepted",
            "qtype": pretty(result.qtype),
            "trace": result.trace,
        }))
    else:
        print(pretty(result.qtype))
    return EXIT_OK


def _report_rejection(args, code: str, detail: str) -> int:
    if args.json:
        print(json.dumps({"status": "rejected",
                          "error": {"code": code, "detail": detail}}))
    else:
        print(_style(f"type error [{code}]", "31") + f": {detail}", file=sys.stderr)
    return EXIT_REJECTED


def cmd_eval(args) -> int:
    try:
        text = _parse_program_file(args.path)
        prog = parse(text)
        term = elaborate(prog)
        check_program(TypeEnv(), StoreTyping(), term)
    except (ParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ScopeError as exc:
        print(f"scope error: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except CheckError as exc:
        print(_style(f"type error [{exc.code}]", "31") + f": {exc.detail}",
              file=sys.stderr)
        return EXIT_REJECTED

    if args.verify_preservation:
        report = check_preservation(term, StoreTyping(), fuel=args.fuel)
        for s in report.steps:
            witness = "{" + ", ".join(sorted(a.render() for a in s.witness)) + "}"
            status = "ok" if s.ok else "VIOLATION"
            line = (f"step {s.index} [{s.rule}] growth witness {witness}: "
                    f"{pretty(s.q_before)} -> {pretty(s.q_after)} {status}")
            if args.json:
                print(json.dumps({"step": s.index, "rule": s.rule,
                                  "witness": sorted(a.render() for a in s.witness),
                                  "ok": s.ok}))
            else:
                print(line)
        if report.status == "fuel":
            print("fuel exhausted", file=sys.stderr)
            return EXIT_FUEL
        if not report.ok:
            print(_style("preservation violated", "31"), file=sys.stderr)
            return EXIT_REJECTED
        print(f"value {pretty(report.final_term)}; all steps verified")
        return EXIT_OK

    result = eval_term(term, fuel=args.fuel)
    if args.trace:
        for e in result.events:
            record = {"rule": e.rule}
            if e.loc is not None:
                record["loc"] = e.loc
            print(json.dumps(record))
    if result.status == "fuel":
        print("fuel exhausted", file=sys.stderr)
        return EXIT_FUEL
    if result.status == "stuck":
        print(f"stuck: {result.reason}", file=sys.stderr)
        return EXIT_REJECTED
    if args.json:
        print(json.dumps({"status": "value", "value": pretty(result.term),
                          "store_size": len(result.store), "steps": result.steps}))
    else:
        print(f"value {pretty(result.term)} (store size {len(result.store)}, "
              f"{result.steps} steps)")
    return EXIT_OK


def cmd_sep(args) -> int:
    try:
        text = _parse_program_file(args.path)
        first, second = parse_pair(text)
        t1, t2 = elaborate(first), elaborate(second)
        check_program(TypeEnv(), StoreTyping(), t1)
        check_program(TypeEnv(), StoreTyping(), t2)
    except (ParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ScopeError as exc:
        print(f"scope error: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except CheckError as exc:
        print(_style(f"type error [{exc.code}]", "31") + f": {exc.detail}",
              file=sys.stderr)
        return EXIT_REJECTED
    report = separation_experiment(t1, t2, StoreTyping(), fuel=args.fuel)
    if not report.premise_ok:
        print(f"OverlapViolation: {report.detail}", file=sys.stderr)
        return EXIT_REJECTED
    for line in report.steps:
        print(line)
    if report.ok:
        print("verdict SEPARATE")
        return EXIT_OK
    print(_style(f"SeparationViolation: {report.detail}", "31"), file=sys.stderr)
    return EXIT_REJECTED


# ---------------------------------------------------------------------------
# Corpus


@dataclass
class CorpusEntry:
    name: str
    file: str
    kind: str                  # check | eval | sep
    expect: dict
    tags: List[str]


def load_corpus() -> List[CorpusEntry]:
    root = resources.files("rqcheck") / "corpus"
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    return [CorpusEntry(e["name"], e["file"], e["kind"], e["expect"],
                        e.get("tags", []))
            for e in manifest]


def corpus_text(entry: CorpusEntry) -> str:
    root = resources.files("rqcheck") / "corpus"
    return (root / entry.file).read_text(encoding="utf-8")


def run_corpus_entry(entry: CorpusEntry, fuel: int = DEFAULT_EVAL_FUEL) -> Optional[str]:
    """Run one entry; returns None on success, else a mismatch message."""
    text = corpus_text(entry)
    if entry.kind == "check":
        try:
            result = check_source(text)
        except ParseError:
            got = ("error", "ParseError")
        except ScopeError as exc:
            got = ("rejected", "ScopeError")
        except CheckError as exc:
            got = ("rejected", exc.code)
        else:
            got = ("accepted", pretty(result.qtype))
        if entry.expect["status"] == "accepted":
            want = ("accepted", entry.expect["type"])
        elif entry.expect["status"] == "error":
            want = ("error", entry.expect["error"])
        else:
            want = ("rejected", entry.expect["error"])
        if got != want:
            return f"expected {want}, got {got}"
        return None
    if entry.kind == "eval":
        prog = parse(text)
        term = elaborate(prog)
        check_program(TypeEnv(), StoreTyping(), term)
        result = eval_term(term, fuel=entry.expect.get("fuel", fuel))
        if result.status != "value":
            if entry.expect.get("status") == result.status:
                return None
            return f"expected a value, got {result.status} ({result.reason})"
        got_value = pretty(result.term)
        if got_value != entry.expect["value"]:
            return f"expected value {entry.expect['value']}, got {got_value}"
        if "store_size" in entry.expect and len(result.store) != entry.expect["store_size"]:
            return (f"expected store size {entry.expect['store_size']}, "
                    f"got {len(result.store)}")
        return None
    if entry.kind == "sep":
        first, second = parse_pair(text)
        t1, t2 = elaborate(first), elaborate(second)
        report = separation_experiment(t1, t2, StoreTyping(), fuel=fuel)
        want = entry.expect.get("verdict", "SEPARATE")
        got = "SEPARATE" if report.ok else f"violation: {report.detail}"
        if (want == "SEPARATE") != report.ok:
            return f"expected {want}, got {got}"
        return None
    return f"unknown corpus kind {entry.kind}"


def cmd_corpus(args) -> int:
    entries = load_corpus()
    if args.filter:
        entries = [e for e in entries
                   if args.filter in e.name or args.filter in e.tags]
    passed, failed = 0, 0
    for entry in entries:
        try:
            mismatch = run_corpus_entry(entry)
        except RqError as exc:
            mismatch = f"unexpected failure: {exc}"
        if mismatch is None:
            passed += 1
            print(f"  ok   {entry.name}")
        else:
            failed += 1
            print(_style(f"  FAIL {entry.name}: {mismatch}", "31"))
    print(f"{passed} passed, {failed} failed, {len(entries)} total")
    return EXIT_OK if failed == 0 else EXIT_REJECTED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rq",
        description="Typechecker and evaluator for a calculus with "
                    "reachability qualifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="typecheck a .rq file")
    p_check.add_argument("path")
    p_check.add_argument("--json", action="store_true")
    p_check.add_argument("--fuel", type=int, default=DEFAULT_FUEL,
                         help="subtyping fuel")
    p_check.set_defaults(func=cmd_check)

    p_eval = sub.add_parser("eval", help="evaluate a closed .rq file")
    p_eval.add_argument("path")
    p_eval.add_argument("--json", action="store_true")
    p_eval.add_argument("--fuel", type=int, default=DEFAULT_EVAL_FUEL)
    p_eval.add_argument("--trace", action="store_true",
                        help="print one JSON line per reduction event")
    p_eval.add_argument("--verify-preservation", action="store_true",
                        help="re-typecheck after every step")
    p_eval.set_defaults(func=cmd_eval)

    p_sep = sub.add_parser("sep", help="run two expressions (separated by ';;') "
                                       "interleaved and check separation")
    p_sep.add_argument("path")
    p_sep.add_argument("--json", action="store_true")
    p_sep.add_argument("--fuel", type=int, default=DEFAULT_EVAL_FUEL)
    p_sep.set_defaults(func=cmd_sep)

    p_corpus = sub.add_parser("corpus", help="run the bundled example corpus")
    p_corpus.add_argument("--filter", default="",
                          help="only run entries whose name or tag contains this")
    p_corpus.set_defaults(func=cmd_corpus)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
