"""Command-line driver: check, elab, run and the golden-corpus runner."""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import evaluator, ir, irtyping
from .errors import Diagnostic, ParseError, PolyeffError, StepCheckFailure, TypeCheckError
from .infer import check_program
from .parser import parse_program, parse_type, show_type
from .syntax import show_effect

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_METATHEORY = 3

TRACE_WIDTH = 200

_EXPECT = re.compile(r"\(\*\s*EXPECT:\s*(accept|reject|value|unhandled)\s+(.*?)\s*\*\)", re.S)


@dataclass
class RunConfig:
    subcommand: str
    paths: list
    fuel: int = evaluator.DEFAULT_FUEL
    check_steps: bool = False
    trace: Optional[str] = None
    fmt: str = "human"
    resume_renaming: bool = True

    def __post_init__(self):
        if self.fuel <= 0:
            raise ValueError("fuel must be positive")


@dataclass(frozen=True)
class CorpusCase:
    path: str
    kind: str
    text: str

    @property
    def expected(self) -> str:
        return f"{self.kind} {self.text}"


@dataclass
class CaseResult:
    path: str
    expected: str
    actual: str
    passed: bool

    def record(self) -> dict:
        return {"path": self.path, "expected": self.expected, "actual": self.actual, "pass": self.passed}


@dataclass
class Report:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> int:
        return sum(r.passed for r in self.results)

    @property
    def ok(self) -> bool:
        return self.passed == len(self.results)


def parse_expectation(path: str, src: str) -> CorpusCase:
    m = _EXPECT.search(src)
    if m is None:
        raise ValueError("missing (* EXPECT: ... *) header")
    return CorpusCase(path, m.group(1), " ".join(m.group(2).split()))


def _same_type(expected: str, actual) -> bool:
    try:
        return show_type(parse_type(expected)) == show_type(actual)
    except ParseError:
        return False


def _error_text(exc: Exception) -> str:
    return f"reject {exc}"


def evaluate_case(case: CorpusCase, src: str, cfg: RunConfig) -> CaseResult:
    """Run one corpus program through the pipeline and compare to its header."""
    def result(actual: str, passed: bool) -> CaseResult:
        return CaseResult(case.path, case.expected, actual, passed)

    try:
        prog = parse_program(src)
        res = check_program(prog, resume_renaming=cfg.resume_renaming)
    except (ParseError, TypeCheckError) as exc:
        return result(_error_text(exc), case.kind == "reject" and case.text in str(exc))
    if case.kind == "reject":
        return result(f"accept {show_type(res.type)}", False)

    # every accepted program must elaborate to a well-typed IR term
    try:
        ty, eff = irtyping.tc_term(None, None, res.ir, res.sigs)
    except PolyeffError as exc:
        return result(f"elaboration ill-typed: {exc}", False)
    if ty != res.type or eff != res.effect:
        return result(f"elaboration has {show_type(ty)} ! {show_effect(eff)}", False)

    if case.kind == "accept":
        return result(f"accept {show_type(res.type)}", _same_type(case.text, res.type))

    try:
        out, _ = evaluator.run(res.ir, fuel=cfg.fuel, check_steps=cfg.check_steps, sigs=res.sigs, trace_cap=0)
    except StepCheckFailure as exc:
        return result(f"step check failed: {exc}", False)
    if isinstance(out, evaluator.Value):
        actual = ir.show_value(out.value)
        return result(f"value {actual}", case.kind == "value" and actual == case.text)
    if isinstance(out, evaluator.UnhandledOp):
        return result(f"unhandled {out.op}", case.kind == "unhandled" and out.op == case.text)
    return result(evaluator.show_outcome(out), False)


def run_corpus(directory, cfg: RunConfig) -> Report:
    report = Report()
    for path in sorted(Path(directory).rglob("*.pef")):
        name = str(path)
        try:
            src = path.read_text(encoding="utf-8")
            case = parse_expectation(name, src)
        except (OSError, UnicodeDecodeError, ValueError) as exc:
            report.results.append(CaseResult(name, "?", f"unreadable: {exc}", False))
            continue
        report.results.append(evaluate_case(case, src, cfg))
    return report


# ---------------------------------------------------------------------------
# subcommands


def _emit(cfg: RunConfig, record: dict, human: str, stream=None) -> None:
    stream = stream or sys.stdout
    if cfg.fmt == "json":
        print(json.dumps(record, sort_keys=True), file=stream)
    else:
        print(human, file=stream)


def _diagnostics(path: str, src: str, exc: PolyeffError) -> list:
    if isinstance(exc, ParseError):
        return exc.diagnostics
    if isinstance(exc, TypeCheckError):
        return [Diagnostic.at(src, exc.span, str(exc))]
    return [Diagnostic("error", str(exc))]


def _report_error(cfg: RunConfig, path: str, src: str, exc: PolyeffError) -> None:
    for d in _diagnostics(path, src, exc):
        rec = {"path": path, "error": d.message, "line": d.line, "col": d.col}
        if isinstance(exc, TypeCheckError):
            rec["rule"] = exc.rule
        _emit(cfg, rec, d.render(path), sys.stderr if cfg.fmt == "human" else None)


def _front(cfg: RunConfig, path: str):
    src = Path(path).read_text(encoding="utf-8")
    try:
        return src, check_program(parse_program(src), resume_renaming=cfg.resume_renaming)
    except (ParseError, TypeCheckError) as exc:
        _report_error(cfg, path, src, exc)
        return src, None


def _cmd_check(cfg: RunConfig, path: str) -> int:
    _, res = _front(cfg, path)
    if res is None:
        return EXIT_FAIL
    ty = show_type(res.type)
    eff = show_effect(res.effect)
    _emit(cfg, {"path": path, "type": ty, "effect": eff}, f"{ty} ! {eff}")
    return EXIT_OK


def _cmd_elab(cfg: RunConfig, path: str) -> int:
    _, res = _front(cfg, path)
    if res is None:
        return EXIT_FAIL
    _emit(cfg, {"path": path, "ir": ir.show(res.ir), "type": show_type(res.type)}, ir.show(res.ir))
    return EXIT_OK


def _trace_cap(cfg: RunConfig):
    if cfg.trace == "full":
        return None
    return evaluator.TRACE_CAP if cfg.trace else 0


def _cmd_run(cfg: RunConfig, path: str) -> int:
    _, res = _front(cfg, path)
    if res is None:
        return EXIT_FAIL
    try:
        out, trace = evaluator.run(res.ir, fuel=cfg.fuel, check_steps=cfg.check_steps, sigs=res.sigs,
                                   trace_cap=_trace_cap(cfg))
    except StepCheckFailure as exc:
        rec = {"path": path, "step_check_failure": exc.diagnostic, "step": exc.index,
               "before": ir.show(exc.before), "after": ir.show(exc.after)}
        _emit(cfg, rec, f"{path}: error: step check failed at step {exc.index}: {exc.diagnostic}\n"
                        f"  before: {rec['before']}\n  after:  {rec['after']}")
        return EXIT_METATHEORY
    if cfg.trace:
        full = cfg.trace == "full"
        for i, (rule, term) in enumerate(trace.entries, 1):
            text = ir.show(term)
            if not full and len(text) > TRACE_WIDTH:
                text = text[:TRACE_WIDTH] + "..."
            _emit(cfg, {"step": i, "rule": rule, "term": text}, f"[{i}] {rule} : {text}")
        if trace.truncated:
            _emit(cfg, {"truncated": True}, f"... trace truncated after {len(trace.entries)} steps")
    text = evaluator.show_outcome(out, res.type)
    rec = {"path": path, "outcome": type(out).__name__, "result": text, "steps": trace.steps}
    if isinstance(out, evaluator.Stuck):
        rec["term"] = ir.show(out.term)
    _emit(cfg, rec, text)
    return EXIT_OK if isinstance(out, (evaluator.Value, evaluator.UnhandledOp)) else EXIT_FAIL


def _cmd_test(cfg: RunConfig, directory: str) -> int:
    report = run_corpus(directory, cfg)
    for r in report.results:
        line = f"{'PASS' if r.passed else 'FAIL'} {r.path}"
        if not r.passed:
            line += f"\n  expected: {r.expected}\n  actual:   {r.actual}"
        _emit(cfg, r.record(), line)
    if cfg.fmt == "human":
        print(f"{report.passed}/{len(report.results)} passed")
    return EXIT_OK if report.ok else EXIT_FAIL


_COMMANDS = {"check": _cmd_check, "elab": _cmd_elab, "run": _cmd_run, "test": _cmd_test}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyeff", description="Type checker and interpreter for .pef programs.")
    ap.add_argument("subcommand", choices=sorted(_COMMANDS))
    ap.add_argument("paths", nargs="+", metavar="PATH", help="source files, or a corpus directory for test")
    ap.add_argument("--fuel", type=int, default=None, help="maximum evaluation steps (env POLYEFF_FUEL)")
    ap.add_argument("--check-steps", action="store_true", help="typecheck every intermediate term")
    ap.add_argument("--trace", action="store_const", const="short",
                    help="print one line per step; --trace=full keeps every step untruncated")
    ap.add_argument("--trace-full", dest="trace", action="store_const", const="full", help=argparse.SUPPRESS)
    ap.add_argument("--format", dest="fmt", choices=["human", "json"], default="human")
    ap.add_argument("--no-resume-renaming", action="store_true",
                    help="unsound: share one set of type variables across all resumptions of a clause")
    return ap


def config_from_args(argv) -> RunConfig:
    ap = build_parser()
    # argparse has no flag with an optional `=value` that cannot also eat a positional
    argv = ["--trace-full" if a == "--trace=full" else a for a in argv]
    args = ap.parse_args(argv)
    try:
        fuel = args.fuel if args.fuel is not None else evaluator.default_fuel()
    except ValueError as exc:
        ap.error(str(exc))
    if fuel <= 0:
        ap.error("--fuel must be positive")
    return RunConfig(args.subcommand, args.paths, fuel, args.check_steps, args.trace, args.fmt,
                     not args.no_resume_renaming)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    code = EXIT_OK
    for path in cfg.paths:
        if cfg.subcommand == "test" and not os.path.isdir(path):
            print(f"polyeff: not a directory: {path}", file=sys.stderr)
            return EXIT_USAGE
        if cfg.subcommand != "test" and not os.path.isfile(path):
            print(f"polyeff: cannot read {path}", file=sys.stderr)
            return EXIT_USAGE
        code = max(code, _COMMANDS[cfg.subcommand](cfg, path))
    return code


if __name__ == "__main__":
    sys.exit(main())
