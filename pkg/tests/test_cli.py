import json

import pytest

from polyeff import cli


def write(tmp_path, name, text):
    p = tmp_path / name
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return p


def test_run_choose(capsys):
    assert cli.main(["run", "corpus/eval/choose.pef"]) == 0
    assert capsys.readouterr().out.strip() == "11 : int"


def test_check_counterexample(capsys):
    assert cli.main(["check", "corpus/reject/counterexample.pef"]) == 1
    err = capsys.readouterr().err
    assert "TS-Resume" in err
    assert err.startswith("corpus/reject/counterexample.pef:9:")


def test_check_prints_type_and_effect(capsys):
    assert cli.main(["check", "corpus/eval/unhandled_fail.pef"]) == 0
    assert capsys.readouterr().out.strip() == "int ! {fail}"


def test_check_json(capsys):
    assert cli.main(["check", "--format", "json", "corpus/reject/unbound.pef"]) == 1
    rec = json.loads(capsys.readouterr().out)
    assert rec["rule"] == "TS-Var" and rec["line"] == 2


def test_elab_is_stable(capsys):
    cli.main(["elab", "corpus/eval/choose.pef"])
    first = capsys.readouterr().out
    cli.main(["elab", "corpus/eval/choose.pef"])
    assert capsys.readouterr().out == first
    assert first.startswith("(handle ")


def test_corpus_all_pass(capsys):
    assert cli.main(["test", "corpus", "--check-steps"]) == 0
    out = capsys.readouterr().out.splitlines()
    n = len([l for l in out if l.startswith("PASS")])
    assert out[-1] == f"{n}/{n} passed"


def test_corpus_json_sorted(capsys):
    cli.main(["test", "corpus", "--format", "json"])
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert [r["path"] for r in recs] == sorted(r["path"] for r in recs)
    assert set(recs[0]) == {"path", "expected", "actual", "pass"}


def test_empty_corpus(tmp_path, capsys):
    assert cli.main(["test", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "0/0 passed"


def test_one_accept_case(tmp_path, capsys):
    write(tmp_path, "accept/one.pef", "(* EXPECT: accept int *)\n1 + 1")
    assert cli.main(["test", str(tmp_path)]) == 0
    assert "1/1 passed" in capsys.readouterr().out


def test_reject_case_that_typechecks(tmp_path, capsys):
    write(tmp_path, "reject/oops.pef", "(* EXPECT: reject TS-Resume *)\n1")
    assert cli.main(["test", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "expected: reject TS-Resume" in out and "actual:   accept int" in out


def test_unreadable_case_is_a_failure(tmp_path, capsys):
    write(tmp_path, "a.pef", "1")  # no header
    (tmp_path / "b.pef").write_bytes(b"\xff\xfe")
    write(tmp_path, "c.pef", "(* EXPECT: value 2 *)\n1 + 1")
    assert cli.main(["test", str(tmp_path), "--format", "json"]) == 1
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert [r["pass"] for r in recs] == [False, False, True]


def test_value_mismatch(tmp_path, capsys):
    write(tmp_path, "v.pef", "(* EXPECT: value 3 *)\n1 + 1")
    assert cli.main(["test", str(tmp_path)]) == 1


def test_unsound_flag(capsys):
    code = cli.main(["run", "--no-resume-renaming", "corpus/reject/counterexample.pef"])
    assert code == 1
    assert capsys.readouterr().out.strip() == "stuck: delta undefined: true + 1"


def test_step_check_failure_exit_code(capsys):
    code = cli.main(["run", "--no-resume-renaming", "--check-steps", "corpus/reject/counterexample.pef"])
    assert code == 3


def test_trace(capsys):
    cli.main(["run", "--trace", "corpus/eval/arith.pef"])
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("[1] R-Const : ")
    assert lines[-1] == "7 : int"


def test_trace_truncates_unless_full(capsys):
    cli.main(["run", "--trace", "corpus/eval/choose_all.pef"])
    short = capsys.readouterr().out.splitlines()
    cli.main(["run", "--trace=full", "corpus/eval/choose_all.pef"])
    full = capsys.readouterr().out.splitlines()
    assert len(short) == len(full)
    assert max(map(len, short)) < max(map(len, full))


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate", "x.pef"],
    ["run", "--fuel", "0", "corpus/eval/choose.pef"],
    ["run", "--fuel", "x", "corpus/eval/choose.pef"],
    ["run", "no/such/file.pef"],
    ["test", "corpus/eval/choose.pef"],
])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == 2


def test_fuel_flag_overrides_env(monkeypatch, capsys):
    monkeypatch.setenv("POLYEFF_FUEL", "2")
    assert cli.main(["run", "corpus/eval/choose.pef"]) == 1
    assert capsys.readouterr().out.strip() == "fuel exhausted"
    assert cli.main(["run", "--fuel", "500", "corpus/eval/choose.pef"]) == 0


def test_run_config_rejects_nonpositive_fuel():
    with pytest.raises(ValueError):
        cli.RunConfig("run", [], fuel=0)


def test_expectation_header():
    case = cli.parse_expectation("p", "(* EXPECT: value (true,\n   20) *)\n1")
    assert (case.kind, case.text) == ("value", "(true, 20)")
    with pytest.raises(ValueError):
        cli.parse_expectation("p", "1")
