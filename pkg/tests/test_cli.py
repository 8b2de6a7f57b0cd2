import io
import json
import sys
import textwrap

import numpy as np
import pytest

from scamr.cli import CSV_HEADER, RunConfig, SubprocessModel, execute, main
from scamr.driver import ScamrSurrogate
from scamr.errors import ConfigError, EvaluationError


def child(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return f"{sys.executable} {path}"


ECHO = """
    import sys
    for line in sys.stdin:
        print(sum(float(v) for v in line.split()), flush=True)
"""

NAN = """
    import sys
    for line in sys.stdin:
        print("nan", flush=True)
"""

DIES = """
    import sys
    for i, line in enumerate(sys.stdin):
        if i == 5:
            sys.exit(9)
        print(sum(float(v) ** 2 for v in line.split()), flush=True)
"""


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], [dict(zip(lines[0].split(","), row.split(","))) for row in lines[1:]]


def test_f1_row(tmp_path):
    out = tmp_path / "f1.csv"
    assert main(["run", "--case", "f1", "--eps1", "1e-6", "--validate", "100000", "--out-csv", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == CSV_HEADER
    assert rows[0]["evaluations"] == "13"
    assert float(rows[0]["rmse"]) < 1e-10
    assert rows[0]["case"] == "f1" and rows[0]["dim"] == "2"


def test_f13_sweep_monotone(tmp_path):
    out = tmp_path / "f13.csv"
    argv = ["run", "--case", "f13", "--eps1", "0.05", "0.02", "0.01", "--validate", "20000",
            "--out-csv", str(out), "--no-timing"]
    assert main(argv) == 0
    _, rows = read_csv(out)
    evals = [int(r["evaluations"]) for r in rows]
    errs = [float(r["normalized_l2"]) for r in rows]
    assert evals == sorted(evals) and len(set(evals)) == 3
    assert errs == sorted(errs, reverse=True) and len(set(errs)) == 3
    assert all(r["relative_mean_error"] == "" and r["wall_seconds"] == "" for r in rows)


def test_byte_identical_csv(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        main(["run", "--case", "f10", "--eps1", "0.02", "0.01", "--validate", "5000",
              "--no-timing", "--out-csv", str(p)])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_bundles_and_log(tmp_path):
    js, log = tmp_path / "s.json", tmp_path / "run.jsonl"
    assert main(["run", "--case", "f11", "--eps1", "0.05", "0.02", "--validate", "100",
                 "--out-json", str(js), "--log", str(log), "--out-csv", str(tmp_path / "x.csv")]) == 0
    for k in (0, 1):
        s = ScamrSurrogate.load(tmp_path / f"s.{k}.json")
        assert s.decomposition.n == 4
    recs = [json.loads(line) for line in log.read_text().splitlines()]
    assert {"phase", "element", "criterion", "error", "decision", "evaluations"} == set(recs[0])


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"case": "f1", "eps1": [0.5], "validate": 10, "timing": False}))
    out = tmp_path / "o.csv"
    assert main(["run", "--config", str(cfg), "--eps1", "1e-6", "--out-csv", str(out)]) == 0
    _, rows = read_csv(out)
    assert rows[0]["eps1"] == "1e-06" and rows[0]["wall_seconds"] == ""
    cfg.write_text(json.dumps({"case": "f1", "bogus": 1}))
    assert main(["run", "--config", str(cfg)]) == 2


def test_external_echo_converges_phase1(tmp_path, capsys):
    cmd = child(tmp_path, "echo.py", ECHO)
    assert main(["run", "--eval-cmd", cmd, "--dim", "3", "--eps1", "1e-3", "--validate", "20"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == CSV_HEADER
    row = dict(zip(CSV_HEADER.split(","), out[1].split(",")))
    assert row["case"] == "external" and row["evaluations"] == "7"


def test_external_nan_exits_3(tmp_path, capsys):
    cmd = child(tmp_path, "nan.py", NAN)
    assert main(["run", "--eval-cmd", cmd, "--dim", "2", "--eps1", "1e-3"]) == 3
    err = capsys.readouterr().err
    assert "nan" in err and "[0.5, 0.5]" in err


def test_external_killed_exits_3_with_count(tmp_path, capsys):
    cmd = child(tmp_path, "dies.py", DIES)
    assert main(["run", "--eval-cmd", cmd, "--dim", "3", "--eps1", "1e-3"]) == 3
    err = capsys.readouterr().err
    assert "after 5 cached evaluations" in err and "exited with code 9" in err


def test_missing_dim_exits_2(tmp_path, capsys):
    cmd = child(tmp_path, "echo.py", ECHO)
    assert main(["run", "--eval-cmd", cmd, "--eps1", "1e-3"]) == 2
    assert "dim" in capsys.readouterr().err


@pytest.mark.parametrize("kwargs", [
    dict(), dict(case="f1", eval_cmd="x"), dict(case="f1", eps1=[]), dict(case="f1", eps1=[-1.0]),
    dict(case="f1", validate=0), dict(case="f1", workers=0), dict(eval_cmd="x", dim=2, bounds=(1, 0)),
])
def test_run_config_validation(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_unknown_case_exits_2():
    assert main(["run", "--case", "f99"]) == 2


def test_subprocess_model_protocol(tmp_path):
    cmd = child(tmp_path, "echo.py", ECHO)
    with SubprocessModel(cmd, timeout=10) as m:
        assert m(np.array([0.1, 0.2])) == pytest.approx(0.3)
        assert m(np.array([1e-17, 2.0])) == 2.0


def test_subprocess_timeout(tmp_path):
    cmd = child(tmp_path, "slow.py", """
        import sys, time
        for line in sys.stdin:
            time.sleep(5)
    """)
    m = SubprocessModel(cmd, timeout=0.2)
    with pytest.raises(EvaluationError, match="timed out"):
        m(np.zeros(2))
    m.proc.kill()
    m.close()


def test_execute_to_stream():
    buf = io.StringIO()
    rows = execute(RunConfig(case="f1", eps1=[1e-6], validate=10, timing=False), buf)
    assert buf.getvalue() == CSV_HEADER + "\n" + rows[0] + "\n"
