import json
import subprocess
import sys

import pytest

from mdacheck.cli import (
    EXIT_ABORTED,
    EXIT_DEADLOCK,
    EXIT_DIVERGED,
    EXIT_INCONCLUSIVE,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VIOLATED,
    main,
)
from mdacheck.config import load, save


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main(list(argv) + ["--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text()) if (out / "manifest.json").exists() else None
    return code, out, manifest


def test_generate_synthetic_and_fixture(tmp_path):
    code, out, m = run(tmp_path, "g", "generate", "--instances", "3", "--relations", "2", "--rules", "3")
    assert code == EXIT_OK and load(out / "config.ini").n_rule == 3
    assert m["verdicts"] == {"lint": "ok"} and m["command"][:2] == ["mdacheck", "generate"]
    code, out, _ = run(tmp_path, "v", "generate", "--fixture", "venue")
    assert code == EXIT_OK and load(out / "config.ini").name == "venue"
    code, out, _ = run(tmp_path, "z", "generate", "--instances", "0", "--relations", "0", "--rules", "0")
    assert code == EXIT_OK and load(out / "config.ini").max_static_id == 0


def test_usage_errors(tmp_path, capsys):
    assert main(["check", "--fixture", "venue", "--instances", "2", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["generate", "--relations", "1", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["simulate", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["check", "--property", "niceness"])
    assert exc.value.code == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_simulate_is_reproducible(tmp_path):
    args = ["simulate", "--instances", "6", "--relations", "3", "--rules", "5", "--seed", "4"]
    c1, o1, m1 = run(tmp_path, "a", *args)
    c2, o2, m2 = run(tmp_path, "b", *args)
    assert c1 == c2 == EXIT_OK
    for f in ("trace.jsonl", "report.json", "config.ini"):
        assert (o1 / f).read_bytes() == (o2 / f).read_bytes()
    strip = lambda m: {k: v for k, v in m.items() if k not in ("wall_seconds", "files", "command")}  # noqa: E731
    assert strip(m1) == strip(m2) and m1["seeds"] == [4]
    assert json.loads((o1 / "report.json").read_text())["outcome"] == "Terminated"


def test_simulate_fault_exit_codes(tmp_path):
    code, _, m = run(tmp_path, "d", "simulate", "--instances", "2", "--relations", "1", "--rules", "2", "--fault", "drop-minus-one")
    assert code == EXIT_DEADLOCK and m["verdicts"]["run"] == "Deadlock"
    codes = {
        run(tmp_path, f"n{s}", "simulate", "--instances", "2", "--relations", "1", "--rules", "2",
            "--fault", "notify-after", "--seed", str(s))[0]
        for s in range(30)
    }
    assert EXIT_VIOLATED in codes
    code, _, _ = run(tmp_path, "t", "simulate", "--instances", "3", "--rules", "2", "--budget", "5")
    assert code == EXIT_INCONCLUSIVE
    code, _, _ = run(tmp_path, "x", "simulate", "--instances", "1", "--rules", "1", "--unbounded-spawn", "--max-agents", "2")
    assert code == EXIT_ABORTED


def test_check_holds_on_small_config_and_fixture(tmp_path):
    code, _, m = run(tmp_path, "c", "check", "--instances", "2", "--relations", "1", "--rules", "2")
    assert code == EXIT_OK
    assert {m["verdicts"][p]["outcome"] for p in ("ControllerCorrectness", "Operability", "BoundedTermination")} == {"Holds"}
    assert "ControllerCorrectness[none]" in m["verdicts"]
    code, _, m = run(tmp_path, "v", "check", "--fixture", "venue", "--property", "operability")
    assert code == EXIT_OK and list(m["verdicts"]) == ["Operability"]
    code, _, _ = run(tmp_path, "b", "check", "--instances", "2", "--relations", "1", "--rules", "2",
                     "--property", "bounded-termination", "--hom-lim", "2")
    assert code == EXIT_OK


def test_check_counterexample_replays(tmp_path):
    code, out, m = run(tmp_path, "f", "check", "--instances", "2", "--relations", "1", "--rules", "2",
                       "--fault", "notify-after", "--property", "controller-correctness")
    assert code == EXIT_VIOLATED
    cex = m["files"]["counterexample_ControllerCorrectness"]
    code, _, m2 = run(tmp_path, "r", "replay", cex, "--config", str(out / "config.ini"))
    assert code == EXIT_OK and m2["verdicts"]["replay"] == "Matches"
    # the same check again writes the same counterexample
    _, out2, m3 = run(tmp_path, "f2", "check", "--instances", "2", "--relations", "1", "--rules", "2",
                      "--fault", "notify-after", "--property", "controller-correctness")
    assert open(cex, "rb").read() == open(m3["files"]["counterexample_ControllerCorrectness"], "rb").read()


def test_check_inconclusive_and_violated_codes(tmp_path):
    code, _, _ = run(tmp_path, "i", "check", "--instances", "2", "--relations", "1", "--rules", "2", "--max-states", "20")
    assert code == EXIT_INCONCLUSIVE
    code, _, m = run(tmp_path, "o", "check", "--instances", "1", "--property", "operability")
    assert code == EXIT_VIOLATED
    code, _, m = run(tmp_path, "u", "check", "--instances", "2", "--relations", "1", "--rules", "2",
                     "--unbounded-spawn", "--property", "bounded-termination")
    assert code == EXIT_VIOLATED and "max_dynamic_agents" in m["verdicts"]["BoundedTermination"]["diagnosis"]


def test_replay_divergence(tmp_path):
    code, out, _ = run(tmp_path, "s", "simulate", "--instances", "3", "--relations", "2", "--rules", "3")
    cfg = load(out / "config.ini")
    save(cfg.with_flags(adjacency_merge=False, n_words=cfg.n_words), tmp_path / "edited.ini")
    text = (tmp_path / "edited.ini").read_text().replace("values = 1\n", "values = 5\n", 1)
    (tmp_path / "edited.ini").write_text(text)
    code, _, m = run(tmp_path, "r", "replay", str(out / "trace.jsonl"), "--config", str(tmp_path / "edited.ini"))
    assert code == EXIT_DIVERGED and m["verdicts"]["replay"] == "Diverged"


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MDA_OUT_DIR", str(tmp_path / "env"))
    assert main(["generate", "--instances", "1"]) == EXIT_OK
    assert (tmp_path / "env" / "manifest.json").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "mdacheck.cli", "simulate", "--fixture", "venue", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and "outcome=Terminated" in proc.stdout
