import json
import math
import subprocess
import sys

import pytest

from reecont.cli import main
from reecont.states import bell_state, load_state, maximally_mixed, random_mixed, save_state


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, state in [("bell", bell_state()), ("tau", maximally_mixed((2, 2))), ("mixed", random_mixed((2, 2), 2, 0))]:
        paths[name] = tmp_path / f"{name}.json"
        save_state(state, paths[name])
    paths["bad"] = tmp_path / "bad.json"
    paths["bad"].write_text("{not json")
    paths["trace"] = tmp_path / "trace.json"
    paths["trace"].write_text(json.dumps({"dims": [1, 2], "matrix": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}))
    return paths


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestCompute:
    def test_tau(self, files, capsys):
        code, out, _ = run(["compute", files["tau"], "--deterministic"], capsys)
        report = json.loads(out)
        assert code == 0
        assert report["lower"] <= 0.0 <= report["upper"] <= 1e-9
        assert "generatedAt" not in report

    def test_bell_in_bits(self, files, capsys):
        code, out, _ = run(["compute", files["bell"], "--units", "bits"], capsys)
        report = json.loads(out)
        assert code == 0
        assert report["lower"] <= 1.0 <= report["upper"]
        assert report["units"] == "bits"
        assert "generatedAt" in report

    def test_bell_nats_csv(self, files, capsys):
        code, out, _ = run(["compute", files["bell"], "--format", "csv"], capsys)
        header, row = out.strip().splitlines()
        values = dict(zip(header.split(","), row.split(",")))
        assert code == 0
        assert float(values["lower"]) <= math.log(2) <= float(values["upper"])

    def test_minimizer_written(self, files, tmp_path, capsys):
        target = tmp_path / "closest.json"
        code, _, _ = run(["compute", files["bell"], "--minimizer-out", target], capsys)
        assert code == 0
        assert load_state(target).dims.N == 4

    def test_output_file(self, files, tmp_path, capsys):
        target = tmp_path / "report.json"
        code, out, _ = run(["compute", files["tau"], "-o", target, "--set", "ppt"], capsys)
        assert code == 0 and out == ""
        assert json.loads(target.read_text())["set"] == "PPT"

    @pytest.mark.parametrize("name", ["bad", "trace"])
    def test_invalid_input(self, files, name, capsys):
        code, _, err = run(["compute", files[name]], capsys)
        assert code == 2
        assert err.startswith("error:")

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["compute", tmp_path / "nope.json"], capsys)
        assert code == 2

    def test_dims_override(self, files, capsys):
        code, _, _ = run(["compute", files["tau"], "--dims", "1x4"], capsys)
        assert code == 0
        code, _, _ = run(["compute", files["tau"], "--dims", "2x3"], capsys)
        assert code == 2

    def test_nonconvergence(self, files, capsys):
        # a gap target below rounding level cannot be met
        code, _, err = run(["compute", files["bell"], "--gap-tol", "1e-14", "--x", "0.9"], capsys)
        assert code == 3
        lo, hi = (float(v) for v in err.split("[")[1].rstrip("]\n").split(","))
        assert lo <= math.log(2) <= hi


class TestContinuity:
    def test_deterministic(self, capsys):
        argv = ["continuity", "--pairs", 1, "--seed", 7, "--deterministic"]
        code1, out1, err1 = run(argv, capsys)
        code2, out2, _ = run(argv, capsys)
        assert code1 == code2 == 0
        assert out1 == out2
        assert err1.startswith("pairs=1 failures=0 maxRatio=")

    def test_invalid_dims(self, capsys):
        code, _, _ = run(["continuity", "--dims", "0x2"], capsys)
        assert code == 2

    def test_csv(self, capsys):
        code, out, _ = run(["continuity", "--pairs", 2, "--format", "csv", "--no-proof-chain"], capsys)
        assert code == 0
        assert out.splitlines()[0] == "seed,T,bound,deltaUpper,margin,holds,confidence"
        assert len(out.splitlines()) == 3

    def test_ppt(self, capsys):
        code, out, _ = run(["continuity", "--pairs", 1, "--set", "ppt", "--deterministic"], capsys)
        assert code == 0


class TestCorollary:
    def test_tau_bell(self, files, capsys):
        code, out, _ = run(["corollary", "--state", files["tau"], "--direction", files["bell"]], capsys)
        trace = json.loads(out)
        assert code == 0
        assert trace["criterionMet"]
        assert [e["n"] for e in trace["entries"]] == [4, 16, 64, 256, 1024]

    def test_constant(self, files, capsys):
        code, _, _ = run(["corollary", "--state", files["tau"], "--direction", files["tau"], "--schedule", "2,8"], capsys)
        assert code == 0

    def test_entangled_base(self, files, capsys):
        code, _, _ = run(["corollary", "--state", files["bell"], "--direction", files["tau"]], capsys)
        assert code == 5

    def test_bad_schedule(self, files, capsys):
        code, _, _ = run(["corollary", "--state", files["tau"], "--direction", files["bell"], "--schedule", "4,x"], capsys)
        assert code == 2


class TestFannesAndProofChain:
    def test_fannes(self, capsys):
        code, out, err = run(["fannes", "--pairs", 100, "--independent", 10], capsys)
        report = json.loads(out)
        assert code == 0
        assert report["violations"] == 0
        assert report["skipped"] >= 1
        assert any(c["label"] == "boundary" for c in report["cases"])

    def test_proofchain_table(self, capsys):
        code, out, _ = run(["proofchain", "--pairs", 2, "--format", "csv"], capsys)
        lines = out.strip().splitlines()
        assert code == 0
        assert lines[0] == "name,minSlack,violations"
        assert len(lines) == 6


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "reecont.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "compute" in proc.stdout
