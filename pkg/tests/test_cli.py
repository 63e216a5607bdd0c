import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ratbones.atlas import CSV_HEADER
from ratbones.cli import main, read_config
from ratbones.serialize import dumps


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestSerialize:
    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_floats_round_trip(self, x):
        assert json.loads(dumps({"x": x}))["x"] == x

    def test_seventeen_digits(self):
        assert dumps(0.1).strip() == "0.10000000000000001"
        assert dumps(2.0).strip() == "2.0"
        assert dumps(np.float64(1 / 3)).strip() == "0.33333333333333331"

    def test_non_finite_become_null(self):
        assert json.loads(dumps([math.nan, math.inf, 1])) == [None, None, 1]

    def test_order_and_types(self):
        text = dumps({"b": np.int64(3), "a": [True, None, "s"], "c": np.array([0.5, 1.5])})
        assert list(json.loads(text)) == ["b", "a", "c"]
        assert json.loads(text) == {"b": 3, "a": [True, None, "s"], "c": [0.5, 1.5]}

    def test_rejects_unknown(self):
        with pytest.raises(TypeError):
            dumps(object())


class TestExitCodes:
    def test_no_subcommand(self, capsys):
        assert run([], capsys)[0] == 2

    def test_unknown_flag(self, capsys):
        assert run(["entropy", "--bogus", "1"], capsys)[0] == 2

    def test_missing_parameters(self, capsys):
        assert run(["entropy", "--mu", "-2"], capsys)[0] == 2

    def test_inadmissible_parameters(self, capsys):
        code, _, err = run(["entropy", "--mu", "1.0", "--t", "-1.0"], capsys)
        assert code == 2 and "invalid input" in err

    def test_bad_window(self, capsys):
        assert run(["pcf", "--window", "3,1,0,1"], capsys)[0] == 2

    def test_bad_criteria(self, capsys):
        assert run(["check", "--criteria", "9"], capsys)[0] == 2

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "ratbones", "entropy"], capture_output=True, text=True)
        assert proc.returncode == 2


class TestEntropyCommand:
    def test_json(self, capsys):
        code, out, _ = run(["entropy", "--mu", "-2.5", "--t", "-1.0"], capsys)
        assert code == 0
        rec = json.loads(out)
        assert {"value", "upper_bound", "method", "converged"} <= set(rec)
        assert 0 <= rec["value"] <= math.log(2) + 1e-3

    def test_chart_choice_agrees(self, capsys):
        # mu = 1/a and t = b/a describe the same map
        _, out1, _ = run(["entropy", "--mu", "-2.5", "--t", "-1.0"], capsys)
        _, out2, _ = run(["entropy", "--a", "-0.4", "--b", "0.4"], capsys)
        assert json.loads(out1)["value"] == pytest.approx(json.loads(out2)["value"], abs=1e-3)


class TestGridCommand:
    ARGS = ["grid", "--mu-range", "-3.5", "-0.5", "--t-range", "-1.8", "-0.2", "--nx", "6", "--ny", "5"]

    def test_csv_and_artefacts(self, capsys, tmp_path):
        svg, conn = tmp_path / "g.svg", tmp_path / "c.json"
        code, out, _ = run(self.ARGS + ["--svg", str(svg), "--connectivity", str(conn)], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == CSV_HEADER and len(lines) == 31
        assert svg.read_text().startswith("<svg")
        assert set(json.loads(conn.read_text())["bands"]) == {str(k) for k in range(7)}

    def test_workers_do_not_change_output(self, capsys):
        _, one, _ = run(self.ARGS + ["--workers", "1"], capsys)
        _, two, _ = run(self.ARGS + ["--workers", "2"], capsys)
        assert one == two

    def test_disjoint_window_is_all_inadmissible(self, capsys):
        code, out, _ = run(["grid", "--mu-range", "0.5", "1", "--t-range", "0.5", "1", "--nx", "2", "--ny", "2"], capsys)
        assert code == 0
        assert all(row.split(",")[2] == "0" for row in out.splitlines()[1:])


class TestConfig:
    def test_read_config(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nnx = 6\nmu-range = -3.5, -0.5  # trailing\n\n")
        assert read_config(str(path)) == {"nx": "6", "mu_range": "-3.5, -0.5"}

    def test_malformed_line(self, tmp_path, capsys):
        path = tmp_path / "run.cfg"
        path.write_text("nx 6\n")
        assert run(["--config", str(path), "grid"], capsys)[0] == 2

    def test_unknown_key(self, tmp_path, capsys):
        path = tmp_path / "run.cfg"
        path.write_text("colour = red\n")
        assert run(["--config", str(path), "grid"], capsys)[0] == 2

    def test_flags_win(self, tmp_path, capsys):
        path = tmp_path / "run.cfg"
        path.write_text("mu_range = -3.5 -0.5\nt_range = -1.8 -0.2\nnx = 6\nny = 5\n")
        _, from_config, _ = run(["--config", str(path), "grid"], capsys)
        assert len(from_config.splitlines()) == 31
        _, overridden, _ = run(["--config", str(path), "grid", "--nx", "3"], capsys)
        assert len(overridden.splitlines()) == 16

    def test_missing_file(self, capsys):
        assert run(["--config", "/nonexistent/run.cfg", "grid"], capsys)[0] == 2


class TestPcfAndBones:
    WINDOW = "1.5,2.5,0.3,0.6"

    def test_pcf_json(self, capsys):
        code, out, _ = run(["pcf", "--window", self.WINDOW, "--n-max", "3", "--m-max", "4", "--resolution", "80"], capsys)
        assert code == 0
        rec = json.loads(out)
        assert rec["points"]
        for p in rec["points"]:
            assert p["quotient"] > 0 and p["positive_direction"]["positive"]

    def test_pcf_workers(self, capsys):
        base = ["pcf", "--window", self.WINDOW, "--n-max", "3", "--m-max", "4", "--resolution", "80"]
        _, one, _ = run(base, capsys)
        _, two, _ = run(base + ["--workers", "2"], capsys)
        assert one == two

    def test_bones_json(self, capsys, tmp_path):
        path = tmp_path / "bones.json"
        code, _, _ = run(["bones", "--n", "3", "--out", str(path)], capsys)
        assert code == 0
        rec = json.loads(path.read_text())
        assert rec["n"] == 3 and len(rec["bones"]) == 1
        bone = rec["bones"][0]
        assert bone["kind"] == "arc" and sorted(bone["endpoint_info"]) == ["sigma1=-6", "sigma1=2"]

    def test_nonconvergence_exit_code(self, capsys, monkeypatch):
        from ratbones import bones
        from ratbones.errors import ConvergenceError

        def stuck(*args, **kwargs):
            raise ConvergenceError("corrector stagnated")

        monkeypatch.setattr(bones, "scan_pcf", stuck)
        code, _, err = run(["pcf", "--window", self.WINDOW], capsys)
        assert code == 3 and "nonconvergence" in err
