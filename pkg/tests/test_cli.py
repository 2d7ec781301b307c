import csv
import io
import json
import math
import subprocess
import sys

import pytest

from cantor_targets import dimension as dim
from cantor_targets import expansion as exp_
from cantor_targets import targets as tg
from cantor_targets.cli import SCHEMA, emit_profile, run, write_records
from cantor_targets.sequences import BASE, WEIGHT, CumulativeCache, parse_sequence_spec


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def records(*argv):
    code, out, err = call(*argv)
    assert code == 0, err
    return [json.loads(line) for line in out.splitlines()]


def cache(text, target):
    return CumulativeCache(parse_sequence_spec(text, target), prec=128)


class TestExamples:
    def test_expand(self):
        (rec,) = records("expand", "--q", "periodic:2,3", "--x", "5/6", "--n", "2")
        assert rec["schema"] == SCHEMA and rec["command"] == "expand"
        assert rec["digits"] == [1, 2] and rec["remainder"] == "0"

    def test_decimal_point_is_exact(self):
        (rec,) = records("expand", "--q", "const:10", "--x", "0.125", "--n", "3")
        assert rec["x"] == "1/8" and rec["digits"] == [1, 2, 5]

    def test_dimension_exponential(self):
        (rec,) = records("dimension", "--q", "expr:2^n", "--alpha", "expr:0.693147*n", "--n-max", "2000")
        assert rec["value"] == pytest.approx(0.5, abs=1e-6)
        assert "residual" in rec and rec["residual"] >= 0

    def test_dimension_zero_weight(self):
        for q in ("const:2", "periodic:2,3", "expr:n+1"):
            (rec,) = records("dimension", "--q", q, "--alpha", "const:0", "--n-max", "100")
            assert rec["value"] == 1.0

    def test_family(self):
        (rec,) = records("family", "--family", "exp:b=2;c=1")
        assert rec["value"] == pytest.approx(math.log(2) / (math.log(2) + 1), abs=1e-15)

    def test_uncertain_is_success(self):
        # orbit point sits exactly on the target boundary
        code, out, _ = call("witness", "--q", "const:2", "--alpha", "const:log(2)", "--x", "1/4", "--n", "1")
        assert code == 0 and json.loads(out)["orbit_verdict"] == "uncertain"

    def test_corollary_no_limit_is_success(self):
        (rec,) = records("corollary", "--q", "periodic:2,3", "--alpha", "const:1", "--n-max", "2000")
        assert rec["no_limit"] is True


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        [],
        ["nonsense"],
        ["expand", "--q", "const:2", "--n", "2"],
        ["expand", "--q", "const:2", "--x", "1/0", "--n", "2"],
        ["expand", "--q", "const:1", "--x", "1/2", "--n", "2"],
        ["dimension", "--q", "const:2", "--alpha", "nope:1", "--n-max", "10"],
        ["pressure", "--q", "const:2", "--alpha", "const:1", "--s", "1.5", "--n-max", "10"],
        ["family", "--family", "weird:1"],
        ["series-check", "--q", "const:2", "--alpha", "const:1", "--t", "0.1", "--n-max", "100"],
        ["stolz", "--alpha", "const:1", "--n-max", "10"],
    ])
    def test_usage_errors(self, argv):
        code, out, err = call(*argv)
        assert code == 1 and out == "" and err.startswith("error:")

    def test_computation_error(self):
        code, _, err = call("cover-build", "--q", "const:2", "--alpha", "const:0.5", "--levels", "1,3")
        assert code == 2 and "ScheduleInfeasible" in err

    def test_cap_exceeded(self):
        code, _, err = call("cover-build", "--q", "const:2", "--alpha", "const:1", "--levels", "1,80",
                            "--cap-bits", "64")
        assert code == 2 and "CapExceeded" in err

    def test_capped_hsum_reports_closed_form_only(self):
        (rec,) = records("hsum", "--q", "expr:2^n", "--alpha", "const:1", "--t", "0.5", "--n", "40",
                         "--cap-bits", "64")
        assert rec["direct"] is None and rec["closed"].startswith("7.7076783363")

    def test_unwritable_out(self, tmp_path):
        code, _, err = call("expand", "--q", "const:2", "--x", "1/3", "--n", "2",
                            "--out", str(tmp_path / "missing" / "f.jsonl"))
        assert code == 2 and "cannot write" in err


class TestFormats:
    ARGS = ["bowen", "--q", "periodic:2,3", "--alpha", "const:1", "--n-max", "1000"]

    def test_csv_matches_jsonl(self):
        (rec,) = records(*self.ARGS)
        code, out, _ = call(*self.ARGS, "--format", "csv")
        (row,) = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and float(row["value"]) == rec["value"]
        assert row["schema"] == SCHEMA

    def test_human(self):
        code, out, _ = call(*self.ARGS, "--format", "human")
        assert code == 0 and out.startswith("command: bowen\n") and "schema" not in out

    def test_profile_constant_column(self):
        argv = ["pressure", "--q", "const:2", "--alpha", "const:1", "--s", "0.3", "--n-max", "40", "--profile"]
        code, out, _ = call(*argv, "--format", "csv")
        lines = out.splitlines()
        assert code == 0 and lines[0] == "n,value"
        ns = [int(l.split(",")[0]) for l in lines[1:]]
        vals = {float(l.split(",")[1]) for l in lines[1:]}
        assert ns == list(range(20, 41))
        assert max(vals) - min(vals) < 1e-15
        assert min(vals) == pytest.approx(0.7 * math.log(2) - 0.3, abs=1e-15)
        jl = [r["value"] for r in records(*argv)]
        assert [float(l.split(",")[1]) for l in lines[1:]] == jl

    def test_empty_profile(self):
        empty = dim.PressureProfile(s=0.1, n=__import__("numpy").array([], dtype=int),
                                    values=__import__("numpy").array([]), window=(1, 0))
        from cantor_targets.cli import UsageError
        with pytest.raises(UsageError):
            emit_profile(empty, "csv", io.StringIO())

    def test_write_records_csv_union_of_fields(self):
        buf = io.StringIO()
        write_records([{"a": 1}, {"a": 2, "b": [1, 2]}], "csv", buf)
        assert buf.getvalue() == 'a,b\n1,\n2,"[1, 2]"\n'


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ["hits", "--q", "periodic:2,3", "--alpha", "const:1", "--x", "5/7", "--n-max", "12"],
        ["dimension", "--q", "expr:n+1", "--alpha", "expr:log(n)", "--n-max", "5000"],
        ["cover-check", "--q", "const:2", "--alpha", "const:1", "--levels", "1,12", "--s", "0.3",
         "--samples", "4", "--radii", "4"],
    ])
    def test_byte_identical(self, argv):
        assert call(*argv) == call(*argv)

    def test_out_file(self, tmp_path):
        path = tmp_path / "o.jsonl"
        argv = ["height", "--q", "periodic:2,3", "--x", "7/36"]
        code, out, _ = call(*argv, "--out", str(path))
        assert code == 0 and out == ""
        assert path.read_text() == call(*argv)[1]

    def test_export(self, tmp_path):
        path = tmp_path / "tree.txt"
        recs = records("cover-build", "--q", "const:2", "--alpha", "const:log(2)", "--levels", "2,4",
                       "--export", str(path))
        assert recs[-1]["record"] == "export" and recs[-1]["node_lines"] == 8
        assert path.read_text().startswith("# cantor-targets cover-tree v1\n")

    def test_console_script(self):
        proc = subprocess.run([sys.executable, "-m", "cantor_targets", "expand", "--q", "const:3",
                               "--x", "1/2", "--n", "3"], capture_output=True, text=True)
        assert proc.returncode == 0 and json.loads(proc.stdout)["digits"] == [1, 1, 1]


class TestLibraryReproducibility:
    def test_hits(self):
        recs = records("hits", "--q", "periodic:2,3", "--alpha", "const:1", "--x", "5/7", "--n-max", "12")
        lib = tg.hit_levels("5/7", cache("periodic:2,3", BASE), cache("const:1", WEIGHT), 12, precision=128)
        assert [(r["n"], r["verdict"]) for r in recs] == [(n, v.status.value) for n, v in lib]

    def test_dimension(self):
        (rec,) = records("dimension", "--q", "expr:n+1", "--alpha", "expr:2*log(n)", "--n-max", "3000")
        lib = dim.dimension_limsup(cache("expr:n+1", BASE), cache("expr:2*log(n)", WEIGHT), 3000)
        assert rec["value"] == lib.value and rec["argmax"] == lib.argmax

    def test_iterate(self):
        (rec,) = records("iterate", "--q", "periodic:2,3", "--x", "11/13", "--n", "9")
        assert rec["value"] == str(exp_.iterate("11/13", cache("periodic:2,3", BASE), 9))

    def test_pressure(self):
        (rec,) = records("pressure", "--q", "periodic:2,3", "--alpha", "const:0.5", "--s", "0.4",
                         "--n-max", "999")
        value, _ = dim.pressure_estimate(cache("periodic:2,3", BASE), cache("const:0.5", WEIGHT), 0.4, 999)
        assert rec["value"] == value
