import csv
import io
import json
import subprocess
import sys

import pytest

from polar_degree_lab import cli


def run_json(*argv):
    code, text = cli.run(list(argv))
    return code, json.loads(text) if code in (0, 1) else text


def test_degree_json():
    code, doc = run_json("degree", "--map", "family=power_s2 d=2")
    assert code == 0
    assert doc["schema"] == cli.SCHEMA and doc["map"] == "family=power_s2 d=2"
    res = doc["result"]
    assert (res["deg"], res["deg_polar"], res["transversal"], res["decomposition_ok"]) == (2, 1, 2, True)


def test_degree_join():
    code, doc = run_json("degree", "--map", "family=join_power b=3 a=2")
    assert code == 0 and doc["result"]["deg"] == 6
    assert doc["map"] == "family=join_power a=2 b=3"


def test_transversal():
    code, doc = run_json("transversal", "--map", "family=power_s2 d=-2")
    assert code == 0 and doc["result"] == {"transversal": -2}


@pytest.mark.parametrize("argv", [["degree", "--map", "family=power_s2 d"], ["degree", "--map", "family=bogus"],
                                  ["degree"], ["census", "--map", "family=power_s2 d=2", "--nmax", "0"],
                                  ["lifts", "--map", "family=power_s2 d=2", "--delta", "0.7"],
                                  ["degree", "--map", "family=power_s2 d=2", "--jobs", "0"],
                                  ["frobnicate"]])
def test_usage_errors_exit_2(argv):
    code, text = cli.run(argv)
    assert code == 2


def test_census_table_and_json():
    code, text = cli.run(["census", "--map", "family=power_s2 d=2", "--nmax", "5", "--out", "table"])
    assert code == 0
    last = text.strip().splitlines()[-1].split()
    assert last[:5] == ["5", "33", "2", "31", "ok"]
    code, doc = run_json("census", "--map", "family=power_s2 d=2", "--nmax", "2")
    assert isinstance(doc["result"]["rows"], list)
    assert doc["result"]["summary"]["passed"] is True


def test_census_flagged_rows_render_tilde():
    code, text = cli.run(["census", "--map", "family=join_power a=1 b=1", "--nmax", "1", "--out", "csv"])
    assert code == 0
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["n", "fix", "fix_P", "bound", "ok", "growth"]
    assert rows[1][1:3] == ["~", "~"] and rows[1][4] == "~"


def test_lifts():
    code, doc = run_json("lifts", "--map", "family=power_s2 d=3")
    res = doc["result"]
    assert code == 0
    assert res["family_size"] == 2 and res["free_lifts"] == 0 and res["bound"] == 4
    assert [len(l["fixed_points"]) for l in res["lifts"]] == [1, 1]


def test_lifts_degenerate_exit_3():
    code, text = cli.run(["lifts", "--map", "family=identity m=2"])
    assert code == 3 and "DegenerateTransversalDegree" in text


def test_classify():
    code, doc = run_json("classify", "--map", "family=power_s2 d=2")
    recs = doc["result"]["fixed_points"]
    assert code == 0 and len(recs) == 2
    assert {r["verdict"] for r in recs} == {"AttractingNormal"}


def test_classify_c0_exit_3():
    code, text = cli.run(["classify", "--map", "family=north_south"])
    assert code == 3 and "NotC1" in text


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# power map\nfamily=power_s2\nd=3\nnmax=2 out=csv\n")
    code, text = cli.run(["census", "--config", str(cfg)])
    rows = list(csv.reader(io.StringIO(text)))
    assert code == 0 and [r[1] for r in rows[1:]] == ["4", "10"]
    # flags override file defaults
    code, text = cli.run(["census", "--config", str(cfg), "--nmax", "1"])
    assert len(list(csv.reader(io.StringIO(text)))) == 2
    code, _ = cli.run(["census", "--config", str(cfg), "--map", "family=power_s2 d=2"])
    assert code == 2
    code, _ = cli.run(["census", "--config", str(tmp_path / "missing.cfg")])
    assert code == 2


def test_json_is_deterministic():
    argv = ["degree", "--map", "family=join_power a=-2 b=3", "--seed", "5"]
    assert cli.run(argv) == cli.run(argv + ["--jobs", "2"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "polar_degree_lab.cli", "transversal", "--map",
                           "family=power_s2 d=5", "--out", "table"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.split()[-1] == "5"
    proc = subprocess.run([sys.executable, "-m", "polar_degree_lab.cli", "degree", "--map", "oops"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stderr.startswith("error:")
