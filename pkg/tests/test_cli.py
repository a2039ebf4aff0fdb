import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from mrls.cli import (EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, EXIT_ROUTING, ExperimentConfig, ConfigError,
                      config_hash, main)

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def write(tmp_path, d, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(d))
    return p


SMALL = {
    "name": "small",
    "topology": {"family": "mrls", "R": 6, "u": 3, "d": 3, "N1": 14, "N2": 7, "seeds": [4]},
    "routing": {"algorithm": "polarized"},
    "traffic": {"experiment": "throughput", "patterns": ["UN", "RSP"], "loads": [0.5, 1.0]},
    "sim": {"warmup_cycles": 200, "measurement_cycles": 1000},
}


def test_all_shipped_configs_parse():
    files = sorted(CONFIGS.glob("*/*.yaml"))
    assert len(files) >= 20
    hashes = {ExperimentConfig.load(f).hash() for f in files}
    assert len(hashes) == len(files)


def test_table_rows_shipped():
    names = {p.stem for p in (CONFIGS / "reference").glob("*.yaml")}
    for row in ("mrls36_11052_u18", "mrls36_11052_u21", "mrls36_11664_u24", "mrls36_104976_u18",
                "mrls36_104976_u24", "mrls36_104976_u27", "mrls32_16640_u19", "oft36_11052_q17",
                "ft36_11664_h2", "ft36_104976_h3_half"):
        assert row in names


def test_hash_ignores_names_only():
    a = ExperimentConfig.from_dict(SMALL)
    b = ExperimentConfig.from_dict({**SMALL, "name": "other", "output_dir": "x", "expected": {"theta": 1}})
    assert a.hash() == b.hash()
    c = ExperimentConfig.from_dict({**SMALL, "sim": {"warmup_cycles": 201, "measurement_cycles": 1000}})
    assert c.hash() != a.hash()
    assert config_hash({"b": 1, "a": 2}) == config_hash({"a": 2, "b": 1})


@pytest.mark.parametrize("bad,msg", [
    ({"routing": {"algorithm": "valiant"}}, "polarized, min, ksp"),
    ({"topology": {"family": "dragonfly"}}, "mrls, fat_tree, oft"),
    ({"traffic": {"patterns": ["tornado"]}}, "valid"),
    ({"sim": {"warmpu_cycles": 3}}, "warmpu_cycles"),
])
def test_config_errors(bad, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict({**SMALL, **bad})


def test_invalid_routing_exit_code(tmp_path, capsys):
    p = write(tmp_path, {**SMALL, "routing": {"algorithm": "valiant"}})
    assert main(["simulate", str(p), "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert "polarized, min, ksp" in capsys.readouterr().err


def test_generate_table_row(tmp_path):
    cfg = CONFIGS / "reference" / "mrls36_11052_u18.yaml"
    assert main(["generate", str(cfg), "--seed", "1", "--out-dir", str(tmp_path)]) == EXIT_OK
    topo = tmp_path / "mrls36_11052_u18_seed1.topo"
    head = topo.read_text().splitlines()[:3]
    assert head == ["# mrls-net topology v1", "levels 614 307", "radix 36"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "ok" and str(topo) in manifest["outputs"]
    assert main(["validate", str(topo)]) == EXIT_OK


def test_generate_small_oft(tmp_path):
    assert main(["generate", str(CONFIGS / "reference" / "oft_q2.yaml"), "--out-dir", str(tmp_path)]) == EXIT_OK
    assert "levels 14 7" in (tmp_path / "oft_q2_seed0.topo").read_text()


def test_generate_infeasible(tmp_path):
    p = write(tmp_path, {**SMALL, "topology": {"family": "oft", "q": 4}})
    assert main(["generate", str(p), "--out-dir", str(tmp_path)]) == EXIT_INFEASIBLE


def test_missing_config(tmp_path):
    assert main(["generate", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG


def test_validate_bad_file(tmp_path, capsys):
    p = tmp_path / "bad.topo"
    p.write_text("# mrls-net topology v1\nlevels 2 1\nradix 4\nedge 0 0 1 0\n")
    assert main(["validate", str(p)]) == EXIT_CONFIG
    assert "line 4" in capsys.readouterr().err
    p.write_text("# mrls-net topology v1\nlevels 2 1\nradix 2\nendpoints 0 3\nedge 0 0 2 0\nedge 1 0 2 1\n")
    assert main(["validate", str(p)]) == EXIT_INFEASIBLE


def test_metrics_aggregate(tmp_path, capsys):
    cfg = write(tmp_path, {**SMALL, "topology": {**SMALL["topology"], "seeds": [1, 2, 3]}})
    main(["generate", str(cfg), "--out-dir", str(tmp_path)])
    capsys.readouterr()
    files = sorted(str(p) for p in tmp_path.glob("*.topo"))
    assert main(["metrics", *files]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "file,S,N,M,D,Dstar,A,Astar,theta,cost_links,cost_switches"
    assert [l.split(",")[0] for l in lines[-2:]] == ["mean", "std"]
    assert len(lines) == 1 + 3 + 2


def test_metrics_empty_list_header_only(capsys):
    assert main(["metrics"]) == EXIT_OK
    assert capsys.readouterr().out == "file,S,N,M,D,Dstar,A,Astar,theta,cost_links,cost_switches\n"


def test_metrics_json_global_flag(capsys):
    sample = str(ROOT / "tests" / "data" / "sample.topo")
    assert main(["--format", "json", "metrics", sample]) == EXIT_OK
    d = json.loads(capsys.readouterr().out)
    assert d["rows"][0]["D"] == 4


def test_spectrum_and_radix(capsys):
    assert main(["spectrum", "--S", "11052", "--k", "3", "4"]) == EXIT_OK
    head, row = capsys.readouterr().out.splitlines()
    assert head == "S,N1,N2,prob_dstar_leq_3,prob_dstar_leq_4,predicted_A,predicted_theta"
    assert row.startswith("11052,614,307,")
    assert main(["radix", "--family", "oft", "--S", "11052"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[1] == "oft,11052,36"


def test_route_check_exit_codes(tmp_path, capsys):
    sample = str(ROOT / "tests" / "data" / "sample.topo")
    assert main(["route-check", sample]) == EXIT_ROUTING
    out = capsys.readouterr().out
    assert out.startswith("s,t,c\n") and "5,0,10" in out
    main(["generate", str(CONFIGS / "reference" / "oft_q2.yaml"), "--out-dir", str(tmp_path)])
    assert main(["route-check", str(tmp_path / "oft_q2_seed0.topo")]) == EXIT_OK


def test_ksp_build(tmp_path):
    sample = str(ROOT / "tests" / "data" / "sample.topo")
    assert main(["ksp-build", sample, "--K", "5", "--out-dir", str(tmp_path)]) == EXIT_OK
    text = (tmp_path / "sample.k5.ksp").read_text()
    assert text.startswith("ksp K 5 pairs 182")


def test_simulate_matrix_and_reproducible(tmp_path):
    cfg = write(tmp_path, SMALL)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", str(cfg), "--out-dir", str(out1)]) == EXIT_OK
    assert main(["simulate", str(cfg), "--out-dir", str(out2), "--jobs", "2"]) == EXIT_OK
    a = (out1 / "small_sim.csv").read_text()
    assert a == (out2 / "small_sim.csv").read_text()
    rows = a.splitlines()[1:]
    assert len(rows) == 4
    assert json.loads((out1 / "manifest.json").read_text())["config_hash"] == ExperimentConfig.from_dict(SMALL).hash()


def test_simulate_refuses_corners(tmp_path):
    cfg = write(tmp_path, {**SMALL, "topology": {**SMALL["topology"], "seeds": [3]}})
    from mrls.routing import corner_check
    from mrls.topology import MrlsSpec, build_mrls
    assert corner_check(build_mrls(MrlsSpec(6, 3, 3, 14, 7, seed=3)))
    assert main(["simulate", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_ROUTING
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "routing-check-failed"


def test_simulate_fault_exit(tmp_path):
    # a stall window shorter than one packet's serialization trips the deadlock detector
    cfg = write(tmp_path, {**SMALL, "sim": {**SMALL["sim"], "stall_window": 1, "flits_per_packet": 64}})
    assert main(["simulate", str(cfg), "--out-dir", str(tmp_path)]) == 5


def test_desk_throughput_sweep_monotone(tmp_path):
    cfg = ExperimentConfig.load(CONFIGS / "desk" / "throughput_mrls512.yaml")
    small = {**cfg.raw, "traffic": {**cfg.raw["traffic"], "patterns": ["UN"]},
             "sim": {"warmup_cycles": 2000, "measurement_cycles": 8000}}
    p = write(tmp_path, small)
    assert main(["simulate", str(p), "--out-dir", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "throughput_mrls512_sim.csv").read_text().splitlines()[1:]
    acc = [float(l.split(",")[5]) for l in lines]
    assert all(b >= a - 0.01 for a, b in zip(acc, acc[1:]))


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "mrls.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for sub in ("generate", "validate", "metrics", "spectrum", "radix", "route-check", "ksp-build", "simulate"):
        assert sub in r.stdout
