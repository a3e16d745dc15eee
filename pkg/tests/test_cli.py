import csv
import io
import json

import numpy as np
import pytest

from kemeny.cache import CacheError, read_cache
from kemeny.cli import main
from kemeny.generators import complete_bidirectional, cycle_with_chord, random_k_out
from kemeny.graph import write_edge_list


@pytest.fixture
def chord4(tmp_path):
    path = tmp_path / "chord4.txt"
    write_edge_list(cycle_with_chord(4), path)
    return path


@pytest.fixture
def k4(tmp_path):
    path = tmp_path / "k4.txt"
    write_edge_list(complete_bidirectional(4), path)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_estimate_tree_mc_manifest(capsys, chord4):
    code, out, _ = run(capsys, "estimate", "--algo", "tree-mc", "--epsilon", 0.15, "--seed", 7,
                       "--threads", 1, chord4)
    assert code == 0
    m = json.loads(out)
    assert m["algorithm"] == "tree-mc"
    assert m["schema"] == "kemeny.manifest/1"
    assert m["config"]["epsilon"] == 0.15 and m["config"]["seed"] == 7
    assert m["graph"]["tau_is_estimate"] is False
    assert m["exact"] is None and m["relative_error"] is None
    assert m["report"]["params"]["combine"] == "corrected"


def test_relative_error_present_iff_exact(capsys, chord4):
    code, out, _ = run(capsys, "estimate", "--with-exact", "--threads", 1, chord4)
    m = json.loads(out)
    assert code == 0
    assert m["exact"] == pytest.approx(1.7142857142857, abs=1e-9)
    assert m["relative_error"] == pytest.approx(abs(m["report"]["estimate"] - m["exact"]) / m["exact"])


def test_lambda_flag_echo(capsys, k4):
    code, out, _ = run(capsys, "estimate", "--algo", "improved-mc", "--epsilon", 0.2, "--lambda", 0.5, k4)
    m = json.loads(out)
    assert code == 0
    assert m["config"]["lambda_override"] == 0.5
    assert m["report"]["params"]["l"] == 5


def test_exact_over_dense_limit_exits_2(capsys, chord4):
    code, _, err = run(capsys, "estimate", "--algo", "exact", "--dense-limit", 3, chord4)
    assert code == 2 and "dense" in err.lower()


def test_periodic_graph_exits_2(capsys, tmp_path):
    path = tmp_path / "c3.txt"
    path.write_text("0 1\n1 2\n2 0\n2 3\n")
    code, _, err = run(capsys, "estimate", "--algo", "improved-mc", path)
    assert code == 2 and "lambda" in err


def test_parse_error_exits_1(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 1\nx y\n")
    code, _, err = run(capsys, "estimate", path)
    assert code == 1 and "line 2" in err


def test_missing_file_exits_1(capsys, tmp_path):
    code, _, _ = run(capsys, "estimate", tmp_path / "nope.txt")
    assert code == 1


def test_strict_caps_exit_3(capsys, k4):
    code, _, _ = run(capsys, "estimate", "--lambda", 0.5, "--max-walks", 2, "--strict-caps", k4)
    assert code == 3


def test_precompute_cache_k4(capsys, tmp_path, k4):
    cache = tmp_path / "k4.cache"
    assert run(capsys, "precompute", k4, "--output", cache)[0] == 0
    spec, stats = read_cache(cache)
    assert spec.lam == pytest.approx(1 / 3, abs=1e-9)
    assert abs(spec.pi.sum() - 1) <= 1e-12
    assert stats.tau == 1 and stats.d_max == 3


def test_precompute_chord4_pi_sums_to_one(capsys, tmp_path, chord4):
    cache = tmp_path / "c.cache"
    assert run(capsys, "precompute", chord4, "--output", cache)[0] == 0
    spec, _ = read_cache(cache)
    assert abs(spec.pi.sum() - 1) <= 1e-12


def test_cache_rerun_is_identical(capsys, tmp_path, chord4):
    cache = tmp_path / "c.cache"
    run(capsys, "precompute", chord4, "--output", cache)
    outs = []
    for extra in ([], ["--spectral-cache", cache]):
        code, out, _ = run(capsys, "estimate", "--algo", "tree-mc", "--seed", 3, "--threads", 1, *extra, chord4)
        assert code == 0
        outs.append(json.loads(out))
    assert outs[0]["report"]["estimate"] == outs[1]["report"]["estimate"]
    assert outs[1]["precompute_time"] < 0.05


def test_cache_for_other_graph_rejected(capsys, tmp_path, chord4, k4):
    cache = tmp_path / "k4.cache"
    run(capsys, "precompute", k4, "--output", cache)
    code, _, err = run(capsys, "estimate", "--spectral-cache", cache, chord4)
    assert code == 1 and "different graph" in err
    with pytest.raises(CacheError):
        bad = tmp_path / "junk.cache"
        bad.write_text("hello\n")
        read_cache(bad)


@pytest.mark.parametrize("algo", ["improved-mc", "ablation-mc", "dynamic-mc", "tree-mc"])
def test_manifest_replay(capsys, tmp_path, chord4, algo):
    first = tmp_path / "m.json"
    assert run(capsys, "estimate", "--algo", algo, "--seed", 11, "--threads", 1,
               "--output", first, chord4)[0] == 0
    code, out, _ = run(capsys, "estimate", "--replay", first)
    assert code == 0
    a = json.loads(first.read_text())
    b = json.loads(out)
    assert a["report"]["estimate"] == b["report"]["estimate"]
    assert a["config"] == b["config"]


def test_seed_from_environment(capsys, monkeypatch, chord4):
    monkeypatch.setenv("KEMENY_SEED", "99")
    _, out, _ = run(capsys, "estimate", chord4)
    assert json.loads(out)["config"]["seed"] == 99


def test_csv_estimate_output(capsys, chord4):
    code, out, _ = run(capsys, "estimate", "--format", "csv", chord4)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1 and rows[0]["algorithm"] == "improved-mc"


def test_bench_cardinality(capsys, tmp_path):
    paths = []
    for i in range(3):
        p = tmp_path / f"g{i}.txt"
        write_edge_list(random_k_out(30, 3, seed=i), p)
        paths.append(p)
    code, out, _ = run(capsys, "bench", *paths, "--algos", "improved-mc", "ablation-mc",
                       "--epsilons", 0.3, 0.2, 0.15, "--repeats", 10, "--threads", 1)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 180
    assert all(r["relative_error"] != "" and r["error"] == "" for r in rows)
    assert len({(r["graph"], r["algorithm"], r["epsilon"], r["seed"]) for r in rows}) == 180


def test_bench_exact_infeasible_rows_have_null_error(capsys, tmp_path, chord4):
    code, out, _ = run(capsys, "bench", chord4, "--algos", "improved-mc", "--epsilons", 0.3,
                       "--repeats", 2, "--dense-limit", 2, "--format", "json")
    rows = json.loads(out)
    assert code == 0 and len(rows) == 2
    assert all(r["relative_error"] is None and r["exact"] is None for r in rows)


def test_bench_records_row_failures(capsys, tmp_path):
    good = tmp_path / "ok.txt"
    write_edge_list(cycle_with_chord(5), good)
    periodic = tmp_path / "c3.txt"
    periodic.write_text("0 1\n1 2\n2 0\n")
    code, out, _ = run(capsys, "bench", periodic, good, "--algos", "improved-mc", "--epsilons", 0.3,
                       "--repeats", 1, "--format", "json")
    rows = json.loads(out)
    assert code == 0
    assert rows[0]["error"] and rows[1]["error"] is None and np.isfinite(rows[1]["estimate"])
