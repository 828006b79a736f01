import json

import numpy as np
import pytest

from levsketch import load_matrix, load_scores
from levsketch.cli import main


def run(argv):
    return main(argv)


def test_gen_writes_matrix_and_metadata(tmp_path):
    out = tmp_path / "a.bin"
    assert run(["gen", "--n", "50", "--d", "6", "--rank", "3", "--seed", "9", "--out", str(out)]) == 0
    m = load_matrix(out)
    assert m.shape == (50, 6)
    meta = json.loads((tmp_path / "a.bin.json").read_text())
    assert meta["command"] == "gen"
    assert meta["seed"] == 9
    assert meta["generator"] == "philox4x64"
    assert meta["flags"]["rank"] == 3
    assert "numpy" in meta["versions"]


def test_leverage_exact_pipeline(tmp_path):
    mat = tmp_path / "a.bin"
    out = tmp_path / "l.csv"
    run(["gen", "--n", "40", "--d", "5", "--out", str(mat)])
    assert run(["leverage", "--in", str(mat), "--method", "exact", "--out", str(out)]) == 0
    scores = load_scores(out)
    assert scores.shape == (40,)
    meta = json.loads((tmp_path / "l.csv.json").read_text())
    assert meta["method"] == "exact"
    assert meta["effective_rank"] == 5
    assert meta["wall_time_s"] is not None


def test_leverage_sketch_trunc_distributed(tmp_path):
    mat = tmp_path / "a.bin"
    run(["gen", "--n", "200", "--d", "8", "--out", str(mat)])
    out = tmp_path / "l.csv"
    code = run([
        "leverage", "--in", str(mat), "--method", "sketch-trunc", "--sketch", "osnap",
        "--eps", "0.5", "--sv-tol", "1e-3", "--workers", "4", "--out", str(out),
    ])
    assert code == 0
    report = json.loads((tmp_path / "l.csv.report.json").read_text())
    assert report["workers"] == 4
    assert report["bytes_communicated"] == 4 * report["sketch"]["k"] * 8 * 8
    serial_out = tmp_path / "serial.csv"
    run([
        "leverage", "--in", str(mat), "--method", "sketch-trunc", "--sketch", "osnap",
        "--eps", "0.5", "--sv-tol", "1e-3", "--workers", "1", "--out", str(serial_out),
    ])
    assert load_scores(out).tolist() == load_scores(serial_out).tolist()


def test_leverage_csv_input_with_header(tmp_path):
    src = tmp_path / "a.csv"
    src.write_text("x,y\n1,0\n0,1\n1,1\n")
    out = tmp_path / "l.csv"
    assert run(["leverage", "--in", str(src), "--header", "--method", "oracle", "--out", str(out)]) == 0
    assert load_scores(out).shape == (3,)


def test_order_pipeline(tmp_path):
    mat = tmp_path / "a.bin"
    scores = tmp_path / "l.csv"
    run(["gen", "--n", "30", "--d", "4", "--out", str(mat)])
    run(["leverage", "--in", str(mat), "--method", "exact", "--out", str(scores)])
    code = run([
        "order", "--scores", str(scores), "--policy", "dec-swor", "--seed", "3",
        "--epochs", "2", "--batch", "8", "--out-dir", str(tmp_path / "plans"),
    ])
    assert code == 0
    manifest = json.loads((tmp_path / "plans" / "order_manifest.json").read_text())
    assert manifest["epochs"] == 2
    assert manifest["policy"] == "dec_swor"
    assert manifest["batch_size"] == 8
    for name in manifest["epoch_files"]:
        lines = (tmp_path / "plans" / name).read_text().split()
        assert sorted(int(v) for v in lines) == list(range(30))


def test_unknown_method_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(["leverage", "--in", "x.bin", "--method", "magic", "--out", "y.csv"])
    assert exc.value.code == 2


def test_missing_input_exits_1(tmp_path):
    code = run(["leverage", "--in", str(tmp_path / "nope.bin"), "--method", "exact", "--out", str(tmp_path / "l.csv")])
    assert code == 1


def test_runtime_error_exits_1(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    code = run(["leverage", "--in", str(bad), "--method", "exact", "--out", str(tmp_path / "l.csv")])
    assert code == 1


def test_bench_smoke_single_cell(tmp_path):
    import time

    out = tmp_path / "bench.csv"
    t0 = time.perf_counter()
    code = run([
        "bench", "--log2-n", "10", "--d", "16", "--methods", "exact,countsketch",
        "--eps", "0.5", "--repeats", "3", "--out", str(out),
    ])
    elapsed = time.perf_counter() - t0
    assert code == 0
    assert elapsed < 5.0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "n,d,method,eps,sketch_c,repeat,seconds,status"
    assert len(lines) == 1 + 2 * 3  # two methods x three repeats
    assert all(line.endswith("ok") for line in lines[1:])
    summary = (tmp_path / "bench_summary.csv").read_text().strip().split("\n")
    assert summary[0] == "n,d,method,eps,sketch_c,median_seconds"
    assert len(summary) == 3


def test_bench_sweeps_sizing_constant(tmp_path):
    out = tmp_path / "bench.csv"
    code = run([
        "bench", "--log2-n", "8", "--d", "8", "--methods", "countsketch",
        "--eps", "0.5", "--sketch-c", "1,2", "--repeats", "1", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().strip().split("\n")[1:]
    c_values = sorted(line.split(",")[4] for line in lines)
    assert c_values == ["1", "2"]


def test_bench_capacity_cells_skipped(tmp_path):
    out = tmp_path / "bench.csv"
    code = run([
        "bench", "--log2-n", "4,16", "--d", "64", "--methods", "exact",
        "--repeats", "1", "--mem-cap", "200000", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().strip().split("\n")[1:]
    statuses = {line.split(",")[0]: line.split(",")[-1] for line in lines}
    assert statuses["16"] == "ok"
    assert statuses["65536"] == "skipped"


def test_figure_kinds(tmp_path):
    for kind, n, d in (("rank-full", 256, 6), ("rank-half", 256, 6), ("trunc-fix", 256, 6)):
        out = tmp_path / f"{kind}.csv"
        code = run(["figure", "--kind", kind, "--n", str(n), "--d", str(d), "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "true_score,approx_score"
        assert len(lines) == 1 + n
    out = tmp_path / "spectrum.csv"
    assert run(["figure", "--kind", "spectrum", "--n", "128", "--d", "64", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "component,sigma"
    assert len(lines) == 1 + 64


def _figure_band_fractions(path, band=1.0, floor=1e-6):
    pairs = np.loadtxt(path, delimiter=",", skiprows=1)
    truth, approx = pairs[:, 0], pairs[:, 1]
    mask = truth >= floor
    rel = np.abs(approx[mask] - truth[mask]) / truth[mask]
    return float((rel <= band).mean())


def test_figure_bands(tmp_path):
    # full rank: at least 95% of points inside the relative 2*eps band
    full = tmp_path / "full.csv"
    run(["figure", "--kind", "rank-full", "--seed", "3", "--out", str(full)])
    assert _figure_band_fractions(full) >= 0.95
    # rank d/2: the band breaks without truncation
    half = tmp_path / "half.csv"
    run(["figure", "--kind", "rank-half", "--seed", "3", "--out", str(half)])
    assert _figure_band_fractions(half) < 1.0
    # and truncation restores it
    fixed = tmp_path / "fixed.csv"
    run(["figure", "--kind", "trunc-fix", "--seed", "3", "--out", str(fixed)])
    assert _figure_band_fractions(fixed) >= 0.95


def test_config_file_seeds_defaults_but_flags_win(tmp_path):
    cfg = tmp_path / "cfg"
    cfg.write_text("# defaults for gen\nn=25\nd=4\nout=%s\nseed=5\n" % (tmp_path / "cfg_out.bin"))
    assert run(["gen", "--config", str(cfg), "--seed", "6"]) == 0
    meta = json.loads((tmp_path / "cfg_out.bin.json").read_text())
    assert meta["flags"]["n"] == 25
    assert meta["seed"] == 6  # explicit flag beat the config value
    with_cfg = load_matrix(tmp_path / "cfg_out.bin")
    assert with_cfg.shape == (25, 4)


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "cfg"
    cfg.write_text("frobnicate=1\n")
    assert run(["gen", "--config", str(cfg), "--n", "4", "--d", "2", "--out", str(tmp_path / "x.bin")]) == 1


def test_deterministic_outputs_across_runs(tmp_path):
    args_a = ["gen", "--n", "64", "--d", "6", "--seed", "42", "--out"]
    run(args_a + [str(tmp_path / "a1.bin")])
    run(args_a + [str(tmp_path / "a2.bin")])
    assert (tmp_path / "a1.bin").read_bytes() == (tmp_path / "a2.bin").read_bytes()
    lev = ["leverage", "--in", str(tmp_path / "a1.bin"), "--method", "sketch-trunc",
           "--sketch", "countsketch", "--seed", "7", "--out"]
    run(lev + [str(tmp_path / "l1.csv")])
    run(lev + [str(tmp_path / "l2.csv")])
    assert (tmp_path / "l1.csv").read_bytes() == (tmp_path / "l2.csv").read_bytes()
