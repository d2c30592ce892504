import pytest

from mpsim.cli import main, parse_size, parse_size_list

MiB = 1 << 20


def run(args, env=None):
    return main(args, env={} if env is None else env)


def test_parse_size_suffixes():
    assert parse_size("512") == 512
    assert parse_size("4K") == 4096
    assert parse_size("1M") == MiB
    assert parse_size("2g") == 2 << 30


def test_parse_size_list_range_and_commas():
    assert parse_size_list("1M..8M") == [MiB, 2 * MiB, 4 * MiB, 8 * MiB]
    assert parse_size_list("2,8,16,34") == [2, 8, 16, 34]
    assert parse_size_list("2..34") == [2, 4, 8, 16, 32, 34]
    with pytest.raises(ValueError):
        parse_size_list("8M..1M")


def test_topo_validate_preset(capsys):
    assert run(["topo", "validate", "beluga"]) == 0
    out = capsys.readouterr().out
    assert "4 accelerators" in out
    assert "6 accelerator links" in out


def test_topo_validate_bad_file(tmp_path, capsys):
    bad = tmp_path / "broken.topo"
    bad.write_text("[device]\n0 accelerator\n[link]\n0 0 1e9 0 full 1\n")
    assert run(["topo", "validate", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_simulate_prints_summary(capsys):
    code = run(["simulate", "--size", "16M", "--gpu-paths", "2", "--chunks", "4"])
    assert code == 0
    out = capsys.readouterr().out
    assert "makespan_s" in out
    assert "integrity clear" in out


def test_flag_overrides_env(capsys):
    env = {"MP_NUM_GPU_PATHS": "3", "MP_MAX_CHUNKS": "8"}
    run(["simulate", "--size", "4M"], env=env)
    assert "paths 3" in capsys.readouterr().out
    run(["simulate", "--size", "4M", "--gpu-paths", "1"], env=env)
    assert "paths 1" in capsys.readouterr().out


def test_env_graph_mode(capsys):
    run(["simulate", "--size", "4M"], env={"MP_ENABLE_GRAPH": "on"})
    assert "mode graph" in capsys.readouterr().out


def test_bench_bw_csv_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["bench", "bw", "--sizes", "1M,16M", "--gpu-paths", "3", "--host", "on",
            "--graph", "on", "--chunks", "4", "--window", "1"]
    assert run(args + ["--output", str(out1)]) == 0
    assert run(args + ["--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    header = out1.read_text().splitlines()[0]
    assert header.startswith("benchmark,topology,size,window")


def test_bench_bw_has_speedup_column(tmp_path):
    out = tmp_path / "bw.csv"
    run(["bench", "bw", "--sizes", "64M", "--gpu-paths", "3", "--graph", "on",
         "--chunks", "8", "--output", str(out)])
    line = [l for l in out.read_text().splitlines() if ",bandwidth," in l][0]
    speedup = float(line.split(",")[-1])
    assert speedup > 1.0


def test_bench_figures_rendered(tmp_path):
    figdir = tmp_path / "figs"
    run(["bench", "bw", "--sizes", "1M,4M", "--chunks", "2", "--output",
         str(tmp_path / "o.csv"), "--figures", str(figdir)])
    rendered = list(figdir.glob("*.png"))
    assert len(rendered) == 1
    assert rendered[0].stat().st_size > 0


def test_bench_bibw_and_latency(tmp_path):
    assert run(["bench", "bibw", "--sizes", "8M", "--gpu-paths", "2",
                "--output", str(tmp_path / "bibw.csv")]) == 0
    assert run(["bench", "latency", "--sizes", "8M", "--graph", "on",
                "--gpu-paths", "2", "--chunks", "4",
                "--output", str(tmp_path / "lat.csv")]) == 0
    text = (tmp_path / "lat.csv").read_text()
    assert "phase_instantiation_first" in text


def test_bench_jacobi(tmp_path):
    out = tmp_path / "jacobi.csv"
    assert run(["bench", "jacobi", "--nx", "16M", "--gpu-paths", "2",
                "--graph", "on", "--chunks", "8", "--output", str(out)]) == 0
    text = out.read_text()
    assert "comm_time" in text
    assert ",integrity,1.0," in text


def test_tune_then_feed_table(tmp_path):
    table = tmp_path / "table.csv"
    assert run(["tune", "--sizes", "4M,64M", "--grid-chunks", "1,4,8",
                "--output", str(table)]) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "size,mode,gpu_paths,host,max_chunks,makespan"
    assert len(lines) == 1 + 2 * 2  # two sizes, two modes
    out = tmp_path / "bw.csv"
    assert run(["bench", "bw", "--sizes", "64M", "--graph", "on",
                "--tuning-table", str(table), "--output", str(out)]) == 0


def test_overhead_table(tmp_path):
    out = tmp_path / "overhead.csv"
    assert run(["overhead", "--nodes", "2,8,16,34", "--output", str(out)]) == 0
    text = out.read_text()
    assert "phase_launch_steady" in text
    assert "fraction_instantiation_first" in text


def test_verify_roundtrip_and_corruption(tmp_path, capsys):
    plan = tmp_path / "x.plan"
    timeline = tmp_path / "x.csv"
    run(["simulate", "--size", "8M", "--gpu-paths", "2", "--chunks", "3",
         "--dump-plan", str(plan), "--dump-timeline", str(timeline)])
    assert run(["verify", "--plan", str(plan), "--timeline", str(timeline)]) == 0

    rows = timeline.read_text().splitlines()
    victim = next(i for i, row in enumerate(rows) if ",stage_hop2," in row)
    fields = rows[victim].split(",")
    fields[4] = "0.0"  # hop2 now starts before its hop1 completes
    rows[victim] = ",".join(fields)
    corrupted = tmp_path / "bad.csv"
    corrupted.write_text("\n".join(rows) + "\n")
    assert run(["verify", "--plan", str(plan), "--timeline", str(corrupted)]) == 1


def test_fuzz_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["fuzz", "--seed", "9", "--count", "25", "--output", str(a)]) == 0
    assert run(["fuzz", "--seed", "9", "--count", "25", "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 26


def test_unknown_preset_is_one_line_error(capsys):
    assert run(["topo", "validate", "noexist.topo"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert len(err.strip().splitlines()) == 1


def test_overhead_flag_overrides_model(tmp_path):
    out = tmp_path / "o.csv"
    run(["overhead", "--nodes", "34", "--overhead", "a_instantiation=0",
         "--overhead", "b_instantiation=0.0001", "--output", str(out)])
    inst = [l for l in out.read_text().splitlines()
            if "phase_instantiation_first" in l][0]
    assert float(inst.split(",")[9]) == pytest.approx(34 * 1e-4)


def test_bad_overhead_key(capsys):
    assert run(["overhead", "--nodes", "2", "--overhead", "warp_speed=1"]) == 1
    assert "known keys" in capsys.readouterr().err
