import csv
import statistics

import pytest

from sleepguard.cli import BENCH_COLUMNS, METRICS, RUN_COLUMNS, crypto_bench, fmt, main, plot_summary

FAST = ["--set", "node_count=40", "--set", "sim_time=8"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "net.cfg"
    p.write_text("node_count = 40\nsim_time = 8\nattack_ratio = 0.1\n")
    return str(p)


def test_simulate_header_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--seed", "1", "--out", str(a)] + FAST) == 0
    assert main(["simulate", "--seed", "1", "--out", str(b)] + FAST) == 0
    assert _rows(a)[0] == RUN_COLUMNS
    assert len(_rows(a)) == 2
    assert a.read_bytes() == b.read_bytes()


def test_simulate_event_log(tmp_path, cfg_file):
    log = tmp_path / "ev.ndjson"
    assert main(["simulate", "--config", cfg_file, "--seed", "2", "--out", str(tmp_path / "r.csv"),
                 "--event-log", str(log)]) == 0
    lines = log.read_text().splitlines()
    assert lines[0].startswith("{") and '"kind":"End"' in lines[-1]


def test_exit_codes(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg"), "--out", "-"]) == 1
    assert main(["simulate", "--set", "node_count=-3", "--out", "-"]) == 1
    assert main(["sweep", "--axis", "Bogus", "--values", "1", "--seeds", "1", "--out", str(tmp_path)]) == 1
    assert main(["crypto-bench", "--key-sizes", "32", "--out", "-"]) == 1
    assert main([]) == 1


def test_single_point_sweep_equals_single_run(tmp_path, cfg_file):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", cfg_file, "--axis", "MisbehavingRatio", "--values", "0.1",
                 "--seeds", "3", "--schemes", "defended", "--out", str(out)]) == 0
    single = tmp_path / "one.csv"
    assert main(["simulate", "--config", cfg_file, "--seed", "3", "--out", str(single)]) == 0
    run = dict(zip(RUN_COLUMNS, _rows(single)[1]))
    summ = _rows(out / "summary.csv")
    got = dict(zip(summ[0], summ[1]))
    for m in METRICS:
        assert float(got[f"{m}_defended"]) == float(run[m])
    assert sorted(p.name for p in out.glob("*.svg")) == sorted(f"{m}.svg" for m in METRICS)


def test_sweep_summary_is_mean_and_plots_regenerate(tmp_path, cfg_file):
    out = tmp_path / "sw"
    args = ["sweep", "--config", cfg_file, "--axis", "MisbehavingRatio", "--values", "0,0.1",
            "--seeds", "1,2", "--out", str(out)]
    assert main(args) == 0
    runs = _rows(out / "runs.csv")
    head, body = runs[0], runs[1:]
    assert len(body) == 2 * 2 * 2
    summ = _rows(out / "summary.csv")
    for row in summ[1:]:
        for m in METRICS:
            for scheme in ("defended", "undefended"):
                vals = [float(r[head.index(m)]) for r in body
                        if r[0] == row[0] and r[head.index("scheme")] == scheme]
                assert row[summ[0].index(f"{m}_{scheme}")] == fmt(statistics.fmean(vals))
    before = {p.name: p.read_bytes() for p in out.glob("*.svg")}
    regen = tmp_path / "regen"
    regen.mkdir()
    plot_summary(str(out / "summary.csv"), str(regen))
    assert {p.name: p.read_bytes() for p in regen.glob("*.svg")} == before
    first = (out / "runs.csv").read_bytes()
    assert main(args) == 0
    assert (out / "runs.csv").read_bytes() == first


def test_crypto_bench_rows(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["crypto-bench", "--key-sizes", "128,256,512,768,1024,1280", "--chunk-sizes",
                 "256,512,1024", "--trials", "1", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == BENCH_COLUMNS and len(rows) == 19


def test_decrypt_slower_than_encrypt():
    for row in crypto_bench([512, 1024], [256], trials=3):
        assert row[4] > row[3]
