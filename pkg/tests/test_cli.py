import json

import pytest

from lnme.cli import EXIT_DATA, EXIT_EXHAUSTED, EXIT_OK, format_btc, main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def gen_inputs(workdir, snapshots=120, counts="0,5000,0", txs=2000, blocks=120):
    assert run("gen", "timeline", "--bands", "0,10,50", "--counts", counts,
               "--snapshots", snapshots, "--interval", 600, "--out", "tl.csv") == EXIT_OK
    assert run("gen", "blocks", "--count", blocks, "--txs", txs,
               "--interval", 600, "--out", "bl.csv") == EXIT_OK


class TestFormatBtc:
    def test_round_numbers(self):
        assert format_btc(100_000_000) == "1.00000000"
        assert format_btc(0) == "0.00000000"

    def test_fraction_and_sign(self):
        assert format_btc(168_513_000_000) == "1685.13000000"
        assert format_btc(-450_000_000) == "-4.50000000"


class TestGen:
    def test_graph_deterministic(self, workdir):
        assert run("gen", "graph", "--scale-free", "--n", 100, "--m", 2,
                   "--seed", 9, "--out", "a.csv") == EXIT_OK
        assert run("gen", "graph", "--scale-free", "--n", 100, "--m", 2,
                   "--seed", 9, "--out", "b.csv") == EXIT_OK
        a = (workdir / "a.csv").read_text()
        assert a == (workdir / "b.csv").read_text()
        assert a.startswith("node_a,node_b,capacity_sat\n")

    def test_timeline_and_blocks(self, workdir):
        gen_inputs(workdir, snapshots=5, blocks=5)
        tl = (workdir / "tl.csv").read_text().splitlines()
        assert tl[0] == "timestamp,0,10,50"
        assert len(tl) == 6
        bl = (workdir / "bl.csv").read_text().splitlines()
        assert bl[0] == "height,timestamp,tx_count"
        assert bl[1].endswith(",2000")


class TestSolve:
    def test_cut_and_curve(self, workdir):
        run("gen", "graph", "--scale-free", "--n", 80, "--m", 2, "--seed", 3, "--out", "g.csv")
        assert run("solve", "--graph", "g.csv", "--k", 5, "--k-max", 20,
                   "--objective", "capacity", "--out", "sol") == EXIT_OK
        cut = json.loads((workdir / "sol.cut.json").read_text())
        assert cut["k"] == 5
        assert len(cut["coalition"]) == 5
        assert cut["edge_count"] == len(cut["cut_channels"])
        curve = (workdir / "sol.curve.csv").read_text().splitlines()
        assert curve[0] == "k,edge_count,cut_capacity_sat"
        assert len(curve) == 21
        manifest = json.loads((workdir / "sol.manifest.json").read_text())
        assert manifest["command"] == "solve"
        assert "graph" in manifest["inputs"]

    def test_missing_graph_is_data_error(self, workdir, capsys):
        assert run("solve", "--graph", "nope.csv", "--k", 2, "--out", "x") == EXIT_DATA
        assert "error" in capsys.readouterr().err

    def test_requires_k_or_kmax(self, workdir):
        run("gen", "graph", "--scale-free", "--n", 10, "--m", 1, "--seed", 0, "--out", "g.csv")
        with pytest.raises(SystemExit) as exc:
            run("solve", "--graph", "g.csv", "--out", "x")
        assert exc.value.code == 2


class TestZombie:
    def test_single_run(self, workdir):
        gen_inputs(workdir)
        assert run("zombie", "--channels", 3000, "--fee", 70, "--timeline", "tl.csv",
                   "--blocks", "bl.csv", "--out", "z") == EXIT_OK
        summary = json.loads((workdir / "z.summary.json").read_text())
        assert summary["blocks_to_close_all"] == 2
        series = (workdir / "z.series.csv").read_text().splitlines()
        assert series[0] == "height,remaining"

    def test_zero_fee_on_congested_window_exhausts(self, workdir):
        gen_inputs(workdir, counts="5000,0,0")
        assert run("zombie", "--channels", 10, "--fee", 0, "--timeline", "tl.csv",
                   "--blocks", "bl.csv", "--out", "z") == EXIT_EXHAUSTED
        summary = json.loads((workdir / "z.summary.json").read_text())
        assert summary["horizon_exhausted"] is True

    def test_fee_sweep_rows(self, workdir):
        gen_inputs(workdir)
        assert run("zombie", "--channels", 1000, "--fee", "5,20,70", "--timeline", "tl.csv",
                   "--blocks", "bl.csv", "--out", "zs") == EXIT_EXHAUSTED
        rows = (workdir / "zs.sweep.csv").read_text().splitlines()
        assert len(rows) == 4  # header + one row per fee

    def test_cut_file_supplies_channel_count(self, workdir):
        gen_inputs(workdir)
        run("gen", "graph", "--scale-free", "--n", 60, "--m", 2, "--seed", 1, "--out", "g.csv")
        run("solve", "--graph", "g.csv", "--k", 4, "--out", "sol")
        assert run("zombie", "--cut-file", "sol.cut.json", "--fee", 70, "--timeline", "tl.csv",
                   "--blocks", "bl.csv", "--out", "z") == EXIT_OK
        cut = json.loads((workdir / "sol.cut.json").read_text())
        summary = json.loads((workdir / "z.summary.json").read_text())
        assert f"n={cut['edge_count']}," in summary["config"]

    def test_dynamic_flags(self, workdir):
        gen_inputs(workdir, counts="0,5000,0")
        assert run("zombie", "--channels", 50, "--dynamic", "--initial-fee", 5,
                   "--step", 2, "--beta", 1.5, "--timeline", "tl.csv",
                   "--blocks", "bl.csv", "--out", "z") == EXIT_OK


class TestDoublespend:
    def make_cut(self, workdir):
        run("gen", "graph", "--scale-free", "--n", 60, "--m", 2, "--seed", 1, "--out", "g.csv")
        run("solve", "--graph", "g.csv", "--k", 4, "--objective", "capacity", "--out", "sol")

    def test_report_outputs(self, workdir):
        gen_inputs(workdir)
        self.make_cut(workdir)
        assert run("doublespend", "--cut-file", "sol.cut.json", "--attacker-fee", 70,
                   "--delay", "fixed:5", "--timeline", "tl.csv", "--blocks", "bl.csv",
                   "--out", "ds") == EXIT_OK
        report = json.loads((workdir / "ds.report.json").read_text())
        assert report["attacked"] == report["compromised"] + report["defended"] + report["undecided"]
        assert report["profit_mode"] == "per-channel"
        series = (workdir / "ds.series.csv").read_text().splitlines()
        assert series[0] == "height,cumulative_compromised"

    def test_average_profit_mode_formula(self, workdir):
        gen_inputs(workdir)
        self.make_cut(workdir)
        assert run("doublespend", "--cut-file", "sol.cut.json", "--attacker-fee", 70,
                   "--delay", "fixed:5", "--profit-mode", "average", "--avg-capacity", 4_500_000,
                   "--timeline", "tl.csv", "--blocks", "bl.csv", "--out", "ds") == EXIT_OK
        report = json.loads((workdir / "ds.report.json").read_text())
        n, a = report["compromised"], report["attacked"]
        assert report["realized_profit_sat"] == 4_500_000 * (2 * n - a) // 2

    def test_average_mode_requires_avg_capacity(self, workdir):
        gen_inputs(workdir)
        self.make_cut(workdir)
        with pytest.raises(SystemExit) as exc:
            run("doublespend", "--cut-file", "sol.cut.json", "--attacker-fee", 70,
                "--profit-mode", "average", "--timeline", "tl.csv", "--blocks", "bl.csv",
                "--out", "ds")
        assert exc.value.code == 2

    def test_undecided_warning_and_exit(self, workdir, capsys):
        gen_inputs(workdir, blocks=40, snapshots=40)
        self.make_cut(workdir)
        code = run("doublespend", "--cut-file", "sol.cut.json", "--attacker-fee", 70,
                   "--delay", "fixed:2000", "--timeline", "tl.csv", "--blocks", "bl.csv",
                   "--out", "ds")
        assert code == EXIT_EXHAUSTED
        assert "undecided" in capsys.readouterr().err

    def test_event_log_written(self, workdir):
        gen_inputs(workdir)
        self.make_cut(workdir)
        assert run("doublespend", "--cut-file", "sol.cut.json", "--attacker-fee", 70,
                   "--delay", "fixed:5", "--event-log", "--timeline", "tl.csv",
                   "--blocks", "bl.csv", "--out", "ds") == EXIT_OK
        lines = (workdir / "ds.events.jsonl").read_text().splitlines()
        assert lines
        first = json.loads(lines[0])
        assert set(first) == {"height", "confirmed"}
        assert first["confirmed"]

    def test_scenario2_requires_average(self, workdir):
        gen_inputs(workdir)
        self.make_cut(workdir)
        with pytest.raises(SystemExit) as exc:
            run("doublespend", "--cut-file", "sol.cut.json", "--attacker-fee", 70,
                "--scenario", "2", "--timeline", "tl.csv", "--blocks", "bl.csv", "--out", "ds")
        assert exc.value.code == 2


class TestManifest:
    def test_rerun_is_bit_identical(self, workdir):
        gen_inputs(workdir, snapshots=10, blocks=10)
        run("gen", "graph", "--scale-free", "--n", 40, "--m", 2, "--seed", 5, "--out", "g.csv")
        run("solve", "--graph", "g.csv", "--k", 3, "--out", "one")
        run("solve", "--graph", "g.csv", "--k", 3, "--out", "two")
        one = (workdir / "one.cut.json").read_text().replace("one.manifest", "x.manifest")
        two = (workdir / "two.cut.json").read_text().replace("two.manifest", "x.manifest")
        assert one == two
        m1 = json.loads((workdir / "one.manifest.json").read_text())
        m2 = json.loads((workdir / "two.manifest.json").read_text())
        assert m1["inputs"] == m2["inputs"]
        assert m1["parameters"] == m2["parameters"]

    def test_outputs_reference_manifest(self, workdir):
        gen_inputs(workdir, snapshots=10, blocks=10)
        run("zombie", "--channels", 10, "--fee", 70, "--timeline", "tl.csv",
            "--blocks", "bl.csv", "--out", "z")
        summary = json.loads((workdir / "z.summary.json").read_text())
        assert summary["manifest"] == "z.manifest.json"
        manifest = json.loads((workdir / "z.manifest.json").read_text())
        assert "z.series.csv" in manifest["outputs"]
