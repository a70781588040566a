import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from netexp.cli import main
from netexp.graphio import dump_normalized, load_graph_file, parse_graph_obj
from netexp.errors import GraphFileError

ROOT = Path(__file__).resolve().parent.parent
GRAPHS = ROOT / "graphs"
GOLDEN = Path(__file__).resolve().parent / "data" / "golden_simulate.csv"


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


class TestAnalyzeCommand:
    def test_series_maxflow(self, capsys):
        code, out = run_cli(capsys, "analyze", str(GRAPHS / "series-2-bsc.json"))
        assert code == 0
        obj = json.loads(out)
        assert obj["maxflow"] == pytest.approx(0.223143551314)
        assert obj["maxflow_tilde"] == pytest.approx(0.223143551314)

    def test_counterexample_backedge_absent(self, capsys):
        code, out = run_cli(
            capsys, "analyze", str(GRAPHS / "counterexample.json"), "--messages", "3"
        )
        assert code == 0
        assert json.loads(out)["backedge_free_mincut_exists"] is False

    def test_malformed_channel_kind_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({
            "nodes": ["a", "b"], "source": "a", "destination": "b",
            "edges": [{"from": "a", "to": "b", "channel": {"kind": "awgn"}}],
        }))
        code = main(["analyze", str(bad)])
        err = capsys.readouterr().err
        assert code == 2
        assert "edges[0].channel" in err

    def test_missing_file_exit_2(self, capsys):
        assert main(["analyze", str(GRAPHS / "missing.json")]) == 2

    def test_twelve_significant_digits(self, capsys):
        _, out = run_cli(capsys, "analyze", str(GRAPHS / "series-2-bsc.json"))
        assert "0.510825623766" in out  # 12 significant digits


class TestSimulateCommand:
    def test_noiseless_all_zero(self, capsys):
        code, out = run_cli(
            capsys, "simulate", str(GRAPHS / "noiseless.json"),
            "--block", "4", "--horizons", "12,16", "--trials", "200", "--seed", "5",
            "--decoder", "heuristic",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "n,message,errors,trials,p_hat,ci_lo,ci_hi"
        for line in lines[1:]:
            assert line.split(",")[2] == "0"

    def test_golden_benchmark_csv(self, capsys):
        code, out = run_cli(
            capsys, "simulate", str(GRAPHS / "series-2-bsc005.json"),
            "--messages", "2", "--block", "4", "--horizons", "12,16,20,24",
            "--trials", "100000", "--seed", "7", "--decoder", "exact",
        )
        assert code == 0
        assert out == GOLDEN.read_text()

    def test_odd_block_exit_3(self, capsys):
        code = main([
            "simulate", str(GRAPHS / "series-2-bsc.json"),
            "--block", "3", "--horizons", "12",
        ])
        err = capsys.readouterr().err
        assert code == 3
        assert "block size must be even" in err


class TestCounterexampleCommand:
    def test_single_p(self, capsys):
        code, out = run_cli(capsys, "counterexample", "--p-grid", "0.01")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "p,min_db_q,maxflow_bound,maxflow_feedback_bound"
        p, db, bound, fb = (float(v) for v in lines[1].split(","))
        assert db == pytest.approx(3.0078, abs=1e-3)
        assert bound == pytest.approx(2.6466, abs=1e-3)
        assert db > bound and db > fb

    def test_default_grid_slopes(self, capsys):
        code, out = run_cli(capsys, "counterexample")
        assert code == 0
        rows = [list(map(float, line.split(","))) for line in out.strip().splitlines()[1:]]
        small = [r for r in rows if r[0] <= 1e-3]
        x = np.log([1 / r[0] for r in small])
        assert np.polyfit(x, [r[1] for r in small], 1)[0] == pytest.approx(1.0, abs=0.02)
        assert np.polyfit(x, [r[2] for r in small], 1)[0] == pytest.approx(5 / 6, abs=0.02)

    def test_out_of_range_exit_3(self, capsys):
        assert main(["counterexample", "--p-grid", "0.4"]) == 3

    def test_empty_grid_exit_3(self, capsys):
        assert main(["counterexample", "--p-grid", ""]) == 3


class TestDecomposeCommand:
    def test_diamond_two_lines(self, capsys):
        code, out = run_cli(capsys, "decompose", str(GRAPHS / "diamond.json"))
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 2
        assert lines[0] == "s->a->t value=0.510825623766"
        assert lines[1] == "s->b->t value=0.223143551314"

    def test_series_one_line(self, capsys):
        code, out = run_cli(capsys, "decompose", str(GRAPHS / "series-2-bsc.json"))
        assert code == 0
        assert out.strip().splitlines() == ["s->r->t value=0.223143551314"]

    def test_counterexample_deterministic(self, capsys):
        code, out1 = run_cli(
            capsys, "decompose", str(GRAPHS / "counterexample.json"), "--messages", "3"
        )
        assert code == 0
        routes = [line.split(" ")[0] for line in out1.strip().splitlines()]
        assert routes == ["1->2->4", "1->3->4"]


class TestOracleCommand:
    def test_series_divergence(self, capsys):
        code, out = run_cli(
            capsys, "oracle", str(GRAPHS / "series-2-bsc.json"),
            "--messages", "2", "--block", "2",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "m1,m2,db_nats"
        assert float(lines[1].split(",")[2]) > 0

    def test_non_series_graph_exit_3(self, capsys):
        assert main(["oracle", str(GRAPHS / "diamond.json"), "--block", "2"]) == 3


class TestDumpNormalized:
    def test_round_trip_identical_graph(self, capsys, tmp_path):
        code, out = run_cli(
            capsys, "analyze", str(GRAPHS / "counterexample.json"), "--dump-normalized"
        )
        assert code == 0
        reparsed = parse_graph_obj(json.loads(out))
        original = load_graph_file(str(GRAPHS / "counterexample.json"))
        assert reparsed.graph.node_count == original.graph.node_count
        assert reparsed.graph.source == original.graph.source
        assert reparsed.graph.destination == original.graph.destination
        for a, b in zip(reparsed.graph.edges, original.graph.edges):
            assert (a.tail, a.head, a.id) == (b.tail, b.head, b.id)
            assert np.allclose(a.channel.probs, b.channel.probs)
        # normalizing twice is a fixed point
        assert dump_normalized(reparsed) == out.strip()


class TestByteDeterminism:
    @pytest.mark.parametrize("argv", [
        ["analyze", str(GRAPHS / "series-2-bsc.json")],
        ["decompose", str(GRAPHS / "diamond.json")],
        ["counterexample", "--p-grid", "1e-2,1e-3"],
        ["simulate", str(GRAPHS / "series-2-bsc.json"), "--block", "4",
         "--horizons", "12,16", "--trials", "300", "--seed", "2", "--decoder", "heuristic"],
    ])
    def test_run_twice_same_bytes(self, capsys, argv):
        code1 = main(list(argv))
        out1 = capsys.readouterr().out
        code2 = main(list(argv))
        out2 = capsys.readouterr().out
        assert code1 == code2 == 0
        assert out1 == out2


class TestGraphFileValidation:
    def test_duplicate_node_ids(self):
        with pytest.raises(GraphFileError, match="nodes"):
            parse_graph_obj({
                "nodes": ["a", "a"], "source": "a", "destination": "a",
                "edges": [],
            })

    def test_unknown_endpoint_named(self):
        with pytest.raises(GraphFileError, match=r"edges\[0\]\.to"):
            parse_graph_obj({
                "nodes": ["a", "b"], "source": "a", "destination": "b",
                "edges": [{"from": "a", "to": "zzz", "channel": {"kind": "bsc", "p": 0.1}}],
            })

    def test_no_path_rejected(self):
        with pytest.raises(GraphFileError, match="edges"):
            parse_graph_obj({
                "nodes": ["a", "b"], "source": "a", "destination": "b",
                "edges": [{"from": "b", "to": "a", "channel": {"kind": "bsc", "p": 0.1}}],
            })

    def test_parallel_edges_allowed(self):
        gf = parse_graph_obj({
            "nodes": ["a", "b"], "source": "a", "destination": "b",
            "edges": [
                {"from": "a", "to": "b", "channel": {"kind": "bsc", "p": 0.1}},
                {"from": "a", "to": "b", "channel": {"kind": "bsc", "p": 0.2}},
            ],
        })
        assert len(gf.graph.edges) == 2


class TestEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "netexp.cli", "counterexample", "--p-grid", "0.01"],
            capture_output=True, text=True, cwd=str(ROOT),
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("p,min_db_q,")
