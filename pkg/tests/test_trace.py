import numpy as np
import pytest

import vibench as vb
from vibench.trace import CSV_HEADER, RunTrace, TraceRow


def sample_trace():
    meta = {"solver": "ommb", "backend": "pure", "dim": 4, "eta": 0.125,
            "seed": 7, "warnings": ""}
    rows = [
        TraceRow(100, 310, 31.0, 0.5, 0.6, 0.01, 12),
        TraceRow(200, 610, 61.0, 0.25, 0.3, 0.005, 25),
        TraceRow(300, 910, 91.0, 0.125, 0.2, 0.0025, 40),
    ]
    return RunTrace(metadata=meta, rows=rows)


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "t.csv"
        trace = sample_trace()
        trace.write_csv(path)
        back = RunTrace.read_csv(path)
        assert back.rows == trace.rows
        assert back.metadata["solver"] == "ommb"
        assert back.metadata["eta"] == "0.125"

    def test_header_and_format(self, tmp_path):
        path = tmp_path / "t.csv"
        sample_trace().write_csv(path)
        text = path.read_text()
        lines = text.splitlines()
        assert lines[0] == "# vibench-trace v1"
        header_idx = next(i for i, l in enumerate(lines) if not l.startswith("#"))
        assert lines[header_idx] == CSV_HEADER
        assert lines[header_idx + 1] == "100,310,31,0.5,0.6,0.01,12"

    def test_ten_significant_digits(self, tmp_path):
        path = tmp_path / "t.csv"
        rows = [TraceRow(1, 1, 1 / 3, 2 / 3, 1e-12, 0.1234567890123, 0)]
        RunTrace(metadata={}, rows=rows).write_csv(path)
        body = [l for l in path.read_text().splitlines()
                if not l.startswith("#")][1]
        assert body == "1,1,0.3333333333,0.6666666667,1e-12,0.123456789,0"

    def test_nan_gap_round_trips(self, tmp_path):
        path = tmp_path / "t.csv"
        rows = [TraceRow(1, 2, 2.0, float("nan"), float("nan"), 0.5, 3)]
        RunTrace(metadata={}, rows=rows).write_csv(path)
        back = RunTrace.read_csv(path)
        assert np.isnan(back.rows[0].gap_avg)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# vibench-trace v1\n")
        with pytest.raises(ValueError, match="empty trace"):
            RunTrace.read_csv(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError, match="unexpected header"):
            RunTrace.read_csv(path)

    def test_rows_monotone_in_run_output(self):
        game = vb.make_game(vb.GeneratorSpec("policeman_burglar", dim=6, seed=0))
        params = vb.SolverParams(eta=1e-3, gamma=0.25, prob=0.25, batch=1,
                                 max_iters=500, seed=1)
        trace = vb.run_ommb(game.problem(), params, cadence=50)
        its = [r.iteration for r in trace.rows]
        ops = [r.matvec_ops for r in trace.rows]
        assert its == sorted(set(its))
        assert all(b >= a for a, b in zip(ops, ops[1:]))
