import csv
import io
import json

import pytest

from graphon_lab import StepGraphon
from graphon_lab.boundary import bipartite_optimizer
from graphon_lab.cli import build_parser, resolve, run
from graphon_lab.finite import exact_enumerate, read_dos_csv
from graphon_lab.graphs import SimpleGraph
from graphon_lab.phase import ScanTable


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def data_rows(text):
    return list(csv.DictReader(line for line in text.splitlines() if not line.startswith("#")))


def header(text):
    meta = {}
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = json.loads(v)
    return meta


class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [[], ["frobnicate"], ["region", "--bogus", "1"], ["solve", "--e", "0.2"],
         ["region", "--step", "abc"], ["verify", "--suite", "99"]],
    )
    def test_usage_errors(self, argv):
        code, _, err = call(argv)
        assert code == 64
        assert "usage" in err

    def test_domain_error(self):
        assert call(["solve", "--e", "0.3", "--t", "0.5"])[0] == 1

    def test_resource_error(self):
        assert call(["dos", "--n", "8", "--method", "exact"])[0] == 2


class TestProvenance:
    def test_header_fields(self):
        code, out, _ = call(["region", "--step", "0.5", "--seed", "7"])
        meta = header(out)
        assert code == 0
        assert meta["seed"] == 7
        assert meta["version"]
        assert len(meta["config_hash"]) == 16

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        call(["sample", "--n", "8", "--e", "0.3", "--t", "0.02", "--delta", "0.05",
              "--samples", "3", "--burn-in", "500", "--thin", "50", "--out", str(a)])
        call(["sample", "--n", "8", "--e", "0.3", "--t", "0.02", "--delta", "0.05",
              "--samples", "3", "--burn-in", "500", "--thin", "50", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_hash_ignores_output_path(self):
        h1 = header(call(["region", "--step", "0.5"])[1])["config_hash"]
        h2 = header(call(["region", "--step", "0.5", "--threads", "3"])[1])["config_hash"]
        h3 = header(call(["region", "--step", "0.25"])[1])["config_hash"]
        assert h1 == h2 != h3


class TestConfig:
    def test_config_then_flags(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"step": 0.5, "seed": 3}))
        _, out, _ = call(["region", "--config", str(cfg)])
        assert [float(r["e"]) for r in data_rows(out)] == [0.0, 0.5, 1.0]
        assert header(out)["seed"] == 3
        _, out, _ = call(["region", "--config", str(cfg), "--step", "0.25"])
        assert header(out)["params"]["step"] == 0.25

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"stride": 0.5}))
        assert call(["region", "--config", str(cfg)])[0] == 64

    def test_thread_fallbacks(self, monkeypatch):
        parser = build_parser()
        monkeypatch.setenv("GRAPHON_LAB_THREADS", "3")
        assert resolve("region", parser.parse_args(["region"]))["threads"] == 3
        assert resolve("region", parser.parse_args(["region", "--threads", "2"]))["threads"] == 2
        monkeypatch.delenv("GRAPHON_LAB_THREADS")
        assert resolve("region", parser.parse_args(["region"]))["threads"] >= 1


class TestVerbs:
    def test_region_cusps(self, tmp_path):
        path = tmp_path / "region.csv"
        code, _, _ = call(["region", "--step", "0.001", "--out", str(path)])
        assert code == 0
        rows = {round(float(r["e"]), 12): r for r in data_rows(path.read_text())}
        for k in range(1, 5):
            ek = k / (k + 1)
            assert float(rows[round(ek, 12)]["t_lower"]) == pytest.approx(ek * (2 * ek - 1), abs=1e-9)

    def test_boundary(self):
        code, out, _ = call(["boundary", "--step", "0.1"])
        rows = data_rows(out)
        assert code == 0
        assert set(rows[0]) == {"e", "t", "curve_tag"}
        assert {r["curve_tag"] for r in rows} >= {"upper", "flat", "scallop"}

    def test_solve_example(self, tmp_path):
        path = tmp_path / "result.json"
        code, _, _ = call(["solve", "--e", "0.25", "--t", "0.007625", "--m", "16",
                           "--starts", "8", "--seed", "1", "--threads", "1", "--out", str(path)])
        assert code == 0
        d = json.loads(path.read_text())
        assert d["provenance"]["seed"] == 1
        assert -d["result"]["value"] == pytest.approx(0.221664, abs=1e-5)
        StepGraphon.from_dict(d["result"]["graphon"])

    def test_scan_and_transitions(self, tmp_path):
        path = tmp_path / "scan.csv"
        code, _, _ = call(["scan", "--e-min", "0.3", "--e-max", "0.3", "--e-steps", "1",
                           "--t-min", "0.0", "--t-max", "0.02", "--t-steps", "5",
                           "--m", "6", "--starts", "2", "--threads", "1", "--out", str(path)])
        assert code == 0
        table = ScanTable.read(path)
        assert len(table.points) == 5
        flags = tmp_path / "flags.csv"
        code, _, _ = call(["transitions", "--scan", str(path), "--fix-e", "0.3", "--out", str(flags)])
        assert code == 0
        assert data_rows(flags.read_text()) is not None

    def test_dos_round_trip(self, tmp_path):
        path = tmp_path / "dos.csv"
        assert call(["dos", "--n", "5", "--out", str(path)])[0] == 0
        dos = read_dos_csv(path)
        assert dos.counts == exact_enumerate(5).counts
        assert dos.meta["provenance"]["seed"] == 0

    def test_sample_json_lines(self):
        code, out, _ = call(["sample", "--n", "8", "--e", "0.3", "--t", "0.02", "--delta", "0.05",
                             "--samples", "2", "--burn-in", "200", "--thin", "20"])
        lines = out.strip().splitlines()
        assert code == 0
        assert "provenance" in json.loads(lines[0])
        graphs = [SimpleGraph.from_json(x) for x in lines[1:]]
        assert len(graphs) == 2

    def test_compare(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        a.write_text(bipartite_optimizer(0.25).to_json())
        b.write_text(bipartite_optimizer(0.25).permute([1, 0]).to_json())
        code, out, _ = call(["compare", "--a", str(a), "--b", str(b)])
        d = json.loads(out)
        assert code == 0
        assert d["reduced"] == 0.0
        assert d["cut_labeled"] == pytest.approx(0.0, abs=1e-15)

    def test_verify_subset(self):
        code, out, _ = call(["verify", "--suite", "2"])
        assert code == 0
        assert "criterion 2 [PASS]" in out
