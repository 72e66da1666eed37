import contextlib
import csv
import io
import json
import os
import tempfile
import unittest

import numpy as np

from tilechol.cli import SWEEP_COLUMNS, main
from tilechol.core import Precision, TileIndex, load_matrix
from tilechol.covariance import read_locations_csv
from tilechol.planner import PrecisionMap, load_precision_map, uniform_map
from tilechol.render import GLYPHS, render_ascii, render_pixels
from tilechol.schemas import TraceEventSchema, TransferEventSchema, read_jsonl

SMALL = ["--n", "64", "--nb", "16"]


class CommandTest(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.dir.cleanup()

    def path(self, name):
        return os.path.join(self.dir.name, name)

    def run_main(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()


class GenTest(CommandTest):
    def test_locations_and_dump(self):
        code, _, _ = self.run_main("gen", *SMALL, "--seed", "4", "--locations",
                                   self.path("locs.csv"), "--matrix-out", self.path("A.bin"))
        self.assertEqual(code, 0)
        self.assertEqual(len(read_locations_csv(self.path("locs.csv"))), 64)
        A = load_matrix(self.path("A.bin"))
        self.assertEqual((A.n, A.nb, A.nt), (64, 16, 4))

    def test_dump_feeds_factor(self):
        self.run_main("gen", *SMALL, "--locations", self.path("locs.csv"), "--matrix-out",
                      self.path("A.bin"))
        code, out, _ = self.run_main("factor", *SMALL, "--matrix", self.path("A.bin"))
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)["n"], 64)


class FactorTest(CommandTest):
    def test_report_to_stdout(self):
        code, out, err = self.run_main("factor", *SMALL, "--variant", "V2", "--devices", "2")
        self.assertEqual(code, 0, err)
        report = json.loads(out)
        self.assertEqual(report["variant"], "V2")
        self.assertEqual((report["kl"], report["kl_abs"]), (0.0, 0.0))
        self.assertEqual(report["kernel_counts"]["POTRF"], 4)

    def test_output_files(self):
        code, out, err = self.run_main("factor", *SMALL, "--precision-mode", "3p",
                                       "--eps-target", "1e-5", "--streams", "2",
                                       "--capacity-fraction", "0.6",
                                       "--report", self.path("report.json"),
                                       "--trace", self.path("trace.jsonl"),
                                       "--ledger", self.path("ledger.jsonl"),
                                       "--map", self.path("map.json"))
        self.assertEqual((code, out), (0, ""), err)
        with open(self.path("report.json")) as f:
            report = json.load(f)
        self.assertEqual(report["precision_mode"], "3p")

        ledger = read_jsonl(self.path("ledger.jsonl"), TransferEventSchema())
        self.assertEqual(sum(e["bytes"] for e in ledger if e["dir"] == "C2G"),
                         report["c2g_bytes"])
        self.assertEqual(sum(e["bytes"] for e in ledger if e["dir"] == "G2C"),
                         report["g2c_bytes"])

        trace = read_jsonl(self.path("trace.jsonl"), TraceEventSchema())
        kernels = [e for e in trace if e["kind"] in ("POTRF", "TRSM", "SYRK", "GEMM")]
        self.assertEqual(len(kernels), sum(report["kernel_counts"].values()))
        self.assertEqual([e["t0"] for e in trace], sorted(e["t0"] for e in trace))

        pmap = load_precision_map(self.path("map.json"))
        self.assertEqual(pmap.counts(), report["tile_counts"])

    def test_lockstep_repeats(self):
        volumes = []
        for _ in range(2):
            code, out, err = self.run_main("factor", *SMALL, "--streams", "2", "--lockstep",
                                           "--capacity-fraction", "0.9")
            self.assertEqual(code, 0, err)
            report = json.loads(out)
            volumes.append((report["c2g_bytes"], report["g2c_bytes"]))
        self.assertEqual(volumes[0], volumes[1])

    def test_config_file_and_overrides(self):
        with open(self.path("run.json"), "w") as f:
            json.dump({"n": 48, "nb": 16, "variant": "Sync", "streams_per_device": 3}, f)
        code, out, _ = self.run_main("factor", "--config", self.path("run.json"), "--nb", "8")
        self.assertEqual(code, 0)
        report = json.loads(out)
        self.assertEqual((report["n"], report["nb"], report["variant"]), (48, 8, "Sync"))
        self.assertEqual(report["streams_per_device"], 1)

    def test_infeasible_is_an_error_object(self):
        code, out, err = self.run_main("factor", *SMALL, "--capacity-bytes", "100")
        self.assertEqual((code, out), (1, ""))
        error = json.loads(err.strip().splitlines()[-1])
        self.assertEqual(error["error"], "ConfigInfeasible")
        self.assertIn("reason", error)

    def test_invalid_config_is_an_error_object(self):
        code, _, err = self.run_main("factor", *SMALL, "--capacity-bytes", "100",
                                     "--capacity-fraction", "0.5")
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "ValidationError")

    def test_missing_matrix_is_an_error_object(self):
        code, _, err = self.run_main("factor", *SMALL, "--matrix", self.path("nope.bin"))
        self.assertEqual(code, 1)
        self.assertIn("error", json.loads(err.strip().splitlines()[-1]))


class SweepTest(CommandTest):
    def write_grid(self, grid):
        with open(self.path("grid.json"), "w") as f:
            json.dump(grid, f)
        return self.path("grid.json")

    def read_rows(self):
        with open(self.path("out.csv")) as f:
            return list(csv.DictReader(f))

    def test_rows(self):
        grid = self.write_grid({
            "base": {"n": 64, "nb": 16, "capacity_fraction": 0.5},
            "axes": {"variant": ["Async", "V3"], "precision_mode": ["fp64", "2p"]},
        })
        code, _, _ = self.run_main("sweep", grid, "--out", self.path("out.csv"))
        self.assertEqual(code, 0)
        rows = self.read_rows()
        self.assertEqual(len(rows), 4)
        self.assertEqual(list(rows[0]), SWEEP_COLUMNS)
        self.assertEqual([(r["variant"], r["precision_mode"]) for r in rows],
                         [("Async", "fp64"), ("Async", "2p"), ("V3", "fp64"), ("V3", "2p")])
        self.assertTrue(all(r["status"] == "ok" for r in rows))
        self.assertLess(int(rows[2]["total_bytes"]), int(rows[0]["total_bytes"]))
        self.assertEqual(float(rows[0]["kl"]), 0.0)
        self.assertEqual(float(rows[3]["kl_abs"]), abs(float(rows[3]["kl"])))

    def test_empty_axis_writes_header_only(self):
        grid = self.write_grid({"base": {"n": 64, "nb": 16}, "axes": {"devices": []}})
        code, _, _ = self.run_main("sweep", grid, "--out", self.path("out.csv"))
        self.assertEqual(code, 0)
        with open(self.path("out.csv")) as f:
            self.assertEqual(f.read(), ",".join(SWEEP_COLUMNS) + "\n")

    def test_empty_grid_writes_header_only(self):
        for grid in ({}, {"base": {"n": 64, "nb": 16}}):
            path = self.write_grid(grid)
            code, _, _ = self.run_main("sweep", path, "--out", self.path("out.csv"))
            self.assertEqual(code, 0)
            with open(self.path("out.csv")) as f:
                self.assertEqual(f.read(), ",".join(SWEEP_COLUMNS) + "\n")

    def test_failed_rows_are_recorded(self):
        grid = self.write_grid({
            "base": {"n": 64, "nb": 16},
            "axes": {"capacity_bytes": [100, None]},
        })
        code, _, _ = self.run_main("sweep", grid, "--out", self.path("out.csv"))
        self.assertEqual(code, 1)
        failed, ok = self.read_rows()
        self.assertEqual(failed["status"], "error")
        self.assertEqual(json.loads(failed["error"])["error"], "ConfigInfeasible")
        self.assertEqual(ok["status"], "ok")

    def test_unknown_axis(self):
        grid = self.write_grid({"axes": {"colour": ["red"]}})
        code, _, err = self.run_main("sweep", grid)
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "ValidationError")


class RenderTest(CommandTest):
    def test_ascii(self):
        assignment = {idx: Precision.FP64 for idx in uniform_map(3, Precision.FP64).assignment}
        assignment[TileIndex(2, 0)] = Precision.FP8E4M3
        assignment[TileIndex(1, 0)] = Precision.FP16
        pmap = PrecisionMap(3, assignment, 1e-4, list(Precision))
        self.assertEqual(render_ascii(pmap), "#\n+#\n.##\n")

    def test_pixels(self):
        pixels = render_pixels(uniform_map(2, Precision.FP32), scale=3)
        self.assertEqual(pixels.shape, (6, 6, 3))
        self.assertTrue(np.all(pixels[0, 5] == 255))
        self.assertFalse(np.all(pixels[5, 0] == 255))

    def test_command(self):
        with open(self.path("map.json"), "w") as f:
            f.write(uniform_map(2, Precision.FP64).to_json())
        code, out, _ = self.run_main("render-map", self.path("map.json"), "--legend", "--ppm",
                                     self.path("map.ppm"), "--scale", "2")
        self.assertEqual(code, 0)
        self.assertEqual(out, "#\n##\n" + GLYPHS[Precision.FP64] + " FP64: 3\n")
        with open(self.path("map.ppm"), "rb") as f:
            data = f.read()
        self.assertTrue(data.startswith(b"P6\n4 4\n255\n"))
        self.assertEqual(len(data), len(b"P6\n4 4\n255\n") + 4 * 4 * 3)

    def test_bad_map(self):
        with open(self.path("map.json"), "w") as f:
            f.write("[]")
        code, _, err = self.run_main("render-map", self.path("map.json"))
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "MalformedInput")
