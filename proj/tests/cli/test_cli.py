"""End-to-end checks of the fvv command line."""

import csv
import filecmp
import json
import os
import signal
import subprocess
import sys
import tempfile
import unittest
import urllib.request
from pathlib import Path

FVV = os.environ.get("FVV_BIN", "fvv")
FIXTURES = Path(os.environ.get("FVV_FIXTURE_DIR", Path(__file__).resolve().parents[1] / "fixtures"))
SMALL = ["--capture-res", "64", "--low-res", "32", "--hi-res", "64", "--refine-iters", "5"]


def run(*args, check=True):
    proc = subprocess.run([FVV, *args], capture_output=True, text=True, timeout=600)
    if check and proc.returncode != 0:
        raise AssertionError(f"fvv {' '.join(args)} exited {proc.returncode}\n{proc.stderr}")
    return proc


def tree(root):
    return sorted(p.relative_to(root) for p in Path(root).rglob("*") if p.is_file())


class Determinism(unittest.TestCase):
    COMMANDS = {
        "capture": ["capture"],
        "carve": ["carve"],
        "render": ["render", "--yaw", "40", "--pitch", "12"],
        "eval": ["eval", "--targets", "2", "--cams", "2,6"],
        "ablate": ["ablate", "--targets", "2", "--cams", "2,4,6"],
    }

    def test_repeat_runs_are_byte_identical(self):
        scene = str(FIXTURES / "sphere_checker.json")
        with tempfile.TemporaryDirectory() as tmp:
            for name, cmd in self.COMMANDS.items():
                with self.subTest(command=name):
                    a, b = Path(tmp, name, "a"), Path(tmp, name, "b")
                    run(*cmd, "--scene", scene, *SMALL, "--out", str(a))
                    run(*cmd, "--scene", scene, *SMALL, "--out", str(b), "--workers", "3")
                    files = tree(a)
                    self.assertTrue(files)
                    self.assertEqual(files, tree(b))
                    match, mismatch, errors = filecmp.cmpfiles(a, b, [str(f) for f in files], shallow=False)
                    self.assertEqual(mismatch + errors, [])

    def test_bundle_round_trip(self):
        scene = str(FIXTURES / "sphere_checker.json")
        with tempfile.TemporaryDirectory() as tmp:
            run("capture", "--scene", scene, *SMALL, "--out", f"{tmp}/bundle")
            self.assertTrue(Path(tmp, "bundle", "rig.json").exists())
            expected = {"color.png", "depth.pfm", "normal.png", "weights.pgm"}
            run("render", "--bundle", f"{tmp}/bundle", "--scene", scene, *SMALL, "--out", f"{tmp}/a")
            self.assertEqual({p.name for p in Path(tmp, "a").iterdir()}, expected)
            run("render", "--bundle", f"{tmp}/bundle", "--backend", "mlp", *SMALL, "--out", f"{tmp}/m")
            self.assertEqual({p.name for p in Path(tmp, "m").iterdir()}, expected)
            proc = run("render", "--bundle", f"{tmp}/bundle", *SMALL, "--out", f"{tmp}/x", check=False)
            self.assertEqual(proc.returncode, 1)
            self.assertIn("stage field", proc.stderr)


class Reports(unittest.TestCase):
    def test_eval_rows(self):
        with tempfile.TemporaryDirectory() as tmp:
            run("eval", "--scene", str(FIXTURES / "sphere_checker.json"), *SMALL,
                "--targets", "3", "--cams", "2,4,6", "--out", tmp)
            with open(Path(tmp, "report.csv")) as f:
                rows = list(csv.DictReader(f))
            self.assertEqual(len(rows), 9)
            self.assertEqual(list(rows[0].keys()),
                             ["view_id", "cameras", "mae_fg", "mae_full", "l2_rgb", "l2_normal",
                              "combined", "depth_mae", "normal_mean_angle_deg"])
            self.assertEqual(sorted({r["cameras"] for r in rows}), ["2", "4", "6"])
            doc = json.loads(Path(tmp, "report.json").read_text())
            self.assertEqual(len(doc), 3)
            for report in doc:
                fg = [v["mae_fg"] for v in report["views"]]
                self.assertAlmostEqual(report["aggregate"]["mae_fg"], sum(fg) / len(fg), places=9)


class ExitCodes(unittest.TestCase):
    def test_usage_errors(self):
        for args in (["render", "--bogus"], ["nope"], ["render", "--backend", "gpu"], []):
            with self.subTest(args=args):
                proc = run(*args, check=False)
                self.assertEqual(proc.returncode, 2, proc.stderr)

    def test_runtime_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            cases = [
                ["render", "--scene", "/nonexistent/scene.json", "--out", tmp],
                ["render", "--scene", str(FIXTURES / "scene_unknown_shape.json"), "--out", tmp],
                ["render", "--scene", str(FIXTURES / "sphere_checker.json"),
                 "--rig", str(FIXTURES / "rig_bad_rotation.json"), "--out", tmp],
                ["render", "--scene", str(FIXTURES / "sphere_checker.json"), *SMALL, "--lambda", "3", "--out", tmp],
                ["eval", "--scene", str(FIXTURES / "sphere_checker.json"), *SMALL, "--cams", "1", "--out", tmp],
            ]
            for args in cases:
                with self.subTest(args=args[:3]):
                    proc = run(*args, check=False)
                    self.assertEqual(proc.returncode, 1, proc.stderr)
                    self.assertIn("error", proc.stderr)


class Serve(unittest.TestCase):
    def test_serve_answers_and_stops(self):
        proc = subprocess.Popen([FVV, "serve", "--scene", str(FIXTURES / "sphere_checker.json"), *SMALL,
                                 "--port", "0"], stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        try:
            url = None
            for line in proc.stdout:
                if line.startswith("listening on "):
                    url = line.split()[-1]
                    break
            self.assertIsNotNone(url)
            with urllib.request.urlopen(url + "/health", timeout=30) as r:
                self.assertEqual(r.status, 200)
            with urllib.request.urlopen(url + "/render?yaw=20&res=48", timeout=60) as r:
                body = r.read()
                self.assertEqual(body[:8], b"\x89PNG\r\n\x1a\n")
            with self.assertRaises(urllib.error.HTTPError) as ctx:
                urllib.request.urlopen(url + "/render?mode=bogus", timeout=30)
            self.assertEqual(ctx.exception.code, 400)
        finally:
            proc.send_signal(signal.SIGTERM)
            self.assertEqual(proc.wait(timeout=30), 0)
            proc.stdout.close()
            proc.stderr.close()


if __name__ == "__main__":
    unittest.main(argv=sys.argv[:1], verbosity=2)
