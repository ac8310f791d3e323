import subprocess
import sys

import pytest


def run_evaluation_cli(args, check=True):
    """Invoke the evaluation toolkit CLI in a subprocess (file-level
    interface only; the trainer never imports it)."""
    proc = subprocess.run([sys.executable, "-m", "fundus_eval", *map(str, args)],
                          capture_output=True, text=True)
    if check:
        assert proc.returncode == 0, f"fundus-eval {args[0]} failed: {proc.stderr}"
    return proc


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """Brightness-separable screening dataset built through the evaluation
    toolkit: manifest, patient-exclusive split and a 64px preprocessed tree.

    500 patients x 4 images; class 1 disks are drawn noticeably brighter
    than class 0 disks, so any image model can separate them.
    """
    root = tmp_path_factory.mktemp("toy_dataset")
    manifest = root / "manifest.csv"
    split = root / "split.csv"
    raw = root / "raw"
    images = root / "imgs"
    run_evaluation_cli(["synth", "population", "--system", "rdr",
                        "--probs", "0.5,0.5", "--patients", "500",
                        "--seed", "1", "--out", manifest])
    run_evaluation_cli(["synth", "images", "--manifest", manifest,
                        "--out", raw, "--width", "160", "--height", "128",
                        "--radius", "56", "--system", "rdr",
                        "--brightness-by-class", "0.75,1.35", "--seed", "2"])
    run_evaluation_cli(["split", "--manifest", manifest, "--system", "rdr",
                        "--seed", "3", "--tolerance", "0.05", "--out", split])
    run_evaluation_cli(["preprocess", "--manifest", manifest, "--images", raw,
                        "--sizes", "64", "--out", images, "--jobs", "4"])
    return {"root": root, "manifest": manifest, "split": split, "images": images}
