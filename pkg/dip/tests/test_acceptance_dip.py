"""Acceptance for the pixel-holdout DIP harness, driven through the dip-run CLI.

Four 5000-iteration fits (gaussian sigma 0.1 and salt-pepper 10%, each with a
10% holdout and with full-pixel training) at a reduced 128x128 resolution and
a narrow network preset, Adam lr 0.05.  Criteria are PSNR gaps in dB:
selected within 0.5 dB of the oracle, and the full-pixel oracle at most
1.0 dB above the holdout-selected image.  Expect roughly half an hour on CPU;
run with ``pytest tests/test_acceptance_dip.py -v -s``.
"""

import json
import os
import subprocess
import sys

import pytest

SIZE = 128
NET_ARGS = ["--size", str(SIZE), "--scales", "4", "--channels", "32",
            "--input-channels", "16", "--seed", "0", "--iters", "5000"]
CONFIGS = {
    "gaussian-holdout": ["--noise", "gaussian:0.1", "--holdout", "0.1"],
    "gaussian-full": ["--noise", "gaussian:0.1", "--holdout", "0.0"],
    "sp-holdout": ["--noise", "sp:0.1", "--holdout", "0.1"],
    "sp-full": ["--noise", "sp:0.1", "--holdout", "0.0"],
}


def criterion(name: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}", flush=True)
    assert passed, f"{name}: {detail}"


@pytest.fixture(scope="module")
def summaries(tmp_path_factory):
    """Run the four configurations through the CLI, two at a time."""
    out_root = tmp_path_factory.mktemp("dip-acceptance")
    env = dict(os.environ, OMP_NUM_THREADS="1", MKL_NUM_THREADS="1")
    items = list(CONFIGS.items())
    results = {}
    for pair in (items[:2], items[2:]):
        procs = []
        for name, extra in pair:
            out = out_root / name
            cmd = [sys.executable, "-m", "dip_holdout.cli",
                   "--out", str(out)] + NET_ARGS + extra
            procs.append((name, out, subprocess.Popen(cmd, env=env)))
        for name, out, proc in procs:
            assert proc.wait() == 0, f"dip-run failed for {name}"
            with open(out / "summary.json") as fh:
                results[name] = (json.load(fh), out)
    return results


def test_summaries_conform_to_shared_schema(summaries):
    jsonschema = pytest.importorskip("jsonschema")
    overfactor_report = pytest.importorskip("overfactor.report")
    for name, (summary, _) in summaries.items():
        jsonschema.validate(summary, overfactor_report.load_schema())
    criterion("dip-report-schema", True, f"{len(summaries)} summaries validated")


def test_artifacts_written(summaries):
    for name, (summary, out) in summaries.items():
        assert (out / "noisy.png").exists()
        assert (out / "final.png").exists()
        assert (out / "curves.csv").exists()
        if "holdout" in name:
            assert (out / "selected.png").exists()
            assert (out / "oracle.png").exists()
            assert summary["selection"]["t_hat"] > 0


@pytest.mark.parametrize("noise", ["gaussian", "sp"])
def test_selection_gap(noise, summaries):
    summary, _ = summaries[f"{noise}-holdout"]
    res = summary["results"]
    gap = abs(res["psnr_selected"] - res["psnr_oracle"])
    criterion(
        f"dip-selection-gap-{noise}",
        gap <= 0.5,
        f"selected {res['psnr_selected']:.2f} dB vs oracle {res['psnr_oracle']:.2f} dB, "
        f"gap {gap:.3f} dB (<= 0.5)",
    )


@pytest.mark.parametrize("noise", ["gaussian", "sp"])
def test_full_pixel_cost(noise, summaries):
    holdout, _ = summaries[f"{noise}-holdout"]
    full, _ = summaries[f"{noise}-full"]
    selected = holdout["results"]["psnr_selected"]
    full_oracle = full["results"]["psnr_oracle"]
    excess = full_oracle - selected
    criterion(
        f"dip-full-vs-holdout-{noise}",
        excess <= 1.0,
        f"full-pixel oracle {full_oracle:.2f} dB vs holdout-selected {selected:.2f} dB, "
        f"excess {excess:.3f} dB (<= 1.0)",
    )


def test_overfitting_signature_in_curves(summaries):
    import csv

    summary, out = summaries["gaussian-holdout"]
    with open(out / "curves.csv") as fh:
        rows = list(csv.DictReader(fh))
    psnrs = [-10.0 * __import__("math").log10(float(r["recovery_error"])) for r in rows]
    best = max(range(len(psnrs)), key=psnrs.__getitem__)
    criterion(
        "dip-overfitting-signature",
        0 < best < len(psnrs) - 1 and psnrs[best] > psnrs[-1],
        f"best PSNR interior at record {best}/{len(psnrs) - 1}, "
        f"peak {psnrs[best]:.2f} dB vs final {psnrs[-1]:.2f} dB",
    )
