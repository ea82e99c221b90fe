"""File-format conformance: golden bytes and ingest by the consumer CLI."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from clip_sampler.cli import main

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden" / "expected.jsonl"

RISKCTL = shutil.which("riskctl")


def run_sampler(out_path, seed=7):
    return main([
        "--model", "stub",
        "--images", str(FIXTURES / "images"),
        "--captions", str(FIXTURES / "captions.tsv"),
        "--I", "3", "--T", "4", "--xi-image", "25", "--xi-text", "30",
        "--seed", str(seed), "--out", str(out_path),
    ])


def test_golden_file_byte_equality(tmp_path):
    out = tmp_path / "scored.jsonl"
    assert run_sampler(out) == 0
    assert out.read_bytes() == GOLDEN.read_bytes()


def test_output_is_schema_shaped(tmp_path):
    out = tmp_path / "scored.jsonl"
    run_sampler(out, seed=99)
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert [l["id"] for l in lines] == sorted(l["id"] for l in lines)
    for line in lines:
        assert list(line) == sorted(line)
        for sample in line["mask_samples"]:
            assert sample["masked"] == sorted(sample["masked"])
            assert all(0.0 <= x <= 2.5 for x in sample["scores"])
        assert all(0.0 <= x <= 2.5 for x in line["base_scores"])


@pytest.mark.skipif(RISKCTL is None, reason="consumer CLI not installed")
def test_consumer_cli_ingests_cleanly(tmp_path):
    out = tmp_path / "scored.jsonl"
    run_sampler(out)
    result = subprocess.run(
        [RISKCTL, "report", "--data", str(out), "--out", str(tmp_path / "dist.csv")],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "dist.csv").exists()


@pytest.mark.skipif(RISKCTL is None, reason="consumer CLI not installed")
def test_consumer_cli_detects_on_sampler_output(tmp_path):
    out = tmp_path / "scored.jsonl"
    run_sampler(out)
    preds = tmp_path / "preds.jsonl"
    result = subprocess.run(
        [RISKCTL, "detect", "--data", str(out), "--lam", "0.5", "--out", str(preds)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    assert len(preds.read_text().splitlines()) == 3


def test_rejects_malformed_captions(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("only-two-fields\tx.png\n")
    code = main([
        "--captions", str(bad), "--images", str(FIXTURES / "images"),
        "--out", str(tmp_path / "o.jsonl"),
    ])
    assert code == 1
