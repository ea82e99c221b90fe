"""Data model, ingest validation, and canonical round trips."""

import json

import numpy as np
import pytest

from riskctl.errors import (
    CoverageError,
    DegenerateDistribution,
    DuplicateIdError,
    RangeError,
    SchemaError,
)
from riskctl.scoredata import (
    Dataset,
    MaskSample,
    ScoredInstance,
    WordToken,
    load_dataset,
    summarize_distribution,
    write_dataset,
)


def make_record(instance_id="a", score=1.0):
    return {
        "id": instance_id,
        "words": [
            {"index": 0, "surface": "a", "pos": "DET"},
            {"index": 1, "surface": "dog", "pos": "NOUN"},
            {"index": 2, "surface": "runs", "pos": "VERB"},
        ],
        "base_scores": [1.0, 1.2],
        "mask_samples": [
            {"masked": [1], "scores": [score, 1.1]},
            {"masked": [1, 2], "scores": [0.9, 1.3]},
        ],
        "foil_labels": [1],
    }


def write_lines(path, records):
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    return path


def test_well_formed_file_loads(tmp_path):
    path = write_lines(tmp_path / "ok.jsonl", [make_record("a"), make_record("b")])
    dataset = load_dataset(path, "detection")
    assert dataset.n == 2
    assert dataset.instances[0].id == "a"
    assert dataset.instances[0].foil_labels == frozenset({1})


def test_score_out_of_range_names_instance_and_sample(tmp_path):
    record = make_record("bad")
    record["mask_samples"][1]["scores"][0] = 2.6
    path = write_lines(tmp_path / "bad.jsonl", [record])
    with pytest.raises(RangeError) as err:
        load_dataset(path, "detection")
    assert "bad" in str(err.value)
    assert "mask sample 1" in str(err.value)


def test_uncovered_maskable_word_rejected(tmp_path):
    record = make_record("gap")
    record["mask_samples"] = [{"masked": [1], "scores": [1.0, 1.1]}]  # word 2 never masked
    path = write_lines(tmp_path / "gap.jsonl", [record])
    with pytest.raises(CoverageError) as err:
        load_dataset(path, "detection")
    assert "[2]" in str(err.value)


def test_duplicate_ids_rejected(tmp_path):
    path = write_lines(tmp_path / "dup.jsonl", [make_record("x"), make_record("x")])
    with pytest.raises(DuplicateIdError):
        load_dataset(path, "detection")


def test_missing_field_rejected(tmp_path):
    record = make_record()
    del record["base_scores"]
    path = write_lines(tmp_path / "missing.jsonl", [record])
    with pytest.raises(SchemaError):
        load_dataset(path, "detection")


def test_masking_non_maskable_word_rejected(tmp_path):
    record = make_record()
    record["mask_samples"][0]["masked"] = [0]  # DET is not maskable
    path = write_lines(tmp_path / "det.jsonl", [record])
    with pytest.raises(SchemaError):
        load_dataset(path, "detection")


def test_foil_label_outside_maskable_rejected(tmp_path):
    record = make_record()
    record["foil_labels"] = [0]
    path = write_lines(tmp_path / "foil.jsonl", [record])
    with pytest.raises(SchemaError):
        load_dataset(path, "detection")


def test_optional_fields_may_be_absent(tmp_path):
    record = make_record()
    del record["foil_labels"]
    path = write_lines(tmp_path / "opt.jsonl", [record])
    dataset = load_dataset(path, "detection")
    assert dataset.instances[0].foil_labels is None
    assert dataset.instances[0].human_score is None


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(SchemaError):
        load_dataset(path, "detection")


def test_maskable_follows_pos_whitelist():
    for pos, expected in [
        ("NOUN", True), ("PROPN", True), ("NUM", True),
        ("VERB", True), ("ADJ", True), ("ADV", True),
        ("DET", False), ("ADP", False), ("PUNCT", False),
    ]:
        assert WordToken(0, "w", pos).maskable is expected


def test_round_trip_is_byte_stable(tmp_path):
    records = [make_record("a", score=1.23456789123), make_record("b")]
    records[0]["human_score"] = 0.5
    records[1]["full_score"] = 2.0
    raw = write_lines(tmp_path / "raw.jsonl", records)
    first = tmp_path / "first.jsonl"
    second = tmp_path / "second.jsonl"
    write_dataset(load_dataset(raw, "detection"), first)
    write_dataset(load_dataset(first, "detection"), second)
    assert first.read_bytes() == second.read_bytes()
    # canonical form sorts keys and uses 9 significant digits
    line = json.loads(first.read_text().splitlines()[0])
    assert list(line) == sorted(line)
    assert line["mask_samples"][0]["scores"][0] == pytest.approx(1.23456789, abs=5e-9)


def test_summarize_constant_distribution():
    instance = ScoredInstance(
        id="c",
        words=[WordToken(0, "dog", "NOUN")],
        base_scores=np.array([1.0]),
        mask_samples=[
            MaskSample(frozenset({0}), np.array([1.0])),
            MaskSample(frozenset({0}), np.array([1.0])),
        ],
    )
    mu, sigma, flat = summarize_distribution(instance)
    assert mu == 1.0 and sigma == 0.0
    assert flat.tolist() == [1.0, 1.0]


def test_summarize_uses_population_std():
    instance = ScoredInstance(
        id="c",
        words=[WordToken(0, "dog", "NOUN")],
        base_scores=np.array([1.0]),
        mask_samples=[
            MaskSample(frozenset({0}), np.array([1.0])),
            MaskSample(frozenset({0}), np.array([2.0])),
        ],
    )
    mu, sigma, _ = summarize_distribution(instance)
    assert mu == 1.5
    assert sigma == 0.5  # divisor N, not N-1


def test_summarize_single_sample_degenerate():
    instance = ScoredInstance(
        id="c",
        words=[WordToken(0, "dog", "NOUN")],
        base_scores=np.array([1.0]),
        mask_samples=[MaskSample(frozenset({0}), np.array([1.0]))],
    )
    with pytest.raises(DegenerateDistribution):
        summarize_distribution(instance)


def test_instance_without_maskable_words_loads(tmp_path):
    record = {
        "id": "short",
        "words": [{"index": 0, "surface": "the", "pos": "DET"}],
        "base_scores": [1.0],
        "mask_samples": [],
    }
    path = write_lines(tmp_path / "short.jsonl", [record])
    dataset = load_dataset(path, "detection")
    assert dataset.instances[0].maskable_indices == frozenset()
