"""Canonical JSON Lines output.

The format contract shared with the calibration toolkit: one JSON object
per line, keys sorted, no whitespace, ``masked`` lists sorted, floats with
9 significant digits.  The rendering below is deliberately explicit so the
emitted bytes are stable across platforms and library versions.
"""

from __future__ import annotations

import json
from pathlib import Path


def format_float(value: float) -> str:
    return format(float(value), ".9g")


def record_line(record: dict) -> str:
    parts = [
        f'"base_scores":[{",".join(format_float(x) for x in record["base_scores"])}]'
    ]
    if record.get("foil_labels") is not None:
        labels = ",".join(str(int(i)) for i in sorted(record["foil_labels"]))
        parts.append(f'"foil_labels":[{labels}]')
    if record.get("full_score") is not None:
        parts.append(f'"full_score":{format_float(record["full_score"])}')
    if record.get("human_score") is not None:
        parts.append(f'"human_score":{format_float(record["human_score"])}')
    parts.append(f'"id":{json.dumps(record["id"], ensure_ascii=False)}')
    samples = []
    for sample in record["mask_samples"]:
        masked = ",".join(str(int(i)) for i in sorted(sample["masked"]))
        scores = ",".join(format_float(x) for x in sample["scores"])
        samples.append(f'{{"masked":[{masked}],"scores":[{scores}]}}')
    parts.append(f'"mask_samples":[{",".join(samples)}]')
    words = []
    for word in sorted(record["words"], key=lambda w: w["index"]):
        words.append(
            f'{{"index":{int(word["index"])},"pos":{json.dumps(word["pos"], ensure_ascii=False)},'
            f'"surface":{json.dumps(word["surface"], ensure_ascii=False)}}}'
        )
    parts.append(f'"words":[{",".join(words)}]')
    return "{" + ",".join(parts) + "}"


def write_records(records: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(record_line(record))
            handle.write("\n")
