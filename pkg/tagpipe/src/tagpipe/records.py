"""Tag records and their JSON-lines store: one record per
(sample, modality, temperature) extraction."""

import json
from dataclasses import asdict, dataclass, field

MODALITIES = ("visual", "textual")
TEMPERATURES = (0.7, 0.8, 0.9, 1.0)


@dataclass
class TagRecord:
    sample_id: str
    modality: str            # visual | textual
    temperature: float
    raw_output: str
    tags: list = field(default_factory=list)
    failed: bool = False

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def write_records(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_records(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            records.append(TagRecord(**data))
    return records


def pool_tags(records, sample_id, modality):
    """Union of cleaned tags across temperatures, order-preserving dedup.

    Records arrive in extraction order (ascending temperature), so earlier
    temperatures win the position of a duplicated tag.
    """
    seen = set()
    pooled = []
    for rec in records:
        if rec.sample_id != sample_id or rec.modality != modality or rec.failed:
            continue
        for tag in rec.tags:
            if tag not in seen:
                seen.add(tag)
                pooled.append(tag)
    return pooled
