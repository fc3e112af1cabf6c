import json
import os

import pytest

HERE = os.path.dirname(__file__)
FIXTURE_RAW = os.path.join(HERE, "fixtures", "raw")
SAMPLES_PATH = os.path.join(HERE, "fixtures", "samples.jsonl")
GOLDEN_PATH = os.path.join(HERE, "golden", "cleaned_tags.json")
PROMPTS_DIR = os.path.join(HERE, "..", "prompts")


@pytest.fixture
def fixture_dir():
    return FIXTURE_RAW


@pytest.fixture
def prompts_dir():
    return PROMPTS_DIR


@pytest.fixture
def samples():
    out = []
    with open(SAMPLES_PATH, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def load_raw_fixtures():
    fixtures = []
    for name in sorted(os.listdir(FIXTURE_RAW)):
        if name.endswith(".json"):
            with open(os.path.join(FIXTURE_RAW, name), encoding="utf-8") as fh:
                fixtures.append(json.load(fh))
    return fixtures


def golden_key(data):
    return f'{data["sample_id"]}/{data["modality"]}/{data["temperature"]}'
