"""Model client wrappers: fixture replay for tests/goldens and a generic
HTTP endpoint client with retry + exponential backoff."""

import json
import logging
import os
import time

import httpx

log = logging.getLogger(__name__)


class ClientError(Exception):
    """Transient or permanent model-endpoint failure."""


class FixtureClient:
    """Replays stored raw outputs keyed by (sample_id, modality, temperature).

    Fixture files are JSON documents with sample_id, modality, temperature,
    and raw_output fields, one file per extraction.
    """

    def __init__(self, fixture_dir):
        self.responses = {}
        for name in sorted(os.listdir(fixture_dir)):
            if not name.endswith(".json"):
                continue
            with open(os.path.join(fixture_dir, name), encoding="utf-8") as fh:
                data = json.load(fh)
            key = (data["sample_id"], data["modality"],
                   round(float(data["temperature"]), 2))
            self.responses[key] = data["raw_output"]

    def complete(self, prompt, sample_id, modality, temperature):
        key = (sample_id, modality, round(float(temperature), 2))
        if key not in self.responses:
            raise ClientError(f"no fixture for {key}")
        return self.responses[key]


class HttpModelClient:
    """POSTs {prompt, temperature} to an endpoint returning {"text": ...}."""

    def __init__(self, endpoint, timeout=30.0, transport=None):
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, prompt, sample_id, modality, temperature):
        try:
            resp = self._client.post(self.endpoint, json={
                "prompt": prompt,
                "temperature": temperature,
            })
            resp.raise_for_status()
            return resp.json()["text"]
        except (httpx.HTTPError, KeyError, ValueError) as e:
            raise ClientError(f"endpoint failure for {sample_id}: {e}") from e


def call_with_retries(fn, attempts=3, base_delay=0.5, sleep=time.sleep):
    """Run fn(), retrying ClientError with exponential backoff."""
    delay = base_delay
    for attempt in range(1, attempts + 1):
        try:
            return fn()
        except ClientError as e:
            if attempt == attempts:
                raise
            log.warning("attempt %d/%d failed (%s); retrying in %.1fs",
                        attempt, attempts, e, delay)
            sleep(delay)
            delay *= 2
