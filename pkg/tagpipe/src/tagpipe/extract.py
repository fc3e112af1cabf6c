"""Tag extraction and optional relevance filtering through a model client."""

import logging
import os

from .cleaning import clean_raw_output, clean_tags
from .clients import ClientError, call_with_retries
from .records import TagRecord

log = logging.getLogger(__name__)

PROMPT_FILES = {"visual": "visual_tags.txt", "textual": "textual_tags.txt"}
FILTER_PROMPT = (
    "From the following list of tags, keep only the tags that are relevant "
    "to this input and return them as a bullet list with no explanation.\n"
    "Input: {input}\nTags: {tags}"
)


def load_prompt(prompts_dir, modality):
    path = os.path.join(prompts_dir, PROMPT_FILES[modality])
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def render_prompt(prompts_dir, modality, caption=None):
    template = load_prompt(prompts_dir, modality)
    if modality == "textual":
        return template.replace("{}", caption or "")
    return template


def extract_tags(sample, modality, temperature, client, prompts_dir,
                 attempts=3, sleep=None):
    """One extraction: render the prompt, call the model with retries, and
    clean the reply. Endpoint failure after retries yields a failed record
    so batch runs keep going."""
    prompt = render_prompt(prompts_dir, modality, sample.get("caption"))
    kwargs = {} if sleep is None else {"sleep": sleep}
    try:
        raw = call_with_retries(
            lambda: client.complete(prompt, sample["id"], modality,
                                    temperature),
            attempts=attempts, **kwargs)
    except ClientError as e:
        log.error("extraction failed for %s/%s@%s: %s",
                  sample["id"], modality, temperature, e)
        return TagRecord(sample_id=sample["id"], modality=modality,
                         temperature=temperature, raw_output="", tags=[],
                         failed=True)
    return TagRecord(sample_id=sample["id"], modality=modality,
                     temperature=temperature, raw_output=raw,
                     tags=clean_raw_output(raw))


def filter_tags(sample, tags, modality, client, attempts=3, sleep=None):
    """Ask the model to keep only relevant tags; the result is clamped to a
    subset of the input, falling back to the input when the model returns
    nothing usable."""
    if not tags:
        return list(tags)
    prompt = FILTER_PROMPT.format(input=sample.get("caption", sample["id"]),
                                  tags=", ".join(tags))
    kwargs = {} if sleep is None else {"sleep": sleep}
    try:
        raw = call_with_retries(
            lambda: client.complete(prompt, sample["id"],
                                    f"filter_{modality}", 0.7),
            attempts=attempts, **kwargs)
    except ClientError as e:
        log.warning("filter failed for %s/%s, keeping unfiltered: %s",
                    sample["id"], modality, e)
        return list(tags)
    kept = [t for t in clean_tags(clean_raw_output(raw)) if t in set(tags)]
    if not kept:
        log.warning("filter for %s/%s returned nothing usable; "
                    "keeping unfiltered tags", sample["id"], modality)
        return list(tags)
    return kept
