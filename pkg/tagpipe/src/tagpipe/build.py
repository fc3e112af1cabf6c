"""Assemble an engine-format feature bank from samples + cleaned tag records.

Variant 0 of each tag stream encodes the deterministic inference sentence
(first M pooled tags); variants 1..R-1 encode sentences built from seeded
random N-tag draws, preserving the stochastic tag augmentation the trainer
samples from.
"""

import logging
import random

import numpy as np

from .bankio import write_bank
from .records import pool_tags
from .sentences import assemble_sentence

log = logging.getLogger(__name__)


def _variant_sentences(tags, r, n, m, seed, sample_id, modality):
    sentences = [assemble_sentence(tags, m)]
    for variant in range(1, r):
        rng = random.Random(f"{seed}\x1f{sample_id}\x1f{modality}\x1f{variant}")
        count = min(n, len(tags))
        drawn = rng.sample(tags, count) if count else []
        sentences.append(assemble_sentence(drawn, count))
    return sentences


def build_bank(samples, records, encoder, out_dir, r=2, n=12, m=12,
               n_frames=2, seed=0):
    """Encode every stream and write the bank; returns (manifest_path,
    kept_ids, report). Samples whose encoding fails are dropped and listed
    in the report."""
    kept, dropped = [], []
    text_rows, frame_rows, tagv_rows, tagt_rows = [], [], [], []
    tag_counts = []
    for sample in samples:
        sid = sample["id"]
        vtags = pool_tags(records, sid, "visual")
        ttags = pool_tags(records, sid, "textual")
        tag_counts.append((len(vtags), len(ttags)))
        try:
            text = encoder.encode(sample["caption"])
            frame_texts = sample.get("frames") or [sample["caption"]] * n_frames
            if len(frame_texts) != n_frames:
                raise ValueError(
                    f"sample {sid}: expected {n_frames} frame texts, "
                    f"got {len(frame_texts)}")
            frames = np.stack([encoder.encode(t) for t in frame_texts])
            tagv = np.stack([encoder.encode(s) for s in _variant_sentences(
                vtags, r, n, m, seed, sid, "visual")])
            tagt = np.stack([encoder.encode(s) for s in _variant_sentences(
                ttags, r, n, m, seed, sid, "textual")])
        except Exception as e:
            log.error("dropping sample %s: %s", sid, e)
            dropped.append({"id": sid, "reason": str(e)})
            continue
        kept.append(sid)
        text_rows.append(text)
        frame_rows.append(frames)
        tagv_rows.append(tagv)
        tagt_rows.append(tagt)

    if not kept:
        raise ValueError("no samples survived encoding")
    if tag_counts:
        means = np.mean(tag_counts, axis=0)
        log.info("pooled tags per item: visual %.1f, textual %.1f",
                 means[0], means[1])
    manifest = write_bank(
        out_dir,
        text=np.stack(text_rows),
        frames=np.stack(frame_rows),
        tags_visual=np.stack(tagv_rows),
        tags_textual=np.stack(tagt_rows),
        ids=kept,
    )
    report = {"kept": len(kept), "dropped": dropped}
    return manifest, kept, report
