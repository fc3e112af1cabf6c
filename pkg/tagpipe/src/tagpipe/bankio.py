"""Writer for the retrieval engine's feature-bank format.

This mirrors the engine's external file contract (manifest.json + raw
little-endian float32 binaries, row-major, frames sample-major) without
importing the engine: the format is the interface.
"""

import json
import os

import numpy as np

STREAM_FILES = {
    "text": "text.f32",
    "frames": "frames.f32",
    "tags_visual": "tags_visual.f32",
    "tags_textual": "tags_textual.f32",
}


def write_bank(out_dir, text, frames, tags_visual, tags_textual, ids=None):
    """text: (n, d); frames: (n, n_frames, d); tag streams: (n, r, d)."""
    n, d = text.shape
    os.makedirs(out_dir, exist_ok=True)
    arrays = {"text": text, "frames": frames,
              "tags_visual": tags_visual, "tags_textual": tags_textual}
    for key, arr in arrays.items():
        np.asarray(arr, dtype="<f4").tofile(
            os.path.join(out_dir, STREAM_FILES[key]))
    manifest = {
        "version": 1,
        "d": d,
        "n": n,
        "n_frames": frames.shape[1],
        "n_tag_variants": tags_visual.shape[1],
        "dtype": "f32le",
        "streams": dict(STREAM_FILES),
    }
    if ids is not None:
        manifest["ids"] = list(ids)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path
