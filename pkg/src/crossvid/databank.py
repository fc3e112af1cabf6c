"""Feature-bank loading, validation, serialization, and batch sampling.

On-disk layout: a JSON manifest next to raw float32 little-endian binaries,
one file per stream, row-major with no header. Frames are ordered
sample-major then frame-major. Banks are upcast to float64 in memory; the
float32 payload round-trips exactly because loading never rewrites values.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BankLoadError, ParameterError

STREAM_KEYS = ("text", "frames", "tags_visual", "tags_textual")


@dataclass
class Manifest:
    d: int
    n: int
    n_frames: int
    n_tag_variants: int
    streams: dict
    ids: list | None = None
    version: int = 1
    dtype: str = "f32le"

    def stream_shape(self, key):
        if key == "text":
            return (self.n, self.d)
        if key == "frames":
            return (self.n, self.n_frames, self.d)
        return (self.n, self.n_tag_variants, self.d)


@dataclass
class FeatureBank:
    """In-memory float64 view of the four streams.

    Index i refers to the same underlying video/caption pair in every
    stream. Immutable by convention after load; safe for concurrent reads.
    """

    text: np.ndarray          # (n, d)
    frames: np.ndarray        # (n, n_frames, d)
    tags_visual: np.ndarray   # (n, n_tag_variants, d)
    tags_textual: np.ndarray  # (n, n_tag_variants, d)
    ids: list | None = None

    @property
    def n(self):
        return self.text.shape[0]

    @property
    def d(self):
        return self.text.shape[1]

    @property
    def n_frames(self):
        return self.frames.shape[1]

    @property
    def n_tag_variants(self):
        return self.tags_visual.shape[1]

    def stream(self, key):
        return getattr(self, key)


def parse_manifest(manifest_path, allow_empty=False):
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise BankLoadError(f"manifest not found: {manifest_path}",
                            code="databank.missing_manifest")
    except json.JSONDecodeError as e:
        raise BankLoadError(f"manifest is not valid JSON: {manifest_path}: {e}",
                            code="databank.bad_manifest")

    for key in ("d", "n", "n_frames", "n_tag_variants", "dtype", "streams"):
        if key not in raw:
            raise BankLoadError(f"manifest missing field {key!r}: {manifest_path}",
                                code="databank.bad_manifest")
    if raw["dtype"] != "f32le":
        raise BankLoadError(f"unsupported dtype {raw['dtype']!r} (expected 'f32le')",
                            code="databank.bad_manifest")
    man = Manifest(
        d=int(raw["d"]),
        n=int(raw["n"]),
        n_frames=int(raw["n_frames"]),
        n_tag_variants=int(raw["n_tag_variants"]),
        streams=dict(raw["streams"]),
        ids=raw.get("ids"),
        version=int(raw.get("version", 1)),
    )
    min_n = 0 if allow_empty else 1
    if man.d <= 0 or man.n < min_n or man.n_frames < 1 or man.n_tag_variants < 1:
        raise BankLoadError(
            f"manifest dims out of range: d={man.d} n={man.n} "
            f"n_frames={man.n_frames} n_tag_variants={man.n_tag_variants}",
            code="databank.bad_manifest")
    for key in STREAM_KEYS:
        if key not in man.streams:
            raise BankLoadError(f"manifest missing stream path for {key!r}",
                                code="databank.bad_manifest")
    if man.ids is not None and len(man.ids) != man.n:
        raise BankLoadError(f"ids length {len(man.ids)} != n {man.n}",
                            code="databank.bad_manifest")
    return man


def _load_stream(base_dir, man, key):
    path = os.path.join(base_dir, man.streams[key])
    shape = man.stream_shape(key)
    expected = int(np.prod(shape))
    if not os.path.exists(path):
        raise BankLoadError(f"stream {key!r}: file not found: {path}",
                            code="databank.missing_file")
    size = os.path.getsize(path)
    if size != 4 * expected:
        raise BankLoadError(
            f"stream {key!r}: size mismatch: {path} has {size} bytes, "
            f"expected {4 * expected} ({expected} f32 values)",
            code="databank.size_mismatch")
    flat = np.fromfile(path, dtype="<f4")
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise BankLoadError(
            f"stream {key!r}: non-finite entry at flat index {int(bad[0])}",
            code="databank.non_finite")
    return flat.astype(np.float64).reshape(shape)


def load_bank(manifest_path, allow_empty=False):
    """Read, validate, and upcast a bank; errors name the offending stream."""
    man = parse_manifest(manifest_path, allow_empty=allow_empty)
    base = os.path.dirname(os.path.abspath(manifest_path))
    arrays = {key: _load_stream(base, man, key) for key in STREAM_KEYS}
    return FeatureBank(ids=man.ids, **arrays)


def save_bank(bank, out_dir, ids=None):
    """Write manifest + f32le binaries; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    streams = {}
    for key in STREAM_KEYS:
        fname = f"{key}.f32"
        arr = bank.stream(key)
        arr.astype("<f4").tofile(os.path.join(out_dir, fname))
        streams[key] = fname
    manifest = {
        "version": 1,
        "d": bank.d,
        "n": bank.n,
        "n_frames": bank.n_frames,
        "n_tag_variants": bank.n_tag_variants,
        "dtype": "f32le",
        "streams": streams,
    }
    if ids is not None or bank.ids is not None:
        manifest["ids"] = ids if ids is not None else bank.ids
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


@dataclass
class BatchIndex:
    """Distinct sample indices plus the tag variant chosen for each."""

    samples: np.ndarray       # (B,) int
    var_visual: np.ndarray    # (B,) int in [0, R)
    var_textual: np.ndarray   # (B,) int in [0, R)

    def __len__(self):
        return len(self.samples)


def _epoch_rng(seed, epoch):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch)]))


def epoch_batches(n, n_tag_variants, batch_size, seed, epoch):
    """The deterministic batch schedule for one epoch.

    A fresh permutation per (seed, epoch) is chunked into batches, so a full
    epoch covers every sample exactly once; variant indices are uniform per
    sample per stream.
    """
    if batch_size > n:
        raise ParameterError(f"batch_size {batch_size} > bank size {n}")
    rng = _epoch_rng(seed, epoch)
    perm = rng.permutation(n)
    vv = rng.integers(0, n_tag_variants, size=n)
    vt = rng.integers(0, n_tag_variants, size=n)
    out = []
    for lo in range(0, n, batch_size):
        idx = perm[lo:lo + batch_size]
        out.append(BatchIndex(samples=idx, var_visual=vv[idx], var_textual=vt[idx]))
    return out


def sample_batch(bank, batch_size, rng_seed, mode, epoch=0, batch=0):
    """One BatchIndex.

    train mode: batch `batch` of the (seed, epoch) schedule. infer mode: the
    first `batch_size` samples in natural order with variant index 0 on both
    tag streams, so results are deterministic regardless of seed.
    """
    if mode not in ("train", "infer"):
        raise ParameterError(f"unknown sampling mode {mode!r}")
    if batch_size > bank.n:
        raise ParameterError(f"batch_size {batch_size} > bank size {bank.n}")
    if mode == "infer":
        idx = np.arange(batch_size)
        zeros = np.zeros(batch_size, dtype=np.int64)
        return BatchIndex(samples=idx, var_visual=zeros, var_textual=zeros.copy())
    schedule = epoch_batches(bank.n, bank.n_tag_variants, batch_size, rng_seed, epoch)
    return schedule[batch]


def slice_bank(bank, lo, hi):
    """A view of samples [lo, hi) across all four streams."""
    if not (0 <= lo < hi <= bank.n):
        raise ParameterError(f"slice [{lo}:{hi}] out of range for bank n={bank.n}")
    ids = bank.ids[lo:hi] if bank.ids is not None else None
    return FeatureBank(
        text=bank.text[lo:hi], frames=bank.frames[lo:hi],
        tags_visual=bank.tags_visual[lo:hi],
        tags_textual=bank.tags_textual[lo:hi], ids=ids,
    )


def gather_batch(bank, bidx):
    """Materialize (T, F, A_v, A_t) arrays for a BatchIndex; variants resolved."""
    s = bidx.samples
    return (
        bank.text[s],
        bank.frames[s],
        bank.tags_visual[s, bidx.var_visual],
        bank.tags_textual[s, bidx.var_textual],
    )
