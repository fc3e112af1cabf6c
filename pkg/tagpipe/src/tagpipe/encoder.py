"""Text encoders. Production runs plug in a real frozen encoder; the
hashing encoder gives deterministic dependency-free vectors for fixtures
and interop tests."""

import hashlib

import numpy as np


class HashingTextEncoder:
    """Signed token hashing into d dimensions, L2-normalized.

    Deterministic across runs and platforms: token -> sha256(seed, token)
    -> (index, sign). Empty text maps to a fixed sentinel token so vectors
    are never zero-norm.
    """

    def __init__(self, d, seed=0):
        self.d = int(d)
        self.seed = int(seed)

    def _token_slot(self, token):
        digest = hashlib.sha256(
            f"{self.seed}\x1f{token}".encode("utf-8")).digest()
        idx = int.from_bytes(digest[:8], "little") % self.d
        sign = 1.0 if digest[8] % 2 == 0 else -1.0
        return idx, sign

    def encode(self, text):
        tokens = text.lower().split() or ["<empty>"]
        vec = np.zeros(self.d)
        for tok in tokens:
            idx, sign = self._token_slot(tok)
            vec[idx] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:            # colliding signs cancelled everything
            vec[self._token_slot("<fallback>")[0]] = 1.0
            norm = 1.0
        return vec / norm
