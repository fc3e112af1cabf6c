"""Synthetic planted-concept banks and brute-force oracles.

The generator draws K unit concept codes per sample and emits every stream
as a fixed random orthogonal mixture of the concatenated codes plus
Gaussian noise, so the linear projection heads can recover the codes
exactly; retrieval on such a bank is learnable by construction. The oracle
functions are deliberately naive loop implementations, independent of the
kernel/autodiff stack, used as ground truth in tests.
"""

import math
from dataclasses import dataclass

import numpy as np

from .databank import FeatureBank, save_bank


@dataclass
class SynthConfig:
    n: int = 64
    d: int = 32
    k: int = 4
    n_frames: int = 3
    n_tag_variants: int = 2
    noise_sigma: float = 0.1
    nuisance_sigma: float = 0.0
    tag_informative: bool = True
    seed: int = 0

    def validate(self):
        if self.d % self.k != 0:
            raise ValueError(f"d={self.d} not divisible by k={self.k}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.nuisance_sigma < 0:
            raise ValueError("nuisance_sigma must be >= 0")
        return self


def _random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def generate_planted_bank(cfg):
    """Returns (FeatureBank, codes) where codes[i] concatenates the K unit
    concept codes planted in sample i."""
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 23]))
    dk = cfg.d // cfg.k

    codes = rng.standard_normal((cfg.n, cfg.k, dk))
    codes /= np.linalg.norm(codes, axis=2, keepdims=True)
    codes = codes.reshape(cfg.n, cfg.d)

    mix_text = _random_orthogonal(rng, cfg.d)
    mix_video = _random_orthogonal(rng, cfg.d)
    mix_tag_v = _random_orthogonal(rng, cfg.d)
    mix_tag_t = _random_orthogonal(rng, cfg.d)
    sigma = cfg.noise_sigma

    text = codes @ mix_text.T + sigma * rng.standard_normal((cfg.n, cfg.d))
    video = codes @ mix_video.T + sigma * rng.standard_normal((cfg.n, cfg.d))

    # modality-specific structured nuisance: caption style / visual clutter
    # live in fixed low-rank subspaces of the text/video streams only, so
    # the tag streams stay cleaner summaries of the codes
    if cfg.nuisance_sigma > 0:
        r = max(1, cfg.d // 4)
        basis_t = _random_orthogonal(rng, cfg.d)[:, :r]
        basis_v = _random_orthogonal(rng, cfg.d)[:, :r]
        text += cfg.nuisance_sigma * rng.standard_normal((cfg.n, r)) @ basis_t.T
        video += cfg.nuisance_sigma * rng.standard_normal((cfg.n, r)) @ basis_v.T

    frames = video[:, None, :] + sigma * rng.standard_normal(
        (cfg.n, cfg.n_frames, cfg.d))

    def tag_stream(mix):
        base = codes @ mix.T
        out = base[:, None, :] + sigma * rng.standard_normal(
            (cfg.n, cfg.n_tag_variants, cfg.d))
        return out

    if cfg.tag_informative:
        tags_visual = tag_stream(mix_tag_v)
        tags_textual = tag_stream(mix_tag_t)
    else:
        # ablation control: tag streams carry no information about the codes
        tags_visual = rng.standard_normal((cfg.n, cfg.n_tag_variants, cfg.d))
        tags_textual = rng.standard_normal((cfg.n, cfg.n_tag_variants, cfg.d))

    bank = FeatureBank(text=text, frames=frames, tags_visual=tags_visual,
                       tags_textual=tags_textual)
    return bank, codes


def write_planted_bank(cfg, out_dir):
    bank, _ = generate_planted_bank(cfg)
    return save_bank(bank, out_dir)


# ---------------------------------------------------------------------------
# brute-force oracles (kept free of numpy vectorization on purpose)


def oracle_softmax(row, tau=1.0):
    m = max(row)
    exps = [math.exp((x - m) / tau) for x in row]
    s = sum(exps)
    return [e / s for e in exps]


def oracle_cosine(u, v):
    du = math.sqrt(sum(x * x for x in u))
    dv = math.sqrt(sum(x * x for x in v))
    return sum(a * b for a, b in zip(u, v)) / (du * dv)


def oracle_similarity(e_t_set, e_v_set, conf):
    """Confidence-weighted sum of per-concept cosines, plain loops."""
    total = 0.0
    for c, et, ev in zip(conf, e_t_set, e_v_set):
        total += c * oracle_cosine(list(et), list(ev))
    return total


def oracle_rank(scores, true_index):
    s = scores[true_index]
    higher = sum(1 for x in scores if x > s)
    ties = sum(1 for i, x in enumerate(scores) if x == s and i != true_index)
    return 1 + higher + ties


def oracle_metrics(S_rows, ground_truth=None):
    """Enumeration reference for all six metrics; returns a plain dict."""
    nq = len(S_rows)
    ng = len(S_rows[0])
    if ground_truth is None:
        ground_truth = list(range(nq))
    ranks = [oracle_rank(list(S_rows[i]), ground_truth[i]) for i in range(nq)]
    r1 = 100.0 * sum(1 for r in ranks if r <= 1) / nq
    r5 = 100.0 * sum(1 for r in ranks if r <= 5) / nq
    r10 = 100.0 * sum(1 for r in ranks if r <= 10) / nq
    ordered = sorted(ranks)
    mr = float(ordered[(nq - 1) // 2])
    mean_r = sum(ranks) / nq
    return {"R1": r1, "R5": r5, "R10": r10, "MR": mr, "MeanR": mean_r,
            "RSum": r1 + r5 + r10, "n_query": nq, "n_gallery": ng}


def finite_difference_grad(f, x, h=1e-5):
    """Central-difference gradient of scalar f wrt array x (perturbed in place)."""
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
