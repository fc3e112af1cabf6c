"""Forward path of the retrieval heads.

Pipeline per query/gallery pair: text-conditioned frame pooling (the pooled
video depends on the query caption), per-stream projection into K latent
concepts, a confidence MLP over the concatenated concept quadruple, and the
confidence-weighted sum of per-concept cosines as the similarity score.

Banks are frozen, so pooling involves no trainable parameters and runs as
plain numpy; the tape starts at the concept projections.
"""

import json
import struct
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import autodiff as ad
from . import kernels
from .errors import CheckpointError, ParameterError, ShapeError

MLP_HIDDEN = 256
CHECKPOINT_MAGIC = b"CVCKPT01"

STREAMS = ("video", "text", "tags_visual", "tags_textual")


@dataclass
class ModelParams:
    """All trainable arrays plus the fixed temperatures.

    Projection lists hold K matrices of shape (d/K, d) per stream; the
    confidence MLP is two linear layers with a ReLU in between and a 256-wide
    hidden layer.
    """

    w_v: list
    w_t: list
    w_av: list
    w_at: list
    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray
    d: int
    k: int
    tau_a: float = 3.0
    tau_c: float = 0.1
    tau_s: float = 0.05
    hidden: int = MLP_HIDDEN

    @property
    def dk(self):
        return self.d // self.k

    def param_items(self):
        """(name, array) pairs in the canonical checkpoint payload order."""
        items = []
        for stream, ws in (("w_v", self.w_v), ("w_t", self.w_t),
                           ("w_av", self.w_av), ("w_at", self.w_at)):
            items.extend((f"{stream}.{i}", w) for i, w in enumerate(ws))
        items.append(("mlp_w1", self.mlp_w1))
        items.append(("mlp_b1", self.mlp_b1))
        items.append(("mlp_w2", self.mlp_w2))
        items.append(("mlp_b2", self.mlp_b2))
        return items


def _orthogonal_rows(rng, rows, cols):
    # QR of a tall random matrix; sign-fixed so the result is unique.
    a = rng.standard_normal((cols, rows))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return np.ascontiguousarray(q.T)


def init_params(d, k, seed, tau_a=3.0, tau_c=0.1, tau_s=0.05):
    """Projectors get orthogonal rows scaled by 1/sqrt(d); MLP biases start
    at zero so confidences start at 0.5."""
    if d % k != 0:
        raise ParameterError(f"d={d} not divisible by K={k}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    dk = d // k
    scale = 1.0 / np.sqrt(d)

    def stream_ws():
        return [_orthogonal_rows(rng, dk, d) * scale for _ in range(k)]

    fan_in = 4 * dk
    return ModelParams(
        w_v=stream_ws(),
        w_t=stream_ws(),
        w_av=stream_ws(),
        w_at=stream_ws(),
        mlp_w1=rng.standard_normal((MLP_HIDDEN, fan_in)) * np.sqrt(2.0 / fan_in),
        mlp_b1=np.zeros((1, MLP_HIDDEN)),
        mlp_w2=rng.standard_normal((1, MLP_HIDDEN)) * np.sqrt(1.0 / MLP_HIDDEN),
        mlp_b2=np.zeros((1, 1)),
        d=d, k=k, tau_a=tau_a, tau_c=tau_c, tau_s=tau_s,
    )


def make_view(params, trainable):
    """A namespace mirroring ModelParams whose arrays are DiffNode leaves
    when trainable, letting the same forward code run taped or plain."""
    wrap = (lambda a: ad.DiffNode(a)) if trainable else (lambda a: a)
    view = SimpleNamespace(
        w_v=[wrap(w) for w in params.w_v],
        w_t=[wrap(w) for w in params.w_t],
        w_av=[wrap(w) for w in params.w_av],
        w_at=[wrap(w) for w in params.w_at],
        mlp_w1=wrap(params.mlp_w1),
        mlp_b1=wrap(params.mlp_b1),
        mlp_w2=wrap(params.mlp_w2),
        mlp_b2=wrap(params.mlp_b2),
        tau_a=params.tau_a, tau_c=params.tau_c, tau_s=params.tau_s,
        d=params.d, k=params.k, dk=params.dk,
    )
    if trainable:
        view.nodes = ([*view.w_v, *view.w_t, *view.w_av, *view.w_at,
                       view.mlp_w1, view.mlp_b1, view.mlp_w2, view.mlp_b2])
    return view


# ---------------------------------------------------------------------------
# pooling


def pool_attention(t_vec, frames, tau_a):
    """Per-frame attention weights for one caption/video pair."""
    t = ad.value_of(t_vec)
    f = ad.value_of(frames)
    logits = t.reshape(1, -1) @ f.T
    return kernels.active.softmax_rows(logits, tau_a)


def text_conditioned_pool(t_vec, frames, tau_a):
    """Attention-pool frames with caption-conditioned weights (1 x d).

    Differentiable through both inputs when they are nodes.
    """
    if tau_a <= 0:
        raise ParameterError(f"pooling temperature must be > 0, got {tau_a}")
    logits = ad.matmul(t_vec, ad.transpose(frames))
    weights = ad.softmax_rows(logits, tau_a)
    return ad.matmul(weights, frames)


def pool_pairs(T, F, tau_a):
    """Pooled video representations for every (query, gallery) pair.

    T: (Bq, d); F: (Bg, n_frames, d). Returns (Bq*Bg, d) with row i*Bg + j
    holding video j's frames pooled under caption i. Pure numpy: banks are
    frozen so no gradient flows through pooling.
    """
    if tau_a <= 0:
        raise ParameterError(f"pooling temperature must be > 0, got {tau_a}")
    bq, d = T.shape
    bg, nf, _ = F.shape
    logits = T @ F.reshape(bg * nf, d).T          # (Bq, Bg*nf)
    weights = kernels.active.softmax_rows(logits.reshape(bq * bg, nf), tau_a)
    pooled = np.einsum("ijf,jfd->ijd", weights.reshape(bq, bg, nf), F)
    return np.ascontiguousarray(pooled.reshape(bq * bg, d))


def pool_diagonal(T, F, tau_a):
    """Each video pooled under its own caption: (n, d)."""
    n, d = T.shape
    nf = F.shape[1]
    logits = np.einsum("id,ifd->if", T, F)
    weights = kernels.active.softmax_rows(logits, tau_a)
    return np.einsum("if,ifd->id", weights, F)


# ---------------------------------------------------------------------------
# concepts and confidence


def project_stream(ws, X):
    """K concept matrices (rows = samples) from one stream's projectors."""
    return [ad.matmul(X, ad.transpose(w)) for w in ws]


def disentangle(params, x, stream):
    """ConceptSet for a single sample: (K, d/K), one row per concept."""
    ws = {"video": params.w_v, "text": params.w_t,
          "tags_visual": params.w_av, "tags_textual": params.w_at}[stream]
    x = ad.as_matrix(x)
    return np.concatenate([x @ w.T for w in ws], axis=0)


def mlp_confidence(view, X):
    """Confidence in (0,1) for each row of concatenated concept quadruples."""
    h = ad.relu(ad.add(ad.matmul(X, ad.transpose(view.mlp_w1)), view.mlp_b1))
    return ad.sigmoid(ad.add(ad.matmul(h, ad.transpose(view.mlp_w2)), view.mlp_b2))


def confidence(params, e_v, e_t, e_av, e_at):
    """Scalar confidence for one concept quadruple (spec order v,t,a^v,a^t)."""
    x = np.concatenate([ad.as_matrix(e) for e in (e_v, e_t, e_av, e_at)], axis=1)
    view = make_view(params, trainable=False)
    return float(mlp_confidence(view, x)[0, 0])


def weighted_similarity(e_t_set, e_v_set, conf):
    """Confidence-weighted sum of per-concept cosines for one pair."""
    tn = ad.l2_normalize_rows(ad.as_matrix(e_t_set))
    vn = ad.l2_normalize_rows(ad.as_matrix(e_v_set))
    cos = (tn * vn).sum(axis=1)
    c = np.asarray(conf, dtype=np.float64).ravel()
    if c.shape[0] != cos.shape[0]:
        raise ShapeError(f"confidence length {c.shape[0]} != K {cos.shape[0]}")
    return float((c * cos).sum())


# ---------------------------------------------------------------------------
# batched similarity


def forward_similarity(view, T, V_pairs, A_v, A_t, bq, bg,
                       use_visual_tags=True, use_textual_tags=True,
                       fixed_conf=None):
    """Similarity matrix (bq x bg) plus the per-stream concept lists.

    `V_pairs` comes from pool_pairs. Disabled tag streams contribute zero
    concepts to the confidence MLP and are skipped by the alignment loss.
    `fixed_conf` (list of K (bq*bg, 1) arrays) bypasses the MLP.
    """
    E_t = project_stream(view.w_t, T)
    E_v_pairs = project_stream(view.w_v, V_pairs)
    zeros = np.zeros((bg, view.dk))
    E_av = project_stream(view.w_av, A_v) if use_visual_tags else [zeros] * view.k
    zeros_q = np.zeros((bq, view.dk))
    E_at = project_stream(view.w_at, A_t) if use_textual_tags else [zeros_q] * view.k

    s_flat = None
    conf_cols = []
    for k in range(view.k):
        t_rep = ad.repeat_rows(E_t[k], bg)
        cos = ad.row_dot(ad.l2_normalize_rows(t_rep),
                         ad.l2_normalize_rows(E_v_pairs[k]))
        if fixed_conf is not None:
            c = fixed_conf[k]
        else:
            quad = ad.concat_cols([
                E_v_pairs[k],
                t_rep,
                ad.tile_rows(E_av[k], bq),
                ad.repeat_rows(E_at[k], bg),
            ])
            c = mlp_confidence(view, quad)
        conf_cols.append(c)
        contrib = ad.mul(c, cos)
        s_flat = contrib if s_flat is None else ad.add(s_flat, contrib)

    S = ad.reshape(s_flat, bq, bg)
    return SimpleNamespace(S=S, E_t=E_t, E_v_pairs=E_v_pairs,
                           E_av=E_av, E_at=E_at, conf=conf_cols)


def batch_similarity_matrix(params, T_q, A_t_q, F_g, A_v_g,
                            use_visual_tags=True, use_textual_tags=True,
                            fixed_conf=None):
    """Plain-array similarity matrix: captions (rows) vs videos (columns)."""
    view = make_view(params, trainable=False)
    bq, bg = T_q.shape[0], F_g.shape[0]
    V_pairs = pool_pairs(T_q, F_g, params.tau_a)
    out = forward_similarity(view, T_q, V_pairs, A_v_g, A_t_q, bq, bg,
                             use_visual_tags, use_textual_tags, fixed_conf)
    return out.S


def bank_similarity(params, bank_q, bank_g=None, chunk=256,
                    use_visual_tags=True, use_textual_tags=True):
    """Full similarity matrix for a bank at inference settings.

    Queries are the captions of bank_q, gallery the videos of bank_g
    (default: same bank); tag variant 0 on both sides. Query rows are
    processed in chunks to bound the pair-pooling workspace.
    """
    bank_g = bank_g if bank_g is not None else bank_q
    T = bank_q.text
    A_t = bank_q.tags_textual[:, 0]
    F = bank_g.frames
    A_v = bank_g.tags_visual[:, 0]
    rows = []
    for lo in range(0, T.shape[0], chunk):
        rows.append(batch_similarity_matrix(
            params, T[lo:lo + chunk], A_t[lo:lo + chunk], F, A_v,
            use_visual_tags, use_textual_tags))
    return np.concatenate(rows, axis=0)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params, seed=0, step=0, train_state=None):
    """JSON header + f32le payload; an f64 section with exact parameters and
    Adam moments is appended when training state is supplied so resumed runs
    continue bit-for-bit."""
    items = params.param_items()
    header = {
        "format_version": 1,
        "d": params.d,
        "k": params.k,
        "hidden": params.hidden,
        "tau_a": params.tau_a,
        "tau_c": params.tau_c,
        "tau_s": params.tau_s,
        "seed": int(seed),
        "step": int(step),
        "payload_dtype": "f32le",
        "payload_order": [name for name, _ in items],
        "payload_shapes": {name: list(a.shape) for name, a in items},
        "train_state": None,
    }
    if train_state is not None:
        header["train_state"] = {
            "dtype": "f64le",
            "step": int(train_state["step"]),
            "epoch": int(train_state["epoch"]),
            "batch": int(train_state["batch"]),
            "beta1": train_state["beta1"],
            "beta2": train_state["beta2"],
            "eps": train_state["eps"],
            "base_lr": train_state["base_lr"],
            "warmup_steps": int(train_state["warmup_steps"]),
        }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, arr in items:
            fh.write(arr.astype("<f4").tobytes())
        if train_state is not None:
            for _, arr in items:
                fh.write(arr.astype("<f8").tobytes())
            for key in ("m", "v"):
                for arr in train_state[key]:
                    fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path):
    """Returns (params, header, train_arrays|None); f64 section preferred
    for parameters when present."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}",
                              code="model.missing_checkpoint")
    if raw[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic in {path}")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    offset = 16 + hlen

    shapes = {name: tuple(s) for name, s in header["payload_shapes"].items()}
    order = header["payload_order"]

    def take(dtype, name):
        nonlocal offset
        shape = shapes[name]
        count = int(np.prod(shape))
        width = 4 if dtype == "<f4" else 8
        end = offset + count * width
        if end > len(raw):
            raise CheckpointError(f"checkpoint truncated reading {name!r}: {path}")
        arr = np.frombuffer(raw[offset:end], dtype=dtype).astype(np.float64)
        offset = end
        return np.ascontiguousarray(arr.reshape(shape))

    arrays32 = {name: take("<f4", name) for name in order}
    train_arrays = None
    if header.get("train_state"):
        params64 = {name: take("<f8", name) for name in order}
        m = {name: take("<f8", name) for name in order}
        v = {name: take("<f8", name) for name in order}
        arrays = params64
        train_arrays = {"m": m, "v": v, "state": header["train_state"]}
    else:
        arrays = arrays32

    k = header["k"]
    params = ModelParams(
        w_v=[arrays[f"w_v.{i}"] for i in range(k)],
        w_t=[arrays[f"w_t.{i}"] for i in range(k)],
        w_av=[arrays[f"w_av.{i}"] for i in range(k)],
        w_at=[arrays[f"w_at.{i}"] for i in range(k)],
        mlp_w1=arrays["mlp_w1"],
        mlp_b1=arrays["mlp_b1"],
        mlp_w2=arrays["mlp_w2"],
        mlp_b2=arrays["mlp_b2"],
        d=header["d"], k=k,
        tau_a=header["tau_a"], tau_c=header["tau_c"], tau_s=header["tau_s"],
        hidden=header["hidden"],
    )
    return params, header, train_arrays


def check_bank_compat(params, bank):
    if params.d != bank.d:
        raise CheckpointError(
            f"checkpoint d={params.d} does not match bank d={bank.d}")
