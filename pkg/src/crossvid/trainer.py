"""Seeded deterministic training loop over a feature bank.

The batch schedule is a pure function of (seed, epoch), so runs with equal
configs are bitwise reproducible and resumed runs see exactly the batches a
straight run would have seen.
"""

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .databank import epoch_batches, gather_batch
from .errors import CheckpointError, ConfigError, TrainingAbort
from .losses import LossWeights, total_loss
from .model import (ModelParams, check_bank_compat, forward_similarity,
                    init_params, load_checkpoint, make_view, pool_pairs,
                    project_stream, save_checkpoint)
from .optim import AdamState, adam_step, effective_lr

CURVE_HEADER = ["step", "L_S", "L_C", "L_A", "total", "lr"]


@dataclass
class TrainConfig:
    k: int = 8
    batch_size: int = 32
    epochs: int = 1
    base_lr: float = 1e-3
    warmup_steps: int = 100
    seed: int = 0
    alpha_c: float = 1.0
    alpha_a: float = 1.0
    tau_a: float = 3.0
    tau_c: float = 0.1
    tau_s: float = 0.05
    checkpoint_every: int = 0
    use_visual_tags: bool = True
    use_textual_tags: bool = True

    def validate(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be > 0, got {self.base_lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if min(self.tau_a, self.tau_c, self.tau_s) <= 0:
            raise ConfigError("temperatures must be > 0")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be >= 0")
        return self

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data).validate()

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, "rb") as fh:
                blob = fh.read()
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        if path.endswith(".toml"):
            data = _parse_toml(blob.decode("utf-8"), path)
        else:
            try:
                data = json.loads(blob.decode("utf-8"))
            except json.JSONDecodeError as e:
                raise ConfigError(f"config is not valid JSON: {path}: {e}")
        return cls.from_dict(data)


def _parse_toml(text, path):
    """stdlib tomllib when available (3.11+); otherwise a flat key = value
    subset, which is all a TrainConfig file needs."""
    try:
        import tomllib

        return tomllib.loads(text)
    except ImportError:
        pass
    data = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if value in ("true", "false"):
            data[key] = value == "true"
        elif value.startswith(('"', "'")):
            data[key] = value.strip("\"'")
        else:
            try:
                data[key] = int(value)
            except ValueError:
                try:
                    data[key] = float(value)
                except ValueError:
                    raise ConfigError(f"{path}:{lineno}: bad value {value!r}")
    return data


@dataclass
class TrainResult:
    params: ModelParams
    curve: list
    states: list
    step: int
    checkpoint_path: str | None = None


def pool_batch(config, T, F):
    """The constant pooling stage: pair-pooled videos plus the diagonal
    (each video under its own caption), which feeds the alignment losses."""
    b = T.shape[0]
    V_pairs = pool_pairs(T, F, config.tau_a)
    V_diag = np.ascontiguousarray(V_pairs[np.arange(b) * (b + 1)])
    return V_pairs, V_diag


def head_forward(view, config, T, A_v, A_t, V_pairs, V_diag):
    """Trainable-head stage on top of precomputed pooling."""
    b = T.shape[0]
    sim = forward_similarity(
        view, T, V_pairs, A_v, A_t, b, b,
        use_visual_tags=config.use_visual_tags,
        use_textual_tags=config.use_textual_tags,
    )
    E_v = project_stream(view.w_v, V_diag)
    return sim, E_v


def _train_forward(view, config, T, F, A_v, A_t):
    V_pairs, V_diag = pool_batch(config, T, F)
    return head_forward(view, config, T, A_v, A_t, V_pairs, V_diag)


def _run_steps(bank, config, params, states, start_epoch, start_batch,
               out_dir=None, curve=None):
    curve = curve if curve is not None else []
    weights = LossWeights(config.alpha_c, config.alpha_a)
    steps_per_epoch = math.ceil(bank.n / config.batch_size)
    ckpt_path = None

    for epoch in range(start_epoch, config.epochs):
        schedule = epoch_batches(bank.n, bank.n_tag_variants,
                                 config.batch_size, config.seed, epoch)
        first = start_batch if epoch == start_epoch else 0
        for bpos in range(first, len(schedule)):
            T, F, A_v, A_t = gather_batch(bank, schedule[bpos])
            view = make_view(params, trainable=True)
            sim, E_v = _train_forward(view, config, T, F, A_v, A_t)
            report, node = total_loss(
                sim.S, E_v, sim.E_t, sim.E_av, sim.E_at, weights,
                config.tau_s, config.tau_c,
                config.use_visual_tags, config.use_textual_tags,
            )
            step = states[0].step + 1
            for name, value in (("L_S", report.l_s), ("L_C", report.l_c),
                                ("L_A", report.l_a), ("total", report.total)):
                if not math.isfinite(value):
                    raise TrainingAbort(
                        f"non-finite loss at step {step}: {name}={value}")
            ad.backward(node)
            for (pname, arr), node_p, state in zip(
                    params.param_items(), view.nodes, states):
                grad = node_p.grad if node_p.grad is not None \
                    else np.zeros_like(arr)
                adam_step(arr, grad, state)
            lr = effective_lr(states[0])
            curve.append({"step": step, "L_S": report.l_s, "L_C": report.l_c,
                          "L_A": report.l_a, "total": report.total, "lr": lr})
            if out_dir and config.checkpoint_every \
                    and step % config.checkpoint_every == 0:
                nxt_epoch, nxt_batch = epoch, bpos + 1
                if nxt_batch >= len(schedule):
                    nxt_epoch, nxt_batch = epoch + 1, 0
                ckpt_path = os.path.join(out_dir, f"checkpoint_step{step}.ckpt")
                _save(ckpt_path, params, states, config, nxt_epoch, nxt_batch)

    return curve, ckpt_path


def _save(path, params, states, config, next_epoch, next_batch):
    s0 = states[0]
    train_state = {
        "step": s0.step,
        "epoch": next_epoch,
        "batch": next_batch,
        "beta1": s0.beta1,
        "beta2": s0.beta2,
        "eps": s0.eps,
        "base_lr": s0.base_lr,
        "warmup_steps": s0.warmup_steps,
        "m": [st.m for st in states],
        "v": [st.v for st in states],
    }
    save_checkpoint(path, params, seed=config.seed, step=s0.step,
                    train_state=train_state)


def write_curve_csv(curve, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_HEADER)
        for row in curve:
            writer.writerow([row[key] for key in CURVE_HEADER])


def train(bank, config, out_dir=None):
    """Fresh training run; returns params, loss curve, optimizer states."""
    config.validate()
    if bank.d % config.k != 0:
        raise ConfigError(f"bank d={bank.d} not divisible by K={config.k}")
    if config.batch_size > bank.n:
        raise ConfigError(
            f"batch_size {config.batch_size} > bank size {bank.n}")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    params = init_params(bank.d, config.k, config.seed,
                         config.tau_a, config.tau_c, config.tau_s)
    states = [AdamState.for_param(arr, config.base_lr, config.warmup_steps)
              for _, arr in params.param_items()]
    curve, _ = _run_steps(bank, config, params, states, 0, 0, out_dir)
    ckpt_path = None
    if out_dir:
        ckpt_path = os.path.join(out_dir, "checkpoint_final.ckpt")
        _save(ckpt_path, params, states, config, config.epochs, 0)
        write_curve_csv(curve, os.path.join(out_dir, "curve.csv"))
    return TrainResult(params=params, curve=curve, states=states,
                       step=states[0].step, checkpoint_path=ckpt_path)


def resume(checkpoint_path, bank, config, out_dir=None):
    """Continue a run from a checkpoint with training state.

    The restored schedule position and optimizer moments make a split run
    identical to an uninterrupted one.
    """
    config.validate()
    params, header, train_arrays = load_checkpoint(checkpoint_path)
    if train_arrays is None:
        raise CheckpointError(
            f"checkpoint has no training state, cannot resume: {checkpoint_path}")
    if params.k != config.k:
        raise CheckpointError(
            f"checkpoint K={params.k} does not match config K={config.k}")
    check_bank_compat(params, bank)
    ts = train_arrays["state"]
    order = [name for name, _ in params.param_items()]
    states = []
    for name, arr in params.param_items():
        st = AdamState(
            m=train_arrays["m"][name], v=train_arrays["v"][name],
            step=ts["step"], beta1=ts["beta1"], beta2=ts["beta2"],
            eps=ts["eps"], base_lr=ts["base_lr"],
            warmup_steps=ts["warmup_steps"],
        )
        states.append(st)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    curve, _ = _run_steps(bank, config, params, states,
                          ts["epoch"], ts["batch"], out_dir)
    ckpt_path = None
    if out_dir:
        ckpt_path = os.path.join(out_dir, "checkpoint_final.ckpt")
        _save(ckpt_path, params, states, config, config.epochs, 0)
        write_curve_csv(curve, os.path.join(out_dir, "curve.csv"))
    return TrainResult(params=params, curve=curve, states=states,
                       step=states[0].step, checkpoint_path=ckpt_path)
