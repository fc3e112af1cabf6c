"""Command-line surface: train, eval, ablate, export-concepts, synth."""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .databank import load_bank, slice_bank
from .errors import ConfigError, CrossvidError
from .inference import evaluate, metrics_json, sample_querybank_rows
from .model import (bank_similarity, check_bank_compat, disentangle,
                    load_checkpoint, pool_diagonal)
from .synth import SynthConfig, write_planted_bank
from .trainer import TrainConfig, train
from . import __version__

ABLATION_VARIANTS = [
    ("baseline", False, False),
    ("+VT", True, False),
    ("+TT", False, True),
    ("+VT+TT", True, True),
]

STRATEGIES = ("none", "qb", "dsl")


def _config_from_args(args):
    if getattr(args, "config", None):
        cfg = TrainConfig.from_file(args.config)
    else:
        cfg = TrainConfig()
    for field, attr in (("seed", "seed"), ("epochs", "epochs"),
                        ("batch_size", "batch_size"), ("k", "k")):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, field, value)
    return cfg.validate()


def cmd_train(args):
    bank = load_bank(args.manifest)
    cfg = _config_from_args(args)
    result = train(bank, cfg, out_dir=args.out_dir)
    print(f"trained {result.step} steps; "
          f"final total loss {result.curve[-1]['total']:.6f}; "
          f"checkpoint {result.checkpoint_path}")
    return 0


def _querybank_probes(args, params, gallery_bank):
    qb_bank = load_bank(args.qb_manifest, allow_empty=True)
    if qb_bank.n == 0:
        return np.zeros((0, gallery_bank.n))
    probes = bank_similarity(params, qb_bank, gallery_bank)
    if args.qb_size and args.qb_size < probes.shape[0]:
        probes = sample_querybank_rows(probes, args.qb_size, args.seed or 0)
    return probes


def cmd_eval(args):
    bank = load_bank(args.manifest)
    params, header, _ = load_checkpoint(args.checkpoint)
    check_bank_compat(params, bank)
    S = bank_similarity(params, bank)
    querybank = None
    if args.strategy == "qb":
        if not args.qb_manifest:
            raise ConfigError("strategy 'qb' requires --qb-manifest",
                              code="cli.usage")
        querybank = _querybank_probes(args, params, bank)
    metrics = evaluate(S, strategy=args.strategy, tau_r=args.tau_r,
                       beta=args.beta, querybank=querybank)
    blob = metrics_json(metrics, strategy=args.strategy)
    sys.stdout.write(blob)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(blob)
    return 0


def run_ablation(bank, cfg, tau_r=100.0, beta=20.0, qb_size=32, holdout=0):
    """Train the four tag-stream variants and score each under every
    strategy; returns a list of row dicts.

    With holdout > 0 the last `holdout` samples are excluded from training
    and used as the evaluation gallery (generalization protocol); otherwise
    the full bank is used for both.
    """
    if holdout:
        train_bank = slice_bank(bank, 0, bank.n - holdout)
        eval_bank = slice_bank(bank, bank.n - holdout, bank.n)
    else:
        train_bank = eval_bank = bank
    rows = []
    for variant, use_vt, use_tt in ABLATION_VARIANTS:
        vcfg = TrainConfig(**{**cfg.__dict__})
        vcfg.use_visual_tags = use_vt
        vcfg.use_textual_tags = use_tt
        if not use_vt and not use_tt:
            vcfg.alpha_a = 0.0
        result = train(train_bank, vcfg)
        S = bank_similarity(result.params, eval_bank,
                            use_visual_tags=use_vt, use_textual_tags=use_tt)
        # probes come from training captions scored against the eval gallery
        probe_src = bank_similarity(result.params, train_bank, eval_bank,
                                    use_visual_tags=use_vt,
                                    use_textual_tags=use_tt) \
            if holdout else S
        probes = sample_querybank_rows(
            probe_src, min(qb_size, probe_src.shape[0]), vcfg.seed)
        for strategy in STRATEGIES:
            metrics = evaluate(S, strategy=strategy, tau_r=tau_r, beta=beta,
                               querybank=probes if strategy == "qb" else None)
            row = {"variant": variant, "strategy": strategy, "seed": vcfg.seed}
            row.update(metrics.to_json_dict(strategy))
            rows.append(row)
    return rows


def cmd_ablate(args):
    bank = load_bank(args.manifest)
    cfg = _config_from_args(args)
    rows = run_ablation(bank, cfg, tau_r=args.tau_r, beta=args.beta,
                        qb_size=args.qb_size, holdout=args.holdout)
    fields = ["variant", "strategy", "seed", "R1", "R5", "R10", "MR",
              "MeanR", "RSum", "n_query", "n_gallery"]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} ablation rows to {args.out}")
    return 0


def cmd_export_concepts(args):
    bank = load_bank(args.manifest)
    params, header, _ = load_checkpoint(args.checkpoint)
    check_bank_compat(params, bank)
    ids = bank.ids if bank.ids is not None else [str(i) for i in range(bank.n)]
    pooled = pool_diagonal(bank.text, bank.frames, params.tau_a)
    stream_vectors = {
        "video": pooled,
        "text": bank.text,
        "tags_visual": bank.tags_visual[:, 0],
        "tags_textual": bank.tags_textual[:, 0],
    }
    dk = params.dk
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "k", "stream"] +
                        [f"c{j}" for j in range(dk)])
        for i in range(bank.n):
            for k in range(params.k):
                for stream, vectors in stream_vectors.items():
                    concepts = disentangle(params, vectors[i], stream)
                    row = [ids[i], k, stream]
                    row.extend(f"{x:.17g}" for x in concepts[k])
                    writer.writerow(row)
    print(f"wrote concepts for {bank.n} samples to {args.out}")
    return 0


def cmd_synth(args):
    cfg = SynthConfig(n=args.n, d=args.d, k=args.k, n_frames=args.n_frames,
                      n_tag_variants=args.n_tag_variants,
                      noise_sigma=args.sigma,
                      tag_informative=not args.tags_uninformative,
                      seed=args.seed)
    path = write_planted_bank(cfg, args.out_dir)
    print(f"wrote planted bank manifest to {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="crossvid",
        description="Cross-modal text/video retrieval engine over frozen "
                    "feature banks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train heads on a feature bank")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--config", help="JSON or TOML TrainConfig file")
    p_train.add_argument("--out-dir", required=True)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", type=int)
    p_train.add_argument("--k", type=int)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a bank with a checkpoint")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--strategy", choices=STRATEGIES, default="none")
    p_eval.add_argument("--qb-manifest",
                        help="bank whose captions form the querybank probes")
    p_eval.add_argument("--qb-size", type=int, default=0,
                        help="subsample this many probe rows (0 = all)")
    p_eval.add_argument("--tau-r", type=float, default=100.0)
    p_eval.add_argument("--beta", type=float, default=20.0)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", default="metrics.json")
    p_eval.set_defaults(func=cmd_eval)

    p_abl = sub.add_parser("ablate",
                           help="train/evaluate the four tag-stream variants")
    p_abl.add_argument("--manifest", required=True)
    p_abl.add_argument("--config")
    p_abl.add_argument("--out", required=True)
    p_abl.add_argument("--seed", type=int)
    p_abl.add_argument("--epochs", type=int)
    p_abl.add_argument("--batch-size", type=int)
    p_abl.add_argument("--k", type=int)
    p_abl.add_argument("--tau-r", type=float, default=100.0)
    p_abl.add_argument("--beta", type=float, default=20.0)
    p_abl.add_argument("--qb-size", type=int, default=32)
    p_abl.add_argument("--holdout", type=int, default=0,
                       help="evaluate on the last N samples, train on the rest")
    p_abl.set_defaults(func=cmd_ablate)

    p_exp = sub.add_parser("export-concepts",
                           help="dump per-sample concept vectors as CSV")
    p_exp.add_argument("--manifest", required=True)
    p_exp.add_argument("--checkpoint", required=True)
    p_exp.add_argument("--out", required=True)
    p_exp.set_defaults(func=cmd_export_concepts)

    p_syn = sub.add_parser("synth", help="write a planted synthetic bank")
    p_syn.add_argument("--out-dir", required=True)
    p_syn.add_argument("--n", type=int, default=64)
    p_syn.add_argument("--d", type=int, default=32)
    p_syn.add_argument("--k", type=int, default=4)
    p_syn.add_argument("--n-frames", type=int, default=3)
    p_syn.add_argument("--n-tag-variants", type=int, default=2)
    p_syn.add_argument("--sigma", type=float, default=0.1)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--tags-uninformative", action="store_true")
    p_syn.set_defaults(func=cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CrossvidError as e:
        print(f"error {e.code}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error cli.io: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
