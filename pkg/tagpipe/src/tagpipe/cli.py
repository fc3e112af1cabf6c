"""CLI: extract / clean / assemble / encode / filter."""

import argparse
import json
import logging
import sys

from .build import build_bank
from .cleaning import clean_raw_output
from .clients import FixtureClient, HttpModelClient
from .encoder import HashingTextEncoder
from .extract import extract_tags, filter_tags
from .records import (MODALITIES, TEMPERATURES, TagRecord, pool_tags,
                      read_records, write_records)
from .sentences import assemble_sentence


def read_samples(path):
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(json.loads(line))
    return samples


def make_client(args):
    if args.fixtures:
        return FixtureClient(args.fixtures)
    if args.endpoint:
        return HttpModelClient(args.endpoint)
    raise SystemExit("error tagpipe.usage: provide --fixtures or --endpoint")


def cmd_extract(args):
    samples = read_samples(args.samples)
    client = make_client(args)
    temps = [float(t) for t in args.temperatures.split(",")]
    records = []
    for sample in samples:
        for temp in temps:
            records.append(extract_tags(sample, args.modality, temp, client,
                                         args.prompts))
    write_records(records, args.out)
    failed = sum(r.failed for r in records)
    print(f"wrote {len(records)} records ({failed} failed) to {args.out}")
    return 0


def cmd_clean(args):
    records = read_records(args.records)
    for rec in records:
        if not rec.failed:
            rec.tags = clean_raw_output(rec.raw_output)
    write_records(records, args.out)
    print(f"re-cleaned {len(records)} records into {args.out}")
    return 0


def cmd_assemble(args):
    records = read_records(args.records)
    keys = sorted({(r.sample_id, r.modality) for r in records if not r.failed})
    with open(args.out, "w", encoding="utf-8") as fh:
        for sid, modality in keys:
            tags = pool_tags(records, sid, modality)
            sentence = assemble_sentence(tags, args.count)
            fh.write(json.dumps({"sample_id": sid, "modality": modality,
                                 "sentence": sentence}, sort_keys=True) + "\n")
    print(f"wrote {len(keys)} sentences to {args.out}")
    return 0


def cmd_encode(args):
    samples = read_samples(args.samples)
    records = read_records(args.records)
    encoder = HashingTextEncoder(d=args.d, seed=args.encoder_seed)
    manifest, kept, report = build_bank(
        samples, records, encoder, args.out_dir, r=args.variants,
        n=args.n_train_tags, m=args.m_infer_tags, n_frames=args.n_frames,
        seed=args.seed)
    print(f"wrote bank for {len(kept)} samples to {manifest} "
          f"({len(report['dropped'])} dropped)")
    return 0


def cmd_filter(args):
    samples = {s["id"]: s for s in read_samples(args.samples)}
    records = read_records(args.records)
    client = make_client(args)
    out_records = []
    for rec in records:
        if rec.failed or rec.sample_id not in samples:
            out_records.append(rec)
            continue
        kept = filter_tags(samples[rec.sample_id], rec.tags, rec.modality,
                           client)
        out_records.append(TagRecord(
            sample_id=rec.sample_id, modality=rec.modality,
            temperature=rec.temperature, raw_output=rec.raw_output,
            tags=kept, failed=rec.failed))
    write_records(out_records, args.out)
    print(f"filtered {len(out_records)} records into {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tagpipe",
        description="Offline tag pipeline: prompt models for tags, clean "
                    "them, assemble tag sentences, encode feature banks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ext = sub.add_parser("extract", help="query the model for raw tags")
    p_ext.add_argument("--samples", required=True,
                       help="JSONL of {id, caption, frames?}")
    p_ext.add_argument("--modality", choices=MODALITIES, required=True)
    p_ext.add_argument("--temperatures",
                       default=",".join(str(t) for t in TEMPERATURES))
    p_ext.add_argument("--prompts", default="prompts")
    p_ext.add_argument("--fixtures", help="replay fixture directory")
    p_ext.add_argument("--endpoint", help="HTTP model endpoint")
    p_ext.add_argument("--out", required=True)
    p_ext.set_defaults(func=cmd_extract)

    p_cln = sub.add_parser("clean", help="re-run cleaning on raw outputs")
    p_cln.add_argument("--records", required=True)
    p_cln.add_argument("--out", required=True)
    p_cln.set_defaults(func=cmd_clean)

    p_asm = sub.add_parser("assemble", help="pool tags into tag sentences")
    p_asm.add_argument("--records", required=True)
    p_asm.add_argument("--count", type=int, default=12)
    p_asm.add_argument("--out", required=True)
    p_asm.set_defaults(func=cmd_assemble)

    p_enc = sub.add_parser("encode", help="encode streams and write a bank")
    p_enc.add_argument("--samples", required=True)
    p_enc.add_argument("--records", required=True)
    p_enc.add_argument("--out-dir", required=True)
    p_enc.add_argument("--d", type=int, default=32)
    p_enc.add_argument("--variants", type=int, default=2)
    p_enc.add_argument("--n-train-tags", type=int, default=12)
    p_enc.add_argument("--m-infer-tags", type=int, default=12)
    p_enc.add_argument("--n-frames", type=int, default=2)
    p_enc.add_argument("--seed", type=int, default=0)
    p_enc.add_argument("--encoder-seed", type=int, default=0)
    p_enc.set_defaults(func=cmd_encode)

    p_flt = sub.add_parser("filter",
                           help="keep only tags the model deems relevant")
    p_flt.add_argument("--samples", required=True)
    p_flt.add_argument("--records", required=True)
    p_flt.add_argument("--fixtures")
    p_flt.add_argument("--endpoint")
    p_flt.add_argument("--out", required=True)
    p_flt.set_defaults(func=cmd_filter)

    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
