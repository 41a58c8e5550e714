"""Command-line interface.

Heavy imports happen inside handlers so the SIGNTRANS_THREADS environment
variable can cap BLAS threads before numpy loads.
"""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_env() -> None:
    threads = os.environ.get("SIGNTRANS_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    # flags mirror TrainConfig field names
    from .config import TrainConfig

    defaults = TrainConfig()
    for f_name, value in defaults.to_dict().items():
        flag = "--" + f_name.replace("_", "-")
        if isinstance(value, bool):
            parser.add_argument(flag, dest=f_name, default=None,
                                action=argparse.BooleanOptionalAction)
        elif f_name == "gcn_channels":
            parser.add_argument(flag, dest=f_name, default=None,
                                help="three comma-separated channel sizes")
        elif value is None:
            parser.add_argument(flag, dest=f_name, default=None)
        else:
            parser.add_argument(flag, dest=f_name, type=type(value), default=None)


def _config_from_args(args) -> "TrainConfig":
    from .config import TrainConfig

    overrides = {}
    for f_name in TrainConfig().to_dict():
        value = getattr(args, f_name, None)
        if value is None:
            continue
        if f_name == "gcn_channels" and isinstance(value, str):
            value = tuple(int(c) for c in value.split(","))
        if f_name == "early_stop_ce":
            value = float(value)
        overrides[f_name] = value
    return TrainConfig(**overrides)


def _read_corpus(path: str) -> list[str]:
    from .data import read_translations_tsv

    if path.endswith(".tsv"):
        return [text for _, text in read_translations_tsv(path)]
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def cmd_prepare_anchors(args) -> int:
    from .anchors import read_pretagged_tsv, select_anchors, tag_corpus

    if args.pretagged:
        tagged = read_pretagged_tsv(args.corpus)
    else:
        tagged = tag_corpus(_read_corpus(args.corpus))
    vocab = select_anchors(tagged, args.tagset, args.min_count, args.max_doc_fraction)
    vocab.to_tsv(args.out)
    print(f"{len(vocab)} anchor words -> {args.out}")
    return 0


def cmd_train_bpe(args) -> int:
    from . import bpe

    model = bpe.train(_read_corpus(args.corpus), args.vocab_size)
    model.save(args.out)
    print(f"vocab {model.size} ({len(model.merges)} merges) -> {args.out}")
    return 0


def cmd_gen_synthetic(args) -> int:
    import numpy as np

    from .data import SyntheticSpec, generate_synthetic

    spec = SyntheticSpec(
        n_concepts=args.concepts,
        min_len=args.min_len,
        max_len=args.max_len,
        frames_per_concept=args.frames_per_concept,
        noise_scale=args.noise_scale,
        words_per_concept=args.words_per_concept,
    )
    manifest = generate_synthetic(
        spec, args.count, np.random.default_rng(args.seed), args.out, args.pose_format
    )
    print(f"{len(manifest)} samples -> {args.out}")
    return 0


def cmd_train(args) -> int:
    from .train import train

    cfg = _config_from_args(args)
    result = train(cfg, args.manifest, args.out, args.bpe,
                   anchors_path=args.anchors, glove_path=args.glove,
                   resume_from=args.resume_from)
    print(f"trained {result.steps} steps over {result.epochs_run} epochs; "
          f"final epoch CE {result.final_epoch_ce:.4f}")
    print(f"checkpoint: {result.final_checkpoint}")
    return 0


def cmd_translate(args) -> int:
    from .data import apply_frame_cap, read_pose
    from .train import load_model

    model = load_model(args.checkpoint)
    pose = apply_frame_cap(read_pose(args.pose), model.cfg.frame_cap)
    print(model.translate(pose, args.beam, args.max_len))
    return 0


def cmd_evaluate(args) -> int:
    from .train import evaluate

    report = evaluate(args.checkpoint, args.manifest, report_path=args.out,
                      hypotheses_path=args.hypotheses, beam_size=args.beam,
                      max_len=args.max_len)
    print(report.to_json())
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_suite

    results = run_suite()
    failures = 0
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:28s} max rel err {r.error:.3e}  (tol {r.tol:g})  {status}")
        failures += not r.passed
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 1 if failures else 0


def cmd_sweep(args) -> int:
    import json

    from .train import sweep

    cfg = _config_from_args(args)
    weights = [float(w) for w in args.weights.split(",")] if args.weights else None
    margins = [float(m) for m in args.margins.split(",")] if args.margins else None
    summary = sweep(cfg, args.manifest, args.out, args.bpe,
                    anchors_path=args.anchors, glove_path=args.glove,
                    weights=weights, margins=margins)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signtrans",
        description="Gloss-free sign language translation toolkit (CPU, desk scale)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-anchors", help="mine anchor words from a corpus")
    p.add_argument("--corpus", required=True, help="text (one sentence per line) or .tsv")
    p.add_argument("--pretagged", action="store_true", help="corpus is token<TAB>tag TSV")
    p.add_argument("--tagset", default="VN", choices=["V", "N", "VN", "VNA"])
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("--max-doc-fraction", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_prepare_anchors)

    p = sub.add_parser("train-bpe", help="train the subword tokenizer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab-size", type=int, default=4000)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train_bpe)

    p = sub.add_parser("gen-synthetic", help="write a synthetic concept-motion dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--concepts", type=int, default=8)
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--frames-per-concept", type=int, default=8)
    p.add_argument("--noise-scale", type=float, default=0.01)
    p.add_argument("--words-per-concept", type=int, default=1)
    p.add_argument("--pose-format", default="jsonl", choices=["jsonl", "pseq"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_gen_synthetic)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bpe", required=True)
    p.add_argument("--anchors")
    p.add_argument("--glove")
    p.add_argument("--out", required=True)
    p.add_argument("--resume-from")
    _add_config_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("translate", help="translate one pose clip")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--beam", type=int)
    p.add_argument("--max-len", type=int)
    p.set_defaults(handler=cmd_translate)

    p = sub.add_parser("evaluate", help="translate a manifest and score it")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--hypotheses", help="dump hypotheses TSV here")
    p.add_argument("--beam", type=int)
    p.add_argument("--max-len", type=int)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("sweep", help="grid runs over contrastive weight/margin")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bpe", required=True)
    p.add_argument("--anchors")
    p.add_argument("--glove")
    p.add_argument("--out", required=True)
    p.add_argument("--weights", help="comma-separated loss weights")
    p.add_argument("--margins", help="comma-separated margins")
    _add_config_flags(p)
    p.set_defaults(handler=cmd_sweep)

    return parser


def main(argv=None) -> int:
    _apply_thread_env()
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
