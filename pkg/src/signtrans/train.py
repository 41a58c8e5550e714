"""Training loop with the joint objective, evaluation runs and sweeps.

Every run is deterministic given (seed, config, thread count): batch order,
dropout masks and triplet draws all come from streams derived from the seed
and the step counter, so resumed runs replay the same randomness.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from functools import reduce
from pathlib import Path

import numpy as np

from . import ndtensor as nd
from .anchors import AnchorVocab, load_pretrained_embeddings
from .bpe import BpeModel
from .ccm import anchor_query, collect_batch_anchors, combined_loss, sample_triplets, triplet_loss
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data import DataError, Manifest, load_dataset
from .metrics import EvalReport, evaluate_corpus
from .model import SignModel
from .optim import AdamW, TrainingError, clip_global_norm, lr_schedule
from .posenet import SkeletonSpec, default_skeleton


@dataclass
class TrainResult:
    out_dir: Path
    final_checkpoint: Path
    last_checkpoint: Path
    telemetry_path: Path
    steps: int
    epochs_run: int
    final_epoch_ce: float


def _resolve_skeleton(cfg: TrainConfig) -> SkeletonSpec:
    return SkeletonSpec.load(cfg.skeleton_path) if cfg.skeleton_path else default_skeleton()


def train(
    cfg: TrainConfig,
    manifest_path,
    out_dir,
    bpe_path,
    anchors_path=None,
    glove_path=None,
    resume_from=None,
) -> TrainResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(cfg.to_json(), encoding="utf-8")

    manifest = Manifest.load(manifest_path)
    dataset = load_dataset(manifest, cfg.frame_cap)
    if not dataset:
        raise DataError("manifest lists no samples")
    tokenizer = BpeModel.load(bpe_path)
    skeleton = _resolve_skeleton(cfg)
    skeleton_file = out_dir / "skeleton.json"
    skeleton.save(skeleton_file)

    ccm_active = bool(cfg.ccm and cfg.ccm_weight > 0)
    vocab = None
    anchor_init = None
    if ccm_active:
        if anchors_path is None:
            raise ValueError("contrastive training needs an anchor vocabulary (prepare-anchors)")
        vocab = AnchorVocab.from_tsv(anchors_path)
        if len(vocab) == 0:
            raise ValueError("anchor vocabulary is empty")
        anchor_init = load_pretrained_embeddings(
            glove_path, vocab, d_ca=cfg.d_ca, seed=cfg.seed
        ).matrix

    dtype = np.float32 if cfg.precision == "float32" else np.float64
    optimizer = AdamW(weight_decay=cfg.weight_decay)
    if resume_from:
        ck = load_checkpoint(resume_from)
        model = SignModel(cfg, tokenizer, skeleton, ck.load_params(dtype))
        opt_state = ck.load_optimizer(dtype)
        if opt_state:
            optimizer.load_state(*opt_state)
        start_epoch = ck.epochs_done
        step = ck.step
        telemetry_mode = "a"
    else:
        model = SignModel.initialize(cfg, tokenizer, skeleton, anchor_init)
        start_epoch = 0
        step = 0
        telemetry_mode = "w"

    texts = [text for _, text in dataset]
    targets = [model.target_ids(text) for text in texts]
    n = len(dataset)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch

    assets = {"bpe": Path(bpe_path), "skeleton": skeleton_file}
    if anchors_path:
        assets["anchors"] = Path(anchors_path)

    telemetry_path = out_dir / "telemetry.jsonl"
    last_dir = out_dir / "last"
    epochs_run = start_epoch
    epoch_ce = float("nan")

    def checkpoint(where, epochs_done):
        return save_checkpoint(
            where, model.params, cfg, step, epochs_done,
            optimizer_state=optimizer.state_arrays(), optimizer_t=optimizer.t, assets=assets,
        )

    with open(telemetry_path, telemetry_mode, encoding="utf-8") as telemetry:
        for epoch in range(start_epoch, cfg.epochs):
            order = np.random.default_rng([cfg.seed, 1, epoch]).permutation(n)
            epoch_ce_sum = 0.0
            epoch_tokens = 0
            for b0 in range(0, n, cfg.batch_size):
                step += 1
                batch = [int(i) for i in order[b0 : b0 + cfg.batch_size]]
                drop_rng = np.random.default_rng([cfg.seed, 2, step])
                trip_rng = np.random.default_rng([cfg.seed, 3, step])

                encoded = []
                weighted_ce = []
                tokens = 0
                for i in batch:
                    enc = model.encode_sample(
                        dataset[i][0], train=True, rng=drop_rng, update_backbone=cfg.e2e
                    )
                    ce, ntok = model.sample_ce(enc, targets[i], train=True, rng=drop_rng)
                    encoded.append(enc)
                    weighted_ce.append(nd.scale(ce, float(ntok)))
                    tokens += ntok
                l_ce = nd.scale(reduce(nd.add, weighted_ce), 1.0 / tokens)

                loss = l_ce
                l_itl_value = 0.0
                n_triplets = 0
                n_skipped = 0
                if ccm_active:
                    batch_anchors = collect_batch_anchors([texts[i] for i in batch], vocab)
                    triplets, skipped = sample_triplets(batch_anchors, trip_rng)
                    n_skipped = len(skipped)
                    if triplets:
                        h = anchor_query(model.params, batch_anchors, encoded, model.ccm_cfg)
                        l_itl = triplet_loss(
                            h, triplets, model.params, cfg.ccm_margin,
                            cfg.hinge_per_triplet, dtype=model.dtype,
                        )
                        loss = combined_loss(l_ce, l_itl, cfg.ccm_weight)
                        l_itl_value = l_itl.item()
                        n_triplets = len(triplets)

                if not math.isfinite(loss.item()):
                    raise TrainingError(
                        f"non-finite loss at step {step}; last good checkpoint: "
                        f"{last_dir if last_dir.exists() else 'none'}"
                    )
                nd.backward(loss)
                trainable = model.trainable_params(ccm_active=ccm_active)
                try:
                    grad_norm = clip_global_norm(trainable, cfg.grad_clip)
                    lr = lr_schedule(step, cfg.learning_rate, cfg.warmup_steps, total_steps)
                    model.params.update(optimizer.step(trainable, lr))
                except TrainingError as exc:
                    raise TrainingError(
                        f"{exc}; last good checkpoint: "
                        f"{last_dir if last_dir.exists() else 'none'}"
                    ) from exc

                telemetry.write(json.dumps({
                    "step": step,
                    "epoch": epoch,
                    "lr": lr,
                    "loss": loss.item(),
                    "l_ce": l_ce.item(),
                    "l_itl": l_itl_value,
                    "triplets": n_triplets,
                    "skipped_anchors": n_skipped,
                    "grad_norm": grad_norm,
                }, sort_keys=True) + "\n")

                epoch_ce_sum += l_ce.item() * tokens
                epoch_tokens += tokens

            telemetry.flush()
            checkpoint(last_dir, epoch + 1)
            epochs_run = epoch + 1
            epoch_ce = epoch_ce_sum / epoch_tokens
            if cfg.early_stop_ce is not None and epoch_ce < cfg.early_stop_ce:
                break

    final_dir = checkpoint(out_dir / "final", epochs_run)
    return TrainResult(
        out_dir=out_dir,
        final_checkpoint=final_dir,
        last_checkpoint=last_dir,
        telemetry_path=telemetry_path,
        steps=step,
        epochs_run=epochs_run,
        final_epoch_ce=epoch_ce,
    )


# ---------------------------------------------------------------------------
# inference-side entry points


def load_model(checkpoint_dir) -> SignModel:
    ck = load_checkpoint(checkpoint_dir)
    cfg = ck.config
    bpe_file = ck.asset("bpe")
    skeleton_file = ck.asset("skeleton")
    if bpe_file is None:
        raise ValueError("checkpoint carries no tokenizer asset")
    tokenizer = BpeModel.load(bpe_file)
    skeleton = SkeletonSpec.load(skeleton_file) if skeleton_file else default_skeleton()
    dtype = np.float32 if cfg.precision == "float32" else np.float64
    return SignModel(cfg, tokenizer, skeleton, ck.load_params(dtype))


def evaluate(
    checkpoint_dir,
    manifest_path,
    report_path=None,
    hypotheses_path=None,
    beam_size=None,
    max_len=None,
) -> EvalReport:
    """Translate every manifest sample and score against its reference."""
    model = load_model(checkpoint_dir)
    manifest = Manifest.load(manifest_path)
    dataset = load_dataset(manifest, model.cfg.frame_cap)
    if not dataset:
        raise DataError("manifest lists no samples")
    hypotheses = [model.translate(pose, beam_size, max_len) for pose, _ in dataset]
    references = [text for _, text in dataset]
    report = evaluate_corpus(hypotheses, references)
    if hypotheses_path:
        lines = [f"{e.sample_id}\t{h}" for e, h in zip(manifest.samples, hypotheses)]
        Path(hypotheses_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if report_path:
        Path(report_path).write_text(report.to_json(), encoding="utf-8")
    return report


def ccm_probe(model: SignModel, dataset, vocab: AnchorVocab, batch_size: int, seed: int) -> dict:
    """Measure anchor/query similarities and the triplet loss on a dataset.

    Runs the training-side query path without dropout or gradients; used to
    check that positives sit closer to their anchors than negatives.
    """
    texts = [text for _, text in dataset]
    pos_sims: list[float] = []
    neg_sims: list[float] = []
    batch_losses: list[float] = []
    with nd.no_grad():
        for b, b0 in enumerate(range(0, len(dataset), batch_size)):
            batch = list(range(b0, min(b0 + batch_size, len(dataset))))
            rng = np.random.default_rng([seed, 5, b])
            batch_anchors = collect_batch_anchors([texts[i] for i in batch], vocab)
            triplets, _ = sample_triplets(batch_anchors, rng)
            if not triplets:
                continue
            encoded = [
                model.encode_sample(dataset[i][0], train=False, update_backbone=False)
                for i in batch
            ]
            h = anchor_query(model.params, batch_anchors, encoded, model.ccm_cfg)
            table = model.params["ccm.table"]
            for m, pos, neg in triplets:
                anchor = nd.take(table, [h.anchor_ids[m]], axis=0).reshape((table.shape[1],))
                pos_sims.append(nd.cosine_similarity(h.vector(m, pos), anchor).item())
                neg_sims.append(nd.cosine_similarity(h.vector(m, neg), anchor).item())
            batch_losses.append(
                triplet_loss(h, triplets, model.params, model.ccm_cfg.margin,
                             model.ccm_cfg.hinge_per_triplet, dtype=model.dtype).item()
            )
    return {
        "mean_pos_sim": float(np.mean(pos_sims)) if pos_sims else float("nan"),
        "mean_neg_sim": float(np.mean(neg_sims)) if neg_sims else float("nan"),
        "l_itl": float(np.mean(batch_losses)) if batch_losses else float("nan"),
        "triplets": len(pos_sims),
    }


def sweep(
    cfg: TrainConfig,
    manifest_path,
    out_dir,
    bpe_path,
    anchors_path=None,
    glove_path=None,
    weights=None,
    margins=None,
) -> dict:
    """Grid runs over the contrastive weight and/or margin.

    Divergent runs are recorded as collapsed rather than aborting the sweep.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = []
    for w in weights or []:
        grid.append(("weight", w, dataclasses.replace(cfg, ccm_weight=w, ccm=w > 0 and cfg.ccm)))
    for m in margins or []:
        grid.append(("margin", m, dataclasses.replace(cfg, ccm_margin=m)))
    if not grid:
        raise ValueError("sweep needs at least one weight or margin value")

    summary = {}
    for kind, value, run_cfg in grid:
        run_dir = out_dir / f"{kind}-{value:g}"
        entry = {"kind": kind, "value": value, "out_dir": str(run_dir)}
        try:
            result = train(run_cfg, manifest_path, run_dir, bpe_path, anchors_path, glove_path)
            lines = result.telemetry_path.read_text(encoding="utf-8").strip().splitlines()
            last = json.loads(lines[-1]) if lines else {}
            entry.update({
                "collapsed": False,
                "steps": result.steps,
                "final_epoch_ce": result.final_epoch_ce,
                "last_step": last,
            })
        except TrainingError as exc:
            entry.update({"collapsed": True, "error": str(exc)})
        summary[f"{kind}-{value:g}"] = entry
    (out_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2), "utf-8")
    return summary
