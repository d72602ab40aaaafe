"""Command-line surface: dataset synthesis, training, scoring, evaluation,
and template inspection.

Every command is a pure function of (inputs, config, seed): rerunning with
identical inputs reproduces outputs byte-for-byte, independent of the
worker count (``WARPCHECK_WORKERS``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from ._parallel import pmap
from .config import RunConfig, config_hash, load_run_config
from .datafiles import (ManifestEntry, atomic_write_bytes, atomic_write_text,
                        load_image, load_landmarks, read_manifest,
                        resolve_path, save_image_png, save_landmarks,
                        write_manifest)
from .errors import WarpcheckError
from .evaluation import ScoredFrame, evaluate, roc_points
from .geometry import TEMPLATE_POINTS
from .model import (load_checkpoint, predict_image, save_checkpoint, train)
from .rng import NS_SCORE, NS_SYNTH_ENTRY, derive_rng
from .synth import Label, SourceImage, make_negative
from . import _kernels

SKIP_TOLERANCE = 0.10


def _load_entry(base, entry):
    image = load_image(resolve_path(base, entry.image_path))
    landmarks = load_landmarks(resolve_path(base, entry.landmarks_path))
    if not landmarks.any_inside(image.shape[1], image.shape[0]):
        raise ValueError("no landmark lies inside the image")
    return image, landmarks


def _load_manifest_images(manifest_path, require_real=False):
    """Load all entries, collecting per-entry failures instead of dying."""
    entries = read_manifest(manifest_path)
    base = Path(manifest_path).parent
    loaded, skipped = [], []
    for i, entry in enumerate(entries):
        try:
            if require_real and entry.label == "fake":
                raise ValueError("fake-labeled entry not usable for training")
            image, landmarks = _load_entry(base, entry)
        except Exception as exc:
            skipped.append((i, entry.image_path, str(exc)))
            continue
        loaded.append((i, entry, image, landmarks))
    return entries, loaded, skipped


def _report_skips(skipped, total, out_dir=None):
    for i, path, reason in skipped:
        print(f"warpcheck: skipped entry {i} ({path}): {reason}",
              file=sys.stderr)
    if out_dir is not None and skipped:
        log = "\n".join(f"{i}\t{p}\t{r}" for i, p, r in skipped) + "\n"
        atomic_write_text(Path(out_dir) / "skipped.log", log)
    return total > 0 and len(skipped) / total > SKIP_TOLERANCE


def cmd_synth(args) -> int:
    cfg = load_run_config(args.config, seed_override=args.seed)
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "landmarks").mkdir(parents=True, exist_ok=True)
    entries, loaded, skipped = _load_manifest_images(args.manifest)
    n = len(loaded)
    if n == 0:
        print("warpcheck: no usable entries in manifest", file=sys.stderr)
        return 1

    perm = derive_rng(cfg.seed, NS_SYNTH_ENTRY).permutation(n)
    n_fake = int(round(n * cfg.eval.convert_ratio))
    fake_set = {int(i) for i in perm[:n_fake]}

    def process(k):
        _, entry, image, landmarks = loaded[k]
        is_fake = k in fake_set
        if is_fake:
            rng = derive_rng(cfg.seed, NS_SYNTH_ENTRY, k)
            image = make_negative(image, landmarks, cfg.synth, rng)
        label = "fake" if is_fake else "real"
        stem = f"{k:05d}_{label}"
        save_image_png(out / "images" / f"{stem}.png", image)
        save_landmarks(out / "landmarks" / f"{stem}.txt", landmarks)
        return ManifestEntry(
            image_path=f"images/{stem}.png",
            landmarks_path=f"landmarks/{stem}.txt",
            label=label, video_id=entry.video_id,
            frame_index=entry.frame_index)

    out_entries = pmap(process, range(n))

    write_manifest(out / "manifest.jsonl", out_entries)
    meta = {"seed": cfg.seed, "config_hash": config_hash(cfg),
            "n_input": len(entries), "n_written": n,
            "n_skipped": len(skipped)}
    atomic_write_text(out / "synth_meta.json",
                      json.dumps(meta, indent=2, sort_keys=True) + "\n")
    too_many = _report_skips(skipped, len(entries), out)
    if too_many:
        print(f"warpcheck: {len(skipped)}/{len(entries)} entries skipped "
              f"(> {SKIP_TOLERANCE:.0%})", file=sys.stderr)
        return 1
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, seed_override=args.seed)
    net = state = None
    if args.resume:
        net, state, header = load_checkpoint(args.resume)
        if header["seed"] != cfg.seed:
            print(f"warpcheck: resuming with checkpoint seed "
                  f"{header['seed']} (overrides configured seed)",
                  file=sys.stderr)
            cfg = load_run_config(args.config, seed_override=header["seed"])
    entries, loaded, skipped = _load_manifest_images(args.manifest,
                                                     require_real=True)
    if _report_skips(skipped, len(entries)):
        print("warpcheck: too many unusable manifest entries",
              file=sys.stderr)
        return 1
    positives = [SourceImage(image, landmarks, source_id=entry.image_path,
                             video_id=entry.video_id)
                 for _, entry, image, landmarks in loaded]
    log: list = []
    if cfg.train.max_epochs == 0 and cfg.train.hard_mine_epochs == 0:
        from .model import CompactCnn, SgdState
        net = net or CompactCnn(cfg.arch, seed=cfg.train.seed)
        state = state or SgdState.fresh(net)
    else:
        net, state, log = train(positives, cfg.train, cfg.synth,
                                arch=cfg.arch, net=net, state=state)
    save_checkpoint(args.out, net, state, seed=cfg.seed)
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log.csv")
    rows = ["step,lr,loss"] + [f"{r.step},{r.lr!r},{r.loss!r}" for r in log]
    atomic_write_text(log_path, "\n".join(rows) + "\n")
    print(f"warpcheck: trained {state.step} steps "
          f"({state.epoch} epochs + {state.hm_epoch} hard-mining epochs); "
          f"checkpoint -> {args.out}")
    return 0


def cmd_score(args) -> int:
    cfg = load_run_config(args.config, seed_override=args.seed) \
        if args.config else RunConfig(seed=args.seed or 0)
    net, _, _ = load_checkpoint(args.checkpoint)
    entries, loaded, skipped = _load_manifest_images(args.manifest)
    if _report_skips(skipped, len(entries)):
        print("warpcheck: too many unusable manifest entries",
              file=sys.stderr)
        return 1

    def score_one(item):
        idx, entry, image, landmarks = item
        rng = derive_rng(cfg.seed, NS_SCORE, idx)
        prob = predict_image(net, image, landmarks, rng,
                             n_crops=cfg.eval.n_crops)
        row = {"video_id": entry.video_id or Path(entry.image_path).stem,
               "frame_index": entry.frame_index
               if entry.frame_index is not None else idx,
               "score": prob}
        if entry.label is not None:
            row["label"] = entry.label
        return row

    rows = pmap(score_one, loaded)
    payload = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    atomic_write_bytes(Path(args.out), payload.encode())
    print(f"warpcheck: scored {len(rows)} frames -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    frames = []
    with open(args.scores, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if "label" not in row:
                print(f"warpcheck: {args.scores}:{ln}: missing label",
                      file=sys.stderr)
                return 1
            frames.append(ScoredFrame(
                video_id=str(row["video_id"]),
                frame_index=int(row.get("frame_index", ln)),
                score=float(row["score"]),
                label=Label.FAKE if row["label"] == "fake" else Label.REAL))
    report = evaluate(frames)
    out = Path(args.out)
    atomic_write_text(out, json.dumps(report.to_dict(), indent=2,
                                      sort_keys=True) + "\n")
    roc_path = Path(args.roc) if args.roc else out.with_suffix(".roc.csv")
    pts = roc_points([f.score for f in frames],
                     [int(f.label) for f in frames])
    atomic_write_text(roc_path, "fpr,tpr\n" + "".join(
        f"{fpr!r},{tpr!r}\n" for fpr, tpr in pts))

    def fmt(x):
        return "n/a" if x is None else f"{x:.4f}"

    print(f"frame AUC: {fmt(report.frame_auc)}   "
          f"video AUC: {fmt(report.video_auc)}")
    print(f"{'video':<16}{'frames':>8}{'score':>10}  label")
    for v in report.videos:
        print(f"{v.video_id:<16}{v.n_frames:>8}{v.aggregated_score:>10.4f}"
              f"  {v.label.name.lower()}")
    return 0


def cmd_inspect_template(args) -> int:
    lines = [f"{x!r} {y!r}" for x, y in TEMPLATE_POINTS]
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(Path(args.out), text)
        print(f"warpcheck: template -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="warpcheck",
        description="Synthesize face-warping artifacts, train a compact CNN "
                    "detector, and evaluate frame/video AUC.")
    ap.add_argument("--version", action="version",
                    version=f"warpcheck {__version__} "
                            f"({_kernels.backend_name()} kernels)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="materialize a real/fake dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the detector")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--log", default=None, help="training-curve CSV path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score frames with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="scored-frame JSONL path")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="frame/video AUC report from scores")
    p.add_argument("--scores", required=True, help="scored-frame JSONL")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--roc", default=None, help="ROC CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect-template",
                       help="print the canonical 68-point template")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_inspect_template)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WarpcheckError as exc:
        print(f"warpcheck: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"warpcheck: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
