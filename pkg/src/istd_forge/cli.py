"""Command-line front end: ``istd-forge <command> ...``.

Every command writes a ``manifest.json`` into its output directory. The
manifest is written last and carries ``"status": "complete"`` only when every
input was processed; per-file failures are logged, listed, and turn the exit
code to 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, kernels
from .brd import background_crops, detect_background, upsample_background
from .config import ConfigError, PipelineConfig, apply_overrides
from .degrade import build_benchmark
from .harvest import PredictionPair, TargetPatch, extract_targets, scores
from .imagecore import default_jobs, list_images, load_image, load_mask, make_rng, save_image, save_mask, split_rng
from .metrics import evaluate
from .noiselab import harvest_noise, load_library, mix, save_library
from .regen import regenerate_composites
from .wavelet import wmf

log = logging.getLogger("istd_forge")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class CommandError(RuntimeError):
    pass


# --- helpers ---------------------------------------------------------------


def _images_or_fail(directory) -> list[Path]:
    paths = list_images(directory)
    if not paths:
        raise CommandError(f"no PNG/PGM images in {directory}")
    return paths


def _by_stem(directory) -> dict[str, Path]:
    return {p.stem: p for p in list_images(directory)}


def _map(fn, items, jobs):
    """Ordered map that captures per-item exceptions as results."""

    def safe(item):
        try:
            return fn(item), None
        except Exception as exc:  # noqa: BLE001 - reported per file
            return None, exc

    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(safe, items))
    return [safe(item) for item in items]


def _collect(items, results, label=lambda p: str(p)):
    records, failures = [], []
    for item, (rec, exc) in zip(items, results):
        if exc is not None:
            log.error("%s: %s", label(item), exc)
            failures.append({"input": label(item), "error": str(exc)})
        elif rec is not None:
            records.append(rec)
    return records, failures


def _write_manifest(out_dir: Path, command: str, cfg: PipelineConfig, records, failures=(), extra=None) -> int:
    doc = {
        "command": command,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "records": list(records),
        "failures": list(failures),
    }
    if extra:
        doc.update(extra)
    doc["status"] = "complete" if not failures else "incomplete"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if failures:
        log.warning("%d of %d inputs failed", len(failures), len(failures) + len(records))
        return EXIT_PARTIAL
    return EXIT_OK


def _rel(path: Path, root: Path) -> str:
    return path.relative_to(root).as_posix()


# --- commands ----------------------------------------------------------------


def cmd_wmf(in_dir, out_dir, cfg: PipelineConfig, jobs: int = 1) -> int:
    paths = _images_or_fail(in_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(path):
        img = load_image(path)
        out = out_dir / f"{path.stem}.png"
        filtered = wmf(img, cfg.wmf)
        save_image(filtered, out)
        return {"id": path.stem, "output": _rel(out, out_dir), "var_in": float(img.var()), "var_out": float(filtered.var())}

    records, failures = _collect(paths, _map(work, paths, jobs))
    return _write_manifest(out_dir, "wmf", cfg, records, failures)


def cmd_brd(in_dir, out_dir, cfg: PipelineConfig, jobs: int = 1) -> int:
    paths = _images_or_fail(in_dir)
    out_dir = Path(out_dir)
    for sub in ("crops", "heatmaps") + (("backgrounds",) if cfg.upsample_backgrounds else ()):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    rngs = split_rng(make_rng(cfg.seed), len(paths))

    def work(item):
        path, rng = item
        img = load_image(path)
        height, width = img.shape
        crop, rect, pmap = detect_background(img, cfg.brd, cfg.wmf, cfg.grid, rng=rng)
        crop_path = out_dir / "crops" / f"{path.stem}.png"
        save_image(crop, crop_path)
        heat_path = out_dir / "heatmaps" / f"{path.stem}.png"
        save_image(pmap.heatmap(), heat_path)
        rec = {
            "id": path.stem,
            "origin": rect.to_dict(),
            "block": list(pmap.argmin()),
            "scores": pmap.scores.round(12).tolist(),
            "crop": _rel(crop_path, out_dir),
            "heatmap": _rel(heat_path, out_dir),
        }
        if cfg.upsample_backgrounds:
            bg_path = out_dir / "backgrounds" / f"{path.stem}.png"
            save_image(upsample_background(crop, width, height), bg_path)
            rec["background"] = _rel(bg_path, out_dir)
        if cfg.brd.mode == "threshold":
            extra = []
            for k, (c, r) in enumerate(background_crops(img, cfg.brd, cfg.wmf, cfg.grid)):
                p = out_dir / "crops" / f"{path.stem}_{k:02d}.png"
                save_image(c, p)
                extra.append({"origin": r.to_dict(), "crop": _rel(p, out_dir)})
            rec["threshold_crops"] = extra
        return rec

    items = list(zip(paths, rngs))
    records, failures = _collect(items, _map(work, items, jobs), label=lambda it: str(it[0]))
    return _write_manifest(out_dir, "brd", cfg, records, failures)


def cmd_harvest(pred_dir, truth_dir, img_dir, out_dir, cfg: PipelineConfig, jobs: int = 1) -> int:
    truths = _by_stem(truth_dir)
    preds = _by_stem(pred_dir)
    imgs = _by_stem(img_dir)
    if not truths:
        raise CommandError(f"no masks in {truth_dir}")
    stems = sorted(s for s in truths if s in preds and s in imgs)
    unmatched = sorted(set(truths) ^ set(preds) | (set(truths) ^ set(imgs)))
    for s in unmatched:
        log.warning("no complete pred/truth/image triple for %r; skipped", s)
    if not stems:
        raise CommandError("no matching pred/truth/image triples")
    out_dir = Path(out_dir)
    (out_dir / "patches").mkdir(parents=True, exist_ok=True)

    def work(stem):
        pair = PredictionPair(load_mask(preds[stem]), load_mask(truths[stem]), load_image(imgs[stem]), id=stem)
        pa, iou = scores(pair)
        selected = pa < cfg.dis.tau_p and iou < cfg.dis.tau_i
        rec = {"id": stem, "pixacc": pa, "iou": iou, "selected": selected, "patches": []}
        if selected:
            for k, patch in enumerate(extract_targets(pair, cfg.dis)):
                ip = out_dir / "patches" / f"{stem}_{k:03d}.png"
                mp = out_dir / "patches" / f"{stem}_{k:03d}_mask.png"
                save_image(patch.pixels, ip)
                save_mask(patch.mask, mp)
                rec["patches"].append({"image": _rel(ip, out_dir), "mask": _rel(mp, out_dir), "origin": patch.origin.to_dict()})
        return rec

    records, failures = _collect(stems, _map(work, stems, jobs))
    n_patches = sum(len(r["patches"]) for r in records)
    return _write_manifest(out_dir, "harvest", cfg, records, failures, {"unmatched": unmatched, "patch_count": n_patches})


def _load_targets(targets_dir) -> list[TargetPatch]:
    targets_dir = Path(targets_dir)
    manifest = targets_dir / "manifest.json"
    pairs = []
    if manifest.is_file():
        doc = json.loads(manifest.read_text())
        for rec in doc.get("records", []):
            for p in rec.get("patches", []):
                pairs.append((targets_dir / p["image"], targets_dir / p["mask"]))
    else:
        for mp in sorted(targets_dir.glob("*_mask.png")):
            pairs.append((mp.with_name(mp.name[: -len("_mask.png")] + ".png"), mp))
    if not pairs:
        raise CommandError(f"no target patches found in {targets_dir}")
    return [TargetPatch(load_image(ip), load_mask(mp), source_id=ip.stem) for ip, mp in pairs]


def cmd_regen(targets_dir, backgrounds_dir, out_dir, cfg: PipelineConfig, jobs: int = 1) -> int:
    targets = _load_targets(targets_dir)
    bg_paths = _images_or_fail(backgrounds_dir)
    backgrounds = [load_image(p) for p in bg_paths]
    out_dir = Path(out_dir)
    for sub in ("images", "masks"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    composites = regenerate_composites(targets, backgrounds, cfg.regen, cfg.ssim, make_rng(cfg.seed), jobs=jobs)
    records = []
    for comp in composites:
        m = comp.match
        tid, bid = targets[m.target_index].source_id, bg_paths[m.background_index].stem
        name = f"{bid}__{tid}.png"
        save_image(comp.image, out_dir / "images" / name)
        save_mask(comp.mask, out_dir / "masks" / name)
        records.append({
            "target": tid, "background": bid, "pos": m.pos.to_dict(), "score": m.score,
            "residual": comp.residual, "iterations": comp.iterations,
            "image": f"images/{name}", "mask": f"masks/{name}",
        })
    usage = {t.source_id: t.usage_count for t in targets}
    return _write_manifest(out_dir, "regen", cfg, records, (), {"usage": usage})


def cmd_noise_build(in_dir, out_dir, cfg: PipelineConfig, jobs: int = 1) -> int:
    paths = _images_or_fail(in_dir)
    out_dir = Path(out_dir)
    lib = harvest_noise([load_image(p) for p in paths], cfg.noise_region, ids=[p.stem for p in paths])
    save_library(lib, out_dir)
    records = [{"file": f"patch_{k:04d}.png", **r.to_dict()} for k, r in enumerate(lib.records)]
    skipped = sorted(set(p.stem for p in paths) - set(lib.sources))
    return _write_manifest(out_dir, "noise build", cfg, records, (), {"k": lib.k, "no_qualifying_window": skipped})


def cmd_noise_mix(src_dir, library_dir, out_dir, cfg: PipelineConfig, jobs: int = 1) -> int:
    paths = _images_or_fail(src_dir)
    lib = load_library(library_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = make_rng(cfg.seed)
    records = []
    for path in paths:
        mixed, index, lam = mix(load_image(path), lib, cfg.mix, rng)
        save_image(mixed, out_dir / f"{path.stem}.png")
        records.append({"id": path.stem, "patch": index, "patch_source": lib.records[index].source, "lambda": lam, "output": f"{path.stem}.png"})
    return _write_manifest(out_dir, "noise mix", cfg, records)


def cmd_degrade(images_dir, masks_dir, out_dir, cfg: PipelineConfig, jobs: int = 1) -> int:
    paths = _images_or_fail(images_dir)
    masks = _by_stem(masks_dir)
    missing = [p.stem for p in paths if p.stem not in masks]
    if missing:
        raise CommandError(f"images without masks: {missing}")
    items = [(load_image(p), load_mask(masks[p.stem]), p.stem) for p in paths]
    spec = cfg.degrade
    manifest = build_benchmark(items, spec, make_rng(cfg.seed))
    out_dir = Path(out_dir)
    for split in ("train", "test"):
        for sub in ("images", "masks"):
            (out_dir / split / sub).mkdir(parents=True, exist_ok=True)
    for rec in manifest.records:
        img, mask = manifest.samples[rec["id"]]
        rec["image"] = f"{rec['split']}/images/{rec['id']}.png"
        rec["mask"] = f"{rec['split']}/masks/{rec['id']}.png"
        save_image(img, out_dir / rec["image"])
        save_mask(mask, out_dir / rec["mask"])
    (out_dir / "benchmark.json").write_text(manifest.to_json())
    counts = {s: len(manifest.split(s)) for s in ("train", "test")}
    return _write_manifest(out_dir, "degrade", cfg, manifest.records, (), {"counts": counts})


def cmd_eval(pred_dir, truth_dir, cfg: PipelineConfig, out=None) -> int:
    preds = _by_stem(pred_dir)
    truths = _by_stem(truth_dir)
    stems = sorted(set(preds) & set(truths))
    unmatched = sorted(set(preds) ^ set(truths))
    for s in unmatched:
        log.warning("unpaired mask %r excluded", s)
    if not stems:
        raise CommandError("no prediction/truth pairs to evaluate")
    pairs = [(load_mask(preds[s]), load_mask(truths[s])) for s in stems]
    report = evaluate(pairs, cfg.detection, ids=stems)
    print(report.to_table())
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        doc = json.loads(report.to_json())
        doc["excluded"] = unmatched
        out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config field")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument("--jobs", type=int, default=None, help="worker threads (default: $ISTD_FORGE_JOBS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="istd-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wmf", parents=[common], help="wavelet multi-frequency filtering")
    p.add_argument("in_dir")
    p.add_argument("out_dir")

    p = sub.add_parser("brd", parents=[common], help="background region detection")
    p.add_argument("in_dir")
    p.add_argument("out_dir")

    p = sub.add_parser("harvest", parents=[common], help="hard-target selection and patch extraction")
    p.add_argument("pred_dir")
    p.add_argument("truth_dir")
    p.add_argument("img_dir")
    p.add_argument("out_dir")

    p = sub.add_parser("regen", parents=[common], help="SSIM matching and Poisson re-generation")
    p.add_argument("targets_dir")
    p.add_argument("backgrounds_dir")
    p.add_argument("out_dir")

    p = sub.add_parser("noise", help="noise library tools")
    nsub = p.add_subparsers(dest="noise_command", required=True)
    q = nsub.add_parser("build", parents=[common], help="harvest a noise library")
    q.add_argument("in_dir")
    q.add_argument("out_dir")
    q = nsub.add_parser("mix", parents=[common], help="mix library noise into images")
    q.add_argument("src_dir")
    q.add_argument("library_dir")
    q.add_argument("out_dir")

    p = sub.add_parser("degrade", parents=[common], help="build a degradation benchmark")
    p.add_argument("images_dir")
    p.add_argument("masks_dir")
    p.add_argument("out_dir")

    p = sub.add_parser("eval", parents=[common], help="evaluate predicted masks")
    p.add_argument("pred_dir")
    p.add_argument("truth_dir")
    p.add_argument("--out", help="write the JSON report here")
    return parser


def load_config(args) -> PipelineConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    data = apply_overrides(data, args.set)
    if args.seed is not None:
        data["seed"] = args.seed
    return PipelineConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    jobs = args.jobs if args.jobs is not None else default_jobs()
    try:
        cfg = load_config(args)
        if args.command == "wmf":
            return cmd_wmf(args.in_dir, args.out_dir, cfg, jobs)
        if args.command == "brd":
            return cmd_brd(args.in_dir, args.out_dir, cfg, jobs)
        if args.command == "harvest":
            return cmd_harvest(args.pred_dir, args.truth_dir, args.img_dir, args.out_dir, cfg, jobs)
        if args.command == "regen":
            return cmd_regen(args.targets_dir, args.backgrounds_dir, args.out_dir, cfg, jobs)
        if args.command == "noise":
            if args.noise_command == "build":
                return cmd_noise_build(args.in_dir, args.out_dir, cfg, jobs)
            return cmd_noise_mix(args.src_dir, args.library_dir, args.out_dir, cfg, jobs)
        if args.command == "degrade":
            return cmd_degrade(args.images_dir, args.masks_dir, args.out_dir, cfg, jobs)
        if args.command == "eval":
            return cmd_eval(args.pred_dir, args.truth_dir, cfg, args.out)
    except (ConfigError, CommandError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
