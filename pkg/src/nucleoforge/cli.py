"""Command-line pipeline.

Subcommands cover the whole flow: generate synthetic datasets, migrate
nuclei and derive contact masks, emit structural labels, tile patches,
visualize masked noising, train the toy denoiser, run masked reverse
sampling, and score predictions against references.

Batch commands fan out over a thread pool, but every per-image random
stream is seeded with (seed, image_index), all files are keyed by input
name, and collection happens in manifest order — so outputs are
byte-identical regardless of worker count. NUCLEOFORGE_THREADS caps the
pool. Exit codes: 0 success, 1 some items failed, 2 bad configuration.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields

import numpy as np

from . import io as nio
from . import metrics as nmetrics
from .config import PipelineConfig
from .denoiser import OracleDenoiser, TinyConvDenoiser, train_tiny_denoiser
from .diffusion import inpaint_sample, linear_schedule, masked_q_sample, q_sample
from .internuclear import GROWTH_BACKEND, internuclear_mask
from .labelmap import (InstanceLabelMap, compute_structural_label,
                       extract_instances, extract_patches)
from .migration import (apply_migration, plan_migration, resolve_ref_area,
                        sample_migration_params)
from .synth import synth_one

log = logging.getLogger("nucleoforge.cli")


def resolve_workers(requested):
    """Requested worker count, capped by NUCLEOFORGE_THREADS if set."""
    workers = max(1, int(requested))
    cap = os.environ.get("NUCLEOFORGE_THREADS")
    if cap is not None and cap != "":
        try:
            cap_n = int(cap)
        except ValueError:
            raise ValueError("NUCLEOFORGE_THREADS must be an integer, got %r"
                             % cap)
        workers = min(workers, max(1, cap_n))
    return workers


def run_batch(items, fn, workers):
    """fn(index, item) across a pool; ordered results, failures counted.

    Results come back in submission order; a failed item yields None in
    its slot and an error log naming it.
    """
    results = [None] * len(items)
    failures = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, i, item) for i, item in enumerate(items)]
        for i, fut in enumerate(futures):
            try:
                results[i] = fut.result()
            except Exception as exc:
                failures += 1
                log.error("item %d failed: %s", i, exc)
    return results, failures


def _stem(entry):
    name = entry.get("image") or entry["instance_map"]
    stem = os.path.splitext(os.path.basename(name))[0]
    if stem.endswith("_inst"):
        stem = stem[:-5]
    return stem


def _require_manifest(cfg):
    if not cfg.manifest:
        raise ValueError("--manifest is required for this command")
    return nio.read_manifest(cfg.manifest)


def _gray_unit(img):
    """uint8 RGB image -> single-channel float tensor in [-1, 1]."""
    return nio.image_to_unit(img).mean(axis=0, keepdims=True)


def _center_crop_box(shape, size):
    h, w = shape
    s = min(size, h, w)
    r0 = (h - s) // 2
    c0 = (w - s) // 2
    return r0, c0, s


def cmd_synth(cfg, args):
    os.makedirs(cfg.out_dir, exist_ok=True)
    shape = (args.height, args.width)

    def one(i, _):
        return synth_one(cfg.out_dir, i, shape, args.classes, args.density,
                         cfg.seed)

    entries, failures = run_batch(list(range(args.n_images)), one,
                                  resolve_workers(cfg.workers))
    ok_entries = [e for e in entries if e is not None]
    manifest = os.path.join(cfg.out_dir, "manifest.json")
    nio.write_manifest(manifest, ok_entries)
    log.info("wrote %d images to %s", len(ok_entries), manifest)
    print(manifest)
    return 1 if failures else 0


def cmd_augment(cfg, args):
    entries = _require_manifest(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    def one(i, entry):
        label = nio.load_entry_label(cfg.manifest, entry)
        rng = np.random.default_rng([cfg.seed, i])
        delta_x, direction = sample_migration_params(
            rng, (cfg.delta_x_min, cfg.delta_x_max))
        nuclei = extract_instances(label)
        ref = resolve_ref_area(cfg.ref_area, nuclei)
        plan = plan_migration(nuclei, delta_x, direction, ref)
        migrated = apply_migration(label, plan)
        imask = internuclear_mask(migrated, cfg.halo_iters, cfg.max_iters)
        struct = compute_structural_label(migrated)
        stem = _stem(entry)
        nio.save_instance_png(os.path.join(cfg.out_dir, stem + "_aug_inst.png"),
                              migrated.instance_ids)
        nio.save_class_png(os.path.join(cfg.out_dir, stem + "_aug_class.png"),
                           migrated.class_ids)
        nio.save_mask_png(os.path.join(cfg.out_dir, stem + "_aug_mask.png"),
                          imask.mask)
        nio.save_float_npy(os.path.join(cfg.out_dir, stem + "_aug_hdist.npy"),
                           struct.hdist)
        nio.save_float_npy(os.path.join(cfg.out_dir, stem + "_aug_vdist.npy"),
                           struct.vdist)
        out_entry = {"image": None,
                     "instance_map": stem + "_aug_inst.png",
                     "class_map": stem + "_aug_class.png"}
        prov = {"index": i,
                "source_image": entry.get("image"),
                "source_instance_map": entry["instance_map"],
                "seed": [cfg.seed, i],
                "delta_x": delta_x,
                "direction": list(plan.direction),
                "ref_area": ref,
                "offsets": {str(e.nucleus_id): list(e.offset)
                            for e in plan.per_nucleus}}
        return out_entry, prov

    results, failures = run_batch(entries, one, resolve_workers(cfg.workers))
    ok = [r for r in results if r is not None]
    nio.write_manifest(os.path.join(cfg.out_dir, "manifest.json"),
                       [e for e, _ in ok])
    with open(os.path.join(cfg.out_dir, "provenance.json"), "w") as fh:
        json.dump([p for _, p in ok], fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("augmented %d/%d images into %s", len(ok), len(entries),
             cfg.out_dir)
    return 1 if failures else 0


def cmd_mask(cfg, args):
    entries = _require_manifest(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    def one(i, entry):
        label = nio.load_entry_label(cfg.manifest, entry)
        imask = internuclear_mask(label, cfg.halo_iters, cfg.max_iters)
        path = os.path.join(cfg.out_dir, _stem(entry) + "_mask.png")
        nio.save_mask_png(path, imask.mask)
        return path

    _, failures = run_batch(entries, one, resolve_workers(cfg.workers))
    return 1 if failures else 0


def cmd_structmap(cfg, args):
    entries = _require_manifest(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    def one(i, entry):
        label = nio.load_entry_label(cfg.manifest, entry)
        struct = compute_structural_label(label)
        stem = _stem(entry)
        nio.save_class_png(os.path.join(cfg.out_dir, stem + "_sem.png"),
                           struct.sem)
        nio.save_float_npy(os.path.join(cfg.out_dir, stem + "_hdist.npy"),
                           struct.hdist)
        nio.save_float_npy(os.path.join(cfg.out_dir, stem + "_vdist.npy"),
                           struct.vdist)
        return stem

    _, failures = run_batch(entries, one, resolve_workers(cfg.workers))
    return 1 if failures else 0


def cmd_patches(cfg, args):
    entries = _require_manifest(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    size, stride = cfg.patch_size, cfg.patch_stride

    def one(i, entry):
        label = nio.load_entry_label(cfg.manifest, entry)
        img = nio.load_entry_image(cfg.manifest, entry)
        stem = _stem(entry)
        label_patches = extract_patches(label, size, stride)
        img_patches = (extract_patches(img, size, stride)
                       if img is not None else [None] * len(label_patches))
        records = []
        for lp, ip in zip(label_patches, img_patches):
            r, c = lp.origin
            tag = "%s_p%04d_%04d" % (stem, r, c)
            nio.save_instance_png(os.path.join(cfg.out_dir, tag + "_inst.png"),
                                  lp.payload.instance_ids)
            nio.save_class_png(os.path.join(cfg.out_dir, tag + "_class.png"),
                               lp.payload.class_ids)
            rec = {"image": None, "instance_map": tag + "_inst.png",
                   "class_map": tag + "_class.png", "origin": [r, c],
                   "source": entry["instance_map"]}
            if ip is not None:
                nio.save_rgb_png(os.path.join(cfg.out_dir, tag + ".png"),
                                 ip.payload)
                rec["image"] = tag + ".png"
            records.append(rec)
        return records

    results, failures = run_batch(entries, one, resolve_workers(cfg.workers))
    flat = [rec for recs in results if recs for rec in recs]
    with open(os.path.join(cfg.out_dir, "patches.json"), "w") as fh:
        json.dump(flat, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("wrote %d patches", len(flat))
    print(len(flat))
    return 1 if failures else 0


def cmd_noise_demo(cfg, args):
    entries = _require_manifest(cfg)
    if not 0 <= args.index < len(entries):
        raise ValueError("--index %d out of range (manifest has %d entries)"
                         % (args.index, len(entries)))
    os.makedirs(cfg.out_dir, exist_ok=True)
    sched = linear_schedule(cfg.schedule_t, cfg.beta_1, cfg.beta_t)
    steps = [int(s) for s in args.t_steps.split(",") if s.strip()]
    for t in steps:
        if not 1 <= t <= sched.T:
            raise ValueError("demo step %d outside schedule 1..%d"
                             % (t, sched.T))
    entry = entries[args.index]
    img = nio.load_entry_image(cfg.manifest, entry)
    if img is None:
        log.error("entry %d has no image to corrupt", args.index)
        return 1
    label = nio.load_entry_label(cfg.manifest, entry)
    imask = internuclear_mask(label, cfg.halo_iters, cfg.max_iters)
    x0 = nio.image_to_unit(img)
    rng = np.random.default_rng([cfg.seed, args.index])
    eps = rng.standard_normal(x0.shape)
    stem = _stem(entry)
    nio.save_mask_png(os.path.join(cfg.out_dir, stem + "_mask.png"),
                      imask.mask)
    for t in steps:
        full = q_sample(x0, t, eps, sched)
        masked = masked_q_sample(x0, imask, t, eps, sched)
        nio.save_rgb_png(os.path.join(cfg.out_dir, "%s_full_t%03d.png"
                                      % (stem, t)), nio.unit_to_image(full))
        nio.save_rgb_png(os.path.join(cfg.out_dir, "%s_masked_t%03d.png"
                                      % (stem, t)), nio.unit_to_image(masked))
    log.info("noise demo for %s at steps %s", stem, steps)
    return 0


def _toy_dataset(cfg, entries, crop):
    dataset = []
    for entry in entries:
        img = nio.load_entry_image(cfg.manifest, entry)
        if img is None:
            raise ValueError("train-toy needs images; entry %r has none"
                             % entry["instance_map"])
        label = nio.load_entry_label(cfg.manifest, entry)
        r0, c0, s = _center_crop_box(label.shape, crop)
        sub = InstanceLabelMap(
            label.instance_ids[r0:r0 + s, c0:c0 + s].copy(),
            label.class_ids[r0:r0 + s, c0:c0 + s].copy())
        x0 = _gray_unit(img)[:, r0:r0 + s, c0:c0 + s]
        struct = compute_structural_label(sub)
        imask = internuclear_mask(sub, cfg.halo_iters, cfg.max_iters)
        dataset.append((x0, struct, imask.mask))
    return dataset


def cmd_train_toy(cfg, args):
    entries = _require_manifest(cfg)[:args.limit]
    os.makedirs(cfg.out_dir, exist_ok=True)
    sched = linear_schedule(cfg.schedule_t, cfg.beta_1, cfg.beta_t)
    dataset = _toy_dataset(cfg, entries, args.crop)
    model = train_tiny_denoiser(dataset, sched, iterations=args.iterations,
                                learning_rate=args.learning_rate,
                                rng_seed=cfg.seed, hidden=args.hidden)
    prefix = os.path.join(cfg.out_dir, "denoiser")
    model.save(prefix)
    nio.save_float_npy(os.path.join(cfg.out_dir, "losses.npy"),
                       model.training_losses)
    losses = model.training_losses
    decile = max(1, len(losses) // 10)
    log.info("trained on %d crops for %d iterations", len(dataset),
             args.iterations)
    print("first-decile %.6f final-decile %.6f"
          % (losses[:decile].mean(), losses[-decile:].mean()))
    return 0


def cmd_sample(cfg, args):
    entries = _require_manifest(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    sched = linear_schedule(cfg.schedule_t, cfg.beta_1, cfg.beta_t)
    model = None
    if not args.oracle:
        if not args.model:
            raise ValueError("--model PREFIX (or --oracle) is required")
        model = TinyConvDenoiser.load(args.model)

    def one(i, entry):
        img = nio.load_entry_image(cfg.manifest, entry)
        if img is None:
            raise ValueError("entry %r has no image" % entry["instance_map"])
        label = nio.load_entry_label(cfg.manifest, entry)
        if model is not None and model.img_channels == 1:
            x0 = _gray_unit(img)
        else:
            x0 = nio.image_to_unit(img)
        struct = compute_structural_label(label)
        imask = internuclear_mask(label, cfg.halo_iters, cfg.max_iters)
        den = OracleDenoiser(x0, sched) if args.oracle else model
        out = inpaint_sample(den, x0, struct, imask.mask, sched,
                             rng_seed=[cfg.seed, i],
                             deterministic=cfg.deterministic_sampling,
                             invert_repaint=cfg.invert_repaint_mask)
        stem = _stem(entry)
        rgb = out if out.shape[0] == 3 else np.repeat(out, 3, axis=0)
        nio.save_rgb_png(os.path.join(cfg.out_dir, stem + "_sampled.png"),
                         nio.unit_to_image(rgb))
        nio.save_float_npy(os.path.join(cfg.out_dir, stem + "_sampled.npy"),
                           out)
        return stem

    _, failures = run_batch(entries, one, resolve_workers(cfg.workers))
    return 1 if failures else 0


def cmd_eval(cfg, args):
    gt_entries = nio.read_manifest(args.gt_manifest)
    pred_entries = nio.read_manifest(args.pred_manifest)
    if len(gt_entries) != len(pred_entries):
        raise ValueError("manifest length mismatch: %d reference vs %d "
                         "predicted" % (len(gt_entries), len(pred_entries)))

    def one(i, pair):
        gt_entry, pred_entry = pair
        gt = nio.load_entry_label(args.gt_manifest, gt_entry)
        pred = nio.load_entry_label(args.pred_manifest, pred_entry)
        stats = nmetrics.image_stats(gt, pred)
        dq, sq, pq = nmetrics.panoptic_quality(gt, pred)
        mc = nmetrics.multiclass_scores(gt, pred)
        cf = nmetrics.classification_f1(gt, pred)
        record = {"index": i,
                  "image": gt_entry.get("image"),
                  "bAJI": nmetrics.aji(gt, pred),
                  "bDQ": dq, "bSQ": sq, "bPQ": pq,
                  "mAJI": mc["mAJI"], "mPQ": mc["mPQ"], "mF1": cf["mF1"]}
        return stats, record

    results, failures = run_batch(list(zip(gt_entries, pred_entries)), one,
                                  resolve_workers(cfg.workers))
    per_image = []
    stats_list = []
    for i, res in enumerate(results):
        if res is None:
            per_image.append({"index": i, "error": "failed"})
        else:
            stats_list.append(res[0])
            per_image.append(res[1])
    pooled = nmetrics.aggregate_instancewise(stats_list)
    report = {"per_image": per_image, "pooled": pooled}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 1 if failures else 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="JSON",
                        help="config file; any flag below overrides its key")
    common.add_argument("--seed", type=int)
    common.add_argument("--delta-x-min", type=float)
    common.add_argument("--delta-x-max", type=float)
    common.add_argument("--ref-area",
                        help="reference-area policy: '1', 'mean', or a number")
    common.add_argument("--halo-iters", type=int)
    common.add_argument("--max-iters", type=int)
    common.add_argument("--patch-size", type=int)
    common.add_argument("--patch-stride", type=int)
    common.add_argument("--schedule-t", type=int)
    common.add_argument("--beta-1", type=float)
    common.add_argument("--beta-t", type=float)
    common.add_argument("--invert-repaint-mask", action="store_const",
                        const=True, default=None)
    common.add_argument("--deterministic-sampling", action="store_const",
                        const=True, default=None)
    common.add_argument("--workers", type=int)
    common.add_argument("--out-dir")
    common.add_argument("--manifest")
    common.add_argument("--print-config", action="store_true",
                        help="dump the effective merged config and exit")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="nucleoforge",
        description="label-space augmentation pipeline for nuclear "
                    "segmentation datasets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic dataset")
    p.add_argument("--n-images", type=int, default=4)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--density", type=float, default=1.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", parents=[common],
                       help="migrate nuclei and emit masks + provenance")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("mask", parents=[common],
                       help="internuclear masks only")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("structmap", parents=[common],
                       help="semantic + centroid-offset conditioning maps")
    p.set_defaults(func=cmd_structmap)

    p = sub.add_parser("patches", parents=[common],
                       help="sliding-window tiling of a dataset")
    p.set_defaults(func=cmd_patches)

    p = sub.add_parser("noise-demo", parents=[common],
                       help="masked forward-noising image grids")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--t-steps", default="1,13,25,37,50")
    p.set_defaults(func=cmd_noise_demo)

    p = sub.add_parser("train-toy", parents=[common],
                       help="train the small conv noise predictor")
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--crop", type=int, default=32)
    p.add_argument("--limit", type=int, default=16)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("sample", parents=[common],
                       help="masked reverse-diffusion sampling")
    p.add_argument("--model", help="prefix of a saved denoiser (.npy/.json)")
    p.add_argument("--oracle", action="store_true",
                   help="use the closed-form oracle denoiser")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", parents=[common],
                       help="score predictions against references")
    p.add_argument("--gt-manifest", required=True)
    p.add_argument("--pred-manifest", required=True)
    p.add_argument("--out", help="write the JSON report here "
                                 "(default: stdout)")
    p.set_defaults(func=cmd_eval)
    return parser


def merged_config(args):
    if args.config:
        cfg = PipelineConfig.from_json_file(args.config)
    else:
        cfg = PipelineConfig()
    overrides = {}
    for f in fields(PipelineConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    return cfg.replace(**overrides)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    log.debug("growth kernel backend: %s", GROWTH_BACKEND)
    try:
        cfg = merged_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        log.error("bad configuration: %s", exc)
        return 2
    if args.print_config:
        sys.stdout.write(cfg.to_json())
        return 0
    try:
        return args.func(cfg, args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        log.error("bad configuration: %s", exc)
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
