"""Command-line front door.

Workflow order mirrors the pipeline: generate -> train net1 -> train net2 ->
extract / evaluate / demo-noise. Every command echoes its fully-resolved
effective config to stdout so a run is reproducible from its log alone.

Exit codes: 0 success, 1 I/O failure, 2 precondition failure, 3 bad config.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import config as gconfig
from . import edges as gedges
from . import image as gimg
from . import pipeline as gpipe
from . import synth
from .nn import Network, load_weights, net1_spec, net2_spec, predict, save_weights, train

EXIT_OK = 0
EXIT_IO = 1
EXIT_PRECONDITION = 2
EXIT_CONFIG = 3


class PreconditionError(RuntimeError):
    pass


def _workers(args):
    if getattr(args, "workers", None):
        return args.workers
    env = os.environ.get("GRAINFORGE_WORKERS")
    return int(env) if env else 1


def _resolve_config(args, overrides=None):
    doc = gconfig.load_config_file(args.config) if getattr(args, "config", None) else None
    eff = gconfig.effective_config(args.profile, doc, overrides)
    run = gconfig.build_run_config(eff)
    print(json.dumps({"effective_config": eff}, indent=2, sort_keys=True))
    return run, eff


def _cli_overrides(args):
    over = {}
    if getattr(args, "n", None) is not None:
        over.setdefault("dataset", {})["n"] = args.n
    if getattr(args, "seed", None) is not None:
        over.setdefault("seeds", {})["master"] = args.seed
    if getattr(args, "tol", None) is not None:
        over.setdefault("pipeline", {})["tol"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        over.setdefault("pipeline", {}).setdefault("criterion", {})["max_iterations"] = args.max_iter
    return over


def _load_net(path, spec):
    if not path:
        raise PreconditionError(f"{spec.name} weights are required for this command")
    if not os.path.exists(path):
        raise PreconditionError(f"{spec.name} weights not found: {path}")
    net = Network(spec)
    net.set_state(load_weights(path, spec))
    return net


def _load_split(manifest_path, split=None):
    manifest = synth.load_manifest(manifest_path)
    pairs = synth.manifest_paths(manifest, manifest_path, split)
    if not pairs:
        raise PreconditionError(f"manifest has no images in split {split!r}")
    inputs = np.stack([gimg.load_image(p) for p, _ in pairs])
    targets = np.stack([gimg.load_image(p) for _, p in pairs])
    return manifest, pairs, inputs, targets


def cmd_generate(args):
    run, _ = _resolve_config(args, _cli_overrides(args))
    path = synth.build_dataset(
        run.dataset, run.master_seed, args.out, workers=_workers(args), export_labels=args.export_labels
    )
    print(f"manifest: {path}")
    return EXIT_OK


def _fused_stack(inputs, edge_cfg, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            maps = list(pool.map(_fuse_one, [(img, edge_cfg) for img in inputs], chunksize=4))
    else:
        maps = [_fuse_one((img, edge_cfg)) for img in inputs]
    return np.stack(maps)


def _fuse_one(job):
    img, edge_cfg = job
    return gedges.fuse(img, edge_cfg).transpose(2, 0, 1)  # (3, H, W) uint8


def cmd_train(args):
    run, _ = _resolve_config(args, _cli_overrides(args))
    manifest, _, inputs, targets = _load_split(args.manifest)
    splits = [e["split"] for e in manifest["images"]]
    idx_train = [i for i, s in enumerate(splits) if s == "train"]
    idx_val = [i for i, s in enumerate(splits) if s == "val"]
    if not idx_train or not idx_val:
        raise PreconditionError("manifest needs non-empty train and val splits")

    if args.net == "net1":
        spec, cfg = net1_spec(), run.train_net1
        x = _fused_stack(inputs, run.edges, _workers(args))
    else:
        spec, cfg = net2_spec(), run.train_net2
        net1 = _load_net(args.net1_weights, net1_spec())
        # two-phase protocol: materialize Net1 guesses for the whole dataset
        fused = _fused_stack(inputs, run.edges, _workers(args))
        x = predict(net1, fused, batch_size=cfg.batch_size)[:, None]
    y = targets[:, None]

    def log(epoch, train_loss, val_loss, lr):
        print(f"epoch {epoch:3d}  lr {lr:.6g}  train {train_loss:.6f}  val {val_loss:.6f}")

    state, history = train(
        spec, x[idx_train], y[idx_train], x[idx_val], y[idx_val], cfg, log=log
    )
    os.makedirs(args.out, exist_ok=True)
    weights_path = os.path.join(args.out, f"{args.net}.gfw")
    save_weights(weights_path, spec, state)
    with open(os.path.join(args.out, f"{args.net}_history.json"), "w") as fh:
        json.dump(asdict(history), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"best validation loss: {history.best_val_loss:.6f} (epoch {history.best_epoch})")
    print(f"weights: {weights_path}")
    return EXIT_OK


def _extract_one(job):
    img, net1, net2, edge_cfg, crit, record = job
    return gpipe.extract(img, net1, net2, edge_cfg, crit, record_intermediates=record)


def cmd_extract(args):
    run, _ = _resolve_config(args, _cli_overrides(args))
    net1 = _load_net(args.net1_weights, net1_spec())
    net2 = _load_net(args.net2_weights, net2_spec())
    images = [gimg.load_image(p, allow_color=True) for p in args.image]
    jobs = [(img, net1, net2, run.edges, run.criterion, args.save_iters) for img in images]
    if _workers(args) > 1:
        with ProcessPoolExecutor(max_workers=_workers(args)) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(j) for j in jobs]
    for path, result in zip(args.image, results):
        stem = os.path.splitext(os.path.basename(path))[0]
        out_dir = os.path.join(args.out, stem)
        gpipe.save_result(result, out_dir, run.criterion, save_iterations=args.save_iters)
        print(
            f"{path}: iterations={result.iterations} converged={result.converged} -> {out_dir}"
        )
    return EXIT_OK


def cmd_evaluate(args):
    run, _ = _resolve_config(args, _cli_overrides(args))
    net1 = _load_net(args.net1_weights, net1_spec())
    net2 = _load_net(args.net2_weights, net2_spec())
    _, pairs, inputs, targets = _load_split(args.manifest, args.split)
    jobs = [(img, net1, net2, run.edges, run.criterion, False) for img in inputs]
    if _workers(args) > 1:
        with ProcessPoolExecutor(max_workers=_workers(args)) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(j) for j in jobs]
    rows = []
    for (input_path, _), result, truth in zip(pairs, results, targets):
        rep = gpipe.accuracy(result.final, truth, run.tol)
        guess_rep = gpipe.accuracy(result.guess, truth, run.tol)
        row = {
            "input": os.path.basename(input_path),
            "accuracy": rep.accuracy_percent,
            "guess_accuracy": guess_rep.accuracy_percent,
            "false_positives": rep.false_positives,
            "iterations": result.iterations,
            "converged": result.converged,
            "tol": run.tol,
        }
        rows.append(row)
        print(json.dumps(row, sort_keys=True))
    acc = np.array([r["accuracy"] for r in rows])
    guess_acc = np.array([r["guess_accuracy"] for r in rows])
    summary = {
        "split": args.split,
        "n_images": len(rows),
        "tol": run.tol,
        "mean_accuracy": float(acc.mean()),
        "min_accuracy": float(acc.min()),
        "max_accuracy": float(acc.max()),
        "mean_guess_accuracy": float(guess_acc.mean()),
    }
    print(json.dumps({"summary": summary}, indent=2, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "evaluation.json"), "w") as fh:
            json.dump({"summary": summary, "images": rows}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_edges(args):
    run, _ = _resolve_config(args)
    img = gimg.load_image(args.image, allow_color=True)
    fused = gedges.fuse(img, run.edges)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    gimg.save_rgb(fused, args.out)
    print(f"edges: {args.out}")
    return EXIT_OK


def cmd_demo_noise(args):
    run, _ = _resolve_config(args, _cli_overrides(args))
    net2 = _load_net(args.net2_weights, net2_spec())
    result = gpipe.generate_from_noise(
        net2,
        run.criterion,
        args.seed if args.seed is not None else run.master_seed,
        args.width,
        args.height,
        record_intermediates=args.save_iters,
    )
    gpipe.save_result(result, args.out, run.criterion, save_iterations=args.save_iters)
    print(f"iterations={result.iterations} converged={result.converged} -> {args.out}")
    return EXIT_OK


def cmd_overlay(args):
    img = gimg.load_image(args.image, allow_color=True)
    mask = gimg.load_image(args.mask)
    color = tuple(int(c) for c in args.color.split(","))
    if len(color) != 3 or any(not (0 <= c <= 255) for c in color):
        raise gconfig.ConfigError("--color must be r,g,b with components in 0..255")
    out = gpipe.overlay(img, mask, color)
    gimg.save_rgb(out, args.out)
    print(f"overlay: {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="grainforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON run config overlaying the profile")
            p.add_argument("--profile", choices=gconfig.PROFILES, default="desk")
        p.add_argument("--workers", type=int, help="parallel workers (env GRAINFORGE_WORKERS)")

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, help="number of image pairs")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--export-labels", action="store_true", help="also write 16-bit label PGMs")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train net1 or net2 on a generated dataset")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--net", choices=("net1", "net2"), required=True)
    p.add_argument("--net1-weights", help="required when training net2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="run the full pipeline on images")
    common(p)
    p.add_argument("--image", action="append", required=True, help="repeatable input image path")
    p.add_argument("--net1-weights", required=True)
    p.add_argument("--net2-weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--save-iters", action="store_true")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="aggregate accuracy over a manifest split")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--net1-weights", required=True)
    p.add_argument("--net2-weights", required=True)
    p.add_argument("--tol", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("edges", help="write the fused three-detector edge map")
    common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_edges)

    p = sub.add_parser("demo-noise", help="run the refiner from pure noise")
    common(p)
    p.add_argument("--net2-weights", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--save-iters", action="store_true")
    p.set_defaults(func=cmd_demo_noise)

    p = sub.add_parser("overlay", help="paint a mask over a grayscale image")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--color", default="255,0,0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlay)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except gconfig.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (FileNotFoundError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
