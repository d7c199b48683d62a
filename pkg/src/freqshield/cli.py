"""``freqshield`` command line.

Every command prints exactly one JSON document on stdout (``--pretty``
switches to an indented, human-oriented rendering) and writes a run-metadata
JSON holding the resolved arguments, seed and library versions. Feeding that
file back through ``freqshield replay META.json`` reruns the command.

Exit codes: 0 ok, 2 bad arguments or inputs, 3 I/O, 4 capacity,
5 gradient-check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CapacityError, FormatError, FreqShieldError, ImageIOError
from .prng import parse_seed

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_CAPACITY, EXIT_CHECK = 0, 2, 3, 4, 5
SEED_ENV = "FREQSHIELD_SEED"
RUN_CONFIG_KEYS = ("embed", "recipe", "model", "train")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ARGS):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------------ helpers

def _path(args, p) -> Path | None:
    if p is None:
        return None
    p = Path(p)
    return p if p.is_absolute() else Path(args.workdir) / p


def _seed(args, default: int = 0) -> int:
    if getattr(args, "seed", None) is not None:
        return parse_seed(args.seed)
    env = os.environ.get(SEED_ENV)
    return parse_seed(env) if env else default


def load_run_config(path) -> dict:
    """Read a RunConfig JSON; only the sections embed/recipe/model/train are allowed."""
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ImageIOError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}")
    if not isinstance(obj, dict):
        raise CliError(f"{path}: config must be a JSON object")
    unknown = set(obj) - set(RUN_CONFIG_KEYS)
    if unknown:
        raise CliError(f"{path}: unknown config sections {sorted(unknown)}")
    return obj


def _section(args, name: str) -> dict:
    if not getattr(args, "config", None):
        return {}
    return dict(load_run_config(_path(args, args.config)).get(name, {}))


def _emit(args, doc: dict) -> None:
    if args.pretty:
        for k, v in doc.items():
            print(f"{k:>20s}: {json.dumps(v) if isinstance(v, (dict, list)) else v}")
    else:
        print(json.dumps(doc, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _write_meta(args, seed, result: dict, argv: list[str]) -> None:
    meta = {
        "command": args.command,
        "argv": argv,
        "args": {k: v for k, v in vars(args).items() if k not in ("func",)},
        "seed": seed,
        "result": result,
        "versions": {"freqshield": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    if args.config:
        meta["config"] = load_run_config(_path(args, args.config))
    path = _path(args, args.meta) if args.meta else Path(args.workdir) / f"freqshield_{args.command}_run.json"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(meta, indent=1, sort_keys=True, default=_json_default) + "\n")
    except OSError as exc:
        raise ImageIOError(f"cannot write run metadata {path}: {exc}") from exc


def _parse_counts(text: str) -> dict[str, int]:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise CliError(f"bad count {part!r}; expected algo=N")
        k, v = part.split("=", 1)
        out[k.strip().lower()] = int(v)
    return out


# ------------------------------------------------------------------ commands

def cmd_embed(args) -> dict:
    from .image_core import load_png, save_png
    from .prng import DetRng
    from .residual import absolute_residual, psnr, sparsity_stats
    from .watermark import EmbedConfig, Payload32, embed

    fields = _section(args, "embed")
    overrides = {"algo": args.algo, "alpha": args.alpha, "d": args.d, "pairs_per_bit": args.pairs}
    fields.update({k: v for k, v in overrides.items() if v is not None})
    fields["seed"] = _seed(args, fields.get("seed", 0))
    if "algo" not in fields:
        raise CliError("--algo is required (or set embed.algo in --config)")
    cfg = EmbedConfig.from_dict(fields)
    payload = Payload32.from_bitstring(args.payload) if args.payload else Payload32.random(DetRng(cfg.seed))
    carrier = load_png(_path(args, args.input))
    marked = embed(cfg, carrier, payload)
    out = _path(args, args.out)
    save_png(marked, out)
    stats = sparsity_stats(absolute_residual(marked, carrier))
    return {"out": str(out), "config": cfg.to_dict(), "payload": payload.to_bitstring(),
            "psnr": psnr(marked, carrier), "density": stats.density, "l0": stats.l0,
            "max_amp": stats.max_amp}


def cmd_decode(args) -> dict:
    from .image_core import load_png
    from .watermark import EmbedConfig, Payload32, correlate_dct, decode_lsb, decode_patchwork, patchwork_statistic

    fields = _section(args, "embed")
    fields.update({k: v for k, v in {"algo": args.algo, "pairs_per_bit": args.pairs}.items() if v is not None})
    fields["seed"] = _seed(args, fields.get("seed", 0))
    cfg = EmbedConfig.from_dict(fields)
    img = load_png(_path(args, args.input))
    doc = {"algo": cfg.algo}
    if cfg.algo == "lsb":
        bits = decode_lsb(img)
    elif cfg.algo == "patchwork":
        stat = patchwork_statistic(img, cfg)
        bits = decode_patchwork(img, cfg)
        doc["statistic"] = [round(float(s), 6) for s in stat]
    elif cfg.algo == "dct":
        corr = correlate_dct(img, cfg)
        bits = Payload32(tuple(int(c > 0) for c in corr))
        doc["correlation"] = [round(float(c), 6) for c in corr]
    else:
        raise CliError("decode supports lsb, patchwork and dct")
    doc["payload"] = bits.to_bitstring()
    return doc


def cmd_residual(args) -> dict:
    from .image_core import load_png
    from .residual import absolute_residual, binarize_extremum, save_heatmap_pgm, sparsity_stats

    a, b = load_png(_path(args, args.a)), load_png(_path(args, args.b))
    res = absolute_residual(a, b)
    stats = sparsity_stats(res)
    prefix = str(_path(args, args.out_prefix))
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    save_heatmap_pgm(res, prefix + "_residual.pgm")
    save_heatmap_pgm(binarize_extremum(res) * 255, prefix + "_binary.pgm")
    doc = stats.to_dict()
    try:
        Path(prefix + "_sparsity.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise ImageIOError(f"cannot write {prefix}_sparsity.json: {exc}") from exc
    return doc


def cmd_gen(args) -> dict:
    from .harness import GenerationRecipe, generate_dataset

    fields = _section(args, "recipe")
    if args.counts:
        fields["counts"] = _parse_counts(args.counts)
    if args.size is not None:
        fields["size"] = args.size
    if args.families:
        fields["families"] = [f.strip() for f in args.families.split(",") if f.strip()]
    if args.carrier_dir:
        fields["carrier_dir"] = str(_path(args, args.carrier_dir))
    if args.embed_json:
        fields["embed"] = json.loads(args.embed_json)
    fields["seed"] = _seed(args, fields.get("seed", 0))
    if "counts" not in fields:
        raise CliError("--counts is required (or set recipe.counts in --config)")
    recipe = GenerationRecipe.from_dict(fields)
    out = _path(args, args.out)
    manifest = generate_dataset(recipe, out)
    return {"manifest": str(out / "manifest.json"), "records": len(manifest),
            "positives": len(manifest.positives()), "negatives": len(manifest.negatives()),
            "recipe": recipe.to_dict()}


def cmd_split(args) -> dict:
    from .harness import DatasetManifest, ablate_algorithms, check_plan, make_loao_split, make_random_split
    from .harness import subsample_fraction

    manifest = DatasetManifest.load(_path(args, args.manifest))
    seed = _seed(args)
    full = manifest
    if args.remove:
        manifest = ablate_algorithms(manifest, [a for a in args.remove.split(",") if a])
    if args.hold_out:
        plan = make_loao_split(full if args.remove else manifest, args.hold_out, seed=seed)
        if args.remove:
            keep = {r.id for r in manifest.records}
            plan.train_ids = [i for i in plan.train_ids if i in keep]
    else:
        plan = make_random_split(manifest, args.test_fraction, seed=seed)
    if args.fraction is not None:
        plan = subsample_fraction(plan, args.fraction, seed=seed, manifest=full)
    out = _path(args, args.out)
    plan.save(out)
    return {"split": str(out), "held_out": plan.held_out, "n_train": len(plan.train_ids),
            "n_test": len(plan.test_ids), "violations": check_plan(plan, full)}


def cmd_train(args) -> dict:
    from .fsnet import FsnetConfig
    from .harness import DatasetManifest, SplitPlan, TrainConfig, run_training

    manifest = DatasetManifest.load(_path(args, args.manifest))
    plan = SplitPlan.load(_path(args, args.split))
    model_fields = _section(args, "model")
    if args.input_size is not None:
        model_fields["input_size"] = args.input_size
    seed = _seed(args, 0)
    model_fields.setdefault("seed", seed)
    model_cfg = FsnetConfig.from_dict(model_fields)
    train_fields = _section(args, "train")
    overrides = {"epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr,
                 "weight_decay": args.weight_decay, "mask_lr_scale": args.mask_lr_scale}
    train_fields.update({k: v for k, v in overrides.items() if v is not None})
    train_fields["seed"] = seed
    train_cfg = TrainConfig.from_dict(train_fields)
    out = _path(args, args.out)
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    res = run_training(plan, manifest, model_cfg, train_cfg, out, log=log)
    return {"model": str(out / "model.fsn"), "loss_csv": str(out / "loss.csv"),
            "steps": len(res.losses), "epoch_mean_loss": res.epoch_means,
            "model_config": model_cfg.to_dict(), "train_config": train_cfg.to_dict()}


def cmd_eval(args) -> dict:
    from .fsnet import FsnetModel
    from .harness import DatasetManifest, SplitPlan, evaluate

    manifest = DatasetManifest.load(_path(args, args.manifest))
    model = FsnetModel.load(_path(args, args.model))
    if args.split:
        ids = SplitPlan.load(_path(args, args.split)).test_ids
    else:
        ids = [r.id for r in manifest.records]
    report, _ = evaluate(model, manifest, ids, _path(args, args.out))
    return report.to_dict()


def cmd_inspect(args) -> dict:
    from .fsnet import FsnetModel
    from .harness import DatasetManifest, ImageCache, SplitPlan, export_attention_profile, export_gate_heatmap

    model = FsnetModel.load(_path(args, args.model))
    prefix = _path(args, args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    gate = export_gate_heatmap(model, str(prefix) + "_gate")
    doc = {"gate": gate.to_dict(), "gate_pgm": str(prefix) + "_gate.pgm", "gate_csv": str(prefix) + "_gate.csv"}
    if args.manifest:
        manifest = DatasetManifest.load(_path(args, args.manifest))
        pool = SplitPlan.load(_path(args, args.split)).test_ids if args.split else [r.id for r in manifest.records]
        pos = [i for i in pool if manifest[i].label == 1][: args.n]
        neg = [i for i in pool if manifest[i].label == 0][: args.n]
        ids = pos + neg
        x, y = ImageCache(manifest, model.cfg.input_size).batch(ids)
        prof = export_attention_profile(model, x, y, str(prefix) + "_attention.csv", ids)
        peak = prof.peak()
        doc["attention_csv"] = str(prefix) + "_attention.csv"
        doc["mean_peak_vtotal"] = {
            "watermarked": float(peak[y == 1].mean()) if len(pos) else None,
            "clean": float(peak[y == 0].mean()) if len(neg) else None,
        }
    return doc


def cmd_gradcheck(args) -> dict:
    from .gradcheck import run_suite

    names = [n for n in args.only.split(",") if n] if args.only else None
    results = run_suite(names)
    if names and len(results) != len(names):
        raise CliError(f"unknown gradcheck case in {names}")
    failed = [r.name for r in results if not r.passed]
    doc = {"passed": not failed, "failed": failed, "cases": [r.to_dict() for r in results]}
    if failed:
        doc["_exit"] = EXIT_CHECK
    return doc


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workdir", default=".", help="base directory for relative paths")
    common.add_argument("--config", help="RunConfig JSON (sections: embed, recipe, model, train)")
    common.add_argument("--meta", help="run-metadata output path (default: <workdir>/freqshield_<cmd>_run.json)")
    common.add_argument("--pretty", action="store_true", help="human-readable output instead of JSON")
    common.add_argument("--seed", help=f"global seed (falls back to ${SEED_ENV}, then 0)")

    p = argparse.ArgumentParser(prog="freqshield", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"freqshield {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("embed", parents=[common], help="watermark a PNG")
    s.add_argument("--algo", choices=("lsb", "patchwork", "dct", "dwt"))
    s.add_argument("--payload", help="32-character bit string (default: random from the seed)")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--alpha", type=float)
    s.add_argument("--d", type=int)
    s.add_argument("--pairs", type=int, help="Patchwork pairs per bit")
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("decode", parents=[common], help="recover a payload (lsb, patchwork, dct)")
    s.add_argument("--algo", choices=("lsb", "patchwork", "dct"), required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--pairs", type=int)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("residual", parents=[common], help="residual map and sparsity of two PNGs")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_residual)

    s = sub.add_parser("gen", parents=[common], help="generate a dataset")
    s.add_argument("--counts", help="e.g. dct=400,dwt=400")
    s.add_argument("--size", type=int)
    s.add_argument("--families", help="comma list of carrier families")
    s.add_argument("--carrier-dir", help="directory of PNG carriers")
    s.add_argument("--embed-json", help='per-algorithm overrides, e.g. \'{"patchwork": {"pairs_per_bit": 6}}\'')
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("split", parents=[common], help="make a train/test split")
    s.add_argument("--manifest", required=True)
    s.add_argument("--hold-out", help="algorithm tag for leave-one-algorithm-out")
    s.add_argument("--test-fraction", type=float, default=0.2, help="random split share when no --hold-out")
    s.add_argument("--fraction", type=float, help="keep this stratified share of the training list")
    s.add_argument("--remove", help="comma list of algorithms to drop from training")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", parents=[common], help="train FSNet on a split")
    s.add_argument("--manifest", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--weight-decay", type=float)
    s.add_argument("--mask-lr-scale", type=float)
    s.add_argument("--input-size", type=int)
    s.add_argument("--verbose", action="store_true", help="per-epoch loss on stderr")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="score a checkpoint")
    s.add_argument("--manifest", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--split", help="score its test list (default: every record)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("inspect", parents=[common], help="gate heatmap and attention profile")
    s.add_argument("--model", required=True)
    s.add_argument("--out-prefix", required=True)
    s.add_argument("--manifest")
    s.add_argument("--split")
    s.add_argument("--n", type=int, default=100, help="images per class for the attention profile")
    s.set_defaults(func=cmd_inspect)

    s = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient suite")
    s.add_argument("--only", help="comma list of case names")
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("replay", help="rerun a command from its run-metadata JSON")
    s.add_argument("meta_file")
    return p


def _replay_argv(path: str) -> list[str]:
    try:
        meta = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    argv = meta.get("argv")
    if not isinstance(argv, list) or not argv or argv[0] == "replay":
        raise CliError(f"{path} holds no replayable command")
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "replay":
            argv = _replay_argv(args.meta_file)
            args = parser.parse_args(argv)
        seed = _seed(args)
        doc = args.func(args)
        code = doc.pop("_exit", EXIT_OK)
        _write_meta(args, seed, doc, argv)
        _emit(args, doc)
        return code
    except SystemExit as exc:  # argparse
        return int(exc.code) if isinstance(exc.code, int) else EXIT_ARGS
    except CliError as exc:
        return _fail(str(exc), exc.code)
    except CapacityError as exc:
        return _fail(str(exc), EXIT_CAPACITY)
    except (ImageIOError, FormatError) as exc:
        return _fail(str(exc), EXIT_IO)
    except (FreqShieldError, ValueError, KeyError) as exc:
        return _fail(str(exc), EXIT_ARGS)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)


def _fail(message: str, code: int) -> int:
    print(json.dumps({"error": message, "exit_code": code}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
