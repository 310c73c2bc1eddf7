"""``voxgrad`` command line: gen-data, train, attribute, prune, eval, report.

Exit codes: 0 success, 2 bad arguments or configuration, 3 unreadable or
malformed input, 4 numeric failure. Machine-readable outputs are JSON
files that embed the fully resolved run configuration; diagnostics go to
stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from voxgrad import __version__
from voxgrad.attribution import METHODS, IGConfig, attribute
from voxgrad.autodiff import FormatError, OptimConfig, load_tensor
from voxgrad.geometry import (
    CLASSES,
    OffParseError,
    Structure,
    load_dataset,
    load_off,
    normalize_unit_cube,
    sample_surface,
    structure_labels,
    synth_dataset,
    voxelize_mesh,
    write_dataset,
    write_ply_heatmap,
    write_voxel_heatmap,
)
from voxgrad.models import (
    NumericalError,
    build_model,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)
from voxgrad.pruning import (
    PruneConfig,
    apply_mask,
    evaluate_masked,
    export_filter_visualization,
    finetune,
    prune_report,
    prune_train_loop,
)

log = logging.getLogger("voxgrad")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4
LABEL_NAMES = {int(s): s.name.lower() for s in Structure if s != Structure.EMPTY}


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


DEFAULTS = {
    "gen-data": dict(out=None, classes=",".join(CLASSES), per_class=200, test_per_class=50,
                     resolution=32, points=1024, seed=0),
    "train": dict(manifest=None, model="voxnet", epochs=3, lr=0.01, momentum=0.9,
                  weight_decay=0.0, batch_size=16, seed=0, out=None),
    "attribute": dict(checkpoint=None, manifest=None, input=None, split="test", sample=None,
                      only_class=None, limit=None, method="intgrad", target="predicted",
                      steps=50, baseline=None, baseline_file=None, reduce="norm", seed=0,
                      out=None),
    "prune": dict(checkpoint=None, manifest=None, c_lo=0.25, c_hi=0.75, iterations=0,
                  interval=1, finetune_epochs=1, lr=0.01, momentum=0.9, batch_size=16,
                  seed=0, out=None),
    "eval": dict(checkpoint=None, manifest=None, split="test", out=None),
    "report": dict(run_dir=None, out=None),
}


# ---------------------------------------------------------------- helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("-inf" if x < 0 else ("inf" if x > 0 else "nan"))
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_jsonable(obj), indent=1, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _out_dir(cfg) -> Path:
    if not cfg.get("out"):
        raise ConfigError("--out is required")
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _load_manifest(path, split=None):
    try:
        return load_dataset(path, split=split)
    except FileNotFoundError:
        raise InputError(f"manifest not found: {path}") from None
    except (json.JSONDecodeError, KeyError, ValueError, OSError) as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from None


def _load_checkpoint(path):
    try:
        return load_checkpoint(path)
    except FileNotFoundError:
        raise InputError(f"checkpoint not found: {path}") from None
    except (FormatError, OSError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot read checkpoint {path}: {exc}") from None


def _check_classes(model, dataset):
    if model.num_classes != dataset.num_classes:
        raise ConfigError(f"checkpoint has {model.num_classes} classes, manifest has {dataset.num_classes}")


def _optim(cfg) -> OptimConfig:
    try:
        return OptimConfig(float(cfg["lr"]), float(cfg["momentum"]), float(cfg.get("weight_decay", 0.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _threads() -> int:
    raw = os.environ.get("VOXGRAD_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"VOXGRAD_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


# ---------------------------------------------------------------- commands


def cmd_gen_data(cfg) -> int:
    out = _out_dir(cfg)
    classes = [c.strip() for c in str(cfg["classes"]).split(",") if c.strip()]
    try:
        splits = [synth_dataset(classes, int(cfg["per_class"]), int(cfg["resolution"]), int(cfg["seed"]),
                                split="train", n_points=int(cfg["points"]))]
        if int(cfg["test_per_class"]) > 0:
            splits.append(synth_dataset(classes, int(cfg["test_per_class"]), int(cfg["resolution"]),
                                        int(cfg["seed"]), split="test", n_points=int(cfg["points"])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        write_dataset(splits, out, extra={"run_config": cfg})
    except OSError as exc:
        raise ConfigError(f"cannot write dataset to {out}: {exc}") from None
    log.info("wrote %d samples to %s", sum(len(s) for s in splits), out / "manifest.json")
    return EXIT_OK


def cmd_train(cfg) -> int:
    _require(cfg, "manifest")
    out = _out_dir(cfg)
    ds = _load_manifest(cfg["manifest"], "train")
    if len(ds) == 0:
        raise InputError(f"{cfg['manifest']}: no training samples")
    params = ds.params
    extra = {}
    if cfg["model"] == "voxnet":
        extra["resolution"] = int(params.get("resolution", 32))
    elif cfg["model"] == "pointnet":
        extra["num_points"] = int(params.get("n_points", 1024))
    try:
        model = build_model(cfg["model"], ds.num_classes, int(cfg["seed"]), **extra)
        if int(cfg["epochs"]) < 0:
            raise ValueError("epochs must be >= 0")
        ckpt = train(model, ds, int(cfg["epochs"]), _optim(cfg), int(cfg["seed"]), int(cfg["batch_size"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ckpt.metadata["run_config"] = cfg
    save_checkpoint(ckpt, out / "checkpoint.vgc")
    doc = {"kind": "train", "run_config": cfg, "model": model.config_dict(), **ckpt.metadata}
    test = _load_manifest(cfg["manifest"], "test")
    if len(test):
        doc["test_accuracy"] = evaluate(model, test).accuracy
    write_json(out / "train.json", doc)
    log.info("final loss %.6f", ckpt.metadata["final_loss"])
    return EXIT_OK


def _structure_stats(labels: np.ndarray, scores: np.ndarray) -> dict:
    stats = {}
    for k, name in LABEL_NAMES.items():
        sel = labels == k
        stats[name] = {"count": int(sel.sum()), "sum": float(scores[sel].sum())}
    return stats


def _point_structure(points: np.ndarray, structure: np.ndarray) -> np.ndarray:
    """Structure label of the voxel containing each point (0 outside the shell)."""
    R = structure.shape[0]
    idx = np.clip(np.floor(np.clip(points, 0.0, 1.0) * R).astype(np.int64), 0, R - 1)
    return structure[idx[:, 0], idx[:, 1], idx[:, 2]]


def _attribution_jobs(cfg, model):
    """(id, class_name, label, model input, structure grid, geometry) per sample."""
    if cfg.get("input"):
        try:
            mesh = normalize_unit_cube(load_off(cfg["input"]))
        except FileNotFoundError:
            raise InputError(f"input mesh not found: {cfg['input']}") from None
        except OffParseError as exc:
            raise InputError(f"{cfg['input']}: {exc}") from None
        R = model.config.resolution if model.input_kind == "voxel" else 32
        grid = voxelize_mesh(mesh, R)
        if model.input_kind == "voxel":
            x = grid.occupancy
        else:
            x = sample_surface(mesh, model.config.num_points, seed=int(cfg["seed"])).points
        return [(Path(cfg["input"]).stem, None, None, x, structure_labels(grid))]
    _require(cfg, "manifest")
    ds = _load_manifest(cfg["manifest"], cfg["split"])
    _check_classes(model, ds)
    samples = list(ds)
    if cfg.get("sample"):
        wanted = [s.strip() for s in str(cfg["sample"]).split(",")]
        by_id = {s.id: s for s in samples}
        missing = [w for w in wanted if w not in by_id]
        if missing:
            raise InputError(f"sample(s) not in manifest: {missing}")
        samples = [by_id[w] for w in wanted]
    if cfg.get("only_class"):
        if cfg["only_class"] not in ds.class_names:
            raise ConfigError(f"unknown class {cfg['only_class']!r}")
        samples = [s for s in samples if s.class_name == cfg["only_class"]]
    if cfg.get("limit") is not None:
        samples = samples[: int(cfg["limit"])]
    jobs = []
    for s in samples:
        x = s.voxels.occupancy if model.input_kind == "voxel" else s.points.points
        jobs.append((s.id, s.class_name, s.label, x, s.structure))
    return jobs


def _baseline(cfg, model):
    kind = cfg.get("baseline")
    if kind is None:
        return None, None
    if kind == "empty":
        if model.input_kind != "voxel":
            raise ConfigError("--baseline empty applies to voxel models; use centroid for points")
        return None, "empty"
    if kind == "centroid":
        if model.input_kind != "point":
            raise ConfigError("--baseline centroid applies to point models; use empty for voxels")
        return None, "centroid"
    if kind == "file":
        _require(cfg, "baseline_file")
        try:
            return load_tensor(cfg["baseline_file"]).data, "file"
        except (OSError, FormatError) as exc:
            raise InputError(f"cannot read baseline {cfg['baseline_file']}: {exc}") from None
    raise ConfigError(f"unknown baseline {kind!r}; choose empty, centroid or file")


def _target(cfg, model):
    raw = str(cfg["target"])
    if raw == "predicted":
        return None
    try:
        t = int(raw)
    except ValueError:
        raise ConfigError(f"--class must be 'predicted' or an integer, got {raw!r}") from None
    if not 0 <= t < model.num_classes:
        raise ConfigError(f"--class {t} outside [0, {model.num_classes})")
    return t


def cmd_attribute(cfg) -> int:
    _require(cfg, "checkpoint")
    if cfg["method"] not in METHODS:
        raise ConfigError(f"unknown method {cfg['method']!r}; choose from {', '.join(METHODS)}")
    if cfg["reduce"] not in ("norm", "sum"):
        raise ConfigError("--reduce must be norm or sum")
    try:
        ig = IGConfig(int(cfg["steps"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(cfg)
    model = _load_checkpoint(cfg["checkpoint"])
    target = _target(cfg, model)
    base, descriptor = _baseline(cfg, model)
    if base is not None:
        ig = IGConfig(ig.steps, base)
    jobs = _attribution_jobs(cfg, model)
    if not jobs:
        raise InputError("no samples selected for attribution")

    def run(job):
        sid, cname, label, x, structure = job
        try:
            amap = attribute(model, x, cfg["method"], target, ig, cfg["reduce"])
        except ValueError as exc:
            raise ConfigError(f"{sid}: {exc}") from None
        if descriptor is not None and "baseline" in amap.info:
            amap.info["baseline"] = descriptor
        if amap.domain == "voxel":
            labels = structure
            write_voxel_heatmap(x, amap.scores, out / f"{sid}.ply")
        else:
            labels = _point_structure(x, structure)
            write_ply_heatmap(x, amap.scores, out / f"{sid}.ply")
        doc = {
            "kind": "attribution", "run_config": cfg, "sample": sid, "class_name": cname,
            "label": label, "method": amap.method, "domain": amap.domain,
            "target_class": amap.target_class, "info": amap.info,
            "structure": _structure_stats(labels, amap.scores),
            "scores": amap.scores, "ply": f"{sid}.ply",
        }
        if amap.domain == "point":
            doc["raw"] = amap.raw
        write_json(out / f"{sid}.{amap.method}.json", doc)
        return sid

    workers = min(_threads(), len(jobs))
    if workers == 1:
        done = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(workers) as pool:
            done = list(pool.map(run, jobs))
    log.info("wrote %d attribution maps to %s", len(done), out)
    return EXIT_OK


def _prune_config(cfg) -> PruneConfig:
    try:
        return PruneConfig(float(cfg["c_lo"]), float(cfg["c_hi"]), int(cfg["interval"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_prune(cfg) -> int:
    _require(cfg, "checkpoint", "manifest")
    pcfg = _prune_config(cfg)
    optim = _optim(cfg)
    if int(cfg["iterations"]) < 0 or int(cfg["finetune_epochs"]) < 0:
        raise ConfigError("iterations and finetune epochs must be >= 0")
    out = _out_dir(cfg)
    model = _load_checkpoint(cfg["checkpoint"])
    if model.kind != "voxnet":
        raise ConfigError("pruning is implemented for the voxel network only")
    tr = _load_manifest(cfg["manifest"], "train")
    te = _load_manifest(cfg["manifest"], "test")
    _check_classes(model, tr)
    eval_set = te if len(te) else tr
    seed = int(cfg["seed"])
    original = model.state()
    evals = {"before": evaluate(model, eval_set).accuracy}
    model, mask, traj = prune_train_loop(model, tr, pcfg, optim, int(cfg["iterations"]), seed,
                                         int(cfg["batch_size"]))
    pruned_state = model.state()
    evals["after_prune"] = evaluate_masked(model, mask, eval_set).accuracy
    if int(cfg["finetune_epochs"]) > 0:
        finetune(model, mask, tr, int(cfg["finetune_epochs"]), optim, seed + 1, int(cfg["batch_size"]))
        evals["after_finetune"] = evaluate_masked(model, mask, eval_set).accuracy
    report = prune_report(model, mask, evals, seed, traj)
    final = apply_mask(model, mask)
    final.metadata = {**model.metadata, "pruned": True, "run_config": cfg}
    save_checkpoint(final, out / "pruned.vgc")
    mask.save(out / "mask.vgm")
    write_json(out / "prune_report.json", {"kind": "prune", "run_config": cfg, **report.to_json()})
    (out / "prune_report.txt").write_text(report.table() + "\n", encoding="utf-8")
    fdir = out / "filters"
    fdir.mkdir(exist_ok=True)
    for name in mask.masks:
        if model.params[name].ndim == 5:
            layer = name.rsplit(".", 1)[0]
            export_filter_visualization(layer, original[name], pruned_state[name],
                                        model.params[name].data, mask.masks[name],
                                        fdir / f"{layer}.json")
    log.info("%s", report.table())
    return EXIT_OK


def cmd_eval(cfg) -> int:
    _require(cfg, "checkpoint", "manifest")
    out = _out_dir(cfg)
    model = _load_checkpoint(cfg["checkpoint"])
    ds = _load_manifest(cfg["manifest"], cfg["split"])
    _check_classes(model, ds)
    if len(ds) == 0:
        raise InputError(f"{cfg['manifest']}: split {cfg['split']!r} is empty")
    rep = evaluate(model, ds)
    write_json(out / "eval.json", {"kind": "eval", "run_config": cfg, **rep.to_json()})
    log.info("accuracy %.4f", rep.accuracy)
    return EXIT_OK


# ---------------------------------------------------------------- report


def summarize(docs: list[tuple[str, dict]]) -> dict:
    """Join component JSONs (path, document) into one summary; pure function of its input."""
    summary = {"kind": "summary", "train": [], "eval": [], "prune": [], "attribution": []}
    groups: dict[tuple[str, str], dict] = {}
    for rel, doc in docs:
        kind = doc.get("kind")
        if kind == "train":
            summary["train"].append({"file": rel, "model": doc.get("model", {}).get("model"),
                                     "epochs": doc.get("epochs"), "initial_loss": doc.get("initial_loss"),
                                     "final_loss": doc.get("final_loss"),
                                     "test_accuracy": doc.get("test_accuracy")})
        elif kind == "eval":
            summary["eval"].append({"file": rel, "accuracy": doc.get("accuracy")})
        elif kind == "prune":
            summary["prune"].append({"file": rel, "percent_remaining": doc.get("percent_remaining"),
                                     "nonzero_params": doc.get("nonzero_params"),
                                     "total_params": doc.get("total_params"),
                                     "accuracy": doc.get("accuracy")})
        elif kind == "attribution":
            key = (doc.get("method"), doc.get("class_name") or "unlabelled")
            g = groups.setdefault(key, {"samples": 0, **{n: [0, 0.0] for n in LABEL_NAMES.values()}})
            g["samples"] += 1
            for name, st in doc.get("structure", {}).items():
                if name in g:
                    g[name][0] += st["count"]
                    g[name][1] += st["sum"]
    for (method, cname), g in sorted(groups.items()):
        means = {n: (g[n][1] / g[n][0] if g[n][0] else None) for n in LABEL_NAMES.values()}
        ce_count = g["corner"][0] + g["edge"][0]
        ce = (g["corner"][1] + g["edge"][1]) / ce_count if ce_count else None
        entry = {"method": method, "class_name": cname, "samples": g["samples"],
                 "mean_by_structure": means, "corner_edge_mean": ce,
                 "corner_edge_exceeds_face": (None if ce is None or means["face"] is None
                                              else ce > means["face"])}
        summary["attribution"].append(entry)
    return summary


def summary_table(summary: dict) -> str:
    def f(x, spec=".6g"):
        return "-" if x is None else format(x, spec)

    lines = []
    for t in summary["train"]:
        lines.append(f"train  {t['file']}: loss {f(t['initial_loss'])} -> {f(t['final_loss'])}, "
                     f"test accuracy {f(t['test_accuracy'], '.4f')}")
    for e in summary["eval"]:
        lines.append(f"eval   {e['file']}: accuracy {f(e['accuracy'], '.4f')}")
    for p in summary["prune"]:
        acc = p["accuracy"] or {}
        lines.append(f"prune  {p['file']}: {f(p['percent_remaining'], '.2f')}% remaining, accuracy "
                     f"{f(acc.get('before'), '.4f')} / {f(acc.get('after_prune'), '.4f')} / "
                     f"{f(acc.get('after_finetune'), '.4f')}")
    if summary["attribution"]:
        names = list(LABEL_NAMES.values())
        lines.append("")
        lines.append(f"{'method':<9} {'class':<10} {'n':>4} " + " ".join(f"{n:>11}" for n in names)
                     + f" {'corner+edge':>11} {'>face':>6}")
        for a in summary["attribution"]:
            cells = " ".join(f"{f(a['mean_by_structure'][n], '.4e'):>11}" for n in names)
            flag = {True: "yes", False: "no", None: "-"}[a["corner_edge_exceeds_face"]]
            lines.append(f"{a['method']:<9} {a['class_name']:<10} {a['samples']:>4} {cells} "
                         f"{f(a['corner_edge_mean'], '.4e'):>11} {flag:>6}")
    return "\n".join(lines) + "\n"


def cmd_report(cfg) -> int:
    _require(cfg, "run_dir")
    root = Path(cfg["run_dir"])
    if not root.is_dir():
        raise InputError(f"run directory not found: {root}")
    docs = []
    for path in sorted(root.rglob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise InputError(f"{path}: {exc}") from None
        if isinstance(doc, dict) and doc.get("kind") in ("train", "eval", "prune", "attribution"):
            docs.append((path.relative_to(root).as_posix(), doc))
    if not docs:
        raise InputError(f"{root}: no training, evaluation, pruning or attribution outputs found")
    out = _out_dir({"out": cfg.get("out") or root})
    summary = summarize(docs)
    summary["run_config"] = cfg
    write_json(out / "summary.json", summary)
    (out / "summary.txt").write_text(summary_table(summary), encoding="utf-8")
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "attribute": cmd_attribute,
            "prune": cmd_prune, "eval": cmd_eval, "report": cmd_report}


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="voxgrad", description="Voxel/point attribution and pruning toolkit.")
    p.add_argument("--version", action="version", version=f"voxgrad {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, argument_default=None)
        sp.add_argument("--config", help="JSON file of option values; flags override it")
        sp.add_argument("-v", "--verbose", action="store_true", default=False)
        return sp

    g = add("gen-data", "generate the synthetic dataset")
    g.add_argument("--out")
    g.add_argument("--classes", help="comma-separated class names")
    g.add_argument("--per-class", type=int, help="training samples per class")
    g.add_argument("--test-per-class", type=int)
    g.add_argument("--resolution", type=int)
    g.add_argument("--points", type=int)
    g.add_argument("--seed", type=int)

    t = add("train", "train a classifier")
    t.add_argument("--manifest")
    t.add_argument("--model", choices=["voxnet", "pointnet"])
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--momentum", type=float)
    t.add_argument("--weight-decay", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--out")

    a = add("attribute", "compute attribution maps")
    a.add_argument("--checkpoint")
    a.add_argument("--manifest")
    a.add_argument("--input", help="OFF mesh to explain instead of manifest samples")
    a.add_argument("--split")
    a.add_argument("--sample", help="comma-separated sample ids")
    a.add_argument("--only-class", help="restrict to samples of this class name")
    a.add_argument("--limit", type=int)
    a.add_argument("--method")
    a.add_argument("--class", dest="target", help="'predicted' or a class index")
    a.add_argument("--steps", type=int)
    a.add_argument("--baseline")
    a.add_argument("--baseline-file")
    a.add_argument("--reduce")
    a.add_argument("--seed", type=int)
    a.add_argument("--out")

    r = add("prune", "prune a voxel checkpoint and finetune")
    r.add_argument("--checkpoint")
    r.add_argument("--manifest")
    r.add_argument("--c-lo", type=float)
    r.add_argument("--c-hi", type=float)
    r.add_argument("--iterations", type=int)
    r.add_argument("--interval", type=int)
    r.add_argument("--finetune-epochs", type=int)
    r.add_argument("--lr", type=float)
    r.add_argument("--momentum", type=float)
    r.add_argument("--batch-size", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")

    e = add("eval", "evaluate a checkpoint")
    e.add_argument("--checkpoint")
    e.add_argument("--manifest")
    e.add_argument("--split")
    e.add_argument("--out")

    s = add("report", "summarize a run directory")
    s.add_argument("run_dir", nargs="?")
    s.add_argument("--out")
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the --config file, then explicit flags."""
    defaults = DEFAULTS[args.command]
    cfg = dict(defaults)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
        loaded.pop("command", None)
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown config key(s) for {args.command}: {unknown}")
        cfg.update(loaded)
    for k, v in vars(args).items():
        if k in defaults and v is not None:
            cfg[k] = v
    return {"command": args.command, **cfg}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors, 0 for --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="voxgrad: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"voxgrad: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, FormatError, OffParseError) as exc:
        print(f"voxgrad: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, FloatingPointError) as exc:
        print(f"voxgrad: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
