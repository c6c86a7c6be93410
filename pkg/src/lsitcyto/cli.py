"""Command-line entry point: ``lsitcyto <command> [options]``.

Every command writes into a fresh output directory and finishes with
``run_manifest.txt`` listing each emitted file with its SHA-256. Exit codes:
0 success, 2 configuration error, 3 missing or unreadable artifact, 4
numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, classical, elm, explain, metrics, synth, tensorio
from ._accel import backend
from .cnn import (
    ARCHITECTURES,
    TrainConfig,
    denoise_images,
    load_network,
    predict,
    save_network,
    train,
    transfer_learn,
)
from .errors import CapacityError, DataError, DimensionError, NumericError, ParameterError, StructureError

log = logging.getLogger("lsitcyto")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4
RUN_MANIFEST = "run_manifest.txt"
SWEEP_METHODS = ("gaussian", "average", "median", "bilateral", "cnn", "elm")
DENOISE_METHODS = (*classical.FILTER_KINDS, "cnn", "elm", "identity")


class ConfigError(ParameterError):
    pass


class MissingArtifact(DataError):
    pass


# ---------------------------------------------------------------------------
# configuration


def read_config(path) -> dict[str, str]:
    """Plain-text ``key = value`` file; ``#`` starts a comment line."""
    p = Path(path)
    if not p.exists():
        raise MissingArtifact(f"config file {p} not found")
    try:
        return tensorio.read_manifest(p)
    except DataError as exc:
        raise ConfigError(str(exc)) from exc


def _int_list(text) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc


def _float_list(text) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}") from exc


def _name_list(text) -> list[str]:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def resolve(args: argparse.Namespace) -> dict:
    """Merge the optional config file under explicit command-line flags."""
    cfg = dict(read_config(args.config)) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if key in ("func", "config", "command") or value is None:
            continue
        cfg[key.replace("_", "-")] = value
    return cfg


def _get(cfg: dict, key: str, cast, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required setting {key!r}")
        return default
    try:
        return cast(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {cfg[key]!r}") from exc


def train_config(cfg: dict, defaults: TrainConfig) -> TrainConfig:
    patch = cfg.get("patch-size")
    max_n = cfg.get("max-samples")
    return TrainConfig(
        epochs=_get(cfg, "epochs", int, defaults.epochs),
        batch_size=_get(cfg, "batch", int, defaults.batch_size),
        lr=_get(cfg, "lr", float, defaults.lr),
        seed=_get(cfg, "seed", int, defaults.seed),
        patience=_get(cfg, "patience", int, defaults.patience),
        noise_variances=tuple(_float_list(cfg["variances"])) if "variances" in cfg else defaults.noise_variances,
        max_samples_per_epoch=int(max_n) if max_n not in (None, "") else defaults.max_samples_per_epoch,
        max_val_samples=defaults.max_val_samples,
        patch_size=int(patch) if patch not in (None, "") else defaults.patch_size,
    )


# ---------------------------------------------------------------------------
# run directories


class Run:
    """Fresh output directory plus the bookkeeping for its manifest."""

    def __init__(self, command: str, out, cfg: dict):
        self.command = command
        self.root = Path(out)
        if self.root.exists() and any(self.root.iterdir()):
            raise ConfigError(f"output directory {self.root} is not empty")
        self.root.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.t0 = time.perf_counter()
        self.inputs: dict[str, str] = {}

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def note_input(self, label: str, path) -> None:
        p = Path(path)
        files = sorted(q for q in p.rglob("*") if q.is_file()) if p.is_dir() else [p]
        for q in files:
            self.inputs[f"{label}/{q.relative_to(p) if p.is_dir() else q.name}"] = tensorio.file_sha256(q)

    def finish(self) -> Path:
        files = sorted(q for q in self.root.rglob("*") if q.is_file() and q.name != RUN_MANIFEST)
        items = {
            "command": self.command,
            "lsitcyto": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "backend": backend(),
            "wall_clock_s": f"{time.perf_counter() - self.t0:.3f}",
        }
        for k in sorted(self.cfg):
            v = self.cfg[k]
            items[f"config.{k}"] = ",".join(map(str, v)) if isinstance(v, (list, tuple)) else v
        for k in sorted(self.inputs):
            items[f"input.{k}"] = self.inputs[k]
        for q in files:
            items[f"file.{q.relative_to(self.root).as_posix()}"] = tensorio.file_sha256(q)
        mp = self.root / RUN_MANIFEST
        tensorio.write_manifest(mp, items)
        return mp


def read_run_hashes(directory) -> dict[str, str]:
    """Emitted-file hashes recorded in a run manifest (wall clock etc. excluded)."""
    meta = tensorio.read_manifest(Path(directory) / RUN_MANIFEST)
    return {k[5:]: v for k, v in meta.items() if k.startswith("file.")}


def _need_dir(path, what: str) -> Path:
    p = Path(path)
    if not (p / "manifest.txt").exists():
        raise MissingArtifact(f"{what} not found at {p}")
    return p


def _load_dataset(path) -> synth.Dataset:
    return synth.load_dataset(_need_dir(path, "dataset"))


def _load_net(path):
    return load_network(_need_dir(path, "network checkpoint"))


def _load_elm(path):
    return elm.load_elm(_need_dir(path, "ELM checkpoint"))


def _net_classes(net) -> list[str]:
    names = net.meta.get("class_names")
    if not names:
        return [f"class{i}" for i in range(net.n_classes)]
    return _name_list(names)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _history_rows(history: dict):
    keys = [k for k in ("train_loss", "val_loss", "train_acc", "val_acc") if history.get(k)]
    rows = []
    for e in range(history.get("epochs_run", len(history.get("train_loss", [])))):
        rows.append([e + 1, *(f"{history[k][e]:.6f}" for k in keys)])
    return ["epoch", *keys], rows


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    cfg = resolve(args)
    window = _get(cfg, "window", int, 50)
    if window not in synth.WINDOW_SIZES:
        raise ConfigError(f"unsupported window {window}; choose from {synth.WINDOW_SIZES}")
    names = _name_list(cfg.get("classes", ",".join(s.name for s in synth.DEFAULT_CLASSES)))
    by_name = {s.name: s for s in synth.DEFAULT_CLASSES}
    unknown = [n for n in names if n not in by_name]
    if unknown:
        raise ConfigError(f"unknown classes {unknown}; known: {sorted(by_name)}")
    split = _int_list(cfg.get("split", ",".join(map(str, synth.DEFAULT_SPLIT))))
    run = Run("synth", _get(cfg, "out", str), cfg)
    ds = synth.build_dataset(
        [by_name[n] for n in names],
        base_per_class=_get(cfg, "base-per-class", int, 55),
        window=window,
        split_counts=split,
        seed=_get(cfg, "seed", int, 0),
    )
    synth.save_dataset(ds, run.root)
    pgm = _get(cfg, "pgm", int, 0) if "pgm" in cfg else 0
    if pgm:
        synth.export_pgm(ds, run.path("pgm"), per_class=pgm)
    for note in ds.notes:
        log.info(note)
    run.finish()
    counts = ds.counts()
    print(f"wrote {len(ds)} samples ({', '.join(f'{s} {int(counts[s].sum())}' for s in synth.SPLITS)}) to {run.root}")
    return EXIT_OK


def cmd_corrupt(args) -> int:
    cfg = resolve(args)
    ds = _load_dataset(_get(cfg, "data", str))
    variances = np.asarray(_float_list(_get(cfg, "variance", str, "100")), dtype=np.float64)
    if len(variances) == 0 or np.any(variances < 0):
        raise ConfigError("variances must be non-negative")
    split = _get(cfg, "split", str, "test")
    run = Run("corrupt", _get(cfg, "out", str), cfg)
    run.note_input("data", cfg["data"])
    clean, labels = ds.split(split)
    rng = np.random.default_rng([_get(cfg, "seed", int, 0), 0xC0])
    per = rng.choice(variances, size=len(clean)) if len(variances) > 1 else np.full(len(clean), variances[0])
    noisy = synth.add_noise_per_sample(clean, per, rng)
    _save_noise_set(run.root, clean, noisy, labels, per)
    run.finish()
    print(f"corrupted {len(clean)} {split} images into {run.root}")
    return EXIT_OK


def _save_noise_set(root: Path, clean, noisy, labels, variances) -> None:
    tensorio.save_tensor(root / "clean.dlt", clean)
    tensorio.save_tensor(root / "noisy.dlt", noisy)
    tensorio.save_tensor(root / "labels.dlt", labels)
    tensorio.save_tensor(root / "variances.dlt", variances)
    tensorio.write_manifest(root / "manifest.txt", {"format": "lsitcyto-noisy-1", "count": len(clean)})


def _load_noise_set(path):
    root = Path(path)
    meta_path = root / "manifest.txt"
    if not meta_path.exists() or tensorio.read_manifest(meta_path).get("format") != "lsitcyto-noisy-1":
        raise MissingArtifact(f"no corrupted image set at {root}")
    return (
        tensorio.load_tensor(root / "clean.dlt"),
        tensorio.load_tensor(root / "noisy.dlt"),
        tensorio.load_tensor(root / "variances.dlt").astype(np.float64),
    )


def denoise_with(method: str, noisy: np.ndarray, checkpoint=None) -> np.ndarray:
    """Denoise a stack ``(N, s, s)`` with one named method."""
    if method in classical.FILTER_KINDS:
        return classical.denoise_stack(noisy, classical.DEFAULT_FILTERS[method])
    if method == "identity":
        return noisy.copy()
    if checkpoint is None:
        raise MissingArtifact(f"method {method!r} needs a checkpoint")
    if method == "cnn":
        return denoise_images(_load_net(checkpoint), noisy)
    if method == "elm":
        return elm.denoise(_load_elm(checkpoint), noisy)
    raise ConfigError(f"unknown method {method!r}; choose from {DENOISE_METHODS}")


def cmd_denoise(args) -> int:
    cfg = resolve(args)
    method = _get(cfg, "method", str)
    if method not in DENOISE_METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {DENOISE_METHODS}")
    src = Path(_get(cfg, "input", str))
    if not src.exists():
        raise MissingArtifact(f"input {src} not found")
    clean = None
    if src.is_dir():
        clean, noisy, _ = _load_noise_set(src)
    elif src.suffix == ".pgm":
        noisy = tensorio.load_pgm(src)[None]
    else:
        noisy = tensorio.load_tensor(src)
        noisy = noisy[None] if noisy.ndim == 2 else noisy
    run = Run("denoise", _get(cfg, "out", str), cfg)
    run.note_input("input", src)
    out = denoise_with(method, noisy, cfg.get("checkpoint"))
    tensorio.save_tensor(run.path("denoised.dlt"), out)
    panels = min(len(out), _get(cfg, "panels", int, 4))
    for i in range(panels):
        row = [noisy[i], out[i]] if clean is None else [clean[i], noisy[i], out[i]]
        tensorio.save_pgm(run.path(f"panels/{i:03d}.pgm"), np.concatenate(row, axis=1))
    if clean is not None:
        report = metrics.snr_imp(clean, noisy, out)
        metrics.write_snr_csv(run.path("snr.csv"), report)
        print(f"{method}: mean SNR_imp {report.mean:.3f} dB over {len(out)} images")
    run.finish()
    return EXIT_OK


def cmd_train_denoiser(args) -> int:
    cfg = resolve(args)
    ds = _load_dataset(_get(cfg, "data", str))
    model = _get(cfg, "model", str, "cnn")
    seed = _get(cfg, "seed", int, 0)
    run = Run("train-denoiser", _get(cfg, "out", str), cfg)
    run.note_input("data", cfg["data"])
    if model == "elm":
        x_tr, _ = ds.split("train")
        m = elm.create_denoiser(ds.window, _get(cfg, "hidden", int, elm.DEFAULT_HIDDEN), seed, _get(cfg, "c-reg", float, elm.DEFAULT_C_REG))
        variances = _float_list(cfg.get("variances", "100,200,300,400,500,600"))
        m = elm.fit_denoiser(m, x_tr, variances, copies=_get(cfg, "copies", int, 2), seed=seed)
        elm.save_elm(m, run.root / "model")
    elif model in ("cnn", "fc"):
        builder = ARCHITECTURES["denoiser" if model == "cnn" else "fc_denoiser"]
        size = _get(cfg, "input-size", int, ds.window)
        if size != ds.window:
            ds = synth.recrop(ds, size)
        net = builder(size, seed=seed)
        tc = train_config(cfg, TrainConfig(epochs=5, batch_size=16, seed=seed, max_val_samples=128))
        net, history = train(net, ds, tc)
        save_network(net, run.root / "model")
        _write_rows(run.path("history.csv"), *_history_rows(history))
    else:
        raise ConfigError(f"unknown denoiser model {model!r}; choose cnn, fc or elm")
    run.finish()
    print(f"trained {model} denoiser into {run.root / 'model'}")
    return EXIT_OK


def _classifier_data(cfg: dict) -> synth.Dataset:
    ds = _load_dataset(_get(cfg, "data", str))
    excluded = _name_list(cfg.get("exclude-class", ""))
    if excluded:
        missing = [n for n in excluded if n not in ds.class_names]
        if missing:
            raise ConfigError(f"cannot exclude unknown classes {missing}")
        ds = ds.select_classes([n for n in ds.class_names if n not in excluded])
    size = _get(cfg, "input-size", int, ds.window)
    if size != ds.window:
        ds = synth.recrop(ds, size)
    return ds


def cmd_train_classifier(args) -> int:
    cfg = resolve(args)
    ds = _classifier_data(cfg)
    arch = _get(cfg, "arch", str, "classifier")
    if arch not in ("classifier", "deep_classifier"):
        raise ConfigError(f"unknown classifier architecture {arch!r}")
    seed = _get(cfg, "seed", int, 0)
    run = Run("train-classifier", _get(cfg, "out", str), cfg)
    run.note_input("data", cfg["data"])
    net = ARCHITECTURES[arch](ds.window, ds.n_classes, seed=seed)
    net.meta["class_names"] = ",".join(ds.class_names)
    net, history = train(net, ds, train_config(cfg, TrainConfig(epochs=10, seed=seed)))
    save_network(net, run.root / "model")
    _write_rows(run.path("history.csv"), *_history_rows(history))
    x_te, y_te = ds.split("test")
    if len(x_te):
        _emit_eval(run, net, x_te, y_te, ds.class_names, prefix="test_")
    run.finish()
    return EXIT_OK


def _confusion_for(net, x, y, class_names) -> metrics.ConfusionMatrix:
    pred, _ = predict(net, x)
    return metrics.confusion(y, pred, len(class_names), class_names)


def _emit_eval(run: Run, net, x, y, class_names, prefix: str = "") -> metrics.ConfusionMatrix:
    pred, probs = predict(net, x)
    cm = metrics.confusion(y, pred, len(class_names), class_names)
    metrics.write_confusion_csv(run.path(f"{prefix}confusion.csv"), cm)
    metrics.write_metrics_csv(run.path(f"{prefix}metrics.csv"), cm)
    if len(np.unique(y)) == len(class_names):
        metrics.write_roc_csv(run.path(f"{prefix}roc.csv"), metrics.roc_auc(probs, y, len(class_names)), class_names)
    acc = cm.accuracy()
    print(f"{prefix or ''}accuracy {acc:.4f} over {len(y)} samples")
    return cm


def cmd_transfer(args) -> int:
    cfg = resolve(args)
    net = _load_net(_get(cfg, "model", str))
    old = _net_classes(net)
    full = _load_dataset(_get(cfg, "data", str))
    new_class = _get(cfg, "new-class", str)
    if new_class in old:
        raise ConfigError(f"class {new_class!r} is already known to the model")
    if new_class not in full.class_names:
        raise ConfigError(f"class {new_class!r} not in dataset")
    names = old + [new_class]
    ds = full.select_classes(names)
    if ds.window != net.input_shape[1]:
        ds = synth.recrop(ds, net.input_shape[1])
    run = Run("transfer", _get(cfg, "out", str), cfg)
    run.note_input("model", cfg["model"])
    run.note_input("data", cfg["data"])
    x_te, y_te = ds.split("test")
    pred, _ = predict(net, x_te)
    pre = metrics.confusion(y_te, pred, len(names), names)
    metrics.write_confusion_csv(run.path("pre_confusion.csv"), pre)
    seed = _get(cfg, "seed", int, 0)
    tc = train_config(cfg, TrainConfig(epochs=3, seed=seed))
    new_net, history = transfer_learn(net, ds, len(names), tc)
    new_net.meta["class_names"] = ",".join(names)
    save_network(new_net, run.root / "model")
    _write_rows(run.path("history.csv"), *_history_rows(history))
    post = _emit_eval(run, new_net, x_te, y_te, names, prefix="post_")
    new_idx = len(names) - 1
    print(
        f"{new_class}: recall {pre.per_class_recall()[new_idx]:.4f} before, "
        f"{post.per_class_recall()[new_idx]:.4f} after head-only retraining"
    )
    run.finish()
    return EXIT_OK


def _emit_maps(run: Run, net, images, labels, class_names, per_class: int) -> None:
    for ci, name in enumerate(class_names):
        for j, idx in enumerate(np.flatnonzero(labels == ci)[:per_class]):
            img = images[idx]
            cam = explain.grad_cam(net, img, ci)
            sal = explain.saliency(net, img, ci)
            panel = np.concatenate([img, cam * 255.0, sal * 255.0], axis=1)
            tensorio.save_pgm(run.path(f"maps/{name}_{j:03d}.pgm"), panel)


def cmd_eval(args) -> int:
    cfg = resolve(args)
    net = _load_net(_get(cfg, "model", str))
    names = _net_classes(net)
    ds = _load_dataset(_get(cfg, "data", str))
    if set(names) - set(ds.class_names):
        raise ConfigError(f"dataset lacks model classes {sorted(set(names) - set(ds.class_names))}")
    ds = ds.select_classes(names)
    if ds.window != net.input_shape[1]:
        ds = synth.recrop(ds, net.input_shape[1])
    split = _get(cfg, "split", str, "test")
    run = Run("eval", _get(cfg, "out", str), cfg)
    run.note_input("model", cfg["model"])
    run.note_input("data", cfg["data"])
    x, y = ds.split(split)
    _emit_eval(run, net, x, y, names)
    if net.history:
        _write_rows(run.path("history.csv"), *_history_rows(net.history))
    _emit_maps(run, net, x, y, names, _get(cfg, "maps", int, 2))
    run.finish()
    return EXIT_OK


def cmd_explain(args) -> int:
    cfg = resolve(args)
    net = _load_net(_get(cfg, "model", str))
    src = Path(_get(cfg, "input", str))
    if not src.exists():
        raise MissingArtifact(f"input {src} not found")
    img = tensorio.load_pgm(src) if src.suffix == ".pgm" else tensorio.load_tensor(src)
    if img.ndim == 3:
        img = img[_get(cfg, "index", int, 0)]
    names = _net_classes(net)
    idx, probs = predict(net, img)
    ci = _name_list(cfg["class"]) if "class" in cfg else None
    target = names.index(ci[0]) if ci and ci[0] in names else (int(ci[0]) if ci else idx)
    run = Run("explain", _get(cfg, "out", str), cfg)
    run.note_input("model", cfg["model"])
    run.note_input("input", src)
    cam = explain.grad_cam(net, img, target)
    sal = explain.saliency(net, img, target)
    tensorio.save_tensor(run.path("gradcam.dlt"), cam)
    tensorio.save_tensor(run.path("saliency.dlt"), sal)
    tensorio.save_pgm(run.path("gradcam.pgm"), cam * 255.0)
    tensorio.save_pgm(run.path("saliency.pgm"), sal * 255.0)
    _write_rows(run.path("prediction.csv"), ["class", "probability"], [[n, f"{p:.6f}"] for n, p in zip(names, probs)])
    run.finish()
    print(f"predicted {names[idx]} (p={probs[idx]:.4f}); maps for {names[target]} in {run.root}")
    return EXIT_OK


def sweep_table(clean, variances, methods, checkpoints: dict, seed: int = 0) -> dict:
    """Mean SNR improvement per (variance, method) on fixed-seed corruptions of ``clean``."""
    models = {}
    for m in methods:
        if m in ("cnn", "elm"):
            if not checkpoints.get(m):
                raise MissingArtifact(f"sweep column {m!r} needs a checkpoint")
            models[m] = _load_net(checkpoints[m]) if m == "cnn" else _load_elm(checkpoints[m])
        elif m not in DENOISE_METHODS:
            raise ConfigError(f"unknown method {m!r}")
    table = {}
    for var in variances:
        rng = np.random.default_rng([seed, int(round(var * 1000)), 0x5EE])
        noisy = synth.add_noise_per_sample(clean, np.full(len(clean), float(var)), rng)
        for m in methods:
            if m == "cnn":
                out = denoise_images(models[m], noisy)
            elif m == "elm":
                out = elm.denoise(models[m], noisy)
            else:
                out = denoise_with(m, noisy)
            table[(var, m)] = metrics.snr_imp(clean, noisy, out).mean
    return table


def cmd_sweep(args) -> int:
    cfg = resolve(args)
    ds = _load_dataset(_get(cfg, "data", str))
    variances = _float_list(cfg.get("variances", "100,200,300,400,500,600"))
    methods = _name_list(cfg.get("methods", ",".join(SWEEP_METHODS)))
    checkpoints = {"cnn": cfg.get("cnn"), "elm": cfg.get("elm")}
    for m, ck in checkpoints.items():
        if m in methods and ck:
            _need_dir(ck, f"{m} checkpoint")
    clean, _ = ds.split(_get(cfg, "split", str, "test"))
    limit = _get(cfg, "max-test", int, 0) if "max-test" in cfg else 0
    if limit and len(clean) > limit:
        clean = clean[np.linspace(0, len(clean) - 1, limit).round().astype(int)]
    run = Run("sweep", _get(cfg, "out", str), cfg)
    run.note_input("data", cfg["data"])
    for m, ck in checkpoints.items():
        if m in methods and ck:
            run.note_input(m, ck)
    table = sweep_table(clean, variances, methods, checkpoints, _get(cfg, "seed", int, 0))
    rows = [[f"{v:g}", *(f"{table[(v, m)]:.4f}" for m in methods)] for v in variances]
    _write_rows(run.path("snr_sweep.csv"), ["variance", *methods], rows)
    run.finish()
    for r in rows:
        print("  ".join(r))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, out: bool = True) -> None:
    p.add_argument("--config", help="plain-text key = value file; flags override it")
    if out:
        p.add_argument("--out", help="fresh output directory")
    p.add_argument("--seed", type=int)


def _training(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--input-size", type=int)
    p.add_argument("--max-samples", type=int, help="cap on training samples drawn per epoch")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lsitcyto", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic diffraction-pattern dataset")
    _common(p)
    p.add_argument("--window", type=int)
    p.add_argument("--base-per-class", type=int)
    p.add_argument("--split", help="train,val,test samples per class")
    p.add_argument("--classes", help="comma-separated class names")
    p.add_argument("--pgm", type=int, help="also export N test images per class as PGM")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("corrupt", help="add Gaussian noise to one split")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--variance", help="one variance or a comma list (drawn per image)")
    p.add_argument("--split")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("denoise", help="denoise a corrupted set, a DLT1 stack or a PGM")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--method", choices=DENOISE_METHODS)
    p.add_argument("--checkpoint", help="model directory for cnn/elm")
    p.add_argument("--panels", type=int)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("train-denoiser", help="train the CNN, FC or ELM denoiser")
    _common(p)
    _training(p)
    p.add_argument("--data")
    p.add_argument("--model", choices=("cnn", "fc", "elm"))
    p.add_argument("--patch-size", type=int, help="train the CNN on random square patches")
    p.add_argument("--variances")
    p.add_argument("--hidden", type=int, help="ELM hidden neurons")
    p.add_argument("--c-reg", type=float, help="ELM ridge constant C")
    p.add_argument("--copies", type=int, help="ELM noisy copies per clean image")
    p.set_defaults(func=cmd_train_denoiser)

    p = sub.add_parser("train-classifier", help="train the CNN classifier")
    _common(p)
    _training(p)
    p.add_argument("--data")
    p.add_argument("--arch", choices=("classifier", "deep_classifier"))
    p.add_argument("--exclude-class", help="comma-separated classes to leave out")
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("transfer", help="add one class by retraining only the output head")
    _common(p)
    _training(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--new-class")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("eval", help="confusion, per-class metrics, ROC and explanation maps")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--split")
    p.add_argument("--maps", type=int, help="explanation panels per class")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="Grad-CAM and saliency maps for one image")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--input", help="PGM image or DLT1 tensor")
    p.add_argument("--index", type=int, help="image index within a DLT1 stack")
    p.add_argument("--class", dest="class_", help="class name or index (default: predicted)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("sweep", help="mean SNR improvement per variance and method")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--variances")
    p.add_argument("--methods")
    p.add_argument("--cnn", help="CNN denoiser checkpoint")
    p.add_argument("--elm", help="ELM denoiser checkpoint")
    p.add_argument("--split")
    p.add_argument("--max-test", type=int, help="evenly subsample the split to N images")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "class_", None) is not None:
        args.__dict__["class"] = args.__dict__.pop("class_")
    else:
        args.__dict__.pop("class_", None)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (MissingArtifact, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParameterError, CapacityError, DimensionError, StructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
