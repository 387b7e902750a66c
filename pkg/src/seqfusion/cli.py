"""Command-line entry point.

Subcommands: sample, synth, gradcheck, train, eval, inspect.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import sys
import zlib

import numpy as np

from . import data as data_mod
from .core import DimensionError, Rng
from .data import (CorruptionError, FormatError, ManifestError, SynthSpec,
                   load_manifest, make_splits, synth_dataset,
                   write_synth_dataset)
from .evaluation import Metrics, aggregate_cv, evaluate
from .models import (ConfigError, ModelConfig, build_model, load_model,
                     save_model)
from .sampling import InsufficientFramesError, select_frame_indices
from .training import Hyperparams, grad_check_variant, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _atomic_write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


class RunDirLock:
    """One process owns a run directory at a time."""

    def __init__(self, outdir: str):
        self.path = os.path.join(outdir, ".lock")

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise CliError(
                f"run directory is locked by another process "
                f"(remove {self.path} if stale)", EXIT_RUNTIME) from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            os.unlink(self.path)
        except FileNotFoundError:
            pass


def default_outdir() -> str:
    return os.environ.get("SEQFUSION_OUT", "runs")


# --- subcommands ------------------------------------------------------------

def cmd_sample(args) -> int:
    try:
        idx = select_frame_indices(args.frames, args.target,
                                   pad_repeat=args.pad_repeat)
    except InsufficientFramesError as e:
        raise CliError(str(e), EXIT_DATA)
    print(" ".join(str(i) for i in idx))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(K=args.classes, n_per_class=args.per_class, T=args.frames,
                     D_conv=args.dconv, D_fc=args.dfc, coupling=args.coupling,
                     noise=args.noise, amplitude=args.amplitude)
    samples = synth_dataset(spec, Rng(args.seed))
    fractions = None
    if args.split_tags:
        tags = args.split_tags.split(",")
        fractions = {t: 1.0 / len(tags) for t in tags}
    manifest = write_synth_dataset(samples, spec, args.out, fractions)
    print(f"wrote {len(samples)} samples, manifest {manifest}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    threshold = 1e-5
    worst = 0.0
    for variant in ("conv_l", "fc_l", "fu_1", "fu_2"):
        rep = grad_check_variant(variant, seed=args.seed, fd_step=args.fd_step)
        worst = max(worst, rep.max_rel_error)
        print(f"{variant:7s} max_rel_error {rep.max_rel_error:.3e} "
              f"mean {rep.mean_rel_error:.3e} worst {rep.worst_tensor}[{rep.worst_index}]")
    if worst >= threshold:
        print(f"FAIL: worst error {worst:.3e} >= {threshold:.0e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _build_config(args, dataset, sample) -> ModelConfig:
    d_conv = sample.x_conv[0].shape[0]
    d_fc = sample.x_fc[0].shape[0]
    return ModelConfig(
        variant=args.variant, D_conv=d_conv, D_fc=d_fc, K=dataset.K,
        H=args.hidden, D_merge=args.merge_dim, dropout_rate=args.dropout,
        conv_pooling=args.conv_pooling,
    )


def _hyperparams(args) -> Hyperparams:
    return Hyperparams(lr=args.lr, batch_size=args.batch, epochs=args.epochs,
                       optimizer=args.optimizer, clip_norm=args.clip,
                       seed=args.seed, checkpoint_every=args.checkpoint_every)


def _metrics_lines(history) -> str:
    lines = []
    for e, (loss, acc) in enumerate(zip(history.train_loss, history.train_acc), 1):
        rec = f"epoch={e} loss={loss:.10f} acc={acc:.6f}"
        if history.val_acc:
            rec += f" val_acc={history.val_acc[e - 1]:.6f}"
        lines.append(rec)
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    outdir = args.out or default_outdir()
    os.makedirs(outdir, exist_ok=True)
    dataset = load_manifest(args.manifest)
    by_id = {e.video_id: e for e in dataset.entries}
    pooling = args.conv_pooling
    first = dataset.load_sample(dataset.entries[0], pooling)
    cfg = _build_config(args, dataset, first)
    hp = _hyperparams(args)

    with RunDirLock(outdir):
        _atomic_write_text(os.path.join(outdir, "config.json"), json.dumps(
            {"model": cfg.to_dict(), "hyperparams": vars(hp),
             "scheme": args.scheme, "manifest": os.path.abspath(args.manifest)},
            indent=2, sort_keys=True) + "\n")

        if args.scheme == "none":
            folds = [("all", [e.video_id for e in dataset.entries], [])]
        else:
            plan = make_splits(dataset, args.scheme)
            folds = [(f.name, f.train_ids, f.test_ids) for f in plan.folds]
            if args.fold is not None:
                folds = [f for f in folds if f[0] == args.fold]
                if not folds:
                    raise CliError(f"no fold named {args.fold!r}", EXIT_CONFIG)

        results = []
        for name, train_ids, test_ids in folds:
            model = build_model(cfg, Rng(hp.seed))
            train_samples = [dataset.load_sample(by_id[i], pooling) for i in train_ids]
            test_samples = [dataset.load_sample(by_id[i], pooling) for i in test_ids]
            history = train(model, train_samples, hp,
                            val_samples=test_samples or None,
                            checkpoint_dir=outdir if args.checkpoint_every else None,
                            log=lambda m: print(f"[{name}] {m}"))
            save_model(os.path.join(outdir, f"fold_{name}.fsm"), model)
            _atomic_write_text(os.path.join(outdir, f"fold_{name}_train.log"),
                               _metrics_lines(history))
            if test_samples:
                metrics, cm = evaluate(model, test_samples, dataset.class_names)
                results.append((metrics, cm))

        if results:
            summary = aggregate_cv(results)
            _atomic_write_text(os.path.join(outdir, "confusion.csv"),
                               summary.pooled.to_csv())
            _atomic_write_text(os.path.join(outdir, "confusion_heatmap.dat"),
                               summary.pooled.to_heatmap_data())
            lines = [f"fold={i} accuracy={a:.6f}"
                     for i, a in enumerate(summary.fold_accuracies)]
            lines.append(f"pooled_accuracy={summary.pooled_metrics.accuracy:.6f}")
            _atomic_write_text(os.path.join(outdir, "metrics.txt"),
                               "\n".join(lines) + "\n")
            print(f"pooled accuracy {summary.pooled_metrics.accuracy:.4f} "
                  f"over {summary.pooled_metrics.total} samples")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.checkpoint)
    dataset = load_manifest(args.manifest)
    entries = dataset.entries
    if args.tag:
        entries = [e for e in entries if e.split_tag == args.tag]
        if not entries:
            raise CliError(f"no entries with split tag {args.tag!r}", EXIT_DATA)
    samples = [dataset.load_sample(e, model.cfg.conv_pooling) for e in entries]
    metrics, cm = evaluate(model, samples, dataset.class_names)
    print(f"accuracy {metrics.accuracy:.6f} over {metrics.total} samples")
    for name, pc in zip(dataset.class_names, metrics.per_class):
        shown = "n/a" if np.isnan(pc) else f"{pc:.6f}"
        print(f"class {name} accuracy {shown}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _atomic_write_text(os.path.join(args.out, "confusion.csv"), cm.to_csv())
        _atomic_write_text(os.path.join(args.out, "confusion_heatmap.dat"),
                           cm.to_heatmap_data())
        _atomic_write_text(os.path.join(args.out, "metrics.txt"),
                           f"accuracy={metrics.accuracy:.6f} total={metrics.total}\n")
    return EXIT_OK


def cmd_inspect(args) -> int:
    sample, meta = data_mod.read_feature_file(args.file, conv_pooling="flatten")
    with open(args.file, "rb") as f:
        raw = f.read()
    (crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    print(f"video_id   {meta.video_id}")
    print(f"label      {meta.label}")
    print(f"frames     {meta.T}")
    print(f"conv_shape {'x'.join(str(d) for d in meta.conv_shape)}"
          f" ({'raw' if meta.conv_is_raw else 'pooled'})")
    print(f"fc_dim     {meta.fc_dim}")
    print(f"payload_crc32 0x{crc:08x}")
    print(f"file_bytes {len(raw)}")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="seqfusion",
        description="Two-stream CNN-feature LSTM fusion engine",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="print evenly spaced frame indices")
    sp.add_argument("--frames", type=int, required=True, help="total frame count N")
    sp.add_argument("--target", type=int, required=True, help="frames to select T")
    sp.add_argument("--pad-repeat", action="store_true",
                    help="repeat the last frame when N < T instead of failing")
    sp.set_defaults(func=cmd_sample)

    sy = sub.add_parser("synth", help="generate a synthetic two-stream dataset")
    sy.add_argument("--classes", type=int, required=True)
    sy.add_argument("--per-class", type=int, required=True)
    sy.add_argument("--frames", type=int, required=True)
    sy.add_argument("--dconv", type=int, required=True)
    sy.add_argument("--dfc", type=int, required=True)
    sy.add_argument("--coupling", choices=["conv_only", "fc_only", "xor"],
                    required=True)
    sy.add_argument("--noise", type=float, default=0.1)
    sy.add_argument("--amplitude", type=float, default=3.0)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--split-tags", default="",
                    help="comma-separated tags for equal predefined splits")
    sy.add_argument("--out", required=True)
    sy.set_defaults(func=cmd_synth)

    gc = sub.add_parser("gradcheck",
                        help="finite-difference gradient check, all variants")
    gc.add_argument("--seed", type=int, default=1)
    gc.add_argument("--fd-step", type=float, default=1e-5)
    gc.set_defaults(func=cmd_gradcheck)

    def add_model_flags(q):
        q.add_argument("--variant", choices=["conv_l", "fc_l", "fu_1", "fu_2"],
                       required=True)
        q.add_argument("--hidden", type=int, default=100)
        q.add_argument("--merge-dim", type=int, default=100)
        q.add_argument("--dropout", type=float, default=0.25)
        q.add_argument("--conv-pooling", choices=["spatial_average", "flatten"],
                       default="spatial_average")

    tr = sub.add_parser("train", help="train one fold or a full CV plan")
    tr.add_argument("--manifest", required=True)
    add_model_flags(tr)
    tr.add_argument("--scheme",
                    choices=["loocv_video", "loocv_group", "predefined", "none"],
                    default="none", help="'none' trains on every entry")
    tr.add_argument("--fold", default=None, help="restrict to one fold by name")
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--epochs", type=int, default=10)
    tr.add_argument("--batch", type=int, default=8)
    tr.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    tr.add_argument("--clip", type=float, default=None,
                    help="global gradient-norm clip")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--checkpoint-every", type=int, default=0)
    tr.add_argument("--out", default=None,
                    help="run directory (default $SEQFUSION_OUT or ./runs)")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--tag", default=None, help="restrict to one split tag")
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=cmd_eval)

    ins = sub.add_parser("inspect", help="dump a feature file's header")
    ins.add_argument("file")
    ins.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ConfigError, ValueError) as e:
        if isinstance(e, (FormatError, CorruptionError, ManifestError,
                          InsufficientFramesError, DimensionError)):
            print(f"data error: {e}", file=sys.stderr)
            return EXIT_DATA
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except RuntimeError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
