"""Command-line entry point.

Exit codes: 0 success, 2 I/O, 3 configuration, 4 runtime computation.

Every command resolves an ``ExperimentConfig`` (defaults, then ``--config``
file, then flags), writes it to ``<out>/config.json`` and stamps its hash
into every output file.  No timestamps are written, so equal configs give
byte-identical reports.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from ecgssl import config as C
from ecgssl import io
from ecgssl.encoder import embed_segments, load_encoder, save_encoder, write_embeddings_csv
from ecgssl.errors import ConfigurationError, DataError, EcgSslError, FoldError
from ecgssl.evalharness.experiments import (
    EvalConfig,
    LeakageError,
    run_ssl_experiment,
    run_supervised_experiment,
    write_audit,
)
from ecgssl.evalharness.metrics import fmt
from ecgssl.evalharness.windowing import StripPrediction, sweep_window
from ecgssl.numcore.checkpoint import atomic_write_bytes
from ecgssl.probes import KINDS
from ecgssl.sigproc import build_segment_table, design_bandpass
from ecgssl.ssl.pretrain import METHODS, pretrain, strip_labels
from ecgssl.synth import generate_synthetic_corpus

log = logging.getLogger("ecgssl")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3, 4


class InputMissing(ConfigurationError):
    """A path the command needs does not exist."""


# ------------------------------------------------------------------ helpers


def _write_text(path, text):
    atomic_write_bytes(path, text.encode())


def _write_json(path, doc):
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    _write_text(path, "\n".join(lines) + "\n")


def _require(path, what):
    if path is None:
        raise InputMissing(f"no {what} given")
    if not Path(path).exists():
        raise InputMissing(f"{what} not found: {path}")
    return path


def _filter(cfg):
    return design_bandpass(cfg.sigproc.low_hz, cfg.sigproc.high_hz)


def _table(cfg, manifest, unlabeled=False):
    recs = io.read_manifest(_require(manifest, "manifest"))
    if unlabeled:
        recs = strip_labels(recs)
    return build_segment_table(recs, _filter(cfg), cfg.sigproc.stride_s)


def _run_dir(cfg):
    out = Path(cfg.paths.output_dir)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    return out


def _eval_config(cfg, shuffle=False):
    return EvalConfig(
        k=cfg.cv.k, seed=cfg.seed, label_budget=cfg.cv.label_budget,
        shuffle_labels=shuffle, inner_val_fraction=cfg.cv.inner_val_fraction, jobs=cfg.jobs,
    )


def _do_pretrain(cfg, out):
    table = _table(cfg, cfg.paths.pretrain_manifest, unlabeled=True)
    result = pretrain(table, cfg.ssl, cfg.encoder)
    h = cfg.config_hash()
    ckpt = out / "checkpoints" / "encoder.ckpt"
    save_encoder(ckpt, result.encoder, extra=result.heads.values(),
                 meta={"method": cfg.ssl.method, "config_hash": h})
    _write_csv(out / "loss_curve.csv", ["epoch", "loss", "config_hash"],
               [(e + 1, repr(v), h) for e, v in enumerate(result.losses)])
    return result.encoder, ckpt


def _encoder(cfg, out):
    if cfg.paths.checkpoint is not None:
        enc, _, _ = load_encoder(_require(cfg.paths.checkpoint, "checkpoint"))
        return enc
    if cfg.paths.pretrain_manifest is None:
        raise InputMissing("need --checkpoint or --pretrain-manifest to obtain an encoder")
    enc, _ = _do_pretrain(cfg, out)
    return enc


def _write_strips(path, strips, h):
    rows = [(s.recording_id, s.start_s, s.label, repr(s.confidence), s.true_label, h) for s in strips]
    _write_csv(path, ["recording_id", "start_s", "label", "confidence", "true_label", "config_hash"], rows)


def read_strips(path):
    with open(path, newline="") as fh:
        return [
            StripPrediction(r["recording_id"], float(r["start_s"]), int(r["label"]),
                            float(r["confidence"]), int(r["true_label"]))
            for r in csv.DictReader(fh)
        ]


def _write_sweep(path, sweep, h):
    rows = [(w, fmt(a), fmt(f), h) for w, a, f in sweep.rows()]
    _write_csv(path, ["window_s", "accuracy", "f1", "config_hash"], rows)


def _emit_report(cfg, out, output, kind, extra=None):
    h = cfg.config_hash()
    report = output.report
    doc = {
        "config_hash": h,
        "kind": kind,
        "seed": cfg.seed,
        "folds": report.folds,
        "aggregate": report.aggregate(),
    }
    doc.update(extra or {})
    _write_json(out / "metrics.json", doc)
    rows = []
    for rec, m in zip(output.audit, report.folds):
        rows.append((rec["fold"], len(rec["train_patients"]), len(rec["test_patients"]),
                     fmt(m["accuracy"]), fmt(m["f1"]), fmt(m["auc"]), h))
    _write_csv(out / "folds.csv",
               ["fold", "n_train_patients", "n_test_patients", "accuracy", "f1", "auc", "config_hash"],
               rows)
    audit = [dict(r, config_hash=h) for r in output.audit]
    write_audit(out / "audit.jsonl", audit)
    _write_strips(out / "strips.csv", output.strips, h)
    sweep = sweep_window(output.strips, cfg.window_grid)
    _write_sweep(out / "window_sweep.csv", sweep, h)
    return sweep


def _print_summary(title, report, cfg, sweep=None):
    print(f"{title}  (seed {cfg.seed}, config {cfg.config_hash()})")
    print(f"{'fold':>9}  {'accuracy':>8}  {'f1':>8}  {'auc':>8}")
    for i, m in enumerate(report.folds):
        cells = ["   n/a  " if m[n] is None else f"{m[n]:8.3f}" for n in ("accuracy", "f1", "auc")]
        print(f"{i:>9}  " + "  ".join(cells))
    for line in report.summary_lines():
        print(line)
    if sweep is not None:
        print(f"best window: {sweep.best_window} s")


# ------------------------------------------------------------------ commands


def cmd_gen_synth(cfg, args):
    spec = cfg.synthetic
    recs = generate_synthetic_corpus(spec)
    if args.unlabeled:
        recs = strip_labels(recs)
    manifest = io.write_corpus(args.out, recs, fmt=args.format)
    n_pat = len({r.patient_id for r in recs})
    pos = sum(1 for r in recs if r.label == 1)
    neg = sum(1 for r in recs if r.label == 0)
    print(f"wrote {manifest}")
    print(f"patients: {n_pat}  recordings: {len(recs)}  class 0/1/unlabeled: "
          f"{neg}/{pos}/{len(recs) - pos - neg}")
    return EXIT_OK


def cmd_pretrain(cfg, args):
    _require(cfg.paths.pretrain_manifest, "pretrain manifest")
    out = _run_dir(cfg)
    C.dump_config(cfg, out / "config.json")
    _, ckpt = _do_pretrain(cfg, out)
    print(f"{cfg.ssl.method}: checkpoint {ckpt}")
    return EXIT_OK


def cmd_embed(cfg, args):
    enc, _, _ = load_encoder(_require(cfg.paths.checkpoint, "checkpoint"))
    table = _table(cfg, cfg.paths.manifest)
    emb = embed_segments(enc, table.values)
    out = Path(args.out)
    write_embeddings_csv(out, table.segment_ids(), emb)
    print(f"wrote {len(emb)} embeddings of dim {emb.shape[1]} to {out}")
    return EXIT_OK


def cmd_evaluate(cfg, args):
    table = _table(cfg, cfg.paths.manifest)
    out = _run_dir(cfg)
    C.dump_config(cfg, out / "config.json")
    enc = _encoder(cfg, out)
    meta = {"method": cfg.ssl.method, "config_hash": cfg.config_hash()}
    output = run_ssl_experiment(table, enc, cfg.probe, _eval_config(cfg, args.shuffle_labels), meta)
    sweep = _emit_report(cfg, out, output, "ssl_probe",
                         {"method": cfg.ssl.method, "probe": cfg.probe.kind,
                          "shuffled_labels": bool(args.shuffle_labels)})
    _print_summary(f"{cfg.ssl.method} + {cfg.probe.kind}", output.report, cfg, sweep)
    return EXIT_OK


def cmd_evaluate_supervised(cfg, args):
    table = _table(cfg, cfg.paths.manifest)
    out = _run_dir(cfg)
    C.dump_config(cfg, out / "config.json")
    output = run_supervised_experiment(table, _eval_config(cfg, args.shuffle_labels),
                                       cfg.encoder, cfg.supervised, {"config_hash": cfg.config_hash()})
    rows = []
    for rec in output.audit:
        for e, (tr, va) in enumerate(zip(rec.pop("train_losses"), rec.pop("val_losses"))):
            rows.append((rec["fold"], e + 1, repr(tr), repr(va), cfg.config_hash()))
    _write_csv(out / "loss_curve.csv", ["fold", "epoch", "train_loss", "val_loss", "config_hash"], rows)
    sweep = _emit_report(cfg, out, output, "supervised",
                         {"shuffled_labels": bool(args.shuffle_labels)})
    _print_summary("supervised baseline", output.report, cfg, sweep)
    return EXIT_OK


def cmd_sweep_window(cfg, args):
    out = _run_dir(cfg)
    if args.strips is not None:
        strips = read_strips(_require(args.strips, "strip predictions"))
    else:
        table = _table(cfg, cfg.paths.manifest)
        enc = _encoder(cfg, out)
        strips = run_ssl_experiment(table, enc, cfg.probe, _eval_config(cfg)).strips
    C.dump_config(cfg, out / "config.json")
    sweep = sweep_window(strips, cfg.window_grid)
    _write_sweep(out / "window_sweep.csv", sweep, cfg.config_hash())
    print(f"{'window_s':>9}  {'accuracy':>8}  {'f1':>8}")
    for w, a, f in sweep.rows():
        print(f"{w:>9}  {a:8.3f}  {f:8.3f}")
    print(f"best window: {sweep.best_window} s")
    return EXIT_OK


# ------------------------------------------------------------------ parsing


def _common(p, seed_required=False):
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--out", help="run directory (corpus directory for gen-synth, CSV file for embed)")
    p.add_argument("--jobs", type=int, help="fold-level worker processes")
    p.add_argument("-v", "--verbose", action="store_true")


def _data_flags(p):
    p.add_argument("--manifest")
    p.add_argument("--pretrain-manifest")
    p.add_argument("--checkpoint")
    p.add_argument("--low-hz", type=float)
    p.add_argument("--high-hz", type=float)


def _ssl_flags(p):
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batches-per-epoch", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--lr", type=float)


def _eval_flags(p):
    p.add_argument("--probe", choices=KINDS)
    p.add_argument("--k", type=int)
    p.add_argument("--label-budget", type=int)
    p.add_argument("--shuffle-labels", action="store_true", help="permutation-null control")
    p.add_argument("--window-grid", type=int, nargs="+")


def build_parser():
    parser = argparse.ArgumentParser(prog="ecgssl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic corpus (manifest + signals)")
    _common(p)
    p.add_argument("--n-patients-per-class", type=int)
    p.add_argument("--recordings-per-patient", type=int)
    p.add_argument("--duration-s", type=float)
    p.add_argument("--sample-rate-hz", type=float)
    p.add_argument("--format", choices=("f32", "csv"), default="f32")
    p.add_argument("--unlabeled", action="store_true", help="write label: null for every recording")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("pretrain", help="pretrain an encoder on an unlabeled manifest")
    _common(p)
    _data_flags(p)
    _ssl_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("embed", help="write embeddings of every segment to CSV")
    _common(p)
    _data_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("evaluate", help="cross-validated SSL-probe evaluation")
    _common(p, seed_required=True)
    _data_flags(p)
    _ssl_flags(p)
    _eval_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("evaluate-supervised", help="cross-validated supervised baseline")
    _common(p, seed_required=True)
    _data_flags(p)
    _eval_flags(p)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.set_defaults(func=cmd_evaluate_supervised)

    p = sub.add_parser("sweep-window", help="windowed-inference sweep over window sizes")
    _common(p, seed_required=True)
    _data_flags(p)
    _ssl_flags(p)
    _eval_flags(p)
    p.add_argument("--strips", help="strips.csv from an earlier evaluate run")
    p.set_defaults(func=cmd_sweep_window)
    return parser


def resolve_config(args):
    cfg = C.load_config(_require(args.config, "config file")) if args.config else C.ExperimentConfig()
    g = lambda name: getattr(args, name, None)  # noqa: E731
    if args.seed is not None:
        cfg = C.with_seed(cfg, args.seed)
    cfg = C.override(cfg, None, jobs=g("jobs"))
    if g("window_grid") is not None:
        cfg = C.override(cfg, None, window_grid=tuple(args.window_grid))
    cfg = C.override(cfg, "paths", manifest=g("manifest"), pretrain_manifest=g("pretrain_manifest"),
                     checkpoint=g("checkpoint"))
    if args.command != "embed":
        cfg = C.override(cfg, "paths", output_dir=g("out"))
    cfg = C.override(cfg, "sigproc", low_hz=g("low_hz"), high_hz=g("high_hz"))
    cfg = C.override(cfg, "ssl", method=g("method"), epochs=g("epochs"),
                     batches_per_epoch=g("batches_per_epoch"), batch_size=g("batch_size"),
                     temperature=g("temperature"), lr=g("lr"))
    cfg = C.override(cfg, "probe", kind=g("probe"))
    cfg = C.override(cfg, "cv", k=g("k"), label_budget=g("label_budget"))
    cfg = C.override(cfg, "supervised", max_epochs=g("max_epochs"), patience=g("patience"))
    cfg = C.override(cfg, "synthetic", n_patients_per_class=g("n_patients_per_class"),
                     recordings_per_patient=g("recordings_per_patient"), duration_s=g("duration_s"),
                     sample_rate_hz=g("sample_rate_hz"),
                     seed=args.seed if args.command == "gen-synth" else None)
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("gen-synth", "embed") and not args.out:
        parser.error("--out is required")
    try:
        try:
            cfg = resolve_config(args)
        except TypeError as exc:  # wrong field types in a config file
            raise ConfigurationError(str(exc)) from exc
        return args.func(cfg, args)
    except (FoldError, LeakageError) as exc:
        fold = getattr(exc, "fold", None)
        print(f"error: runtime failure{'' if fold is None else f' in fold {fold}'}: {exc}",
              file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigurationError, json.JSONDecodeError) as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, DataError) as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EcgSslError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
