"""Command-line entry point: ``vtgen <command> [flags]``.

Exit codes: 0 success, 2 usage, 3 validation, 4 runtime fault (non-finite
loss, IO). A JSON config file given with ``--config`` supplies defaults for
the chosen command; explicit flags win. Each command writes a snapshot of
its effective arguments before doing any work, and that snapshot is itself
a valid ``--config`` file.
"""

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from vtgen import __version__, container
from vtgen.errors import TrainingFault, ValidationError

log = logging.getLogger("vtgen")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_FAULT = 0, 2, 3, 4
DATA_ENV = "XMDG_DATA_DIR"


class UsageError(Exception):
    pass


def _data_default():
    return os.environ.get(DATA_ENV)


def build_parser():
    parser = argparse.ArgumentParser(prog="vtgen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"vtgen {__version__}")
    parser.add_argument("--config", help="JSON file with default flag values")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    parser.commands = sub.choices

    p = sub.add_parser("prepare-data", help="build, pair, split and materialize a corpus")
    p.add_argument("--source", choices=["synthetic", "lmt"], default="synthetic")
    p.add_argument("--lmt-dir")
    p.add_argument("--out", help=f"output directory (default ${DATA_ENV})")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--originals", type=int, default=8)
    p.add_argument("--reps", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--desk-size", type=int, default=64)

    p = sub.add_parser("pretrain-classifier", help="train and freeze a label classifier")
    p.add_argument("--modality", choices=["visual", "tactile"])
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)

    p = sub.add_parser("train", help="adversarial training of one direction/variant")
    p.add_argument("--direction", choices=["t2v", "v2t"])
    p.add_argument("--variant", default="E")
    p.add_argument("--data")
    p.add_argument("--classifier", help="checkpoint of the input-modality classifier")
    p.add_argument("--eval-classifier", help="target-modality classifier; evaluates when given")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--out")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--plots", action="store_true")

    p = sub.add_parser("generate", help="run a trained generator on one input array")
    p.add_argument("--ckpt", help="run directory or checkpoint file")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--invert-to-signal", action="store_true")
    p.add_argument("--gl-iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("invert", help="Griffin-Lim inversion of a spectrogram file")
    p.add_argument("--spec")
    p.add_argument("--scale", choices=["amplitude", "log"], default="amplitude")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int)
    p.add_argument("--out")

    p = sub.add_parser("evaluate", help="metrics for runs, sequences or class sets")
    p.add_argument("--metric", choices=["accuracy", "fid", "dtw", "icv"])
    p.add_argument("--run")
    p.add_argument("--data")
    p.add_argument("--classifier", help="target-modality classifier checkpoint")
    p.add_argument("--split", default="test")
    p.add_argument("--modality", choices=["visual", "tactile"], default="tactile")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--out")
    p.add_argument("--plots", action="store_true")

    p = sub.add_parser("ablate", help="variants x directions table")
    p.add_argument("--data")
    p.add_argument("--directions", default="both")
    p.add_argument("--variants", default="A,B,C,D,E")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classifier-epochs", type=int, default=15)
    p.add_argument("--tactile-classifier")
    p.add_argument("--visual-classifier")
    p.add_argument("--out")
    p.add_argument("--plots", action="store_true")
    return parser


REQUIRED = {
    "prepare-data": ("out",),
    "pretrain-classifier": ("modality", "data", "out"),
    "train": ("direction", "data", "classifier", "out"),
    "generate": ("ckpt", "input", "out"),
    "invert": ("spec", "out"),
    "evaluate": ("metric",),
    "ablate": ("data", "out"),
}
METRIC_REQUIRED = {"accuracy": ("run", "data", "classifier"), "fid": ("run", "data", "classifier"),
                   "dtw": ("a", "b"), "icv": ("data",)}


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("a command is required")
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if defaults.get("command", args.command) != args.command:
            raise ValidationError(
                f"config is for {defaults['command']!r}, not {args.command!r}")
        defaults = {k.replace("-", "_"): v for k, v in defaults.items()
                    if k not in ("command", "config")}
        subparser = parser.commands[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(defaults) - known)
        if unknown:
            raise ValidationError(f"unknown config keys {unknown}")
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if getattr(args, "data", None) is None and hasattr(args, "data"):
        args.data = _data_default()
    if args.command == "prepare-data" and args.out is None:
        args.out = _data_default()
    needed = REQUIRED[args.command]
    if args.command == "evaluate" and args.metric:
        needed = needed + METRIC_REQUIRED[args.metric]
    missing = [n for n in needed if getattr(args, n, None) is None]
    if missing:
        parser.commands[args.command].print_usage(sys.stderr)
        raise UsageError("missing " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return args


def snapshot_doc(args):
    return {k: v for k, v in vars(args).items() if k not in ("config", "log_level")}


def snapshot(args, path):
    """Write the effective arguments; the file doubles as a --config input."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(snapshot_doc(args), indent=2, sort_keys=True))
    return path


def desk_train_config(direction, variant, steps, seed, batch_size, size):
    from vtgen.models import CriticConfig, GeneratorConfig
    from vtgen.training import TrainConfig

    return TrainConfig(direction=direction, variant=variant, steps=steps, seed=seed,
                       batch_size=batch_size, generator=GeneratorConfig(input_size=size),
                       critic=CriticConfig(input_size=size))


def _print(doc):
    print(json.dumps(doc, indent=2, sort_keys=True, default=str))


def cmd_prepare(args):
    from vtgen.dataset import prepare_corpus

    out = Path(args.out)
    snapshot(args, out / "command.json")
    manifest = prepare_corpus(out, source=args.source, n_classes=args.classes,
                              originals=args.originals, reps=args.reps, seed=args.seed,
                              desk_size=args.desk_size, lmt_dir=args.lmt_dir)
    _print({"manifest": str(out / "manifest.json"), "digest": manifest.digest,
            "pairs": len(manifest.pairs), "splits": manifest.split_counts()})


def cmd_pretrain(args):
    from vtgen.training import pretrain_classifier

    out = Path(args.out)
    snapshot(args, out.with_name(out.name + ".command.json"))
    res = pretrain_classifier(args.data, args.modality, epochs=args.epochs, seed=args.seed,
                              batch_size=args.batch_size, lr=args.lr, out=out)
    _print({"checkpoint": str(res.checkpoint), "val_accuracy": res.val_accuracy,
            "test_accuracy": res.test_accuracy})


def cmd_train(args):
    from vtgen.training import evaluate_run, load_classifier, train_gan

    clf, extra = load_classifier(args.classifier)
    expected = {"t2v": "tactile", "v2t": "visual"}[args.direction]
    if extra.get("modality") not in (None, expected):
        raise ValidationError(f"{args.direction} needs the {expected} classifier, "
                              f"got a {extra.get('modality')} one")
    cfg = desk_train_config(args.direction, args.variant, args.steps, args.seed,
                            args.batch_size, clf.cfg.input_size)
    art = train_gan(cfg, args.data, clf, args.out, overwrite=args.overwrite,
                    resume=args.resume, plots=args.plots, command=snapshot_doc(args))
    doc = {"run": str(art.run_dir), "checkpoint": str(art.last_checkpoint),
           "generator_steps": art.counters.generator_steps,
           "critic_steps": art.counters.critic_steps, "seconds": round(art.seconds, 1)}
    if args.eval_classifier:
        eval_clf, _ = load_classifier(args.eval_classifier)
        rep = evaluate_run(art.run_dir, args.data, eval_clf, out_dir=art.run_dir / "eval",
                           plots=args.plots)
        doc.update(accuracy=rep.accuracy, fid=rep.fid, fid_noise=rep.fid_baseline)
    _print(doc)


def cmd_generate(args):
    from vtgen.training import generate, load_run

    out = Path(args.out)
    snapshot(args, out.with_name(out.name + ".command.json"))
    run = load_run(args.ckpt)
    res = generate(run, container.load_array(args.input),
                   invert_to_signal=args.invert_to_signal, gl_iters=args.gl_iters,
                   gl_seed=args.seed)
    doc = {"out_of_distribution": res.out_of_distribution.tolist(),
           "confidence": res.confidence.tolist()}
    if args.invert_to_signal:
        spec_path = out.with_name(out.stem + ".spec" + out.suffix)
        container.save_array(spec_path, res.output)
        container.save_array(out, res.signal[0].samples)
        doc.update(signal=str(out), spectrogram=str(spec_path))
    else:
        container.save_array(out, res.output)
        doc.update(output=str(out))
    _print(doc)


def cmd_invert(args):
    from vtgen.signal_pipeline import Spectrogram, invert_spectrogram, unlog_scale

    out = Path(args.out)
    snapshot(args, out.with_name(out.name + ".command.json"))
    spec = Spectrogram(container.load_array(args.spec), args.scale)
    if args.scale == "log":
        spec = unlog_scale(spec)
    trace, errors = invert_spectrogram(spec, n_iters=args.iters, seed=args.seed,
                                       length=args.length)
    container.save_array(out, trace.samples)
    _print({"signal": str(out), "samples": len(trace), "final_error": float(errors[-1]),
            "iterations": len(errors)})


def cmd_evaluate(args):
    from vtgen import evaluation

    if args.out:
        snapshot(args, Path(args.out) / "command.json")
    if args.metric == "dtw":
        a, b = container.load_array(args.a), container.load_array(args.b)
        _print({"metric": "dtw", "distance": evaluation.dtw_distance(a, b)})
        return
    if args.metric == "icv":
        from vtgen.dataset import load_split

        split = load_split(args.data, args.split)
        groups = evaluation.group_by_class(split.modality(args.modality), split.labels)
        _print({"metric": "icv", "definition": evaluation.ICV_DEFINITION,
                "modality": args.modality, "split": args.split,
                "per_class": evaluation.intra_class_variance(groups)})
        return
    from vtgen.training import evaluate_run, load_classifier

    clf, _ = load_classifier(args.classifier)
    rep = evaluate_run(args.run, args.data, clf, split=args.split, out_dir=args.out,
                       plots=args.plots or args.out is not None)
    doc = {"metric": args.metric, "accuracy": rep.accuracy, "fid": rep.fid,
           "fid_noise": rep.fid_baseline, "confusion": rep.confusion}
    if args.metric == "fid":
        doc["fid_features"] = rep.notes["fid_features"]
    _print(doc)


def _directions(text):
    if text == "both":
        return ["t2v", "v2t"]
    dirs = [d.strip() for d in text.split(",") if d.strip()]
    bad = [d for d in dirs if d not in ("t2v", "v2t")]
    if bad or not dirs:
        raise ValidationError(f"--directions must be both, t2v or v2t (got {text!r})")
    return dirs


def run_ablation(data, out, directions, variants, steps, seed, classifiers, plots=False,
                 command=None):
    """Train every (direction, variant) and write the summary table."""
    from vtgen import evaluation, plotting
    from vtgen.training import MODALITY_OF, evaluate_run, train_gan, variant_key

    out = Path(out)
    rows = []
    for direction in directions:
        src, tgt = MODALITY_OF[direction]
        for variant in variants:
            key = variant_key(variant)
            t0 = time.time()
            cfg = desk_train_config(direction, key, steps, seed, 8,
                                    classifiers[src].cfg.input_size)
            run_dir = out / f"{direction}_{key}"
            art = train_gan(cfg, data, classifiers[src], run_dir, overwrite=True,
                            plots=plots, command=command)
            rep = evaluate_run(art.run_dir, data, classifiers[tgt], out_dir=run_dir / "eval",
                               plots=plots)
            rows.append({"direction": direction, "variant": cfg.variant_name,
                         "accuracy": rep.accuracy, "fid": rep.fid,
                         "fid_noise": rep.fid_baseline, "steps": steps,
                         "seconds": round(time.time() - t0, 1)})
            log.info("%s %s accuracy %.3f fid %.3f", direction, key, rep.accuracy, rep.fid)
    table = evaluation.write_table(rows, out / "table.csv")
    if plots:
        plotting.ablation_bars(rows, out / "ablation.png")
    return table, rows


def cmd_ablate(args):
    from vtgen.training import load_classifier, pretrain_classifier

    out = Path(args.out)
    snapshot(args, out / "command.json")
    directions = _directions(args.directions)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    classifiers = {}
    for modality in ("tactile", "visual"):
        given = getattr(args, f"{modality}_classifier")
        if given:
            classifiers[modality], _ = load_classifier(given)
        else:
            res = pretrain_classifier(args.data, modality, epochs=args.classifier_epochs,
                                      seed=args.seed, out=out / f"classifier_{modality}.pt")
            classifiers[modality] = res.classifier
    table, rows = run_ablation(args.data, out, directions, variants, args.steps, args.seed,
                               classifiers, plots=args.plots, command=snapshot_doc(args))
    _print({"table": str(table), "rows": rows})


COMMANDS = {
    "prepare-data": cmd_prepare,
    "pretrain-classifier": cmd_pretrain,
    "train": cmd_train,
    "generate": cmd_generate,
    "invert": cmd_invert,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
}


def run(argv=None) -> int:
    try:
        args = parse(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help/--version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"vtgen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"vtgen: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"vtgen: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TrainingFault as exc:
        where = f" (step {exc.step}, last checkpoint {exc.last_checkpoint})" if exc.step is not None else ""
        print(f"vtgen: training fault: {exc}{where}", file=sys.stderr)
        return EXIT_FAULT
    except OSError as exc:
        print(f"vtgen: IO error: {exc}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
