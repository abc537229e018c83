"""Command-line entry point: generate, train, evaluate, predict, inspect, report.

Every subcommand echoes its effective configuration to stderr as ``key=value``
lines. That block is itself a valid ``--config`` file, so any run can be
repeated from its own log. Flags given on the command line override values
read from a config file.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pnm
from .dataset import ENCODINGS, ONEHOT, TEST, TRAIN, ClassId, decode_prediction, load_dataset, split_per_class
from .errors import GeezError
from .evaluation import evaluate, overall_report, read_metrics_csv
from .imaging import N_FEATURES, preprocess
from .network import ACTIVATIONS, LOGISTIC, Architecture, forward
from .optimizer import CgConfig, CgTrace
from .synthgen import PerturbationConfig, generate_dataset
from .training import TrainConfig, derive_seed, load_model, read_metadata, save_model, sidecar_path, train

PROG = "geeznum"
AUTO = "auto"


class UsageError(Exception):
    """Bad invocation detected after argparse (config file keys, flag values)."""


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _float_list(n: int):
    def parse(text: str) -> tuple[float, ...]:
        try:
            values = tuple(float(v) for v in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}") from None
        if len(values) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
        return values

    parse.__name__ = f"{n} numbers"
    return parse


def _optional_int(text: str):
    if text.strip().lower() in (AUTO, ""):
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or {AUTO!r}, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _optional_path(text: str):
    return None if text.strip().lower() in (AUTO, "") else text


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0,
                   help="master seed; every random stream is derived from it (default: 0)")


def _add_config(p):
    p.add_argument("--config", metavar="FILE",
                   help="key=value file using the flag names without dashes; command-line flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Offline Geez numeral recognition.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    g = sub.add_parser("generate", help="write a deterministic synthetic dataset",
                       description="Render perturbed copies of the bundled templates as NN/jjj.pgm.")
    _add_config(g)
    g.add_argument("--out", required=True, help="output dataset directory")
    _add_seed(g)
    g.add_argument("--per-class", type=int, default=28, help="images per class (default: 28)")
    g.add_argument("--max-translation", type=int, default=1, help="max shift in pixels each axis (default: 1)")
    g.add_argument("--rotation", type=float, default=10.0, help="rotation range in degrees, +- (default: 10)")
    g.add_argument("--scale", type=_float_list(2), default=(0.8, 1.2), metavar="LO,HI",
                   help="scale factor range (default: 0.8,1.2)")
    g.add_argument("--noise", type=float, default=0.02, help="salt-and-pepper flip probability (default: 0.02)")
    g.add_argument("--morphology", type=_float_list(3), default=(0.6, 0.2, 0.2), metavar="NONE,DILATE,ERODE",
                   help="stroke-width change weights (default: 0.6,0.2,0.2)")
    g.add_argument("--margin", type=int, default=0, help="extra blank border in pixels (default: 0)")
    g.add_argument("--clean", type=_bool, nargs="?", const=True, default=False, metavar="BOOL",
                   help="zero-strength perturbation: templates copied as-is (default: false)")
    g.add_argument("--jobs", type=int, default=1, help="worker threads (default: 1)")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="split a dataset and train a model",
                       description="Train the recognizer by full-batch PR+ conjugate gradient.")
    _add_config(t)
    t.add_argument("--data", required=True, help="dataset root with NN/ class folders")
    t.add_argument("--model", required=True, help="output model file (GEEZMLP1)")
    _add_seed(t)
    t.add_argument("--hidden", type=_int_list, default=(20, 15, 10), metavar="N,N,...",
                   help="hidden layer sizes (default: 20,15,10)")
    t.add_argument("--hidden-activation", choices=ACTIVATIONS, default=LOGISTIC,
                   help="hidden activation (default: logistic)")
    t.add_argument("--output-activation", choices=ACTIVATIONS, default=LOGISTIC,
                   help="output activation (default: logistic)")
    t.add_argument("--encoding", choices=ENCODINGS, default=ONEHOT, help="target encoding (default: onehot)")
    t.add_argument("--max-iter", type=int, default=1000, help="CG iteration cap (default: 1000)")
    t.add_argument("--grad-tol", type=float, default=1e-6, help="stop when max |gradient| <= this (default: 1e-6)")
    t.add_argument("--loss-goal", type=float, default=1e-5, help="stop when loss <= this (default: 1e-5)")
    t.add_argument("--c1", type=float, default=1e-4, help="Wolfe sufficient-decrease constant (default: 1e-4)")
    t.add_argument("--c2", type=float, default=0.1, help="Wolfe curvature constant (default: 0.1)")
    t.add_argument("--max-ls-evals", type=int, default=40, help="line search evaluation budget (default: 40)")
    t.add_argument("--restart-interval", type=_optional_int, default=None, metavar="N|auto",
                   help="forced steepest-descent restart period; auto = 2 x parameter count (default: auto)")
    t.add_argument("--n-init", type=int, default=5,
                   help="seeded starts; lowest training loss is kept (default: 5)")
    t.add_argument("--train-per-class", type=int, default=23, help="training samples per class (default: 23)")
    t.add_argument("--test-per-class", type=int, default=5, help="held-out samples per class (default: 5)")
    t.add_argument("--trace", type=_optional_path, default=None, metavar="PATH|auto",
                   help="trace CSV path; auto = <model>.trace.csv (default: auto)")
    t.add_argument("--jobs", type=int, default=1, help="image loading threads (default: 1)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a model on its train and test splits",
                       description="Re-create the model's split and write metrics and confusion CSVs.")
    _add_config(e)
    e.add_argument("--data", required=True, help="dataset root the model was trained on")
    e.add_argument("--model", required=True, help="model file")
    e.add_argument("--out", type=_optional_path, default=None, metavar="DIR|auto",
                   help="metrics directory; auto = <model>.metrics (default: auto)")
    e.add_argument("--jobs", type=int, default=1, help="image loading threads (default: 1)")
    e.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify one image",
                       description="Print class id, numeric value and codepoint for one PBM/PGM/PPM image.")
    _add_config(p)
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--image", required=True, help="Netpbm image (P1-P6)")
    p.add_argument("--threshold", type=_optional_int, default=None, metavar="T|auto",
                   help="binarization threshold 1..255; auto = Otsu (default: auto)")
    p.set_defaults(func=cmd_predict)

    i = sub.add_parser("inspect", help="print a model's header and metadata")
    _add_config(i)
    i.add_argument("--model", required=True, help="model file")
    i.set_defaults(func=cmd_inspect)

    r = sub.add_parser("report", help="summarize a training trace and optional metrics",
                       description="Read a trace CSV (and metrics CSVs) and print a summary.")
    _add_config(r)
    r.add_argument("--trace", required=True, help="trace CSV written by train")
    r.add_argument("--metrics", type=_optional_path, default=None, metavar="DIR|auto",
                   help="metrics directory written by evaluate; auto = none (default: auto)")
    r.add_argument("--every", type=int, default=50, help="print every Nth trace row (default: 50)")
    r.set_defaults(func=cmd_report)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _read_config(path: str, sub: argparse.ArgumentParser) -> dict:
    """Parse a key=value file into defaults for ``sub``; unknown keys are usage errors."""
    actions = {a.dest: a for a in sub._actions if a.option_strings and a.dest not in ("help", "config")}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        action = actions.get(dest)
        if action is None:
            raise UsageError(f"{path}:{n}: unknown key {key!r} for {sub.prog}")
        try:
            value = action.type(raw) if action.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"{path}:{n}: bad value for {key}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"{path}:{n}: {key} must be one of {list(action.choices)}")
        values[dest] = value
    return values


def _format_value(value) -> str:
    if value is None:
        return AUTO
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def effective_config(args: argparse.Namespace) -> str:
    items = {k: v for k, v in vars(args).items() if k not in ("func", "command", "config")}
    lines = [f"# {PROG} {args.command} effective configuration"]
    lines += [f"{k.replace('_', '-')}={_format_value(v)}" for k, v in items.items()]
    return "\n".join(lines) + "\n"


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    if path is not None and argv and not argv[0].startswith("-"):
        try:
            sub = _subparser(parser, argv[0])
        except KeyError:
            sub = None
        if sub is not None:
            values = _read_config(path, sub)
            for action in sub._actions:
                if action.dest in values:
                    action.required = False
            sub.set_defaults(**values)
    return parser.parse_args(argv)


def _require_positive(**values):
    for name, v in values.items():
        if v < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be at least 1, got {v}")


def cmd_generate(args) -> int:
    _require_positive(per_class=args.per_class, jobs=args.jobs)
    if args.clean:
        cfg = PerturbationConfig.identity(seed=args.seed)
    else:
        cfg = PerturbationConfig(max_translation=args.max_translation, rotation_range=args.rotation,
                                 scale_range=args.scale, noise_prob=args.noise, morphology=args.morphology,
                                 margin=args.margin, seed=args.seed)
    manifest = generate_dataset(args.out, per_class=args.per_class, cfg=cfg, n_jobs=args.jobs)
    print(f"wrote {len(manifest.entries)} images to {args.out}")
    for path, reason in manifest.failures:
        print(f"skipped {path}: {reason}", file=sys.stderr)
    return 0


def _train_config(args, arch_inputs: int = N_FEATURES) -> TrainConfig:
    width = 5 if args.encoding != ONEHOT else 20
    arch = Architecture((arch_inputs, *args.hidden, width), args.hidden_activation, args.output_activation,
                        args.encoding)
    cg = CgConfig(max_iterations=args.max_iter, gradient_tolerance=args.grad_tol, loss_goal=args.loss_goal,
                  wolfe_c1=args.c1, wolfe_c2=args.c2, max_line_search_evals=args.max_ls_evals,
                  restart_interval=args.restart_interval)
    return TrainConfig(arch, cg, seed=args.seed, n_init=args.n_init)


def cmd_train(args) -> int:
    _require_positive(n_init=args.n_init, train_per_class=args.train_per_class, jobs=args.jobs)
    if args.test_per_class < 0:
        raise UsageError("--test-per-class must be non-negative")
    cfg = _train_config(args)
    ds, _ = load_dataset(args.data, n_jobs=args.jobs)
    split_seed = derive_seed(args.seed, "split")
    ds = split_per_class(ds, args.train_per_class, args.test_per_class, seed=split_seed)
    model, trace = train(ds.subset(TRAIN), cfg)
    model.metadata.update({
        "split_seed": str(split_seed),
        "train_per_class": str(args.train_per_class),
        "test_per_class": str(args.test_per_class),
    })
    save_model(model, args.model)
    trace_path = args.trace or f"{args.model}.trace.csv"
    trace.to_csv(trace_path)
    train_acc = evaluate(model, ds.subset(TRAIN), TRAIN).accuracy
    meta = model.metadata
    print(f"iterations={meta['iterations']} stop_reason={meta['stop_reason']} "
          f"final_loss={float(meta['final_loss']):.6g} train_accuracy={train_acc * 100:.2f}%")
    print(f"model={args.model} sidecar={sidecar_path(args.model)} trace={trace_path}")
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    meta = model.metadata
    missing = [k for k in ("split_seed", "train_per_class", "test_per_class") if k not in meta]
    if missing:
        raise GeezError(f"{sidecar_path(args.model)} lacks {', '.join(missing)}; cannot re-create the split")
    ds, _ = load_dataset(args.data, n_jobs=args.jobs)
    ds = split_per_class(ds, int(meta["train_per_class"]), int(meta["test_per_class"]), seed=int(meta["split_seed"]))
    train_split = ds.subset(TRAIN)
    if meta.get("dataset_digest") and train_split.digest() != meta["dataset_digest"]:
        print("warning: training split differs from the one the model was trained on", file=sys.stderr)
    test_split = ds.subset(TEST)
    report = overall_report(evaluate(model, train_split, TRAIN),
                            evaluate(model, test_split, TEST) if len(test_split) else None)
    out = Path(args.out or f"{args.model}.metrics")
    report.write_csv(out)
    sys.stdout.write(report.to_text())
    print(f"pooled accuracy {report.pooled_accuracy * 100:.2f}%; metrics written to {out}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    x = preprocess(pnm.read(args.image), threshold=args.threshold)
    out, _ = forward(model.params, x[None, :].astype(np.float64))
    cls: ClassId = decode_prediction(out[0], model.encoding)
    print(f"class {cls.folder} value {cls.value} codepoint U+{cls.codepoint:04X} {cls.char}")
    return 0


def cmd_inspect(args) -> int:
    data = Path(args.model).read_bytes()
    model = load_model(args.model)
    arch = model.arch
    print(f"format=GEEZMLP1 bytes={len(data)} parameters={arch.n_params}")
    print(f"layers={','.join(map(str, arch.layer_sizes))}")
    print(f"activations={','.join(arch.activations)}")
    print(f"encoding={arch.target_encoding}")
    side = sidecar_path(args.model)
    if side.exists():
        for k, v in read_metadata(side).items():
            print(f"meta.{k}={v}")
    else:
        print("meta: no sidecar file")
    return 0


def cmd_report(args) -> int:
    _require_positive(every=args.every)
    trace = CgTrace.from_csv(args.trace)
    if not trace.steps:
        raise GeezError(f"{args.trace} has no trace rows")
    first, last = trace.steps[0], trace.steps[-1]
    restarts = sum(s.restart for s in trace.steps[1:])
    print(f"iterations={trace.n_iterations} restarts={restarts}")
    print(f"loss {first.loss:.6g} -> {last.loss:.6g}; max|g| {first.grad_inf_norm:.3g} -> {last.grad_inf_norm:.3g}")
    print(f"{'iter':>6} {'loss':>12} {'max|g|':>10} {'alpha':>10} {'beta':>8} restart")
    for s in trace.steps:
        if s.iteration % args.every == 0 or s is last:
            print(f"{s.iteration:>6} {s.loss:>12.6g} {s.grad_inf_norm:>10.3g} {s.alpha:>10.3g} "
                  f"{s.beta:>8.3g} {int(s.restart)}")
    if args.metrics:
        from .evaluation import REFERENCE_OVERALL_ACCURACY, REFERENCE_TEST_ACCURACY, REFERENCE_TRAIN_ACCURACY

        refs = {TRAIN: REFERENCE_TRAIN_ACCURACY, TEST: REFERENCE_TEST_ACCURACY}
        n = c = 0
        print(f"{'split':<8}{'n':>6}{'correct':>9}{'accuracy':>10}{'ref':>9}")
        for split in (TRAIN, TEST):
            path = Path(args.metrics) / f"metrics_{split}.csv"
            if not path.exists():
                continue
            row = read_metrics_csv(path)
            n, c = n + row["n"], c + row["correct"]
            print(f"{split:<8}{row['n']:>6}{row['correct']:>9}{row['accuracy'] * 100:>9.2f}%{refs[split] * 100:>8.2f}%")
        if n:
            print(f"{'pooled':<8}{n:>6}{c:>9}{c / n * 100:>9.2f}%{REFERENCE_OVERALL_ACCURACY * 100:>8.2f}%")
    return 0


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    sys.stderr.write(effective_config(args))
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except (GeezError, ValueError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
