"""Command-line interface: fit, eval, synth, and grid subcommands.

Machine-readable output goes to stdout or files; progress lines go to
stderr.  Exit codes: 0 success, 1 validation failure, 2 numerical failure,
3 I/O failure.
"""

import argparse
import itertools
import json
import os
import sys
import time

import numpy as np

from .datasets import HyperParams, labels_from_onehot
from .exceptions import (GenerationError, MatrixFormatError, SingularSystemError,
                         ValidationError)
from .io import (SynthSpec, _atomic_write, load_dataset, load_labels, save_dataset,
                 save_labels, save_matrix, synth_generate)
from .metrics import evaluate_gzsl, evaluate_standard
from .solver import fit as solver_fit

HP_FIELDS = ("rho", "omega", "alpha", "theta", "mode", "epsilon", "max_outer",
             "max_inner_unseen", "max_inner_seen", "ridge_tau", "init_strategy",
             "kmeans_restarts", "seed")
RUN_FIELDS = ("manifest", "output_dir", "repeats") + HP_FIELDS


def _load_config(path, overrides, allowed):
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ValidationError("unknown config keys: %s" % ", ".join(unknown))
    for key, value in overrides.items():
        if value is not None:
            doc[key] = value
    return doc


def _hyperparams(cfg, seed_offset=0, **replacements):
    kwargs = {k: cfg[k] for k in HP_FIELDS if k in cfg}
    kwargs.update(replacements)
    kwargs["seed"] = int(kwargs.get("seed", 0)) + seed_offset
    for key in ("max_outer", "max_inner_unseen", "max_inner_seen", "kmeans_restarts"):
        if key in kwargs:
            kwargs[key] = int(kwargs[key])
    return HyperParams(**kwargs)


def _evaluate(labels, unseen, seen, mode):
    if unseen.truth is None:
        return None
    if mode == "gzsl":
        return evaluate_gzsl(labels, unseen.truth, seen.num_classes, unseen.num_classes)
    return evaluate_standard(labels, unseen.truth)


def _write_history(history, path):
    lines = ["iteration,objective,err1,err2"]
    for i in range(history.outer_iterations):
        lines.append("%d,%.17g,%.17g,%.17g" % (
            i + 1, history.objective_per_outer[i],
            history.err1_per_outer[i], history.err2_per_outer[i],
        ))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))


def _run_single_fit(seen, unseen, hp, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    state, history = solver_fit(seen, unseen, hp)
    wall = time.perf_counter() - start
    for name, M in state.matrices().items():
        save_matrix(M, os.path.join(out_dir, name + ".hplm"))
    labels = labels_from_onehot(state.C_u)
    save_labels(labels, os.path.join(out_dir, "labels.csv"))
    _write_history(history, os.path.join(out_dir, "history.csv"))
    report = _evaluate(labels, unseen, seen, hp.mode)
    entry = {
        "seed": hp.seed,
        "wall_clock_seconds": wall,
        "converged": history.converged,
        "outer_iterations": history.outer_iterations,
    }
    if report is not None:
        entry["evaluation"] = report.to_dict()
    return entry, report


def cmd_fit(args):
    cfg = _load_config(args.config, _collect_overrides(args), RUN_FIELDS)
    if "manifest" not in cfg or "output_dir" not in cfg:
        raise ValidationError("config requires manifest and output_dir")
    repeats = int(cfg.get("repeats", 1))
    if repeats < 1:
        raise ValidationError("repeats must be at least 1, got %d" % repeats)
    seen, unseen = load_dataset(cfg["manifest"])
    out_root = cfg["output_dir"]
    os.makedirs(out_root, exist_ok=True)
    start = time.perf_counter()
    entries, reports = [], []
    for r in range(repeats):
        hp = _hyperparams(cfg, seed_offset=r)
        print("fit repeat %d/%d (seed %d)" % (r + 1, repeats, hp.seed), file=sys.stderr)
        entry, report = _run_single_fit(seen, unseen, hp, os.path.join(out_root, "repeat_%02d" % r))
        entries.append(entry)
        if report is not None:
            reports.append(report)
    summary = {
        "config": dict(cfg),
        "wall_clock_seconds": time.perf_counter() - start,
        "converged": all(e["converged"] for e in entries),
        "repeats": entries,
    }
    if reports:
        summary["evaluation"] = {
            "acc_unseen": float(np.mean([r.acc_unseen for r in reports])),
            "acc_seen": (float(np.mean([r.acc_seen for r in reports]))
                         if reports[0].acc_seen is not None else None),
            "harmonic_mean": (float(np.mean([r.harmonic_mean for r in reports]))
                              if reports[0].harmonic_mean is not None else None),
        }
    summary_path = os.path.join(out_root, "summary.json")
    _atomic_write(summary_path, (json.dumps(summary, indent=2) + "\n").encode("ascii"))
    print(summary_path)
    return 0


def cmd_eval(args):
    predictions = load_labels(args.predictions)
    truth = load_labels(args.truth)
    if predictions.size != truth.size:
        raise ValidationError(
            "got %d predictions for %d truth labels" % (predictions.size, truth.size)
        )
    if args.mode == "gzsl":
        if args.m is None or args.n is None:
            raise ValidationError("gzsl evaluation requires --m and --n")
        report = evaluate_gzsl(predictions, truth, args.m, args.n)
    else:
        report = evaluate_standard(predictions, truth)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_synth(args):
    spec = SynthSpec.from_file(args.spec)
    if args.seed is not None:
        doc = spec.to_dict()
        doc["seed"] = args.seed
        spec = SynthSpec(**doc)
    print("generating %d seen + %d candidate classes (seed %d)"
          % (spec.m, spec.n, spec.seed), file=sys.stderr)
    seen, unseen, state = synth_generate(spec)
    manifest_path = save_dataset(args.output_dir, seen, unseen, state=state)
    print(manifest_path)
    return 0


def cmd_grid(args):
    grid_fields = ("rho", "omega", "alpha", "theta")
    cfg = _load_config(args.config, _collect_overrides(args, skip=grid_fields), RUN_FIELDS)
    if "manifest" not in cfg or "output_dir" not in cfg:
        raise ValidationError("config requires manifest and output_dir")
    seen, unseen = load_dataset(cfg["manifest"])
    if unseen.truth is None:
        raise ValidationError("grid search requires a manifest with truth_u")
    axes = []
    for key in grid_fields:
        values = cfg.get(key, HyperParams.__dataclass_fields__[key].default)
        axes.append([float(v) for v in (values if isinstance(values, list) else [values])])
    os.makedirs(cfg["output_dir"], exist_ok=True)
    repeats = int(cfg.get("repeats", 1))
    rows = []
    for rho, omega, alpha, theta in itertools.product(*axes):
        accs = []
        for r in range(repeats):
            hp = _hyperparams(cfg, seed_offset=r, rho=rho, omega=omega, alpha=alpha, theta=theta)
            state, _ = solver_fit(seen, unseen, hp)
            labels = labels_from_onehot(state.C_u)
            report = _evaluate(labels, unseen, seen, hp.mode)
            accs.append(report.harmonic_mean if hp.mode == "gzsl" else report.acc_unseen)
        acc = float(np.mean(accs))
        rows.append((rho, omega, alpha, theta, acc))
        print("grid rho=%g omega=%g alpha=%g theta=%g -> %.4f"
              % (rho, omega, alpha, theta, acc), file=sys.stderr)
    rows.sort(key=lambda row: -row[4])
    lines = ["rho,omega,alpha,theta,acc"]
    lines += ["%.17g,%.17g,%.17g,%.17g,%.17g" % row for row in rows]
    csv_path = os.path.join(cfg["output_dir"], "grid.csv")
    _atomic_write(csv_path, ("\n".join(lines) + "\n").encode("ascii"))
    best = rows[0]
    print(json.dumps({"rho": best[0], "omega": best[1], "alpha": best[2],
                      "theta": best[3], "acc": best[4]}))
    return 0


def _collect_overrides(args, skip=()):
    overrides = {}
    for key in RUN_FIELDS:
        if key in skip:
            continue
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return overrides


def _add_config_flags(sub, with_grid_axes=True):
    sub.add_argument("config", help="JSON run configuration")
    sub.add_argument("--manifest", help="dataset manifest path")
    sub.add_argument("--output-dir", dest="output_dir", help="directory for outputs")
    sub.add_argument("--repeats", type=int)
    if with_grid_axes:
        for key in ("rho", "omega", "alpha", "theta"):
            sub.add_argument("--" + key, type=float)
    sub.add_argument("--mode", choices=("transductive", "inductive", "gzsl"))
    sub.add_argument("--epsilon", type=float)
    sub.add_argument("--max-outer", dest="max_outer", type=int)
    sub.add_argument("--max-inner-unseen", dest="max_inner_unseen", type=int)
    sub.add_argument("--max-inner-seen", dest="max_inner_seen", type=int)
    sub.add_argument("--ridge-tau", dest="ridge_tau", type=float)
    sub.add_argument("--init-strategy", dest="init_strategy",
                     choices=("class-mean", "kmeans", "sample"))
    sub.add_argument("--kmeans-restarts", dest="kmeans_restarts", type=int)
    sub.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="protozsl",
        description="Zero-shot recognition via coupled prototype and dictionary learning",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_fit = subparsers.add_parser("fit", help="fit a model on a dataset manifest")
    _add_config_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_eval = subparsers.add_parser("eval", help="score predictions against truth labels")
    p_eval.add_argument("predictions", help="csv of predicted labels, one per line")
    p_eval.add_argument("truth", help="csv of true labels, one per line")
    p_eval.add_argument("--mode", choices=("standard", "gzsl"), default="standard")
    p_eval.add_argument("--m", type=int, help="number of seen classes (gzsl)")
    p_eval.add_argument("--n", type=int, help="number of unseen classes (gzsl)")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = subparsers.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("spec", help="JSON generator spec")
    p_synth.add_argument("--output-dir", dest="output_dir", required=True)
    p_synth.add_argument("--seed", type=int)
    p_synth.set_defaults(func=cmd_synth)

    p_grid = subparsers.add_parser("grid", help="grid-search rho/omega/alpha/theta")
    _add_config_flags(p_grid, with_grid_axes=False)
    p_grid.set_defaults(func=cmd_grid)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, MatrixFormatError, json.JSONDecodeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (SingularSystemError, GenerationError, FloatingPointError) as exc:
        print("numerical error: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("i/o error: %s" % exc, file=sys.stderr)
        return 3


def console_main():
    sys.exit(main())
