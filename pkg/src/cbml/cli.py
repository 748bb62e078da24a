"""Command-line harness: ``cbml <subcommand> ...``.

Every subcommand that writes files also writes ``<primary output>.manifest.json``
recording the resolved configuration, seed, paths and argv, so a run can be
repeated with :func:`replay_manifest`.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .bayes import fit_similarity_gaussians, linear_ratio_fit, ratio_fit
from .dataio import config_items, load_csv, parse_config, save_csv, split_by_class, synth_blobs
from .errors import CBMLError, DegenerateFit
from .evaluation import embed_and_normalize, similarity_histogram
from .experiments import SWEEP_COLUMNS, evaluate, initial_encoder, sweep, train_and_evaluate
from .geometry import similarity_matrix
from .gradcheck import REL_TOL, run_gradcheck
from .loss import suggest_parameters
from .modelio import load_model, save_model
from .pairs import partition_pairs
from .pseudo import PseudoConfig, pseudo_train, write_labels_csv
from .trainer import Encoder, TrainConfig, write_trace_csv

SEED_ENV = "CBML_SEED"


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CBMLError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _sweep_spec(text: str) -> tuple[str, list[str]]:
    if "=" not in text:
        raise argparse.ArgumentTypeError("sweep must look like key=v1,v2,...")
    key, values = text.split("=", 1)
    vals = [v.strip() for v in values.split(",") if v.strip()]
    if not key.strip() or not vals:
        raise argparse.ArgumentTypeError("sweep needs a key and at least one value")
    return key.strip(), vals


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _jsonable(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _write_json(path, data) -> None:
    _write_atomic(Path(path), json.dumps(_jsonable(data), indent=2) + "\n")


def write_manifest(primary: Path, command: str, argv: list[str], config: dict, seed: int,
                   inputs: dict, outputs: dict, started: float) -> Path:
    manifest = {
        "subcommand": command,
        "argv": argv,
        "cwd": os.getcwd(),
        "config": config,
        "seed": seed,
        "inputs": inputs,
        "outputs": outputs,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "version": __version__,
    }
    path = Path(str(primary) + ".manifest.json")
    _write_json(path, manifest)
    return path


def replay_manifest(path) -> int:
    """Re-run the command recorded in a manifest."""
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    here = os.getcwd()
    os.chdir(manifest.get("cwd", here))
    try:
        return run(manifest["argv"])
    finally:
        os.chdir(here)


def _resolve_config(path: str | None, seed: int | None) -> TrainConfig:
    base = TrainConfig(seed=default_seed())
    cfg = base if path is None else parse_config(Path(path).read_text(encoding="utf-8"), base)
    if seed is not None:
        cfg = parse_config(f"seed = {seed}", cfg)
    return cfg


def _load_encoder(path: str | None, d_in: int) -> Encoder:
    if path is None:
        return Encoder("identity", d_in, d_in)
    return load_model(path)


def _cmd_synth(args, argv):
    started = time.time()
    seed = default_seed() if args.seed is None else args.seed
    ds = synth_blobs(args.classes, args.per_class, args.dim, args.center_scale, args.noise, seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(out, ds)
    config = {k: getattr(args, k) for k in ("classes", "per_class", "dim", "center_scale", "noise")}
    write_manifest(out, "synth", argv, config, seed, {}, {"data": str(out)}, started)
    return 0


def _cmd_train(args, argv):
    started = time.time()
    cfg = _resolve_config(args.config, args.seed)
    ds = load_csv(args.data)
    outcome = train_and_evaluate(ds, cfg, args.split, args.ks)
    model = Path(args.out_model)
    model.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, outcome.encoder)
    trace = Path(args.out_trace) if args.out_trace else model.with_suffix(".trace.csv")
    write_trace_csv(trace, outcome.trace)
    report_dir = Path(args.report_dir) if args.report_dir else model.parent
    report_dir.mkdir(parents=True, exist_ok=True)
    outcome.train_report.write_json(report_dir / "train_report.json")
    outcome.test_report.write_json(report_dir / "test_report.json")
    outputs = {
        "model": str(model),
        "trace": str(trace),
        "train_report": str(report_dir / "train_report.json"),
        "test_report": str(report_dir / "test_report.json"),
    }
    config = dict(config_items(cfg), split=args.split, ks=args.ks)
    write_manifest(model, "train", argv, config, cfg.seed, {"data": args.data, "config": args.config}, outputs, started)
    print(json.dumps({"train": outcome.train_report.to_dict(), "test": outcome.test_report.to_dict()}, indent=2))
    return 0


def _cmd_pseudo(args, argv):
    started = time.time()
    cfg = _resolve_config(args.config, args.seed)
    ds = load_csv(args.data)
    train_ds, test_ds = split_by_class(ds, args.split)
    pcfg = PseudoConfig(k=args.k, rounds=args.rounds, hard_mining=args.hard_mining,
                        kmeans_restarts=args.kmeans_restarts,
                        per_class_range=tuple(args.per_class_range) if args.per_class_range else None)
    encoder = initial_encoder(cfg, ds.dim)
    baseline = evaluate(encoder, test_ds, args.ks, cfg.seed)
    result = pseudo_train(train_ds.features, encoder, cfg, pcfg)
    model = Path(args.out_model)
    model.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, result.encoder)
    labels = Path(args.out_labels) if args.out_labels else model.with_suffix(".labels.csv")
    write_labels_csv(labels, result.pseudo_labels)
    report_dir = Path(args.report_dir) if args.report_dir else model.parent
    report_dir.mkdir(parents=True, exist_ok=True)
    evaluate(result.encoder, train_ds, args.ks, cfg.seed).write_json(report_dir / "train_report.json")
    test_report = evaluate(result.encoder, test_ds, args.ks, cfg.seed)
    test_report.write_json(report_dir / "test_report.json")
    baseline.write_json(report_dir / "untrained_test_report.json")
    outputs = {"model": str(model), "labels": str(labels), "report_dir": str(report_dir)}
    config = dict(config_items(cfg), **{f"pseudo_{k}": v for k, v in asdict(pcfg).items()}, split=args.split)
    write_manifest(model, "pseudo-train", argv, config, cfg.seed, {"data": args.data, "config": args.config}, outputs, started)
    print(json.dumps({"untrained_test": baseline.to_dict(), "test": test_report.to_dict()}, indent=2))
    return 0


def _cmd_eval(args, argv):
    started = time.time()
    seed = default_seed() if args.seed is None else args.seed
    ds = load_csv(args.data)
    encoder = _load_encoder(args.model, ds.dim)
    report = evaluate(encoder, ds, args.ks, seed)
    text = json.dumps(_jsonable(report.to_dict()), indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        _write_atomic(out, text)
        write_manifest(out, "eval", argv, {"ks": args.ks}, seed, {"data": args.data, "model": args.model},
                       {"report": str(out)}, started)
    sys.stdout.write(text)
    return 0


def _cmd_analyze(args, argv):
    started = time.time()
    ds = load_csv(args.data)
    encoder = _load_encoder(args.model, ds.dim)
    emb = embed_and_normalize(encoder, ds.features)
    sims = similarity_matrix(emb)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    similarity_histogram(sims, ds.labels, args.bins).write_csv(out)
    fit = fit_similarity_gaussians(sims, *partition_pairs(ds.labels))
    payload = {"gaussian_fit": asdict(fit), "ratio_fit": asdict(ratio_fit(fit)), "linear_ratio_fit": asdict(linear_ratio_fit(fit))}
    try:
        a_p, b_p, a_n, b_n = suggest_parameters(fit)
        payload["suggested_parameters"] = {"alpha_pos": a_p, "beta_pos": b_p, "alpha_neg": a_n, "beta_neg": b_n}
    except DegenerateFit as exc:
        payload["suggested_parameters"] = None
        payload["suggestion_error"] = str(exc)
    fit_path = Path(args.out_fit) if args.out_fit else out.with_suffix(".fit.json")
    _write_json(fit_path, payload)
    write_manifest(out, "analyze", argv, {"bins": args.bins}, 0, {"data": args.data, "model": args.model},
                   {"histogram": str(out), "fit": str(fit_path)}, started)
    return 0


def _cmd_gradcheck(args, argv):
    started = time.time()
    seed = default_seed() if args.seed is None else args.seed
    result = run_gradcheck(args.trials, seed)
    print(f"max relative gradient error: {result.max_error:.3e} over {result.checks} checks")
    if args.out:
        out = Path(args.out)
        _write_json(out, {"max_relative_error": result.max_error, "checks": result.checks, "passed": result.passed})
        write_manifest(out, "gradcheck", argv, {"trials": args.trials, "tolerance": REL_TOL}, seed, {},
                       {"result": str(out)}, started)
    return 0 if result.passed else 1


def _cmd_ablate(args, argv):
    started = time.time()
    cfg = _resolve_config(args.config, None)
    ds = load_csv(args.data)
    key, values = args.sweep
    seeds = args.seeds if args.seeds else [cfg.seed]
    rows = sweep(ds, cfg, key, values, seeds, args.split)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    config = dict(config_items(cfg), sweep_key=key, sweep_values=values, seeds=seeds, split=args.split)
    write_manifest(out, "ablate", argv, config, seeds[0], {"data": args.data, "config": args.config},
                   {"table": str(out)}, started)
    sys.stdout.write(out.read_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbml", description="Contrastive Bayesian metric learning experiments")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic blob dataset as CSV")
    s.add_argument("--classes", type=int, default=8)
    s.add_argument("--per-class", type=int, default=50)
    s.add_argument("--dim", type=int, default=16)
    s.add_argument("--center-scale", type=float, default=1.0)
    s.add_argument("--noise", type=float, default=0.3)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)

    def training_args(sp):
        sp.add_argument("--data", required=True)
        sp.add_argument("--config")
        sp.add_argument("--split", type=float, default=0.5)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-model", required=True)
        sp.add_argument("--report-dir")
        sp.add_argument("--ks", type=_int_list, default=[1, 2, 4, 8])

    t = sub.add_parser("train", help="train an encoder on the train classes")
    training_args(t)
    t.add_argument("--out-trace")
    t.set_defaults(func=_cmd_train)

    ps = sub.add_parser("pseudo-train", help="train on k-means pseudo-labels")
    training_args(ps)
    ps.add_argument("--k", type=int, required=True)
    ps.add_argument("--rounds", type=int, default=2)
    ps.add_argument("--hard-mining", action="store_true")
    ps.add_argument("--kmeans-restarts", type=int, default=10)
    ps.add_argument("--per-class-range", type=int, nargs=2, metavar=("LO", "HI"))
    ps.add_argument("--out-labels")
    ps.set_defaults(func=_cmd_pseudo)

    e = sub.add_parser("eval", help="retrieval report for a dataset and model")
    e.add_argument("--data", required=True)
    e.add_argument("--model")
    e.add_argument("--ks", type=_int_list, default=[1, 2, 4, 8])
    e.add_argument("--seed", type=int)
    e.add_argument("--out")
    e.set_defaults(func=_cmd_eval)

    a = sub.add_parser("analyze", help="similarity histograms and Gaussian/ratio fits")
    a.add_argument("--data", required=True)
    a.add_argument("--model")
    a.add_argument("--bins", type=int, default=64)
    a.add_argument("--out", required=True)
    a.add_argument("--out-fit")
    a.set_defaults(func=_cmd_analyze)

    g = sub.add_parser("gradcheck", help="finite-difference check of the loss gradient")
    g.add_argument("--trials", type=int, default=20)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.set_defaults(func=_cmd_gradcheck)

    ab = sub.add_parser("ablate", help="sweep one config key and tabulate results")
    ab.add_argument("--data", required=True)
    ab.add_argument("--config")
    ab.add_argument("--split", type=float, default=0.5)
    ab.add_argument("--sweep", type=_sweep_spec, required=True)
    ab.add_argument("--seeds", type=_int_list)
    ab.add_argument("--out", required=True)
    ab.set_defaults(func=_cmd_ablate)
    return p


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except (CBMLError, ValueError, OSError) as exc:
        print(f"cbml {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
