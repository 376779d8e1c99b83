"""Command-line entry point: train / eval / sweep / bench.

Outputs per run directory: manifest.json, trace.csv, checkpoint.bin,
train_errors.npy, prep.npz (normalization stats) or synth_test.npz,
and from evaluation: metrics.json, metrics.csv, roc.csv, pr.csv,
sweep.csv, bench.json.

Exit codes: 0 success, 1 internal numerical failure, 2 usage/input error.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .data import (DEFAULT_FEATURES, SynthSpec, apply_zscore, equalize_widths,
                   generate_synthetic, load_dataset, partition_non_iid,
                   read_feature_list, zscore_fit_apply)
from .detection import (evaluate, fit_threshold, roc_and_pr, score_matrix,
                        write_curve, write_metrics)
from .errors import DimensionMismatch, FedsgError
from .federation import (CHECKPOINT_HEADER_BYTES, FedConfig, load_checkpoint,
                         run_fedsg, save_checkpoint, write_trace_csv)


class UsageError(Exception):
    pass


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha256_text(text):
    return hashlib.sha256(text.encode()).hexdigest()


def _load_config_file(path):
    with open(path) as fh:
        return json.load(fh)


def _resolve_fed_config(args):
    """CLI flags > config file > built-in defaults."""
    values = {}
    if args.config:
        raw = _load_config_file(args.config)
        allowed = {f.name for f in dataclasses.fields(FedConfig)}
        unknown = set(raw) - allowed - {"rho", "sort_feature"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: v for k, v in raw.items() if k in allowed})
    overrides = {
        "n_clients": args.clients, "rounds": args.rounds,
        "local_steps": args.local_steps, "sample_fraction": args.sample_fraction,
        "k": args.rank, "eta": args.eta, "seed": args.seed,
    }
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    if getattr(args, "no_align", False):
        values["align_before_average"] = False
    return FedConfig(**values)


def _parse_synth_spec(arg, fallback_seed):
    if arg == "default":
        raw = {}
    elif os.path.exists(arg):
        raw = _load_config_file(arg)
    else:
        try:
            raw = json.loads(arg)
        except json.JSONDecodeError:
            raise UsageError(f"--synthetic must be 'default', a JSON file, "
                             f"or inline JSON; got {arg!r}")
    if fallback_seed is not None and "seed" not in raw:
        raw["seed"] = fallback_seed
    return SynthSpec(**raw)


def _write_manifest(out_dir, payload):
    payload = dict(payload)
    payload["created_utc"] = datetime.now(timezone.utc).isoformat()
    payload["fedsg_version"] = __version__
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args):
    config = _resolve_fed_config(args)
    os.makedirs(args.out, exist_ok=True)
    manifest = {"command": "train",
                "config": dataclasses.asdict(config),
                "rho": args.rho,
                "out_dir": os.path.abspath(args.out)}

    if args.synthetic:
        spec = _parse_synth_spec(args.synthetic, config.seed)
        if spec.n_clients != config.n_clients:
            config = dataclasses.replace(config, n_clients=spec.n_clients)
            manifest["config"] = dataclasses.asdict(config)
        shards, test, labels, _ = generate_synthetic(spec)
        manifest["dataset"] = {"kind": "synthetic",
                               "spec": dataclasses.asdict(spec)}
        np.savez(os.path.join(args.out, "synth_test.npz"),
                 test=test, labels=labels)
        stats = None
    elif args.data:
        if not os.path.exists(args.data):
            raise UsageError(f"data path not found: {args.data}")
        features = (read_feature_list(args.features) if args.features
                    else list(DEFAULT_FEATURES))
        records = load_dataset(args.data, feature_list=features)
        raw_shards, dropped = partition_non_iid(
            records, config.n_clients, args.sort_feature, feature_list=features)
        if dropped:
            print(f"note: dropped {dropped} remainder records in partition",
                  file=sys.stderr)
        normed = [zscore_fit_apply(s) for s in raw_shards]
        normed = equalize_widths(normed, seed=config.seed)
        shards = [s.features for s in normed]
        stats = {"means": np.stack([s.mean for s in normed]),
                 "stds": np.stack([s.std for s in normed])}
        manifest["dataset"] = {"kind": "csv",
                               "path": os.path.abspath(args.data),
                               "sha256": _sha256_file(args.data),
                               "dropped_records": dropped,
                               "sort_feature": args.sort_feature}
        manifest["feature_list_sha256"] = _sha256_text("\n".join(features))
        np.savez(os.path.join(args.out, "prep.npz"),
                 means=stats["means"], stds=stats["stds"],
                 features=np.array(features))
    else:
        raise UsageError("either --data or --synthetic is required")

    pair, traces = run_fedsg(config, shards)
    save_checkpoint(pair, config.rounds,
                    os.path.join(args.out, "checkpoint.bin"))
    write_trace_csv(traces, os.path.join(args.out, "trace.csv"))

    train_errors = np.concatenate([score_matrix(pair.u, s) for s in shards])
    np.save(os.path.join(args.out, "train_errors.npy"), train_errors)
    _write_manifest(args.out, manifest)
    print(f"trained {config.rounds} rounds; final loss "
          f"{traces[-1].global_loss:.6g}; artifacts in {args.out}")
    return 0


def _load_eval_inputs(args, pair):
    """Returns (errors over test set, boolean attack labels)."""
    ckpt_dir = os.path.dirname(os.path.abspath(args.checkpoint))
    d = pair.u.n
    if args.data:
        if not os.path.exists(args.data):
            raise UsageError(f"data path not found: {args.data}")
        prep_path = os.path.join(ckpt_dir, "prep.npz")
        if not os.path.exists(prep_path):
            raise UsageError(f"no prep.npz next to checkpoint: {prep_path}")
        prep = np.load(prep_path, allow_pickle=False)
        features = [str(f) for f in prep["features"]]
        records = load_dataset(args.data, feature_list=features)
        if records and records[0].values.shape[0] != d:
            raise DimensionMismatch(
                f"checkpoint d={d}, test records have "
                f"{records[0].values.shape[0]} features")
        means, stds = prep["means"], prep["stds"]
        n_clients = means.shape[0]
        # Round-robin test assignment; each client's normalization stats
        # transform its assigned slice.
        errors = np.empty(len(records))
        labels = []
        mat = np.column_stack([r.values for r in records])
        assign = np.arange(len(records)) % n_clients
        for cid in range(n_clients):
            cols = np.where(assign == cid)[0]
            if cols.size == 0:
                continue
            z = apply_zscore(means[cid], stds[cid], mat[:, cols])
            errors[cols] = score_matrix(pair.u, z)
        labels = [r.label for r in records]
        if args.slice:
            keep = {"normal"} | {c.strip().lower()
                                 for c in args.slice.split(",")}
            mask = np.array([lab in keep for lab in labels])
            errors = errors[mask]
            labels = [lab for lab in labels if lab in keep]
        return errors, np.array([lab != "normal" for lab in labels])

    synth_path = os.path.join(ckpt_dir, "synth_test.npz")
    if not os.path.exists(synth_path):
        raise UsageError("no --data given and no synth_test.npz next to "
                         "the checkpoint")
    blob = np.load(synth_path)
    test, labels = blob["test"], blob["labels"].astype(bool)
    if test.shape[0] != d:
        raise DimensionMismatch(f"checkpoint d={d}, test has {test.shape[0]}")
    return score_matrix(pair.u, test), labels


def _fit_tau(args, rho):
    ckpt_dir = os.path.dirname(os.path.abspath(args.checkpoint))
    err_path = os.path.join(ckpt_dir, "train_errors.npy")
    if not os.path.exists(err_path):
        raise UsageError(f"no stored training errors: {err_path}")
    return fit_threshold(np.load(err_path), rho)


def cmd_eval(args):
    pair, _ = load_checkpoint(args.checkpoint)
    errors, labels = _load_eval_inputs(args, pair)
    tau = _fit_tau(args, args.rho)
    report = evaluate(errors, labels, tau)
    roc, pr, auc = roc_and_pr(errors, labels)
    report = dataclasses.replace(report, roc=roc, pr=pr, auc=auc)
    out = args.out or os.path.dirname(os.path.abspath(args.checkpoint))
    os.makedirs(out, exist_ok=True)
    write_metrics(report, json_path=os.path.join(out, "metrics.json"),
                  csv_path=os.path.join(out, "metrics.csv"))
    write_curve(roc, os.path.join(out, "roc.csv"), ["fpr", "tpr"])
    write_curve(pr, os.path.join(out, "pr.csv"), ["recall", "precision"])
    print(json.dumps({"rho": args.rho, "tau": tau, **report.as_dict()},
                     sort_keys=True))
    return 0


def _parse_grid(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi = part.split(":")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(float(part))
    if not out:
        raise UsageError("empty rho grid")
    return [float(r) for r in out]


def cmd_sweep(args):
    pair, _ = load_checkpoint(args.checkpoint)
    errors, labels = _load_eval_inputs(args, pair)
    grid = _parse_grid(args.rho_grid)
    out = args.out or os.path.dirname(os.path.abspath(args.checkpoint))
    os.makedirs(out, exist_ok=True)
    rows = []
    for rho in grid:
        tau = _fit_tau(args, rho)
        rep = evaluate(errors, labels, tau)
        rows.append([rho, tau, rep.acc, rep.pre, rep.tpr, rep.fpr, rep.f1])
    path = os.path.join(out, "sweep.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rho", "tau", "acc", "pre", "tpr", "fpr", "f1"])
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def cmd_bench(args):
    pair, _ = load_checkpoint(args.checkpoint)
    d, k = pair.u.basis.shape
    width = pair.v.basis.shape[0]
    if args.data and os.path.exists(args.data):
        blob = np.load(args.data) if args.data.endswith(".npz") else None
        samples = blob["test"] if blob is not None else None
    else:
        samples = None
    if samples is None:
        samples = np.random.default_rng(0).standard_normal((d, args.iters))
    basis = pair.u.basis
    x = samples[:, 0]
    basis @ (basis.T @ x)  # warm-up, discarded
    lat = np.empty(args.iters)
    for i in range(args.iters):
        x = samples[:, i % samples.shape[1]]
        t0 = time.perf_counter()
        r = x - basis @ (basis.T @ x)
        float(np.sqrt(r @ r))
        lat[i] = time.perf_counter() - t0
    size = os.path.getsize(args.checkpoint)
    payload = 8 * k * (d + width)
    report = {
        "iters": args.iters,
        "median_us": float(np.median(lat) * 1e6),
        "p99_us": float(np.percentile(lat, 99) * 1e6),
        "checkpoint_bytes": size,
        "payload_bytes": payload,
        "header_bytes": CHECKPOINT_HEADER_BYTES,
        "payload_matches": size == payload + CHECKPOINT_HEADER_BYTES,
    }
    out = args.out or os.path.dirname(os.path.abspath(args.checkpoint))
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "bench.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(report, sort_keys=True))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="fedsg",
                                description="Federated subspace anomaly "
                                            "detection toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="run federated training")
    tr.add_argument("--config", help="JSON config file")
    tr.add_argument("--data", help="training CSV (NSL-KDD column order)")
    tr.add_argument("--synthetic",
                    help="'default', JSON file, or inline JSON generator spec")
    tr.add_argument("--out", required=True, help="output directory")
    tr.add_argument("--features", help="plain-text feature list file")
    tr.add_argument("--sort-feature", default="dst_bytes")
    tr.add_argument("--rho", type=float, default=18.0)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--clients", type=int)
    tr.add_argument("--rounds", type=int)
    tr.add_argument("--local-steps", type=int)
    tr.add_argument("--sample-fraction", type=float)
    tr.add_argument("--rank", type=int)
    tr.add_argument("--eta", type=float)
    tr.add_argument("--no-align", action="store_true")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a test set")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", help="test CSV; omit to use stored synthetic test")
    ev.add_argument("--rho", type=float, default=18.0)
    ev.add_argument("--slice", help="comma-separated attack classes to keep")
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)

    sw = sub.add_parser("sweep", help="metrics across a threshold grid")
    sw.add_argument("--checkpoint", required=True)
    sw.add_argument("--data")
    sw.add_argument("--rho-grid", default="1:30",
                    help="comma list and lo:hi ranges, e.g. '1:30' or '5,10,18'")
    sw.add_argument("--slice")
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)

    be = sub.add_parser("bench", help="per-sample scoring latency")
    be.add_argument("--checkpoint", required=True)
    be.add_argument("--data")
    be.add_argument("--iters", type=int, default=10000)
    be.add_argument("--out")
    be.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FedsgError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
