"""Pipeline front end: synthesize, extract features, train, export figure data.

Stages are cached on disk (extract writes a feature CSV that train-eval,
curves, and pca consume) because topology extraction dominates runtime.
Exit codes: 0 success, 1 configuration error, 2 partial data failure,
3 internal invariant violation.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .betti_features import (
    BettiFeatureVector,
    N_THRESHOLDS,
    featurize_diagram,
    read_features_csv,
    summarize_curves,
    threshold_grid,
    write_curves_csv,
    write_features_csv,
)
from .cubical import build_filtration
from .errors import FormatError, InternalInvariantError, OutOfRangeError, TopovoxError
from .evaluate import (
    compute_metrics,
    encode_labels,
    split_80_20,
    stratified_kfold,
    write_confusion_csv,
    write_report,
)
from .homology import betti_curve_from_diagram, betti_rank_oracle, compute_persistence
from .learn import (
    BoostedParams,
    ForestParams,
    best_tau,
    pca_project,
    predict,
    read_config,
    save_model,
    select_features,
    sweep_tau,
    train_boosted,
    train_forest,
)
from .synth import PHANTOM_KINDS, generate_dataset, phantom_volume
from .volume_io import (
    SCALAR_KINDS,
    Volume3D,
    extract_slab,
    load_volume_file,
    normalize,
    read_manifest,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_META_VERSION = 1

FEATURE_SETS = (
    ("B0", (0,)),
    ("B1", (1,)),
    ("B2", (2,)),
    ("B1+B2", (1, 2)),
    ("B0+B1+B2", (0, 1, 2)),
)
_SET_SLUGS = {"B0": "b0", "B1": "b1", "B2": "b2", "B1+B2": "b1b2", "B0+B1+B2": "b0b1b2"}
_DEFAULT_TAUS = (0.0, 0.0005, 0.001, 0.002, 0.005, 0.01, 0.02)
_PCA_BLOCKS = {"b0": 0, "b1": 1, "b2": 2}


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 is reserved for partial data failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parse_dims(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValueError(f"expected SIDE or D0,D1,D2, got {text!r}")
    return tuple(int(p) for p in parts)


def _parse_taus(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ValueError(f"expected a comma-separated float list, got {text!r}") from None


def _parse_blocks(text: str) -> tuple[str, ...]:
    blocks = tuple(p.strip().lower() for p in text.split(",") if p.strip())
    bad = [b for b in blocks if b not in _PCA_BLOCKS]
    if bad or not blocks:
        raise ValueError(f"blocks must be drawn from b0,b1,b2, got {text!r}")
    return blocks


def _worker_count(flag_value: int | None) -> int:
    if flag_value is not None:
        n = flag_value
    else:
        env = os.environ.get("TOPOVOX_WORKERS", "")
        if env:
            try:
                n = int(env)
            except ValueError:
                raise FormatError(f"TOPOVOX_WORKERS must be an integer, got {env!r}") from None
        else:
            n = 1
    if n < 1:
        raise OutOfRangeError(f"worker count must be >= 1, got {n}")
    return n


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _feature_columns(dims: tuple[int, ...]) -> np.ndarray:
    return np.concatenate([np.arange(d * N_THRESHOLDS, (d + 1) * N_THRESHOLDS) for d in dims])


# ---------------------------------------------------------------------------
# extract

def _extract_worker(task):
    """Featurize one manifest entry; runs inside a worker process."""
    path, hint, raw_dims, raw_kind, slice_axis, lo, hi, invert = task
    t0 = time.perf_counter()
    try:
        vol = load_volume_file(
            path, format_hint=hint, raw_dims=raw_dims, raw_kind=raw_kind, slice_axis=slice_axis
        )
        if invert:
            vol = replace(vol, data=-vol.data)
        vol = extract_slab(normalize(vol), lo, hi)
        vec = featurize_diagram(compute_persistence(build_filtration(vol)))
        return [float(v) for v in vec.values], None, time.perf_counter() - t0
    except (TopovoxError, OSError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0


def cmd_extract(args) -> int:
    workers = _worker_count(args.workers)
    if (args.slab_lo is None) != (args.slab_hi is None):
        raise OutOfRangeError("--slab-lo and --slab-hi must be given together")
    manifest = read_manifest(args.manifest)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    fingerprint = {
        "version": _META_VERSION,
        "slab": [args.slab_lo, args.slab_hi],
        "invert": bool(args.invert),
        "raw_dims": list(args.raw_dims) if args.raw_dims else None,
        "raw_kind": args.raw_kind,
        "slice_axis": args.slice_axis,
    }
    meta_path = Path(str(out) + ".meta.json")
    cache: dict = {}
    if not args.force and meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            if meta.get("fingerprint") == fingerprint:
                cache = meta.get("rows", {})
        except (OSError, json.JSONDecodeError):
            cache = {}

    n = len(manifest.entries)
    rows: list = [None] * n
    digests: list = [None] * n
    failures = []
    pending = []
    for i, entry in enumerate(manifest.entries):
        try:
            digests[i] = _sha256_file(entry.path)
        except OSError as exc:
            failures.append((entry.path, str(exc)))
            print(f"[{i + 1}/{n}] {entry.path}: FAILED ({exc})", file=sys.stderr)
            continue
        if digests[i] in cache:
            rows[i] = cache[digests[i]]
            print(f"[{i + 1}/{n}] {entry.path}: cached", file=sys.stderr)
        else:
            pending.append(i)

    if pending:
        tasks = [
            (
                str(manifest.entries[i].path),
                manifest.entries[i].format_hint,
                args.raw_dims,
                args.raw_kind,
                args.slice_axis,
                args.slab_lo,
                args.slab_hi,
                bool(args.invert),
            )
            for i in pending
        ]
        if workers == 1:
            outcomes = map(_extract_worker, tasks)
            for i, (values, err, seconds) in zip(pending, outcomes):
                _note_extract(manifest, rows, failures, n, i, values, err, seconds)
        else:
            # Results are gathered in manifest order, so the worker count can
            # never change a single output byte.
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for i, (values, err, seconds) in zip(pending, pool.map(_extract_worker, tasks)):
                    _note_extract(manifest, rows, failures, n, i, values, err, seconds)

    keep = [i for i in range(n) if rows[i] is not None]
    labels = [manifest.entries[i].label for i in keep]
    vectors = [BettiFeatureVector(np.asarray(rows[i], dtype=np.float64)) for i in keep]
    write_features_csv(labels, vectors, out)
    kept_rows = {digests[i]: rows[i] for i in keep if digests[i] is not None}
    meta_path.write_text(
        json.dumps({"fingerprint": fingerprint, "rows": kept_rows}, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(keep)} of {n} rows to {out}", file=sys.stderr)
    if failures:
        print(f"{len(failures)} volume(s) failed and were skipped", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def _note_extract(manifest, rows, failures, n, i, values, err, seconds):
    entry = manifest.entries[i]
    if err is not None:
        failures.append((entry.path, err))
        print(f"[{i + 1}/{n}] {entry.path}: FAILED ({err})", file=sys.stderr)
    else:
        rows[i] = values
        print(f"[{i + 1}/{n}] {entry.path}: ok in {seconds:.2f}s", file=sys.stderr)


# ---------------------------------------------------------------------------
# train-eval

def _summary_header() -> str:
    return (
        f"{'Feature Set':<12}{'# Features':>11}{'Accuracy (%)':>14}"
        f"{'Precision (%)':>15}{'Recall (%)':>12}{'AUC (%)':>9}"
    )


def _summary_line(name: str, n_features, rep) -> str:
    auc = "n/a" if rep.auc is None else f"{100 * rep.auc:.2f}"
    # Fold means can make the feature count fractional.
    count = str(n_features) if isinstance(n_features, int) else f"{n_features:.1f}"
    return (
        f"{name:<12}{count:>11}{100 * rep.accuracy:>14.2f}"
        f"{100 * rep.precision:>15.2f}{100 * rep.recall:>12.2f}{auc:>9}"
    )


def _write_sweep_csv(records, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "n_selected", "accuracy"])
        for rec in records:
            acc = "" if rec["accuracy"] is None else repr(rec["accuracy"])
            writer.writerow([repr(rec["tau"]), rec["n_selected"], acc])


def _run_configuration(name, cols, X, y, split, kind, params, args, out_dir, suffix=""):
    """Raw plus selected models for one feature set on one train/test split."""
    train_idx, test_idx = split
    slug = _SET_SLUGS[name]
    trainer = train_forest if kind == "forest" else train_boosted
    Xtr = X[np.ix_(train_idx, cols)]
    Xte = X[np.ix_(test_idx, cols)]
    ytr, yte = y[train_idx], y[test_idx]

    model = trainer(Xtr, ytr, params)
    pred, scores = predict(model, Xte)
    rep = compute_metrics(yte, pred, scores, seed=args.seed, feature_set=f"{name}, {len(cols)} features")
    write_report(rep, out_dir / f"report_{slug}_raw{suffix}.txt")
    write_confusion_csv(rep, out_dir / f"confusion_{slug}_raw{suffix}.csv")
    save_model(model, out_dir / f"model_{slug}_raw{suffix}.cbt")

    # Importance always comes from a forest; boosted runs train one on the
    # side with the same seed.
    if kind == "forest":
        importance = model.importance
    else:
        importance = train_forest(Xtr, ytr, ForestParams(random_state=args.seed)).importance
    if args.tau is not None:
        tau = args.tau
    else:
        # The sweep never sees the held-out test rows: it validates on a
        # nested stratified split carved out of the training rows.
        nested_tr, nested_val = split_80_20(ytr, seed=args.seed + 1)
        records = sweep_tau(
            args.taus, importance, Xtr[nested_tr], ytr[nested_tr], Xtr[nested_val], ytr[nested_val], params
        )
        _write_sweep_csv(records, out_dir / f"sweep_{slug}{suffix}.csv")
        tau = best_tau(records)
    sel = select_features(importance, tau)
    smodel = trainer(Xtr[:, sel.indices], ytr, params)
    spred, sscores = predict(smodel, Xte[:, sel.indices])
    srep = compute_metrics(
        yte, spred, sscores, seed=args.seed, feature_set=f"{name}, {len(sel)} features, tau={tau:g}"
    )
    write_report(srep, out_dir / f"report_{slug}_sel{suffix}.txt")
    write_confusion_csv(srep, out_dir / f"confusion_{slug}_sel{suffix}.csv")
    save_model(smodel, out_dir / f"model_{slug}_sel{suffix}.cbt")
    return rep, srep, len(sel), tau


def _mean_metrics(reports):
    aucs = [r.auc for r in reports]
    return SimpleNamespace(
        accuracy=float(np.mean([r.accuracy for r in reports])),
        precision=float(np.mean([r.precision for r in reports])),
        recall=float(np.mean([r.recall for r in reports])),
        f1=float(np.mean([r.f1 for r in reports])),
        auc=None if any(a is None for a in aucs) else float(np.mean(aucs)),
    )


def cmd_train_eval(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels, X = read_features_csv(args.features)
    y = encode_labels(labels)

    if args.config:
        params = read_config(args.config)
        kind = "boosted" if isinstance(params, BoostedParams) else "forest"
        if args.model is not None and args.model != kind:
            raise FormatError(f"--model {args.model} conflicts with config model {kind!r}")
    else:
        kind = args.model or "forest"
        params = ForestParams() if kind == "forest" else BoostedParams()
    params = replace(params, random_state=args.seed)

    raw_rows = []
    sel_rows = []
    if args.folds is None:
        split = split_80_20(labels, seed=args.seed)
        header = f"model: {kind}   seed: {args.seed}   test rows: {len(split[1])}"
        for name, dims in FEATURE_SETS:
            t0 = time.perf_counter()
            cols = _feature_columns(dims)
            rep, srep, n_sel, tau = _run_configuration(name, cols, X, y, split, kind, params, args, out_dir)
            raw_rows.append((name, len(cols), rep))
            sel_rows.append((name, n_sel, srep, tau))
            print(f"{name}: raw + selected done in {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    else:
        splits = stratified_kfold(labels, args.folds, seed=args.seed)
        header = f"model: {kind}   seed: {args.seed}   folds: {args.folds} (metrics are fold means)"
        for name, dims in FEATURE_SETS:
            t0 = time.perf_counter()
            cols = _feature_columns(dims)
            reps, sreps, n_sels, taus = [], [], [], []
            for j, split in enumerate(splits):
                rep, srep, n_sel, tau = _run_configuration(
                    name, cols, X, y, split, kind, params, args, out_dir, suffix=f"_fold{j}"
                )
                reps.append(rep)
                sreps.append(srep)
                n_sels.append(n_sel)
                taus.append(tau)
            raw_rows.append((name, len(cols), _mean_metrics(reps)))
            sel_rows.append((name, float(np.mean(n_sels)), _mean_metrics(sreps), float(np.mean(taus))))
            print(f"{name}: {args.folds} folds done in {time.perf_counter() - t0:.2f}s", file=sys.stderr)

    lines = [header, ""]
    lines.append(_summary_header())
    lines.append("--- Without Feature Selection ---")
    for name, n_features, rep in raw_rows:
        lines.append(_summary_line(name, n_features, rep))
    lines.append("--- With Feature Selection ---")
    for name, n_features, rep, _tau in sel_rows:
        lines.append(_summary_line(name, n_features, rep))
    table = "\n".join(lines)
    (out_dir / "summary.txt").write_text(table + "\n", encoding="utf-8")

    with open(out_dir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["feature_set", "selection", "n_features", "tau", "accuracy", "precision", "recall", "f1", "auc"]
        )
        for name, n_features, rep in raw_rows:
            writer.writerow(
                [name, "raw", n_features, "", repr(rep.accuracy), repr(rep.precision), repr(rep.recall),
                 repr(rep.f1), "" if rep.auc is None else repr(rep.auc)]
            )
        for name, n_features, rep, tau in sel_rows:
            writer.writerow(
                [name, "selected", n_features, repr(float(tau)), repr(rep.accuracy), repr(rep.precision),
                 repr(rep.recall), repr(rep.f1), "" if rep.auc is None else repr(rep.auc)]
            )
    print(table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# curves / pca

def cmd_curves(args) -> int:
    labels, X = read_features_csv(args.features)
    rows = summarize_curves(labels, X, band=args.band)
    write_curves_csv(rows, args.out)
    print(f"wrote {len(rows)} curve rows to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_pca(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels, X = read_features_csv(args.features)
    for block in args.blocks:
        dim = _PCA_BLOCKS[block]
        cols = _feature_columns((dim,))
        projected, ratios = pca_project(X[:, cols], 2)
        path = out_dir / f"pca_{block}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# explained_variance_ratio,{float(ratios[0])!r},{float(ratios[1])!r}\n")
            writer = csv.writer(fh)
            writer.writerow(["sample", "label", "pc1", "pc2"])
            for i, (label, row) in enumerate(zip(labels, projected)):
                writer.writerow([i, label, repr(float(row[0])), repr(float(row[1]))])
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth / oracle-check

def cmd_synth(args) -> int:
    manifest, manifest_path = generate_dataset(args.kind, args.count, args.size, args.out, seed=args.seed)
    counts = manifest.class_counts()
    d0, d1, d2 = args.size
    print(f"wrote {len(manifest.entries)} volumes (LGG {counts['LGG']}, HGG {counts['HGG']}) to {args.out}")
    print(f"manifest: {manifest_path}")
    print(f"extract with: topovox extract --manifest {manifest_path} --raw-dims {d0},{d1},{d2} --out features.csv")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    grid = threshold_grid()
    volumes = []
    for i in range(args.count):
        dims = tuple(int(d) for d in rng.integers(1, args.max_side + 1, size=3))
        volumes.append((f"random[{i}] dims={dims}", rng.integers(0, 256, size=dims)))
    for kind in ("blob", "shell", "ring"):
        data, _label = phantom_volume(kind, (10, 10, 10), rng)
        volumes.append((f"phantom {kind} 10x10x10", data))

    mismatches = 0
    for name, data in volumes:
        cx = build_filtration(normalize(Volume3D(data)))
        curves = betti_curve_from_diagram(compute_persistence(cx), grid)
        oracle = betti_rank_oracle(cx, grid)
        if np.array_equal(curves, oracle):
            print(f"ok       {name}")
        else:
            mismatches += 1
            t, k = np.argwhere(curves != oracle)[0]
            print(
                f"MISMATCH {name}: dim {k} at threshold {grid[t]:.2f}: "
                f"persistence says {curves[t, k]}, oracle says {oracle[t, k]}"
            )
    print(f"{len(volumes)} volumes checked, {mismatches} mismatches")
    return EXIT_INTERNAL if mismatches else EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="topovox", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate seeded phantom volumes plus a manifest")
    p.add_argument("kind", choices=PHANTOM_KINDS)
    p.add_argument("--count", type=int, default=40)
    p.add_argument("--size", type=_parse_dims, default=(32, 32, 32), metavar="SIDE|D0,D1,D2")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="featurize every manifest volume into one CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="feature CSV path")
    p.add_argument("--raw-dims", type=_parse_dims, default=None, metavar="SIDE|D0,D1,D2",
                   help="dimensions of raw-format volumes")
    p.add_argument("--raw-kind", default="uint8", choices=sorted(SCALAR_KINDS))
    p.add_argument("--slice-axis", type=int, choices=(0, 1, 2), default=None)
    p.add_argument("--slab-lo", type=int, default=None)
    p.add_argument("--slab-hi", type=int, default=None)
    p.add_argument("--invert", action="store_true",
                   help="negate intensities before normalizing (superlevel analysis)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $TOPOVOX_WORKERS, else 1)")
    p.add_argument("--force", action="store_true", help="recompute rows even when cached")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-eval", help="run the ten feature-set configurations and report")
    p.add_argument("--features", required=True, help="feature CSV from extract")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model", choices=("forest", "boosted"), default=None)
    p.add_argument("--config", default=None, help="model parameter file (key = value)")
    p.add_argument("--taus", type=_parse_taus, default=_DEFAULT_TAUS, metavar="T1,T2,...")
    p.add_argument("--tau", type=float, default=None, help="skip the sweep and use this threshold")
    p.add_argument("--folds", type=int, default=None,
                   help="run stratified K-fold instead of the 80:20 split; table reports fold means")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_eval)

    p = sub.add_parser("curves", help="per-class median Betti curves with confidence bands")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--band", type=float, default=0.4)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("pca", help="2-component projections of each Betti block")
    p.add_argument("--features", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--blocks", type=_parse_blocks, default=("b0", "b1", "b2"), metavar="b0,b1,b2")
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("oracle-check", help="cross-check persistence against the rank oracle")
    p.add_argument("--count", type=int, default=20, help="random small volumes to draw")
    p.add_argument("--max-side", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InternalInvariantError as exc:
        print(f"topovox: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except TopovoxError as exc:
        print(f"topovox: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"topovox: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
