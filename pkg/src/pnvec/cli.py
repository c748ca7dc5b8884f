"""``pnvec`` command line: generate, train, cluster, query, classify, experiment.

Exit codes: 0 success, 1 a checked claim did not hold, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
from pathlib import Path

import numpy as np

from . import analysis, cluster, dfg, embedder, netgen
from .errors import PnvecError
from .pnml_io import load_directory

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2

GRID_DIMS = (4, 8, 16, 32)
GRID_MCS = (2, 3, 4, 5, 6)
REFERENCE = (8, 4)


class UsageError(Exception):
    pass


def _positive(kind):
    def conv(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return value
    return conv


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _input_dir(path) -> Path:
    p = Path(path)
    if p.is_file() and p.name == "manifest.json":
        p = p.parent
    if not p.is_dir():
        raise UsageError(f"input directory {p} does not exist")
    return p


def _load_nets(path):
    nets = load_directory(_input_dir(path))
    if len(nets) < 2:
        raise UsageError(f"need at least two parseable PNML files in {path}, found {len(nets)}")
    return nets


def _load_space(path):
    try:
        return embedder.load_embeddings(path)
    except OSError as exc:
        raise UsageError(f"cannot read embeddings {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise UsageError(f"malformed embeddings file {path}: {exc}") from exc


def _train_cfg(args, seed=None) -> embedder.TrainConfig:
    return embedder.TrainConfig(epochs=args.epochs, negatives=args.negatives,
                                seed=args.seed if seed is None else seed, deterministic=args.deterministic)


# --------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    out = Path(args.output)
    manifest = netgen.generate_dataset(out)
    print(f"wrote {len(manifest.entries)} models to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    nets = _load_nets(args.input)
    corpus = dfg.corpus_from_nets(nets, args.policy)
    space, report = embedder.fit(corpus, args.dim, _train_cfg(args))
    out = _out_dir(args.output)
    embedder.save_embeddings(space, out / "embeddings.json")
    with open(out / "train_report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_loss"])
        for i, loss in enumerate(report.epoch_loss):
            w.writerow([i, repr(float(loss))])
    print(f"models={corpus.vocab.n} tokens={corpus.vocab.k} tuples={len(corpus)}")
    print(f"final loss {report.epoch_loss[-1]:.4f}  mean positive probability {report.final_positive_prob:.4f}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    space = _load_space(args.input)
    n = space.vocab.n
    if args.min_cluster_size > n:
        raise UsageError(f"min cluster size {args.min_cluster_size} exceeds the {n} embedded models")
    if args.min_samples is not None and args.min_samples > n:
        raise UsageError(f"min samples {args.min_samples} exceeds the {n} embedded models")
    res = cluster.cluster_embeddings(space.X, args.min_cluster_size, args.min_samples)
    out = _out_dir(args.output)
    cluster.write_cluster_csv(res, space.vocab.model_list(), out / "clusters.csv")
    print(f"clusters={res.n_clusters} noise={res.n_noise}")
    print(f"mean silhouette {res.mean_silhouette!r}")
    return EXIT_OK


def cmd_query(args) -> int:
    space = _load_space(args.input)
    if args.model not in space.vocab.models:
        raise UsageError(f"unknown model id {args.model!r}")
    if not 0 <= args.topk <= space.vocab.n - 1:
        raise UsageError(f"topk must lie in [0, {space.vocab.n - 1}]")
    for rank, (m, sim) in enumerate(analysis.query_nearest(space, args.model, args.topk), 1):
        print(f"{rank}\t{m}\t{sim:.6f}")
    return EXIT_OK


def cmd_classify(args) -> int:
    space = _load_space(args.input)
    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        raise UsageError(f"manifest {manifest_path} not found")
    configs = netgen.read_manifest(manifest_path).configs()
    missing = [m for m in space.vocab.model_list() if m not in configs]
    if missing:
        raise UsageError(f"model {missing[0]!r} is not in the manifest")
    labels = [getattr(configs[m], args.rule) for m in space.vocab.model_list()]
    cm = analysis.knn_cross_validate(space.X, labels, k=args.k, folds=args.folds, seed=args.seed)
    out = _out_dir(args.output)
    cm.write_csv(out / f"confusion_{args.rule}.csv")
    print(f"rule {args.rule}: {args.k}-NN, {args.folds} folds")
    print(cm.to_text())
    print(f"majority baseline = {analysis.majority_baseline(labels):.4f}")
    return EXIT_OK


def _silhouette_or_zero(X, mcs) -> float:
    s = cluster.cluster_embeddings(X, mcs).mean_silhouette
    return 0.0 if np.isnan(s) else float(s)


def cmd_experiment(args) -> int:
    if args.runs < 2:
        raise UsageError("experiment needs --runs >= 2 for the t-test")
    nets = _load_nets(args.input)
    dims = args.dims or list(GRID_DIMS)
    sizes = args.sizes or list(GRID_MCS)
    ref = REFERENCE if (REFERENCE[0] in dims and REFERENCE[1] in sizes) else (dims[0], sizes[0])
    if max(sizes) > len(nets):
        raise UsageError(f"min cluster size {max(sizes)} exceeds the {len(nets)} models")

    scores = {}  # (policy, d, mcs) -> list of per-run silhouettes
    for policy in ("none", "unique"):
        corpus = dfg.corpus_from_nets(nets, policy)
        for d in dims:
            for r in range(args.runs):
                space, _ = embedder.fit(corpus, d, _train_cfg(args, seed=args.seed + r))
                for mcs in sizes:
                    scores.setdefault((policy, d, mcs), []).append(_silhouette_or_zero(space.X, mcs))
            print(f"{policy} d={d}: {args.runs} runs done", file=sys.stderr)

    out = _out_dir(args.output)
    with open(out / "silhouette_runs.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "d", "min_cluster_size", "run", "seed", "silhouette"])
        for (policy, d, mcs), vals in scores.items():
            for r, v in enumerate(vals):
                w.writerow([policy, d, mcs, r, args.seed + r, repr(v)])

    with open(out / "silhouette_table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "d", "min_cluster_size", "runs", "mean", "std", "t_vs_ref", "p_vs_ref", "reject_vs_ref"])
        for (policy, d, mcs), vals in scores.items():
            test = analysis.welch_t_test(vals, scores[(policy, *ref)], alpha=args.alpha)
            w.writerow([policy, d, mcs, len(vals), repr(float(np.mean(vals))), repr(float(np.std(vals, ddof=1))),
                        repr(float(test.t)), repr(float(test.p)), int(test.reject)])

    with open(out / "policy_tests.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "min_cluster_size", "mean_none", "mean_unique", "t", "p", "df", "reject"])
        for d, mcs in itertools.product(dims, sizes):
            a, b = scores[("none", d, mcs)], scores[("unique", d, mcs)]
            test = analysis.welch_t_test(a, b, alpha=args.alpha)
            w.writerow([d, mcs, repr(float(np.mean(a))), repr(float(np.mean(b))),
                        repr(float(test.t)), repr(float(test.p)), repr(float(test.df)), int(test.reject)])

    print("policy  d  " + "  ".join(f"mcs={m:<11}" for m in sizes))
    for policy, d in itertools.product(("none", "unique"), dims):
        cells = "  ".join(f"{np.mean(v):.3f} ({np.std(v, ddof=1):.3f})"
                          for v in (scores[(policy, d, m)] for m in sizes))
        print(f"{policy:<7} {d:<2} {cells}")
    a, b = scores[("none", *ref)], scores[("unique", *ref)]
    head = analysis.welch_t_test(a, b, alpha=args.alpha)
    holds = head.reject and np.mean(a) > np.mean(b)
    print(f"d={ref[0]} mcs={ref[1]}: none {np.mean(a):.3f} vs unique {np.mean(b):.3f}, "
          f"t={head.t:.3f} p={head.p:.3g} reject={head.reject}")
    if args.check and not holds:
        print("check failed: 'none' is not significantly above 'unique'", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _add_train_flags(p):
    p.add_argument("--epochs", type=_positive(int), default=500)
    p.add_argument("--negatives", type=_positive(int), default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                   help="single-threaded reproducible training; --no-deterministic runs lock-free threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnvec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write the 96-model synthetic dataset")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="embed every PNML model in a directory")
    p.add_argument("--input", required=True, help="directory of .pnml files (or its manifest.json)")
    p.add_argument("--output", required=True)
    p.add_argument("--dim", type=_positive(int), default=8)
    p.add_argument("--policy", choices=[s.value for s in dfg.SilentPolicy], default="none",
                   help="silent transitions share one token (none) or get positional names (unique)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cluster", help="HDBSCAN over model vectors")
    p.add_argument("--input", required=True, help="embeddings.json")
    p.add_argument("--output", required=True)
    p.add_argument("--min-cluster-size", type=int, default=4)
    p.add_argument("--min-samples", type=_positive(int), default=None)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("query", help="nearest models by cosine similarity")
    p.add_argument("--input", required=True, help="embeddings.json")
    p.add_argument("model")
    p.add_argument("--topk", type=int, default=5)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("classify", help="k-NN cross-validation of one rule flag")
    p.add_argument("--input", required=True, help="embeddings.json")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rule", required=True, choices=list(netgen.RULES))
    p.add_argument("--k", type=_positive(int), default=1)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("experiment", help="silhouette sweep over policies, dimensions and cluster sizes")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--dims", type=_positive(int), nargs="+", default=None)
    p.add_argument("--sizes", type=int, nargs="+", default=None, help="min cluster sizes")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--check", action="store_true", help="exit 1 unless 'none' beats 'unique' at the reference cell")
    _add_train_flags(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pnvec {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PnvecError, OSError, ValueError) as exc:
        print(f"pnvec {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
