"""Command-line entry point: ``spikeclust <subcommand> [flags]``.

Every stage reads and writes plain files, so each one can be rerun on its
own from the previous stage's output. Every output carries the flags and
seed that produced it: a '#' JSON line in CSV/TSV files, ';' lines in
FASTA, a ``config`` field in JSON.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, _parallel
from . import cluster as cl
from . import embed, evaluate, featsel, featurize, modelsel, seqio, synth
from .randforest import ForestParams

# per-stage seed streams derived from the single --seed
STAGES = {"select": 1, "sweep": 2, "cluster": 3, "embed": 4, "bench": 5}
# flags that never change results and so stay out of embedded configs
_RUNTIME_ONLY = {"threads", "outdir", "out", "out_fasta", "out_meta", "out_features", "svg",
                 "membership_out", "dendrogram_out", "contingency_out", "func", "quiet"}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def stage_seed(seed: int, stage: str) -> int:
    return int(np.random.default_rng([seed, STAGES[stage]]).integers(0, 2 ** 31 - 1))


def config_of(args, command: str) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in _RUNTIME_ONLY}
    cfg["command"] = command
    cfg["version"] = __version__
    return cfg


def _say(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


def _need_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise CliError(f"{what} not found: {path}")


def _read_meta_line(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("#"):
        try:
            return json.loads(first[1:])
        except json.JSONDecodeError:
            return {}
    return {}


# -- stage helpers shared by the subcommands and the pipeline ------------------

def _load_records(args, fasta: str, meta_path: Optional[str]):
    _need_file(fasta, "FASTA file")
    records = seqio.parse_fasta(fasta, policy=args.gap_policy, on_invalid=args.on_invalid)
    if not records:
        raise CliError(f"{fasta}: no sequences")
    truth = {}
    if meta_path:
        _need_file(meta_path, "metadata file")
        truth = seqio.load_metadata(meta_path)
        records = seqio.attach_variants(records, truth)
    return records, truth


def _select(args, fm: featurize.FeatureMatrix, labels, seed: int):
    """Fit the chosen selector; returns (selector record, transformed matrix)."""
    method = args.select
    if method == "none":
        return {"method": "none", "params": {}, "seed": seed}, fm
    if method == "rff":
        gamma = args.gamma
        if gamma is None:
            gamma = featsel.median_gamma(fm, seed=seed) if args.median_gamma else 1.0 / fm.shape[1]
        rec = featsel.selector_record("rff", {"gamma": gamma, "D": args.rff_dim}, seed,
                                      projection_dims=args.rff_dim)
        return rec, featsel.apply_selector(rec, fm)
    if labels is None or any(v is None for v in labels):
        raise CliError(f"--select {method} needs a variant label for every sequence (--meta)")
    if method == "lasso":
        sel = featsel.lasso_select(fm, labels, alpha=args.alpha)
        if not sel.selected:
            raise CliError(f"lasso with alpha={args.alpha} selected no features; lower --alpha")
        rec = featsel.selector_record("lasso", {"alpha": args.alpha}, seed, fm, sel.selected)
    elif method == "boruta":
        forest = ForestParams(n_trees=args.trees, seed=seed)
        res = featsel.boruta_run(fm, labels, n_iters=args.boruta_iters, forest=forest, seed=seed)
        keep = sorted(res.accepted)
        if not keep:
            raise CliError("Boruta accepted no features; try more --boruta-iters")
        rec = featsel.selector_record("boruta", {"n_iters": args.boruta_iters, "trees": args.trees},
                                      seed, fm, keep)
        rec["tentative_column_ids"] = [fm.column_ids[i] for i in sorted(res.tentative)]
    else:  # pragma: no cover - argparse restricts choices
        raise CliError(f"unknown selector {method!r}")
    return rec, featsel.apply_selector(rec, fm)


def _cluster_params(args, method: str) -> dict:
    if method == "kmeans":
        return {"n_init": args.n_init, "max_iters": args.max_iters}
    if method == "kmodes":
        return {"n_init": args.n_init, "max_iters": args.max_iters}
    if method == "fuzzy":
        return {"m": args.m, "max_iters": args.max_iters}
    if method == "agglomerative":
        return {"linkage": args.linkage, "allow_large": args.allow_large}
    if method == "hdbscan":
        return {"min_cluster_size": args.min_cluster_size, "min_samples": args.min_samples}
    raise CliError(f"unknown clustering method {method!r}")


def _run_cluster(args, method: str, fm, K: int, seed: int, out_prefix: dict):
    """Cluster ``fm``; writes assignments (and fuzzy/dendrogram extras)."""
    params = _cluster_params(args, method)
    meta = out_prefix["meta"]
    if method == "agglomerative":
        dendro, res = cl.agglomerative(fm, K, **params)
        if out_prefix.get("dendrogram"):
            cl.write_dendrogram_csv(dendro, out_prefix["dendrogram"], meta)
    else:
        res = cl.run_method(method, fm, K, seed=seed, **params)
    if method == "fuzzy" and out_prefix.get("membership"):
        cl.write_membership_csv(fm.row_ids, res.membership, out_prefix["membership"], meta)
    cl.write_assignments_csv(fm.row_ids, res.labels, out_prefix["assignments"], meta)
    return res


def _embed(args, fm, truth: dict, assignments: Optional[dict], seed: int, csv_path, svg_path, meta):
    groups = [truth.get(r, "") for r in fm.row_ids]
    idx = embed.stratified_subsample(groups, args.embed_max, seed=seed)
    sub = fm.take_rows(idx)
    emb = embed.tsne(sub, perplexity=args.perplexity, iters=args.tsne_iters, seed=seed)
    ids = sub.row_ids
    variants = [truth.get(r, "") for r in ids]
    clusters = [assignments.get(r, "") for r in ids] if assignments else None
    embed.write_embedding_csv(ids, emb.coords, csv_path, variants, clusters, meta)
    if svg_path:
        embed.write_embedding_svg(emb.coords, variants if truth else (clusters or [""] * len(ids)),
                                  svg_path, title="t-SNE")
    return emb


# -- subcommands -----------------------------------------------------------------

def cmd_simulate(args) -> None:
    specs = synth.default_specs(args.per_variant, args.length, args.noise_rate, args.seed)
    records, truth = synth.generate(specs, args.length, args.seed)
    cfg = json.dumps(config_of(args, "simulate"), sort_keys=True)
    seqio.write_fasta(records, args.out_fasta, comments=[" " + cfg])
    seqio.write_metadata(truth, args.out_meta, comments=[" " + cfg])
    _say(args, f"simulate: {len(records)} sequences -> {args.out_fasta}, {args.out_meta}")


def cmd_featurize(args) -> None:
    records, _ = _load_records(args, args.input, None)
    fm = featurize.featurize_dataset(records, k=args.k, normalize=args.normalize)
    featurize.write_feature_csv(fm, args.out, config_of(args, "featurize"))
    _say(args, f"featurize: {fm.shape[0]} x {fm.shape[1]} -> {args.out}")


def _load_features(path):
    _need_file(path, "feature file")
    fm, _ = featurize.read_feature_csv(path)
    return fm


def _labels_for(fm, meta_path):
    if not meta_path:
        return None, {}
    _need_file(meta_path, "metadata file")
    truth = seqio.load_metadata(meta_path)
    return [truth.get(r) for r in fm.row_ids], truth


def cmd_select(args) -> None:
    fm = _load_features(args.features)
    labels, _ = _labels_for(fm, args.meta)
    seed = stage_seed(args.seed, "select")
    rec, out = _select(args, fm, labels, seed)
    rec["config"] = config_of(args, "select")
    featsel.write_selector_json(rec, args.out)
    if args.out_features:
        featurize.write_feature_csv(out, args.out_features, config_of(args, "select"))
    _say(args, f"select: {args.select} kept {out.shape[1]} of {fm.shape[1]} columns -> {args.out}")


def cmd_cluster(args) -> None:
    fm = _load_features(args.features)
    meta = config_of(args, "cluster")
    outs = {"meta": meta, "assignments": args.out, "membership": args.membership_out,
            "dendrogram": args.dendrogram_out}
    res = _run_cluster(args, args.method, fm, args.K, stage_seed(args.seed, "cluster"), outs)
    n_found = len(set(int(x) for x in res.labels) - {cl.NOISE})
    _say(args, f"cluster: {args.method} found {n_found} clusters -> {args.out}")


def cmd_sweep(args) -> None:
    fm = _load_features(args.features)
    t_on = not args.no_timings
    curve = modelsel.distortion_sweep(fm, args.k_min, args.k_max, n_init=args.n_init,
                                      seed=stage_seed(args.seed, "sweep"), timings=t_on)
    knee = modelsel.kneedle(curve, args.sensitivity)
    chosen = args.hint if args.hint is not None else knee
    curve = modelsel.with_choice(curve, chosen)
    meta = config_of(args, "sweep-k")
    meta["knee"] = knee
    modelsel.write_elbow_csv(curve, args.out, meta)
    _say(args, f"sweep-k: knee at K={knee}, chosen K={chosen} -> {args.out}")


def _cluster_meta(path) -> dict:
    meta = _read_meta_line(path)
    return meta if isinstance(meta, dict) else {}


def cmd_evaluate(args) -> None:
    _need_file(args.assignments, "assignments file")
    _need_file(args.meta, "metadata file")
    assign = cl.read_assignments_csv(args.assignments)
    truth = seqio.load_metadata(args.meta)
    cmeta = _cluster_meta(args.assignments)
    method = args.method or cmeta.get("method") or cmeta.get("cluster") or "unknown"
    K = cmeta.get("K")
    forced = range(K) if isinstance(K, int) and method != "hdbscan" else None
    table = evaluate.contingency(assign, truth, clusters=forced)
    report = evaluate.f1_report(table)
    doc = evaluate.report_dict(report, method, args.feature_selection, K if K is not None else len(table.clusters),
                               config_of(args, "evaluate"), include_f1=method != "hdbscan")
    evaluate.write_report_json(doc, args.out)
    if args.contingency_out:
        evaluate.write_contingency_csv(table, args.contingency_out, config_of(args, "evaluate"))
    _say(args, f"evaluate: overall weighted F1 {report.overall_weighted_f1:.4f} -> {args.out}")


def cmd_embed(args) -> None:
    fm = _load_features(args.features)
    _, truth = _labels_for(fm, args.meta)
    assign = None
    if args.assignments:
        _need_file(args.assignments, "assignments file")
        assign = cl.read_assignments_csv(args.assignments)
    emb = _embed(args, fm, truth, assign, stage_seed(args.seed, "embed"), args.out, args.svg,
                 config_of(args, "embed"))
    _say(args, f"embed: {emb.coords.shape[0]} points, KL {emb.kl_divergence:.4f} -> {args.out}")


def cmd_bench(args) -> None:
    fm = _load_features(args.features)
    if args.max_rows and fm.shape[0] > args.max_rows:
        fm = fm.take_rows(np.arange(args.max_rows))
    params = {m: _cluster_params(args, m) for m in args.methods}
    rows = evaluate.bench(fm, args.methods, args.K, args.seeds, params)
    evaluate.write_bench_csv(rows, args.out, config_of(args, "bench"))
    summary = evaluate.bench_summary(rows)
    _say(args, "bench: " + ", ".join(f"{m} {s:.3f}s" for m, s in summary.items()))


def cmd_pipeline(args) -> None:
    os.makedirs(args.outdir, exist_ok=True)
    out = lambda name: os.path.join(args.outdir, name)  # noqa: E731
    cfg = config_of(args, "pipeline")
    timings = {}

    t0 = time.perf_counter()
    records, truth = _load_records(args, args.input, args.meta)
    fm = featurize.featurize_dataset(records, k=args.k, normalize=args.normalize)
    timings["featurize"] = time.perf_counter() - t0
    _say(args, f"featurize: {fm.shape[0]} x {fm.shape[1]}")

    t0 = time.perf_counter()
    labels = [truth.get(r) for r in fm.row_ids] if truth else None
    rec, X = _select(args, fm, labels, stage_seed(args.seed, "select"))
    rec["config"] = cfg
    featsel.write_selector_json(rec, out("selector.json"))
    timings["select"] = time.perf_counter() - t0
    _say(args, f"select: {args.select} -> {X.shape[1]} columns")

    method = args.cluster
    curve = None
    knee = None
    if method == "hdbscan":
        K = None
    elif args.skip_sweep:
        if args.K is None:
            raise CliError("--skip-sweep needs --K")
        K = args.K
    else:
        t0 = time.perf_counter()
        k_max = min(args.k_max, X.shape[0])
        curve = modelsel.distortion_sweep(X, args.k_min, k_max, n_init=args.n_init,
                                          seed=stage_seed(args.seed, "sweep"),
                                          timings=not args.no_timings)
        knee = modelsel.kneedle(curve, args.sensitivity)
        try:
            K = modelsel.choose_k(curve, args.K, args.sensitivity)
        except ValueError as exc:
            raise CliError(f"{exc}; pass --K") from None
        curve = modelsel.with_choice(curve, K)
        emeta = dict(cfg, knee=knee)
        modelsel.write_elbow_csv(curve, out("elbow.csv"), emeta)
        timings["sweep"] = time.perf_counter() - t0
        _say(args, f"sweep-k: knee {knee}, using K={K}")

    t0 = time.perf_counter()
    outs = {"meta": cfg, "assignments": out("assignments.csv"),
            "membership": out("membership.csv"), "dendrogram": out("dendrogram.csv")}
    res = _run_cluster(args, method, X, K if K is not None else 1, stage_seed(args.seed, "cluster"), outs)
    timings["cluster"] = time.perf_counter() - t0
    assign = {r: int(c) for r, c in zip(X.row_ids, res.labels)}
    _say(args, f"cluster: {method}")

    doc = {"config": cfg, "n_sequences": len(records), "n_features": int(X.shape[1]),
           "knee": knee}
    if truth:
        table = evaluate.contingency(assign, truth, clusters=range(K) if K is not None else None)
        report = evaluate.f1_report(table)
        doc.update(evaluate.report_dict(report, method, args.select, K if K is not None else res.n_clusters,
                                        include_f1=method != "hdbscan"))
        evaluate.write_contingency_csv(table, out("contingency.csv"), cfg)
        _say(args, f"evaluate: overall weighted F1 {report.overall_weighted_f1:.4f}")
    else:
        doc.update({"method": method, "feature_selection": args.select, "k": K})

    if not args.skip_embed:
        t0 = time.perf_counter()
        emb = _embed(args, X, truth, assign, stage_seed(args.seed, "embed"), out("embedding.csv"),
                     out("embedding.svg"), cfg)
        timings["embed"] = time.perf_counter() - t0
        doc["embedding"] = {"n_points": int(emb.coords.shape[0]), "perplexity": emb.perplexity,
                            "kl_divergence": emb.kl_divergence, "iterations": emb.iterations}
        _say(args, f"embed: {emb.coords.shape[0]} points")

    doc["timings"] = {} if args.no_timings else {k: round(v, 6) for k, v in timings.items()}
    evaluate.write_report_json(doc, out("report.json"))
    _say(args, f"pipeline: report -> {out('report.json')}")


# -- argument parsing ------------------------------------------------------------

def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--no-timings", action="store_true",
                   help="leave wall-clock fields empty so reruns are byte-identical")
    p.add_argument("--quiet", action="store_true", help="no per-stage progress lines")


def _parse_opts(p):
    p.add_argument("--gap-policy", choices=seqio.GAP_POLICIES, default="strip")
    p.add_argument("--on-invalid", choices=seqio.INVALID_POLICIES, default="error")


def _select_opts(p):
    p.add_argument("--select", choices=("none", "rff", "lasso", "boruta"), default="none")
    p.add_argument("--alpha", type=float, default=0.1, help="Lasso penalty")
    p.add_argument("--rff-dim", type=int, default=512, help="RFF output dimension")
    p.add_argument("--gamma", type=float, default=None, help="RFF kernel width (default 1/d)")
    p.add_argument("--median-gamma", action="store_true", help="RFF width by the median heuristic")
    p.add_argument("--boruta-iters", type=int, default=100)
    p.add_argument("--trees", type=int, default=100, help="trees per Boruta forest")


def _cluster_opts(p):
    p.add_argument("--n-init", type=int, default=10, help="k-means/k-modes restarts")
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--m", type=float, default=2.0, help="fuzzy c-means fuzzifier")
    p.add_argument("--linkage", choices=cl.LINKAGES, default="ward")
    p.add_argument("--allow-large", action="store_true", help="permit agglomerative on > 20000 points")
    p.add_argument("--min-cluster-size", type=int, default=15)
    p.add_argument("--min-samples", type=int, default=None)


def _embed_opts(p):
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--tsne-iters", type=int, default=1000)
    p.add_argument("--embed-max", type=int, default=1000,
                   help="stratified subsample size for t-SNE (cap 5000)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spikeclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spikeclust {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a planted-variant FASTA and metadata TSV")
    p.add_argument("--per-variant", type=int, default=500)
    p.add_argument("--length", type=int, default=synth.SPIKE_LENGTH)
    p.add_argument("--noise-rate", type=float, default=0.001)
    p.add_argument("--out-fasta", required=True)
    p.add_argument("--out-meta", required=True)
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("featurize", help="k-mer count matrix from a FASTA file")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--normalize", action="store_true", help="divide each row by its k-mer total")
    p.add_argument("--out", required=True)
    _parse_opts(p)
    _common(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("select", help="fit a feature selector / projection")
    p.add_argument("--features", required=True)
    p.add_argument("--meta", help="id<TAB>variant labels (needed by lasso and boruta)")
    p.add_argument("--out", required=True, help="selector JSON")
    p.add_argument("--out-features", help="write the transformed feature matrix here")
    _select_opts(p)
    _common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("cluster", help="cluster a feature matrix")
    p.add_argument("--features", required=True)
    p.add_argument("--method", choices=cl.METHODS, default="kmeans")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--out", required=True, help="assignments CSV")
    p.add_argument("--membership-out", help="fuzzy membership CSV")
    p.add_argument("--dendrogram-out", help="agglomerative merge list CSV")
    _cluster_opts(p)
    _common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep-k", help="k-means distortion over a K range and its knee")
    p.add_argument("--features", required=True)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=14)
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--sensitivity", type=float, default=1.0)
    p.add_argument("--hint", type=int, default=None, help="use this K instead of the knee")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="contingency table and F1 against known variants")
    p.add_argument("--assignments", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--method", default=None, help="method name for the report (default: from the assignments file)")
    p.add_argument("--feature-selection", default="none")
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--contingency-out")
    _common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("embed", help="2-d t-SNE coordinates")
    p.add_argument("--features", required=True)
    p.add_argument("--meta")
    p.add_argument("--assignments")
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    _embed_opts(p)
    _common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("bench", help="time the clustering methods")
    p.add_argument("--features", required=True)
    p.add_argument("--methods", nargs="+", choices=cl.METHODS, default=list(cl.METHODS))
    p.add_argument("--K", type=int, nargs="+", default=[5])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--max-rows", type=int, default=None)
    p.add_argument("--out", required=True)
    _cluster_opts(p)
    _common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("pipeline", help="featurize, select, sweep-k, cluster, evaluate, embed")
    p.add_argument("--input", required=True)
    p.add_argument("--meta")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--cluster", choices=cl.METHODS, default="kmeans")
    p.add_argument("--K", type=int, default=None, help="number of clusters (default: the knee)")
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=14)
    p.add_argument("--sensitivity", type=float, default=1.0)
    p.add_argument("--skip-sweep", action="store_true", help="no elbow sweep; cluster at --K directly")
    p.add_argument("--skip-embed", action="store_true")
    p.add_argument("--outdir", required=True)
    _parse_opts(p)
    _select_opts(p)
    _cluster_opts(p)
    _embed_opts(p)
    _common(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _parallel.set_num_threads(args.threads)
        # BLAS stays single-threaded: its reductions are not order-stable
        with threadpool_limits(limits=1):
            args.func(args)
    except (CliError, ValueError, OSError, KeyError) as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(f"spikeclust: error: {msg}", file=sys.stderr)
        return 2 if isinstance(exc, CliError) else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
