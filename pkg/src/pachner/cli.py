"""Command-line entry point: ``pachner <subcommand> ...``.

Every subcommand that writes files records a ``manifest.json`` (flags,
seeds, input digests, version, wall time) next to its outputs.  Exit codes:
0 success, 1 invalid input, 2 node budget exhausted.  Errors are reported
as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path

from . import analysis, dataset, graph, isosig, mlp
from .moves import parse_kinds

log = logging.getLogger("pachner")


class CliError(Exception):
    pass


class BudgetAbort(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(path: Path, args, inputs, started, seeds=None):
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "subcommand": args.command,
        "flags": {k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()},
        "rng_seeds": seeds or {},
        "inputs": {str(p): _digest(p) for p in inputs},
        "version": _version(),
        "wall_time_s": round(time.time() - started, 3),
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _outdir(p) -> Path:
    d = Path(p)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_generate(args, started):
    out = _outdir(args.out)
    kinds = parse_kinds(args.moves)
    status = 0
    try:
        g = graph.generate(args.seed, kinds, args.depth, max_nodes=args.max_nodes,
                           max_tets=args.max_tets, jobs=args.jobs)
    except graph.BudgetExceeded as exc:
        g = exc.graph
        status = 2
    graph.export_graph(g, out / "graph.txt")
    prof = graph.growth_profile(g)
    _write_csv(out / "growth.csv", ["depth", "new_nodes", "nodes", "edges", "density"],
               zip(prof.depth, prof.new_nodes, prof.nodes, prof.edges, prof.density))
    _write_manifest(out / "manifest.json", args, [], started)
    print(json.dumps({"nodes": g.node_count, "edges": g.edge_count, "completed_depth": g.depth_bound}))
    if status:
        raise BudgetAbort(f"node budget {args.max_nodes} exceeded; wrote depth {g.depth_bound}")
    return 0


def cmd_analyze(args, started):
    out = _outdir(args.out)
    g = graph.import_graph(args.graph)
    report = analysis.compute_metrics(g)
    (out / "metrics.json").write_text(report.to_json() + "\n", encoding="utf-8")
    _write_manifest(out / "manifest.json", args, [args.graph], started)
    print(report.to_json())
    return 0


def cmd_census(args, started):
    out = _outdir(args.out)
    seeds = isosig.read_isosig_file(args.seeds)
    if args.limit:
        seeds = seeds[:args.limit]
    kinds = parse_kinds(args.moves)
    summaries = graph.batch_generate(seeds, kinds, args.depth, max_nodes=args.max_nodes,
                                     max_tets=args.max_tets, jobs=args.jobs)
    rows = []
    for s in summaries:
        rows.append([s.seed, s.seed_tets, s.node_count, s.edge_count, s.density, s.avg_tets,
                     s.completed_depth, int(s.ok), s.error])
    _write_csv(out / "summaries.csv",
               ["isosig", "seed_tets", "nodes", "edges", "density", "avg_tets", "completed_depth", "ok", "error"],
               rows)
    ok = [s for s in summaries if s.ok]
    if ok:
        mean = analysis.mean_degree_distribution([s.degree_histogram for s in ok])
        _write_csv(out / "degree_distribution.csv", ["degree", "mean_frequency"], sorted(mean.items()))
    (out / "degree_histograms.json").write_text(
        json.dumps({s.seed: s.degree_histogram for s in summaries}, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(out / "manifest.json", args, [args.seeds], started)
    print(json.dumps({"seeds": len(summaries), "ok": len(ok)}))
    return 0


def _read_summaries(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and not {"isosig", "nodes"} <= set(rows[0]):
        raise CliError("summaries CSV needs 'isosig' and 'nodes' columns")
    return {r["isosig"]: int(r["nodes"]) for r in rows if r.get("ok", "1") in ("1", "True", "true")}


def _read_invariants(path, column) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and ("isosig" not in rows[0] or column not in rows[0]):
        raise CliError(f"invariants CSV needs 'isosig' and '{column}' columns")
    return {r["isosig"]: float(r[column]) for r in rows}


def cmd_correlate(args, started):
    out = _outdir(args.out)
    sizes = _read_summaries(args.summaries)
    inv = _read_invariants(args.invariants, args.invariant)
    res = analysis.invariant_correlation(sizes, inv, bins=args.bins, c=args.bound)
    _write_csv(out / "scatter.csv", ["isosig", args.invariant, "nodes"], res.rows)
    fit = res.fit
    doc = {"invariant": args.invariant, "slope": fit.slope, "intercept": fit.intercept,
           "bins": args.bins, "bins_used": fit.bins_used, "envelope_points": fit.bin_points,
           "bound_constant": fit.bound_constant, "bound_coverage": fit.coverage,
           "joined": len(res.rows), "missing": len(res.missing)}
    (out / "envelope.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out / "manifest.json", args, [args.summaries, args.invariants], started)
    print(json.dumps({"slope": fit.slope, "joined": len(res.rows)}))
    return 0


def cmd_lengths(args, started):
    g = graph.import_graph(args.graph)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["length", "count"])
    w.writerows(dataset.length_histogram(g).items())
    return 0


def cmd_sample(args, started):
    g = graph.import_graph(args.graph)
    sigs = dataset.sample_fixed_length(g, args.length, args.count, args.rng_seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    isosig.write_isosig_file(out, sigs, header=f"{len(sigs)} signatures of length {args.length} from {g.seed}")
    _write_manifest(out.with_name(out.name + ".manifest.json"), args, [args.graph], started,
                    {"sample": args.rng_seed})
    print(json.dumps({"sampled": len(sigs)}))
    return 0


def cmd_dataset(args, started):
    out = _outdir(args.out)
    a = isosig.read_isosig_file(args.class_a)
    b = isosig.read_isosig_file(args.class_b)
    names = tuple(args.names) if args.names else (Path(args.class_a).stem, Path(args.class_b).stem)
    ds = dataset.build_binary_dataset(a, b, args.length, args.rng_seed, names, k=args.folds)
    dataset.save_dataset(ds, out)
    _write_manifest(out / "manifest.json", args, [args.class_a, args.class_b], started,
                    {"dataset": args.rng_seed})
    print(json.dumps({"samples": len(ds), "folds": [len(f) for f in ds.folds]}))
    return 0


def _load_config(path) -> mlp.MLPConfig:
    if path is None:
        return mlp.MLPConfig()
    try:
        return mlp.MLPConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise CliError(f"config is not valid JSON: {exc}") from None


def cmd_train(args, started):
    out = _outdir(args.out)
    ds = dataset.load_dataset(args.dataset)
    cfg = _load_config(args.config)
    rep = mlp.cross_validate(ds, cfg, jobs=args.jobs)
    mdir = _outdir(out / "models")
    for i, m in enumerate(rep.models):
        mlp.save_model(m, mdir / f"fold{i}.npz")
    doc = rep.to_dict(pair=list(ds.class_names), seeds={"dataset": ds.rng_seed, "model": cfg.rng_seed})
    doc["config"] = cfg.to_dict()
    (out / "cv_report.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    rows = []
    for i, m in enumerate(rep.models):
        for h in m.history:
            rows.append([i, h["epoch"], h["train_loss"], h["train_accuracy"],
                         h.get("val_loss", ""), h.get("val_accuracy", "")])
    _write_csv(out / "training_curve.csv",
               ["fold", "epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"], rows)
    inputs = [Path(args.dataset) / "dataset.csv", Path(args.dataset) / "folds.json"]
    if args.config:
        inputs.append(args.config)
    _write_manifest(out / "manifest.json", args, inputs, started,
                    {"dataset": ds.rng_seed, "model": cfg.rng_seed})
    print(json.dumps({k: doc[k] for k in ("accuracyMean", "accuracyStd", "mccMean", "mccStd")}))
    return 0


def cmd_saliency(args, started):
    out = _outdir(args.out)
    ds = dataset.load_dataset(args.dataset)
    paths = sorted(Path(args.models).glob("fold*.npz"), key=lambda p: int(p.stem[4:]))
    if not paths:
        raise CliError(f"no fold*.npz checkpoints in {args.models}")
    models = [mlp.load_model(p) for p in paths]
    X = ds.X
    tests = [X[ds.split(int(p.stem[4:]))[1]] for p in paths]
    rep = mlp.gradient_saliency(models, tests, ds.length, args.threshold)
    _write_csv(out / "saliency_matrix.csv", ["position", *isosig.ALPHABET],
               ([i, *row] for i, row in enumerate(rep.matrix.tolist())))
    _write_csv(out / "letter_histogram.csv", ["character", "index", "count"],
               ([c, i, int(n)] for i, (c, n) in enumerate(zip(isosig.ALPHABET, rep.letter_histogram))))
    _write_csv(out / "position_histogram.csv", ["position", "count"],
               enumerate(int(n) for n in rep.position_histogram))
    _write_manifest(out / "manifest.json", args, paths + [Path(args.dataset) / "dataset.csv"], started)
    print(json.dumps({"above_threshold": int(rep.position_histogram.sum())}))
    return 0


def cmd_roundtrip(args, started):
    sigs = isosig.read_isosig_file(args.isosigs)
    failed = 0
    for s in sigs:
        try:
            t = isosig.encode(isosig.decode(s))
        except (isosig.ParseError, ValueError) as exc:
            print(f"FAIL {s} error: {exc}")
            failed += 1
            continue
        if t == s:
            print(f"PASS {s}")
        else:
            print(f"FAIL {s} -> {t}")
            failed += 1
    print(f"# {len(sigs) - failed}/{len(sigs)} passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pachner", description=__doc__.splitlines()[0])
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    def moves_args(sp, default="23"):
        sp.add_argument("--moves", default=default, help="23, 14, all, or a list like 23,32")
        sp.add_argument("--depth", type=int, required=True)
        sp.add_argument("--max-nodes", type=int, default=graph.DEFAULT_MAX_NODES)
        sp.add_argument("--max-tets", type=int, default=0, help="drop moves exceeding this many tetrahedra")
        sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("generate", help="Pachner graph from a seed signature")
    sp.add_argument("--seed", required=True)
    moves_args(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("analyze", help="network metrics of a graph file")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("census", help="graphs and summaries for every seed in a file")
    sp.add_argument("--seeds", required=True)
    moves_args(sp)
    sp.add_argument("--limit", type=int, default=0, help="only the first N seeds")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_census)

    sp = sub.add_parser("correlate", help="join graph sizes with invariants and fit the lower envelope")
    sp.add_argument("--summaries", required=True)
    sp.add_argument("--invariants", required=True)
    sp.add_argument("--invariant", default="systole")
    sp.add_argument("--bins", type=int, default=20)
    sp.add_argument("--bound", type=float, default=75.0, help="c in the candidate bound c/sqrt(x)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_correlate)

    sp = sub.add_parser("lengths", help="signature length histogram (CSV on stdout)")
    sp.add_argument("--graph", required=True)
    sp.set_defaults(func=cmd_lengths)

    sp = sub.add_parser("sample", help="random fixed-length signatures from a graph")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--length", type=int, default=30)
    sp.add_argument("--count", type=int, default=2000)
    sp.add_argument("--rng-seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("dataset", help="labelled one-hot dataset with stratified folds")
    sp.add_argument("--class-a", required=True)
    sp.add_argument("--class-b", required=True)
    sp.add_argument("--names", nargs=2)
    sp.add_argument("--length", type=int, default=30)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--rng-seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_dataset)

    sp = sub.add_parser("train", help="cross-validated classifier training")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--config")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("saliency", help="gradient saliency of trained fold models")
    sp.add_argument("--models", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--threshold", type=float, default=1e-4)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_saliency)

    sp = sub.add_parser("roundtrip", help="check encode(decode(s)) == s per line")
    sp.add_argument("--isosigs", required=True)
    sp.set_defaults(func=cmd_roundtrip)
    return p


def _fail(code: int, exc: BaseException) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        return args.func(args, started)
    except BudgetAbort as exc:
        return _fail(2, exc)
    except (CliError, ValueError, OSError, KeyError) as exc:
        return _fail(1, exc)


if __name__ == "__main__":
    sys.exit(main())
