"""Command-line pipeline: split, fit, sample, evaluate, diagnose."""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import geometry_report
from .evaluation import (MetricsReport, ari, auc_pr, auc_roc, circular_membership_layout,
                         link_scores, nmi, pca_project, reorder_adjacency)
from .generator import sample
from .graph import (DisconnectedGraphError, GraphFormatError, degrees,
                    format_pairs, read_edge_list, serialize_edge_list, split_links)
from .inference import FitConfig, fit
from .io import (ModelSchemaError, dumps, embeddings_tsv, load_model,
                 state_to_dict, write_json, write_tsv)
from .params import Hyperparams

MANIFEST_VERSION = 1


class CliError(Exception):
    pass


def _threads_limit():
    value = os.environ.get("GRAPHHULL_THREADS")
    if not value:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(value))


def manifest_name(command: str) -> str:
    return f"{command}.manifest.json"


def _write_manifest(out_dir: Path, args, inputs, outputs, seed, started, extra=None):
    flags = {k: (str(v) if isinstance(v, Path) else v)
             for k, v in vars(args).items() if k != "func"}
    manifest = {
        "schema_version": MANIFEST_VERSION,
        "subcommand": args.command,
        "flags": flags,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "version": __version__,
        "wall_time_seconds": round(time.perf_counter() - started, 6),
    }
    if extra:
        manifest.update(extra)
    write_json(out_dir / manifest_name(args.command), manifest)


def _read_graph(path: Path):
    if not path.is_file():
        raise CliError(f"graph file not found: {path}")
    try:
        return read_edge_list(path)
    except GraphFormatError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _read_pairs(path: Path, index: dict[str, int]) -> np.ndarray:
    if not path.is_file():
        raise CliError(f"pair file not found: {path}")
    pairs = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise CliError(f"{path} line {lineno}: expected two node ids")
        missing = [t for t in tokens if t not in index]
        if missing:
            raise CliError(f"{path} line {lineno}: pair ({tokens[0]}, {tokens[1]}) "
                           f"references node {missing[0]} outside the model")
        pairs.append((index[tokens[0]], index[tokens[1]]))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _read_labels(path: Path, index: dict[str, int], n: int) -> np.ndarray:
    labels = np.full(n, None, dtype=object)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise CliError(f"{path} line {lineno}: expected 'node label'")
        if tokens[0] not in index:
            raise CliError(f"{path} line {lineno}: unknown node {tokens[0]}")
        labels[index[tokens[0]]] = tokens[1]
    if any(x is None for x in labels):
        raise CliError(f"{path}: labels missing for some model nodes")
    return labels.astype(str)


def _node_ids(state):
    ids = state.extras.get("node_ids")
    return ids if ids is not None else [str(i) for i in range(state.n_nodes)]


def cmd_split(args) -> None:
    started = time.perf_counter()
    g = _read_graph(args.graph)
    try:
        res = split_links(g, args.holdout, args.seed)
    except (DisconnectedGraphError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "residual.txt": serialize_edge_list(res.residual),
        "test_positives.txt": format_pairs(res.test_positives, g.node_labels),
        "test_negatives.txt": format_pairs(res.test_negatives, g.node_labels),
    }
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    write_json(out / "split.json", res.manifest())
    warnings = []
    if res.shortfall:
        warnings.append(f"only {len(res.test_positives)} edges removable; "
                        f"shortfall of {res.shortfall}")
        print(f"warning: {warnings[-1]}", file=sys.stderr)
    _write_manifest(out, args, [args.graph], [out / n for n in [*files, "split.json"]],
                    args.seed, started, {"warnings": warnings})


def cmd_fit(args) -> None:
    started = time.perf_counter()
    g = _read_graph(args.graph)
    K = args.hulls if args.hulls is not None else args.dim
    hp = Hyperparams(K=K, D=args.dim, epsilon=args.epsilon, sigma_min=args.sigma_min,
                     sigma_max=args.sigma_max, kappa=args.kappa,
                     gs_temp_start=args.gs_start, gs_temp_end=args.gs_end)
    cfg = FitConfig(learning_rate=args.lr, epochs=args.epochs,
                    neg_samples=args.neg_samples, seed=args.seed)
    report = fit(g, hp, cfg)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    ids = list(g.labels)
    write_json(out / "model.json", state_to_dict(report.final_state, args.seed, ids))
    (out / "embeddings.tsv").write_text(embeddings_tsv(report.final_state, ids),
                                        encoding="utf-8")
    write_json(out / "fit_report.json", {
        "objective_trace": report.objective_trace,
        "epochs_run": report.epochs_run,
        "converged": report.converged,
        "status": report.status,
        "seed": report.seed,
        "diagnostics": report.diagnostics.to_dict(),
    })
    _write_manifest(out, args, [args.graph],
                    [out / "model.json", out / "embeddings.tsv", out / "fit_report.json"],
                    args.seed, started)


def cmd_sample(args) -> None:
    started = time.perf_counter()
    K = args.hulls if args.hulls is not None else args.dim
    hp = Hyperparams(K=K, D=args.dim, epsilon=args.epsilon, tau_g=1.0, tau_s=5.0)
    draw = sample(hp, args.nodes, args.seed)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "graph.txt").write_text(serialize_edge_list(draw.graph), encoding="utf-8")
    truth = state_to_dict(draw.state, args.seed)
    truth["pi"] = draw.pi.tolist()
    write_json(out / "truth.json", truth)
    (out / "truth_labels.txt").write_text(
        "".join(f"{i} {c}\n" for i, c in enumerate(draw.state.assignments)), encoding="utf-8")
    geo = geometry_report(draw.state, deg_max=degrees(draw.graph)[1])
    write_json(out / "geometry.json", geo.to_dict())
    _write_manifest(out, args, [], [out / n for n in
                                    ("graph.txt", "truth.json", "truth_labels.txt",
                                     "geometry.json")],
                    args.seed, started, {"min_margin": geo.min_margin})


def cmd_evaluate(args) -> None:
    started = time.perf_counter()
    try:
        state = load_model(args.model)
    except (OSError, ModelSchemaError) as exc:
        raise CliError(str(exc)) from exc
    ids = _node_ids(state)
    index = {x: i for i, x in enumerate(ids)}
    pos = _read_pairs(args.positives, index)
    neg = _read_pairs(args.negatives, index)
    scores = link_scores(state, np.concatenate([pos, neg]))
    labels = np.r_[np.ones(len(pos), bool), np.zeros(len(neg), bool)]
    try:
        report = MetricsReport(auc_roc=auc_roc(scores, labels), auc_pr=auc_pr(scores, labels),
                               n_test_pairs=len(labels))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    inputs = [args.model, args.positives, args.negatives]
    if args.truth_labels is not None:
        truth = _read_labels(args.truth_labels, index, state.n_nodes)
        report.nmi = nmi(state.assignments, truth)
        report.ari = ari(state.assignments, truth)
        inputs.append(args.truth_labels)
    out = args.out_dir or args.model.parent
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "metrics.json", report.to_dict())
    sys.stdout.write(dumps(report.to_dict()))
    _write_manifest(out, args, inputs, [out / "metrics.json"], state.extras.get("seed"),
                    started)


def cmd_diagnose(args) -> None:
    started = time.perf_counter()
    try:
        state = load_model(args.model)
    except (OSError, ModelSchemaError) as exc:
        raise CliError(str(exc)) from exc
    ids = _node_ids(state)
    inputs = [args.model]
    deg_max = None
    g = None
    if args.graph is not None:
        g = _read_graph(args.graph)
        index = {x: i for i, x in enumerate(ids)}
        if g.n_nodes != state.n_nodes or any(x not in index for x in g.labels):
            raise CliError("graph nodes do not match the model")
        deg_max = degrees(g)[1]
        inputs.append(args.graph)
    report = geometry_report(state, deg_max=deg_max)
    out = args.out_dir or args.model.parent
    out.mkdir(parents=True, exist_ok=True)
    outputs = [out / "geometry.json", out / "spectra.tsv", out / "pca_nodes.tsv",
               out / "pca_prototypes.tsv", out / "circular.tsv"]
    write_json(outputs[0], report.to_dict())
    K = state.K
    write_tsv(outputs[1], ["hull"] + [f"sv{r}" for r in range(K)],
              ([str(k), *h["singular_values"]] for k, h in enumerate(report.per_hull)))
    # project nodes and prototypes into one shared PCA frame
    stacked = np.vstack([state.Z, state.B.reshape(-1, state.D)])
    proj, var = pca_project(stacked, 2)
    n = state.n_nodes
    write_tsv(outputs[2], ["node", "hull", "pc1", "pc2"],
              ([ids[i], str(int(state.assignments[i])), *proj[i]] for i in range(n)))
    write_tsv(outputs[3], ["hull", "prototype", "pc1", "pc2"],
              ([str(k), str(r), *proj[n + k * K + r]] for k in range(K) for r in range(K)))
    rows = []
    for k in range(K):
        members = np.flatnonzero(state.assignments == k)
        xy, _ = circular_membership_layout(state.Omega[members].reshape(-1, K))
        rows += [[ids[i], str(k), *xy[m]] for m, i in enumerate(members)]
    write_tsv(outputs[4], ["node", "hull", "x", "y"], rows)
    if g is not None:
        # graph indices follow the model's node order
        perm = reorder_adjacency(g, state)
        write_tsv(out / "reorder.tsv", ["position", "node"],
                  ([str(p), ids[v]] for p, v in enumerate(perm)))
        outputs.append(out / "reorder.tsv")
    _write_manifest(out, args, inputs, outputs, state.extras.get("seed"), started,
                    {"explained_variance": var.tolist()})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphhull", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="connectivity-preserving link-prediction split")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--holdout", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit", help="MAP fit of the two-level hull model")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--hulls", type=int, default=None, help="defaults to --dim")
    p.add_argument("--epsilon", type=float, default=0.45)
    p.add_argument("--sigma-min", type=float, default=0.3)
    p.add_argument("--sigma-max", type=float, default=1.5)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--neg-samples", type=int, default=None,
                   help="non-edges sampled per epoch (default: number of edges)")
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--gs-start", type=float, default=1.0)
    p.add_argument("--gs-end", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="draw a synthetic graph with planted hulls")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--hulls", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=0.45)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="AUC and community metrics for a fitted model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--positives", type=Path, required=True)
    p.add_argument("--negatives", type=Path, required=True)
    p.add_argument("--truth-labels", type=Path, default=None)
    p.add_argument("--out-dir", type=Path, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="geometry report and figure data")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--graph", type=Path, default=None)
    p.add_argument("--out-dir", type=Path, default=None)
    p.set_defaults(func=cmd_diagnose)
    return parser


def _validate(parser, args) -> None:
    if args.command in ("fit", "sample"):
        K = args.hulls if args.hulls is not None else args.dim
        if args.dim < 1 or K < 1:
            parser.error("--dim and --hulls must be positive")
        if K > args.dim:
            parser.error(f"--hulls {K} exceeds --dim {args.dim}: the K global archetypes "
                         "must be linearly independent in D dimensions, so K <= D")
        if not 0 < args.epsilon < 1:
            parser.error("--epsilon must lie in (0, 1)")
    if args.command == "fit":
        if not 0 < args.sigma_min < args.sigma_max:
            parser.error("need 0 < --sigma-min < --sigma-max")
        if args.epochs < 0 or args.lr <= 0 or args.kappa <= 0:
            parser.error("--epochs must be >= 0; --lr and --kappa must be positive")
        if args.neg_samples is not None and args.neg_samples < 1:
            parser.error("--neg-samples must be >= 1")
    if args.command == "sample" and args.nodes < 1:
        parser.error("--nodes must be positive")
    if args.command == "split" and not 0 < args.holdout < 1:
        parser.error("--holdout must lie in (0, 1)")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        with _threads_limit():
            args.func(args)
    except CliError as exc:
        print(f"graphhull {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
