"""Command-line interface: simulate, fit, predict, eval and bench."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import io
from .bench import BenchConfig, run_bench, summarize, summary_text, write_bench
from .gmm import EmConfig
from .metrics import ari
from .simulate import simulate
from .tree import FCUBT, FcubtConfig, predict

logger = logging.getLogger("fcubt")


class CliError(Exception):
    pass


def _ncomp(text: str):
    try:
        value = int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return value


def _preprocessing(noiseless: bool) -> dict:
    if noiseless:
        return {"noiseless": True, "method": "linear interpolation"}
    return {"noiseless": False, "method": "local polynomial", "degree": 1, "kernel": "epanechnikov", "bandwidth": "auto"}


def cmd_simulate(args) -> int:
    sample = simulate(args.scenario, args.n, args.seed)
    data = sample.noiseless if args.noiseless else sample.data
    io.write_curves(args.out, data, labels=sample.true_labels)
    print(f"wrote {sample.data.n_obs} curves ({data.n_components} component(s)) to {args.out}")
    return 0


def cmd_fit(args) -> int:
    ids, curves, _ = io.read_curves(args.input)
    grids = io.common_grids(curves)
    data = io.prepare(curves, grids, args.noiseless)
    config = FcubtConfig(ncomp=args.ncomp, k_max=args.kmax, minsize=args.minsize, em=EmConfig(seed=args.seed))
    if data.n_obs < config.minsize:
        print(f"warning: {data.n_obs} curves is fewer than minsize={config.minsize}; returning a single cluster",
              file=sys.stderr)
    model = FCUBT(config).fit(data)
    labels = model.labels_
    if args.model_out:
        io.save_model(args.model_out, model.tree, model.partition, _preprocessing(args.noiseless))
    if args.labels_out:
        io.write_labels(args.labels_out, ids, labels)
    sizes = np.bincount(labels, minlength=model.n_clusters)
    print(f"K = {model.n_clusters}")
    print("cluster sizes: " + " ".join(f"{c}:{s}" for c, s in enumerate(sizes)))
    return 0


def cmd_predict(args) -> int:
    tree, partition, prep = io.load_model(args.model)
    ids, curves, _ = io.read_curves(args.input)
    if curves[0].n_components != len(tree.grids):
        raise CliError(f"model has {len(tree.grids)} component(s), input has {curves[0].n_components}")
    data = io.prepare(curves, tree.grids, bool(prep.get("noiseless", False)))
    labels, probs = predict(tree, partition, data)
    io.write_labels(args.out, ids, labels, probs)
    sizes = np.bincount(labels, minlength=partition.n_clusters)
    print("predicted sizes: " + " ".join(f"{c}:{s}" for c, s in enumerate(sizes)))
    return 0


def cmd_eval(args) -> int:
    pred = io.read_labels(args.labels)
    truth = io.read_labels(args.truth)
    if set(pred) != set(truth):
        raise CliError("label files do not cover the same curve ids")
    ids = list(truth)
    value = ari([truth[i] for i in ids], [pred[i] for i in ids])
    print(f"ARI = {value:.6f}")
    print(json.dumps({"ari": value, "n": len(ids)}))
    return 0


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        scenario=args.scenario, reps=args.reps, n=args.n, n0=args.n0, n1=args.n1, seed=args.seed,
        ncomp=args.ncomp, k_max=args.kmax, minsize=args.minsize, jobs=args.jobs,
    )
    results = run_bench(cfg)
    summary = summarize(results)
    if args.out:
        write_bench(args.out, cfg, results, summary)
    sys.stdout.write(summary_text(cfg, summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcubt", description="Clustering of functional data with unsupervised binary trees.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated sample as a curve CSV")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noiseless", action="store_true", help="write curves before measurement noise")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    def tree_options(p):
        p.add_argument("--ncomp", type=_ncomp, default=0.95,
                       help="number of principal components, or a variance ratio in (0, 1]")
        p.add_argument("--kmax", type=int, default=5)
        p.add_argument("--minsize", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fit", help="grow and join a tree on a curve CSV")
    p.add_argument("--input", required=True)
    tree_options(p)
    p.add_argument("--noiseless", action="store_true", help="skip smoothing, interpolate linearly")
    p.add_argument("--model-out")
    p.add_argument("--labels-out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="classify new curves with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="adjusted Rand index between two labelings")
    p.add_argument("--labels", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="seeded replications on a simulated scenario")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--n0", type=int, help="training size (prediction mode)")
    p.add_argument("--n1", type=int, help="test size (prediction mode)")
    tree_options(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, KeyError) as exc:
        print(f"fcubt {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
