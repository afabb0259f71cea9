"""Seeded replication harness: model-selection frequencies and prediction ARI."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .gmm import EmConfig
from .metrics import ari
from .simulate import ScenarioSample, simulate
from .smoothing import smooth_sample
from .tree import FCUBT, FcubtConfig

logger = logging.getLogger(__name__)

TRUE_K = 5

# recorded in the output so a reader knows how Scenario 2/3 curves were smoothed
SMOOTHING = {"method": "local polynomial", "degree": 1, "kernel": "epanechnikov", "bandwidth": "auto (GCV)"}


@dataclass(frozen=True)
class BenchConfig:
    scenario: int = 1
    reps: int = 10
    n: int = 1000
    n0: Optional[int] = None
    n1: Optional[int] = None
    seed: int = 0
    ncomp: Union[int, float] = 0.95
    k_max: int = 5
    minsize: int = 10
    jobs: int = 1

    def __post_init__(self):
        if self.scenario not in (1, 2, 3):
            raise ValueError("scenario must be 1, 2 or 3")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if (self.n0 is None) != (self.n1 is None):
            raise ValueError("prediction mode needs both n0 and n1")

    @property
    def prediction(self) -> bool:
        return self.n0 is not None


def replication_seeds(seed: int, reps: int) -> list:
    """(data, fit, test) seeds of each replication, derived from the root seed."""
    out = []
    for r in range(reps):
        s = np.random.SeedSequence([seed, r]).generate_state(3)
        out.append(tuple(int(x) for x in s))
    return out


def prepare_sample(sample: ScenarioSample):
    """Curves as the clustering sees them: Scenario 1 is noiseless, the others get smoothed."""
    if sample.scenario_id == 1:
        return sample.data
    return smooth_sample(sample.data)


def fit_scenario(sample: ScenarioSample, config: FcubtConfig) -> FCUBT:
    return FCUBT(config).fit(prepare_sample(sample))


def _fcubt_config(cfg: BenchConfig, fit_seed: int) -> FcubtConfig:
    return FcubtConfig(ncomp=cfg.ncomp, k_max=cfg.k_max, minsize=cfg.minsize, em=EmConfig(seed=fit_seed))


def run_replication(cfg: BenchConfig, rep: int, seeds: tuple) -> dict:
    data_seed, fit_seed, test_seed = seeds
    row = {"rep": rep, "data_seed": data_seed, "fit_seed": fit_seed}
    if cfg.prediction:
        row["test_seed"] = test_seed
    try:
        n = cfg.n0 if cfg.prediction else cfg.n
        train = simulate(cfg.scenario, n, data_seed)
        model = fit_scenario(train, _fcubt_config(cfg, fit_seed))
        row["k"] = model.n_clusters
        row["n_leaves"] = len(model.tree.leaves)
        row["ari_fit"] = ari(train.true_labels, model.labels_)
        if cfg.prediction:
            test = simulate(cfg.scenario, cfg.n1, test_seed)
            row["ari_predict"] = ari(test.true_labels, model.predict(prepare_sample(test)))
        row["error"] = ""
    except Exception as exc:  # a failed replication is recorded, not fatal
        logger.warning("replication %d failed: %s", rep, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_one(args):
    return run_replication(*args)


def run_bench(cfg: BenchConfig) -> list:
    """Run all replications; results are ordered by replication index."""
    tasks = [(cfg, r, s) for r, s in enumerate(replication_seeds(cfg.seed, cfg.reps))]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def _quantiles(values) -> dict:
    if not values:
        return {}
    q = np.quantile(np.asarray(values, dtype=float), [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(["min", "q25", "median", "q75", "max"], (float(x) for x in q)))


def summarize(results: list) -> dict:
    ok = [r for r in results if not r["error"]]
    ks = [r["k"] for r in ok]
    counts = {int(k): ks.count(k) for k in sorted(set(ks))}
    out = {
        "replications": len(results),
        "failed": len(results) - len(ok),
        "k_counts": counts,
        "fraction_true_k": (ks.count(TRUE_K) / len(ok)) if ok else float("nan"),
        "ari_fit": _quantiles([r["ari_fit"] for r in ok]),
    }
    if ok and "ari_predict" in ok[0]:
        out["ari_predict"] = _quantiles([r["ari_predict"] for r in ok])
    return out


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def summary_text(cfg: BenchConfig, summary: dict) -> str:
    lines = ["configuration"]
    for k, v in asdict(cfg).items():
        lines.append(f"  {k}: {v}")
    if cfg.scenario != 1:
        lines.append("  smoothing: " + ", ".join(f"{k}={v}" for k, v in SMOOTHING.items()))
    lines.append("")
    lines.append(f"replications: {summary['replications']} ({summary['failed']} failed)")
    lines.append("selected number of clusters:")
    n_ok = summary["replications"] - summary["failed"]
    for k, c in summary["k_counts"].items():
        lines.append(f"  K={k}: {c} ({c / n_ok:.3f})")
    lines.append(f"fraction K={TRUE_K}: {summary['fraction_true_k']:.3f}")
    for name in ("ari_fit", "ari_predict"):
        if summary.get(name):
            q = summary[name]
            lines.append(f"{name}: " + " ".join(f"{k}={v:.4f}" for k, v in q.items()))
    return "\n".join(lines) + "\n"


def write_bench(out_dir, cfg: BenchConfig, results: list, summary: dict):
    """Write replications.csv, summary.csv, summary.txt and config.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["rep", "data_seed", "fit_seed"] + (["test_seed"] if cfg.prediction else [])
    cols += ["k", "n_leaves", "ari_fit"] + (["ari_predict"] if cfg.prediction else []) + ["error"]
    with open(out / "replications.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in results:
            w.writerow([_fmt(r.get(c, "")) for c in cols])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "value"])
        w.writerow(["replications", summary["replications"]])
        w.writerow(["failed", summary["failed"]])
        for k, c in summary["k_counts"].items():
            w.writerow([f"count_k{k}", c])
        w.writerow([f"fraction_k{TRUE_K}", _fmt(summary["fraction_true_k"])])
        for name in ("ari_fit", "ari_predict"):
            for q, v in summary.get(name, {}).items():
                w.writerow([f"{name}_{q}", _fmt(v)])
    (out / "summary.txt").write_text(summary_text(cfg, summary))
    echo = {"bench": asdict(cfg), "seeds": replication_seeds(cfg.seed, cfg.reps)}
    if cfg.scenario != 1:
        echo["smoothing"] = SMOOTHING
    (out / "config.json").write_text(json.dumps(echo, indent=1) + "\n")
