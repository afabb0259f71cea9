"""Curve CSV and model JSON formats, and the preprocessing shared by fit and predict."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .fdata import MultiFunData, RawCurve, SamplingGrid, UnivariateSample
from .gmm import EmConfig, GaussianMixture
from .mfpca import MfpcaModel
from .smoothing import interpolate_curves, smooth_curves
from .tree import ClusterTree, FcubtConfig, Partition, TreeNode
from .ufpca import UnivariateBasis

MODEL_FORMAT = "fcubt-model"
MODEL_VERSION = 1
DEFAULT_GRID_POINTS = 101

CURVE_HEADER = ["curve_id", "component", "t", "value"]


class FormatError(ValueError):
    """Malformed curve or model file."""


def _num(x) -> str:
    # shortest string that parses back to the same double
    return repr(float(x))


# -- curve files ------------------------------------------------------------


def write_curves(path, data: MultiFunData, labels: Optional[Sequence] = None, ids: Optional[Sequence] = None):
    """Write sampled curves as long-format CSV sorted by (curve_id, component, t)."""
    n = data.n_obs
    ids = list(range(n)) if ids is None else list(ids)
    if len(ids) != n:
        raise ValueError("one id per curve is required")
    if labels is not None and len(labels) != n:
        raise ValueError("one label per curve is required")
    header = CURVE_HEADER + (["label"] if labels is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            for p, comp in enumerate(data.components):
                for t, y in zip(comp.grid.points, comp.values[i]):
                    row = [ids[i], p, _num(t), _num(y)]
                    if labels is not None:
                        row.append(int(labels[i]))
                    w.writerow(row)


def read_curves(path):
    """Read a curve CSV.

    Returns
    -------
    ids : list of str
        Curve ids in order of first appearance.
    curves : list of RawCurve
    labels : ndarray of int or None
        The ``label`` column, when present.
    """
    groups: dict = {}
    labels: dict = {}
    components = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(CURVE_HEADER) <= set(reader.fieldnames):
            raise FormatError(f"{path}: header must contain {','.join(CURVE_HEADER)}")
        has_label = "label" in reader.fieldnames
        for line, row in enumerate(reader, start=2):
            try:
                cid, comp = row["curve_id"], int(row["component"])
                t, y = float(row["t"]), float(row["value"])
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{line}: {exc}") from None
            components.add(comp)
            groups.setdefault(cid, {}).setdefault(comp, []).append((t, y))
            if has_label:
                labels.setdefault(cid, int(row["label"]))
    if not groups:
        raise FormatError(f"{path}: no curves")
    comps = sorted(components)
    curves = []
    for cid, by_comp in groups.items():
        if sorted(by_comp) != comps:
            raise FormatError(f"{path}: curve {cid} lacks some components")
        times, values = [], []
        for p in comps:
            obs = np.array(by_comp[p])
            if obs.shape[0] < 2:
                raise FormatError(f"{path}: curve {cid}, component {p} has fewer than 2 rows")
            if np.any(np.diff(obs[:, 0]) <= 0):
                raise FormatError(f"{path}: curve {cid}, component {p}: t is not strictly increasing")
            times.append(obs[:, 0])
            values.append(obs[:, 1])
        curves.append(RawCurve(tuple(times), tuple(values)))
    ids = list(groups)
    lab = np.array([labels[c] for c in ids]) if labels else None
    return ids, curves, lab


def common_grids(curves: Sequence[RawCurve], n_points: int = DEFAULT_GRID_POINTS) -> tuple:
    """Output grids for a set of raw curves.

    When every curve shares its observation times for a component those times
    are used; otherwise a uniform grid over the observed range.
    """
    grids = []
    for p in range(curves[0].n_components):
        first = curves[0].times[p]
        if all(c.times[p].shape == first.shape and np.array_equal(c.times[p], first) for c in curves):
            grids.append(SamplingGrid(first))
        else:
            lo = min(c.times[p][0] for c in curves)
            hi = max(c.times[p][-1] for c in curves)
            grids.append(SamplingGrid.uniform(n_points, lo, hi))
    return tuple(grids)


def prepare(curves: Sequence[RawCurve], grids: Sequence[SamplingGrid], noiseless: bool, bandwidth="auto") -> MultiFunData:
    """Put raw curves on ``grids``: linear interpolation if noiseless, else smoothing."""
    if noiseless:
        return interpolate_curves(curves, grids)
    return smooth_curves(curves, grids, bandwidth=bandwidth)


def write_labels(path, ids: Sequence, labels: np.ndarray, probabilities: Optional[np.ndarray] = None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["curve_id", "label"]
        if probabilities is not None:
            header += [f"p{c}" for c in range(probabilities.shape[1])]
        w.writerow(header)
        for i, cid in enumerate(ids):
            row = [cid, int(labels[i])]
            if probabilities is not None:
                row += [_num(x) for x in probabilities[i]]
            w.writerow(row)


def read_labels(path) -> dict:
    """curve_id -> label from a label CSV or a labelled curve CSV."""
    out: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"curve_id", "label"} <= set(reader.fieldnames):
            raise FormatError(f"{path}: needs curve_id and label columns")
        for row in reader:
            try:
                label = int(row["label"])
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: {exc}") from None
            if out.setdefault(row["curve_id"], label) != label:
                raise FormatError(f"{path}: curve {row['curve_id']} has conflicting labels")
    return out


# -- model files ------------------------------------------------------------


def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _basis_to_dict(b: UnivariateBasis) -> dict:
    return {
        "grid": _arr(b.grid.points),
        "mean": _arr(b.mean),
        "eigenvalues": _arr(b.eigenvalues),
        "eigenfunctions": _arr(b.eigenfunctions),
        "degenerate": b.degenerate,
    }


def _basis_from_dict(d: dict) -> UnivariateBasis:
    J = len(d["eigenvalues"])
    return UnivariateBasis(
        grid=SamplingGrid(np.array(d["grid"])),
        eigenvalues=np.array(d["eigenvalues"], dtype=float),
        eigenfunctions=np.array(d["eigenfunctions"], dtype=float).reshape(J, -1),
        mean=np.array(d["mean"], dtype=float),
        degenerate=bool(d["degenerate"]),
    )


def _mfpca_to_dict(m: MfpcaModel) -> dict:
    return {
        "uni_bases": [_basis_to_dict(b) for b in m.uni_bases],
        "eigenvalues": _arr(m.eigenvalues),
        "all_eigenvalues": _arr(m.all_eigenvalues),
        "eigenvectors": _arr(m.eigenvectors),
        "eigenfunctions": [_arr(f) for f in m.eigenfunctions],
        "degenerate": m.degenerate,
    }


def _mfpca_from_dict(d: dict) -> MfpcaModel:
    bases = tuple(_basis_from_dict(b) for b in d["uni_bases"])
    J = len(d["eigenvalues"])
    return MfpcaModel(
        means=tuple(b.mean for b in bases),
        uni_bases=bases,
        eigenvalues=np.array(d["eigenvalues"], dtype=float),
        eigenvectors=np.array(d["eigenvectors"], dtype=float).reshape(-1, J),
        eigenfunctions=tuple(np.array(f, dtype=float).reshape(J, -1) for f in d["eigenfunctions"]),
        all_eigenvalues=np.array(d["all_eigenvalues"], dtype=float),
        degenerate=bool(d["degenerate"]),
    )


def _gmm_to_dict(g: GaussianMixture) -> dict:
    return {"weights": _arr(g.weights), "means": _arr(g.means), "covariances": _arr(g.covariances)}


def _gmm_from_dict(d: dict) -> GaussianMixture:
    w = np.array(d["weights"], dtype=float)
    m = np.array(d["means"], dtype=float).reshape(w.size, -1)
    c = np.array(d["covariances"], dtype=float).reshape(w.size, m.shape[1], m.shape[1])
    return GaussianMixture(w, np.ascontiguousarray(m), np.ascontiguousarray(c))


def _config_to_dict(config: FcubtConfig) -> dict:
    return {"ncomp": config.ncomp, "k_max": config.k_max, "minsize": config.minsize, "em": asdict(config.em)}


def _config_from_dict(d: dict) -> FcubtConfig:
    return FcubtConfig(ncomp=d["ncomp"], k_max=d["k_max"], minsize=d["minsize"], em=EmConfig(**d["em"]))


def model_to_dict(tree: ClusterTree, partition: Partition, preprocessing: Optional[dict] = None) -> dict:
    nodes = []
    for key in sorted(tree.nodes):
        node = tree.nodes[key]
        nodes.append({
            "depth": node.depth,
            "index": node.index,
            "members": node.members.tolist(),
            "k_hat": node.k_hat,
            "bics": {str(k): v for k, v in sorted(node.bics.items())},
            "reason": node.reason,
            "children": [list(c) for c in node.children] if node.children else None,
            "model": _mfpca_to_dict(node.model) if node.model is not None else None,
            "splitter": _gmm_to_dict(node.splitter) if node.splitter is not None else None,
        })
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "grids": [_arr(g.points) for g in tree.grids],
        "n_obs": tree.n_obs,
        "config": _config_to_dict(tree.config),
        "seed": tree.config.em.seed,
        "preprocessing": preprocessing or {},
        "nodes": nodes,
        "events": [[list(k), msg] for k, msg in tree.events],
        "partition": {
            "clusters": [[list(k) for k in group] for group in partition.clusters],
            "merges": [[[list(k) for k in a], [list(k) for k in b], v] for a, b, v in partition.merges],
        },
    }


def model_from_dict(doc: dict):
    """Inverse of :func:`model_to_dict`; returns (tree, partition, preprocessing)."""
    if doc.get("format") != MODEL_FORMAT:
        raise FormatError("not an fcubt model file")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"model format version {doc.get('version')} is not supported (expected {MODEL_VERSION})")
    config = _config_from_dict(doc["config"])
    grids = tuple(SamplingGrid(np.array(g)) for g in doc["grids"])
    nodes = {}
    for d in doc["nodes"]:
        node = TreeNode(
            depth=d["depth"],
            index=d["index"],
            members=np.array(d["members"], dtype=int),
            model=_mfpca_from_dict(d["model"]) if d["model"] is not None else None,
            k_hat=d["k_hat"],
            bics={int(k): v for k, v in d["bics"].items()},
            splitter=_gmm_from_dict(d["splitter"]) if d["splitter"] is not None else None,
            children=tuple(tuple(c) for c in d["children"]) if d["children"] else None,
            reason=d["reason"],
        )
        nodes[node.key] = node
    tree = ClusterTree(nodes, grids, config, doc["n_obs"], [(tuple(k), m) for k, m in doc["events"]])
    groups = [[tuple(k) for k in g] for g in doc["partition"]["clusters"]]
    labels = np.full(tree.n_obs, -1, dtype=int)
    for c, group in enumerate(groups):
        for key in group:
            labels[nodes[key].members] = c
    merges = [
        (tuple(tuple(k) for k in a), tuple(tuple(k) for k in b), v)
        for a, b, v in doc["partition"]["merges"]
    ]
    return tree, Partition(groups, labels, merges), doc.get("preprocessing", {})


def save_model(path, tree: ClusterTree, partition: Partition, preprocessing: Optional[dict] = None):
    Path(path).write_text(json.dumps(model_to_dict(tree, partition, preprocessing), indent=1) + "\n")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return model_from_dict(doc)


def resample(data: MultiFunData, grids: Sequence[SamplingGrid]) -> MultiFunData:
    """Linear interpolation of gridded curves onto ``grids`` (identity when they already match)."""
    if data.same_grids(grids):
        return data
    comps = []
    for comp, g in zip(data.components, grids):
        vals = np.vstack([np.interp(g.points, comp.grid.points, row) for row in comp.values])
        comps.append(UnivariateSample(g, vals))
    return MultiFunData(tuple(comps))
