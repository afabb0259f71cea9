"""Clustering by unsupervised binary trees: growing, joining and classification."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .fdata import GridMismatchError, MultiFunData
from .gmm import EmConfig, GaussianMixture, posterior, select_k
from .mfpca import MfpcaModel, fit_mfpca, project

logger = logging.getLogger(__name__)

NodeKey = tuple  # (depth, index)


@dataclass(frozen=True)
class FcubtConfig:
    """Hyperparameters of the tree.

    ``ncomp`` is a fixed number of principal components per node, or the
    fraction of variance they must explain. It is used for both the growing
    and the joining step.
    """

    ncomp: Union[int, float] = 0.95
    k_max: int = 5
    minsize: int = 10
    em: EmConfig = field(default_factory=EmConfig)

    def __post_init__(self):
        if self.minsize <= 2:
            raise ValueError("minsize must be larger than 2")
        if self.k_max < 2:
            raise ValueError("k_max must be at least 2")
        if isinstance(self.ncomp, bool):
            raise ValueError("ncomp must be an int or a ratio")
        if isinstance(self.ncomp, (int, np.integer)):
            if self.ncomp < 1:
                raise ValueError("a fixed ncomp must be >= 1")
        elif not 0 < self.ncomp <= 1:
            raise ValueError("an ncomp ratio must lie in (0, 1]")


@dataclass(eq=False)
class TreeNode:
    depth: int
    index: int
    members: np.ndarray
    model: Optional[MfpcaModel] = None
    k_hat: Optional[int] = None
    bics: dict = field(default_factory=dict)
    splitter: Optional[GaussianMixture] = None
    children: Optional[tuple] = None
    reason: str = ""

    @property
    def key(self) -> NodeKey:
        return (self.depth, self.index)

    @property
    def terminal(self) -> bool:
        return self.children is None

    @property
    def size(self) -> int:
        return self.members.size


@dataclass(eq=False)
class ClusterTree:
    nodes: dict  # NodeKey -> TreeNode
    grids: tuple
    config: FcubtConfig
    n_obs: int
    events: list = field(default_factory=list)

    @property
    def root(self) -> TreeNode:
        return self.nodes[(0, 0)]

    @property
    def leaves(self) -> list:
        return [self.nodes[k] for k in sorted(self.nodes) if self.nodes[k].terminal]

    @property
    def depth(self) -> int:
        return max(d for d, _ in self.nodes)

    def leaf_labels(self) -> np.ndarray:
        """Index of the leaf (in ``leaves`` order) holding each training curve."""
        labels = np.full(self.n_obs, -1, dtype=int)
        for i, leaf in enumerate(self.leaves):
            labels[leaf.members] = i
        return labels


@dataclass(eq=False)
class Partition:
    """Leaves grouped into clusters by the joining step.

    ``clusters[c]`` lists the leaf keys merged into cluster ``c``; ``merges``
    records each join as (first group, second group, BIC).
    """

    clusters: list
    labels: np.ndarray
    merges: list = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def leaf_to_cluster(self) -> dict:
        return {leaf: c for c, leaves in enumerate(self.clusters) for leaf in leaves}


def _derived_em(config: FcubtConfig, *key) -> EmConfig:
    state = np.random.SeedSequence([config.em.seed, *key]).generate_state(1)[0]
    return replace(config.em, seed=int(state))


def _node_selection(data: MultiFunData, members: np.ndarray, config: FcubtConfig, em: EmConfig):
    sub = data.subset(members)
    model = fit_mfpca(sub, config.ncomp)
    if model.degenerate:
        return model, None, None
    scores = project(model, sub)
    return model, scores, select_k(scores, config.k_max, em)


def grow(data: MultiFunData, config: FcubtConfig = FcubtConfig()) -> ClusterTree:
    """Grow the maximal tree by recursive MFPCA + Gaussian mixture splits.

    A node is split with its two-component mixture when BIC prefers more than
    one component and it holds at least ``minsize`` curves; curves whose
    posterior for the first component is at least 1/2 go to the left child.
    """
    tree = ClusterTree({}, data.grids, config, data.n_obs)
    stack = [TreeNode(0, 0, np.arange(data.n_obs))]
    while stack:
        node = stack.pop()
        tree.nodes[node.key] = node
        if node.size < config.minsize or node.size < 2:
            node.reason = "minsize"
            continue
        em = _derived_em(config, 0, node.depth, node.index)
        node.model, scores, sel = _node_selection(data, node.members, config, em)
        if sel is None:
            node.k_hat = 1
            node.reason = "degenerate"
            continue
        node.k_hat = sel.k_hat
        node.bics = dict(sel.bics)
        if sel.k_hat == 1:
            node.reason = "k_hat"
            continue
        if 2 not in sel.fits:
            node.reason = "split-failed"
            tree.events.append((node.key, "two-component fit failed"))
            continue
        splitter = sel.fits[2].model
        left = posterior(splitter, scores)[:, 0] >= 0.5
        if left.all() or not left.any():
            node.reason = "empty-child"
            tree.events.append((node.key, "split produced an empty child"))
            continue
        node.splitter = splitter
        l_key, r_key = (node.depth + 1, 2 * node.index), (node.depth + 1, 2 * node.index + 1)
        node.children = (l_key, r_key)
        # pushed right first so the left subtree is processed first
        stack.append(TreeNode(*r_key, node.members[~left]))
        stack.append(TreeNode(*l_key, node.members[left]))
    return tree


def _edge(data, tree, group, config, cache):
    key = tuple(sorted(group))
    if key in cache:
        return cache[key]
    members = np.sort(np.concatenate([tree.nodes[k].members for k in key]))
    flat = [x for k in key for x in k]
    em = _derived_em(config, 1, *flat)
    result = None
    try:
        if members.size >= 2:
            model, _, sel = _node_selection(data, members, config, em)
            if sel is None:
                # all curves identical: trivially one cluster
                result = np.inf
            elif sel.k_hat == 1:
                result = sel.bics[1]
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        logger.warning("pair %s could not be evaluated: %s", key, exc)
    cache[key] = result
    return result


def join(tree: ClusterTree, data: MultiFunData, config: FcubtConfig | None = None) -> Partition:
    """Agglomerate leaves whose union BIC judges to be a single Gaussian cluster.

    Among all joinable pairs the one with the largest one-component BIC is
    merged, and the graph is rebuilt, until no pair is joinable or a single
    group remains.
    """
    config = config or tree.config
    groups = [(leaf.key,) for leaf in tree.leaves]
    cache: dict = {}
    merges = []
    while len(groups) > 1:
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                value = _edge(data, tree, groups[i] + groups[j], config, cache)
                if value is None:
                    continue
                if best is None or value > best[0]:
                    best = (value, i, j)
        if best is None:
            break
        value, i, j = best
        merged = tuple(sorted(groups[i] + groups[j]))
        merges.append((groups[i], groups[j], float(value)))
        groups = [g for k, g in enumerate(groups) if k not in (i, j)] + [merged]
        groups.sort()
    labels = np.full(tree.n_obs, -1, dtype=int)
    for c, group in enumerate(groups):
        for key in group:
            labels[tree.nodes[key].members] = c
    return Partition([list(g) for g in groups], labels, merges)


def node_probabilities(tree: ClusterTree, new_data: MultiFunData) -> dict:
    """Probability of each curve of ``new_data`` to fall in every node, keyed by node."""
    if not new_data.same_grids(tree.grids):
        raise GridMismatchError("new curves are not sampled on the training grids")
    n = new_data.n_obs
    probs = {(0, 0): np.ones(n)}
    for key in sorted(tree.nodes):
        node = tree.nodes[key]
        if node.terminal:
            continue
        post = posterior(node.splitter, project(node.model, new_data))
        left, right = node.children
        probs[left] = probs[key] * post[:, 0]
        probs[right] = probs[key] * post[:, 1]
    return probs


def predict(tree: ClusterTree, partition: Partition, new_data: MultiFunData):
    """Classify new curves by descending the tree.

    Returns
    -------
    labels : ndarray of int, shape (N,)
    probabilities : ndarray, shape (N, n_clusters)
        Cluster membership probabilities; each row sums to one.
    """
    node_probs = node_probabilities(tree, new_data)
    probs = np.zeros((new_data.n_obs, partition.n_clusters))
    for c, leaves in enumerate(partition.clusters):
        for key in leaves:
            probs[:, c] += node_probs[tuple(key)]
    return np.argmax(probs, axis=1), probs


class FCUBT:
    """Convenience wrapper running grow, join and predict with one configuration."""

    def __init__(self, config: FcubtConfig = FcubtConfig(), joining: bool = True):
        self.config = config
        self.joining = joining
        self.tree: ClusterTree | None = None
        self.partition: Partition | None = None

    def fit(self, data: MultiFunData) -> "FCUBT":
        self.tree = grow(data, self.config)
        if self.joining:
            self.partition = join(self.tree, data, self.config)
        else:
            leaves = self.tree.leaves
            self.partition = Partition([[leaf.key] for leaf in leaves], self.tree.leaf_labels())
        return self

    @property
    def labels_(self) -> np.ndarray:
        return self.partition.labels

    @property
    def n_clusters(self) -> int:
        return self.partition.n_clusters

    def predict_proba(self, data: MultiFunData) -> np.ndarray:
        return predict(self.tree, self.partition, data)[1]

    def predict(self, data: MultiFunData) -> np.ndarray:
        return predict(self.tree, self.partition, data)[0]
