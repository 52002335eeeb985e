"""Node-classification datasets: synthetic generators and the JSON file format.

Synthetic graphs come in two flavors: a planted-partition graph whose edge
probabilities are solved from a target mean degree and homophily level, and a
"noisy complete" graph where every pair of nodes is connected so neighbor
structure carries no label information. Features are class-informative in both
cases: class k gets mean ``feature_signal * e_k`` plus isotropic Gaussian
noise, which makes the attainable MLP accuracy directly controllable.

Generation draws from named sub-streams of one seed in a fixed order
(labels, edges, features, masks), so identical specs give identical bytes
after save_dataset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import GraphError, SparseGraph
from .rng import make_rng


class DatasetError(ValueError):
    pass


@dataclass
class NodeDataset:
    features: np.ndarray  # N x d, float64
    labels: np.ndarray  # N, int64
    train_mask: np.ndarray  # N, bool
    val_mask: np.ndarray
    test_mask: np.ndarray
    n_classes: int

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def validate(self) -> None:
        n = self.n_nodes
        for name, m in (("train", self.train_mask), ("val", self.val_mask), ("test", self.test_mask)):
            if m.shape != (n,):
                raise DatasetError(f"{name} mask has wrong length")
        overlap = (
            (self.train_mask & self.val_mask)
            | (self.train_mask & self.test_mask)
            | (self.val_mask & self.test_mask)
        )
        if overlap.any():
            raise DatasetError(f"node {int(np.flatnonzero(overlap)[0])} appears in two splits")
        masked = self.train_mask | self.val_mask | self.test_mask
        bad = masked & ((self.labels < 0) | (self.labels >= self.n_classes))
        if bad.any():
            raise DatasetError(f"masked node {int(np.flatnonzero(bad)[0])} has invalid label")
        if not np.isfinite(self.features).all():
            raise DatasetError("features contain non-finite entries")


@dataclass
class SyntheticSpec:
    n_nodes: int
    n_classes: int
    feature_dim: int
    homophily: float
    mean_degree: float
    feature_signal: float
    noise_std: float
    split_fractions: tuple = (0.48, 0.32, 0.20)
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.homophily <= 1.0:
            raise DatasetError(f"homophily must lie in [0, 1], got {self.homophily}")
        if self.feature_signal < 0:
            raise DatasetError("feature_signal must be >= 0")
        if self.noise_std <= 0:
            raise DatasetError("noise_std must be > 0")
        fr = self.split_fractions
        if len(fr) != 3 or any(f <= 0 for f in fr) or sum(fr) > 1.0 + 1e-12:
            raise DatasetError("split_fractions must be three positive values summing to <= 1")
        if self.feature_dim < self.n_classes:
            raise DatasetError("feature_dim must be >= n_classes for orthogonal class means")

    @staticmethod
    def from_json(obj: dict) -> "SyntheticSpec":
        spec = SyntheticSpec(
            n_nodes=int(obj["n_nodes"]),
            n_classes=int(obj["n_classes"]),
            feature_dim=int(obj["feature_dim"]),
            homophily=float(obj["homophily"]),
            mean_degree=float(obj["mean_degree"]),
            feature_signal=float(obj["feature_signal"]),
            noise_std=float(obj["noise_std"]),
            split_fractions=tuple(obj.get("split_fractions", (0.48, 0.32, 0.20))),
            seed=int(obj.get("seed", 0)),
        )
        spec.validate()
        return spec


def edge_probabilities(spec: SyntheticSpec) -> tuple[float, float]:
    """Solve (p_intra, p_inter) for the target mean degree and homophily.

    With uniform labels a node has (n-1)/c expected same-class peers, so
    mean_degree = p_intra (n-1)/c + p_inter (n-1)(c-1)/c and homophily is the
    expected intra-class edge fraction.
    """
    n, c = spec.n_nodes, spec.n_classes
    p_intra = spec.homophily * spec.mean_degree * c / (n - 1)
    if c > 1:
        p_inter = (1.0 - spec.homophily) * spec.mean_degree * c / ((n - 1) * (c - 1))
    else:
        if spec.homophily != 1.0:
            raise DatasetError("homophily must be 1.0 when n_classes == 1")
        p_inter = 0.0
    if p_intra > 1.0:
        raise DatasetError(
            f"infeasible spec: required intra-class edge probability {p_intra:.4f} exceeds 1"
        )
    if p_inter > 1.0:
        raise DatasetError(
            f"infeasible spec: required inter-class edge probability {p_inter:.4f} exceeds 1"
        )
    return p_intra, p_inter


def _draw_labels(spec: SyntheticSpec) -> np.ndarray:
    # balanced round-robin assignment, randomly permuted: classes are uniform
    # and class sizes differ by at most one, so chance accuracy is 1/c
    rng = make_rng(spec.seed, "labels")
    return rng.permutation(np.arange(spec.n_nodes, dtype=np.int64) % spec.n_classes)


def _draw_features(spec: SyntheticSpec, labels: np.ndarray) -> np.ndarray:
    rng = make_rng(spec.seed, "features")
    means = np.zeros((spec.n_classes, spec.feature_dim))
    means[np.arange(spec.n_classes), np.arange(spec.n_classes)] = spec.feature_signal
    return means[labels] + spec.noise_std * rng.standard_normal((spec.n_nodes, spec.feature_dim))


def _draw_masks(spec: SyntheticSpec, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # stratified per class: shuffle each class's nodes, slice by the fractions
    rng = make_rng(spec.seed, "masks")
    n = spec.n_nodes
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    f_tr, f_va, f_te = spec.split_fractions
    for k in range(spec.n_classes):
        idx = np.flatnonzero(labels == k)
        idx = rng.permutation(idx)
        m = len(idx)
        n_tr = int(round(f_tr * m))
        n_va = int(round(f_va * m))
        n_te = min(int(round(f_te * m)), m - n_tr - n_va)
        train[idx[:n_tr]] = True
        val[idx[n_tr : n_tr + n_va]] = True
        test[idx[n_tr + n_va : n_tr + n_va + n_te]] = True
    return train, val, test


def generate_planted_partition(spec: SyntheticSpec) -> tuple[SparseGraph, NodeDataset]:
    """Planted-partition graph with class-informative features.

    Edges are drawn independently over the upper triangle in row-major order
    with probability p_intra or p_inter depending on whether the endpoints
    share a class.
    """
    spec.validate()
    p_intra, p_inter = edge_probabilities(spec)
    labels = _draw_labels(spec)
    rng = make_rng(spec.seed, "edges")
    iu, iv = np.triu_indices(spec.n_nodes, k=1)
    probs = np.where(labels[iu] == labels[iv], p_intra, p_inter)
    keep = rng.random(len(probs)) < probs
    graph = SparseGraph.from_edges(spec.n_nodes, np.stack([iu[keep], iv[keep]], axis=1))
    dataset = _assemble(spec, labels)
    return graph, dataset


def generate_noisy_complete(spec: SyntheticSpec) -> tuple[SparseGraph, NodeDataset]:
    """Complete graph on n nodes; neighbors carry no label information."""
    spec.validate()
    if spec.n_nodes > 2000:
        raise DatasetError(f"noisy-complete graph capped at 2000 nodes, got {spec.n_nodes}")
    labels = _draw_labels(spec)
    iu, iv = np.triu_indices(spec.n_nodes, k=1)
    graph = SparseGraph.from_edges(spec.n_nodes, np.stack([iu, iv], axis=1))
    dataset = _assemble(spec, labels)
    return graph, dataset


def _assemble(spec: SyntheticSpec, labels: np.ndarray) -> NodeDataset:
    features = _draw_features(spec, labels)
    train, val, test = _draw_masks(spec, labels)
    ds = NodeDataset(features, labels, train, val, test, spec.n_classes)
    ds.validate()
    return ds


def edge_homophily(graph: SparseGraph, labels: np.ndarray) -> float:
    """Fraction of edges whose endpoints share a class."""
    edges = graph.edge_list()
    if len(edges) == 0:
        return 0.0
    return float(np.mean(labels[edges[:, 0]] == labels[edges[:, 1]]))


# --- dataset file format ----------------------------------------------------
# UTF-8 JSON object: n, edges ([u, v] with u < v, each edge once), features,
# labels, splits {train, val, test}, n_classes. Writers emit keys in that
# order; readers accept any order.


def save_dataset(graph: SparseGraph, dataset: NodeDataset, path) -> None:
    if graph.n_nodes != dataset.n_nodes:
        raise DatasetError("graph and dataset disagree on node count")
    obj = {
        "n": graph.n_nodes,
        "edges": graph.edge_list().tolist(),
        "features": [[float(x) for x in row] for row in dataset.features],
        "labels": dataset.labels.tolist(),
        "splits": {
            "train": np.flatnonzero(dataset.train_mask).tolist(),
            "val": np.flatnonzero(dataset.val_mask).tolist(),
            "test": np.flatnonzero(dataset.test_mask).tolist(),
        },
        "n_classes": dataset.n_classes,
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_dataset(path) -> tuple[SparseGraph, NodeDataset]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DatasetError(f"malformed JSON in {path}: {e}") from e
    for key in ("n", "edges", "features", "labels", "splits", "n_classes"):
        if key not in obj:
            raise DatasetError(f"missing field {key!r} in {path}")
    n = int(obj["n"])
    try:
        graph = SparseGraph.from_edges(n, obj["edges"])
    except GraphError as e:
        raise DatasetError(str(e)) from e
    features = np.asarray(obj["features"], dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != n:
        raise DatasetError(f"features must be an {n} x d matrix")
    labels = np.asarray(obj["labels"], dtype=np.int64)
    if labels.shape != (n,):
        raise DatasetError(f"labels must have length {n}")
    masks = {}
    for name in ("train", "val", "test"):
        idx = np.asarray(obj["splits"].get(name, []), dtype=np.int64)
        if len(idx) and (idx.min() < 0 or idx.max() >= n):
            raise DatasetError(f"{name} split index out of range")
        m = np.zeros(n, dtype=bool)
        m[idx] = True
        masks[name] = m
    ds = NodeDataset(features, labels, masks["train"], masks["val"], masks["test"], int(obj["n_classes"]))
    ds.validate()
    return graph, ds
