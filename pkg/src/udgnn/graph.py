"""Sparse graph storage and normalized propagation operators.

Graphs are undirected and stored in CSR form with both directions of every
edge materialized. Raw graphs never carry self-loops; adding them is a
propagation-matrix option. Zero-degree nodes get all-zero operator rows (and
columns, for the symmetric kinds) so every operator is a total function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYM_NORM = "SymNorm"
SYM_NORM_SELF_LOOP = "SymNormSelfLoop"
ROW_NORM = "RowNorm"
PROPAGATION_KINDS = (SYM_NORM, SYM_NORM_SELF_LOOP, ROW_NORM)


class GraphError(ValueError):
    pass


@dataclass
class SparseGraph:
    n_nodes: int
    row_offsets: np.ndarray  # int64, length n_nodes+1
    col_indices: np.ndarray  # int64, sorted within each row
    undirected: bool = True

    def validate(self) -> None:
        if self.row_offsets.shape != (self.n_nodes + 1,):
            raise GraphError("row_offsets must have length n_nodes+1")
        if self.row_offsets[0] != 0 or self.row_offsets[-1] != len(self.col_indices):
            raise GraphError("row_offsets endpoints inconsistent with col_indices")
        if np.any(np.diff(self.row_offsets) < 0):
            raise GraphError("row_offsets must be monotone nondecreasing")
        if len(self.col_indices) and (
            self.col_indices.min() < 0 or self.col_indices.max() >= self.n_nodes
        ):
            raise GraphError("column index out of range")
        for u in range(self.n_nodes):
            row = self.col_indices[self.row_offsets[u] : self.row_offsets[u + 1]]
            if np.any(np.diff(row) <= 0):
                raise GraphError(f"row {u} not strictly increasing (duplicate edge?)")
            if np.any(row == u):
                raise GraphError(f"self-loop stored at node {u}")

    @property
    def n_arcs(self) -> int:
        return len(self.col_indices)

    @property
    def n_edges(self) -> int:
        return self.n_arcs // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, u: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[u] : self.row_offsets[u + 1]]

    @staticmethod
    def from_edges(n_nodes: int, edges) -> "SparseGraph":
        """Build from an iterable of undirected (u, v) pairs, each listed once."""
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if len(edges):
            if edges.min() < 0 or edges.max() >= n_nodes:
                bad = edges[(edges.min(axis=1) < 0) | (edges.max(axis=1) >= n_nodes)][0]
                raise GraphError(f"edge [{bad[0]}, {bad[1]}] out of range for {n_nodes} nodes")
            if np.any(edges[:, 0] == edges[:, 1]):
                u = edges[edges[:, 0] == edges[:, 1]][0, 0]
                raise GraphError(f"self-loop [{u}, {u}] not allowed")
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        if len(src) > 1 and np.any((np.diff(src) == 0) & (np.diff(dst) == 0)):
            i = np.flatnonzero((np.diff(src) == 0) & (np.diff(dst) == 0))[0]
            raise GraphError(f"duplicate edge [{src[i]}, {dst[i]}]")
        offsets = np.zeros(n_nodes + 1, dtype=np.int64)
        np.add.at(offsets[1:], src, 1)
        np.cumsum(offsets, out=offsets)
        g = SparseGraph(n_nodes, offsets, dst.astype(np.int64))
        g.validate()
        return g

    def edge_list(self) -> np.ndarray:
        """Undirected edges, each once, u < v, lexicographically sorted."""
        src = np.repeat(np.arange(self.n_nodes), self.degrees())
        keep = src < self.col_indices
        return np.stack([src[keep], self.col_indices[keep]], axis=1)


@dataclass
class PropagationMatrix:
    n_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    kind: str
    _transpose: "PropagationMatrix | None" = field(default=None, repr=False)
    _dense: np.ndarray | None = field(default=None, repr=False)

    # Above this fill ratio the operator is materialized once and applied with
    # a BLAS matmul (complete graphs would otherwise dominate the runtime).
    _DENSE_FILL = 0.25

    def apply(self, h: np.ndarray) -> np.ndarray:
        """Operator @ dense; per-row accumulation in ascending column order."""
        h = np.asarray(h, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] != self.n_nodes:
            raise GraphError(
                f"operand has {h.shape[0] if h.ndim == 2 else '?'} rows, operator has {self.n_nodes}"
            )
        out = np.zeros((self.n_nodes, h.shape[1]))
        if len(self.values) == 0:
            return out
        if len(self.values) > self._DENSE_FILL * self.n_nodes * self.n_nodes:
            if self._dense is None:
                self._dense = self.to_dense()
            return self._dense @ h
        contrib = self.values[:, None] * h[self.col_indices]
        lengths = np.diff(self.row_offsets)
        nonempty = np.flatnonzero(lengths > 0)
        sums = np.add.reduceat(contrib, self.row_offsets[nonempty], axis=0)
        out[nonempty] = sums
        return out

    def transpose_apply(self, g: np.ndarray) -> np.ndarray:
        """P^T @ g. Exact alias of apply for the symmetric kinds."""
        return self.transposed().apply(g)

    def transposed(self) -> "PropagationMatrix":
        if self.kind in (SYM_NORM, SYM_NORM_SELF_LOOP):
            return self
        if self._transpose is None:
            self._transpose = self._build_transpose()
        return self._transpose

    def _build_transpose(self) -> "PropagationMatrix":
        src = np.repeat(np.arange(self.n_nodes), np.diff(self.row_offsets))
        order = np.lexsort((src, self.col_indices))
        t_src = self.col_indices[order]
        offsets = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.add.at(offsets[1:], t_src, 1)
        np.cumsum(offsets, out=offsets)
        return PropagationMatrix(
            self.n_nodes, offsets, src[order].astype(np.int64), self.values[order], self.kind
        )

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.n_nodes, self.n_nodes))
        src = np.repeat(np.arange(self.n_nodes), np.diff(self.row_offsets))
        m[src, self.col_indices] = self.values
        return m


def build_propagation(graph: SparseGraph, kind: str) -> PropagationMatrix:
    """Normalized propagation operator over ``graph``.

    SymNorm: D^{-1/2} A D^{-1/2}; SymNormSelfLoop: the same over A+I with the
    augmented degrees (self-loops only on nodes that have neighbors, so that
    isolated nodes keep all-zero rows); RowNorm: D^{-1} A.
    """
    if kind not in PROPAGATION_KINDS:
        raise GraphError(f"unknown propagation kind {kind!r}; expected one of {PROPAGATION_KINDS}")
    deg = graph.degrees().astype(np.float64)
    src = np.repeat(np.arange(graph.n_nodes), graph.degrees())
    dst = graph.col_indices

    if kind == SYM_NORM_SELF_LOOP:
        # splice the diagonal into each non-isolated row, keeping columns sorted
        rows = []
        cols = []
        for u in range(graph.n_nodes):
            nbrs = graph.neighbors(u)
            if len(nbrs) == 0:
                continue
            merged = np.sort(np.append(nbrs, u))
            rows.append(np.full(len(merged), u, dtype=np.int64))
            cols.append(merged)
        src = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
        dst = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
        dhat = deg + (deg > 0)
        with np.errstate(divide="ignore"):
            inv_sqrt = np.where(dhat > 0, 1.0 / np.sqrt(np.maximum(dhat, 1)), 0.0)
        values = inv_sqrt[src] * inv_sqrt[dst]
        offsets = np.zeros(graph.n_nodes + 1, dtype=np.int64)
        np.add.at(offsets[1:], src, 1)
        np.cumsum(offsets, out=offsets)
        return PropagationMatrix(graph.n_nodes, offsets, dst, values, kind)

    if kind == SYM_NORM:
        inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1)), 0.0)
        values = inv_sqrt[src] * inv_sqrt[dst]
    else:  # RowNorm
        inv = np.where(deg > 0, 1.0 / np.maximum(deg, 1), 0.0)
        values = inv[src]
    return PropagationMatrix(
        graph.n_nodes, graph.row_offsets.copy(), graph.col_indices.copy(), values, kind
    )


def spmm(p: PropagationMatrix, h: np.ndarray) -> np.ndarray:
    """Deterministic sparse-times-dense product, row i = sum_j P[i,j] * H[j,:]."""
    return p.apply(h)
