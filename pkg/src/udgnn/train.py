"""Adam optimization, full-batch training with early stopping, and depth sweeps.

Model selection is best validation accuracy with parameter snapshotting
(first-best on ties); the reported test accuracy always belongs to that
snapshot. Everything is deterministic given (seed, config, dataset) except
measured wall-clock times, which are descriptive only and excluded from the
determinism contract.
"""

from __future__ import annotations

import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter, backward
from .data import NodeDataset
from .graph import ROW_NORM, SparseGraph, build_propagation
from .model import ModelSpec, UdgnnModel, model_forward
from .rng import derive_seed, make_rng


class TrainError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    max_epochs: int = 1000
    patience: int = 100  # epochs without validation improvement
    dropout_rate: float | None = None  # None: use the model spec's rate
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise TrainError("learning_rate must be > 0 and weight_decay >= 0")
        if self.max_epochs < 1:
            raise TrainError("max_epochs must be >= 1")
        if not 0 <= self.patience <= self.max_epochs:
            raise TrainError("patience must lie in [0, max_epochs]")

    @staticmethod
    def from_json(text: str) -> "TrainConfig":
        cfg = TrainConfig(**json.loads(text))
        cfg.validate()
        return cfg


@dataclass
class TrainReport:
    config: dict
    train_loss: list = field(default_factory=list)  # per epoch
    val_acc: list = field(default_factory=list)
    gate_abs_alpha: list = field(default_factory=list)  # per epoch, per layer
    gate_abs_beta: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0
    test_acc: float = 0.0
    n_epochs: int = 0
    wall_ms: float = 0.0

    def to_json(self, include_timing: bool = True) -> str:
        obj = {
            "config": self.config,
            "train_loss": self.train_loss,
            "val_acc": self.val_acc,
            "gate_abs_alpha": self.gate_abs_alpha,
            "gate_abs_beta": self.gate_abs_beta,
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_acc,
            "test_acc": self.test_acc,
            "n_epochs": self.n_epochs,
        }
        if include_timing:
            obj["wall_ms"] = self.wall_ms
        return json.dumps(obj)


def adam_step(
    parameters: list[Parameter],
    lr: float,
    weight_decay: float = 0.0,
    betas: tuple = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """Classic Adam with bias correction; coupled L2 except for exempt parameters."""
    b1, b2 = betas
    for p in parameters:
        g = p.grad
        if weight_decay and not p.weight_decay_exempt:
            g = g + weight_decay * p.value
        p.step_count += 1
        t = p.step_count
        p.adam_m[:] = b1 * p.adam_m + (1.0 - b1) * g
        p.adam_v[:] = b2 * p.adam_v + (1.0 - b2) * g * g
        m_hat = p.adam_m / (1.0 - b1**t)
        v_hat = p.adam_v / (1.0 - b2**t)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)


def accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Accuracy over masked nodes; argmax ties break toward the smallest class."""
    idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    if len(idx) == 0:
        raise TrainError("evaluation mask selects no nodes")
    pred = np.argmax(logits[idx], axis=1)
    return float(np.mean(pred == labels[idx]))


def evaluate(model: UdgnnModel, graph: SparseGraph, dataset: NodeDataset, mask: np.ndarray) -> float:
    prop, prop_rw = _props_for(model, graph)
    _, logits, _ = model_forward(model, dataset.features, prop, prop_rw=prop_rw)
    return accuracy(logits.value, dataset.labels, mask)


def _props_for(model: UdgnnModel, graph: SparseGraph):
    prop = build_propagation(graph, model.spec.propagation_kind)
    prop_rw = build_propagation(graph, ROW_NORM) if model.spec.conv_kind == "SageMean" else None
    return prop, prop_rw


def train(
    model: UdgnnModel,
    graph: SparseGraph,
    dataset: NodeDataset,
    config: TrainConfig,
    epoch_hook=None,
) -> TrainReport:
    """Full-batch training loop.

    ``epoch_hook(epoch, model, hiddens, loss, val_acc)`` runs after backward
    and before the optimizer step, with the training-pass hidden states.
    """
    config.validate()
    for name, m in (("train", dataset.train_mask), ("val", dataset.val_mask), ("test", dataset.test_mask)):
        if not m.any():
            raise TrainError(f"{name} mask is empty")
    prop, prop_rw = _props_for(model, graph)
    dropout = config.dropout_rate if config.dropout_rate is not None else model.spec.dropout_rate
    spec_rate = model.spec.dropout_rate
    model.spec.dropout_rate = dropout
    drop_rng = make_rng(config.seed, "dropout")
    report = TrainReport(config=_echo_config(model, config, dropout))
    best_snapshot = model.snapshot()
    best_val = -1.0
    since_best = 0
    t0 = time.perf_counter()
    try:
        for epoch in range(1, config.max_epochs + 1):
            tape, logits, hiddens = model_forward(
                model, dataset.features, prop, training=True, rng=drop_rng, prop_rw=prop_rw
            )
            try:
                loss_node = tape.softmax_cross_entropy(logits, dataset.labels, dataset.train_mask)
            except Exception as e:
                raise TrainError(f"loss failed at epoch {epoch}: {e}") from e
            loss = float(loss_node.value[0, 0])
            if not np.isfinite(loss):
                raise TrainError(f"non-finite loss at epoch {epoch}")
            for p in model.parameters():
                p.zero_grad()
            backward(tape, loss_node)

            _, eval_logits, _ = model_forward(model, dataset.features, prop, prop_rw=prop_rw)
            val_acc = accuracy(eval_logits.value, dataset.labels, dataset.val_mask)

            if epoch_hook is not None:
                epoch_hook(epoch, model, hiddens, loss, val_acc)

            adam_step(model.parameters(), config.learning_rate, config.weight_decay)

            report.train_loss.append(loss)
            report.val_acc.append(val_acc)
            report.gate_abs_alpha.append([abs(float(a.value[0, 0])) for a in model.alphas])
            report.gate_abs_beta.append([abs(float(b.value[0, 0])) for b in model.betas])
            report.n_epochs = epoch

            if val_acc > best_val:
                best_val = val_acc
                best_snapshot = model.snapshot()
                report.best_epoch = epoch
                since_best = 0
            else:
                since_best += 1
            if since_best >= config.patience:
                break
    finally:
        model.spec.dropout_rate = spec_rate
    model.restore(best_snapshot)
    _, test_logits, _ = model_forward(model, dataset.features, prop, prop_rw=prop_rw)
    report.best_val_acc = best_val
    report.test_acc = accuracy(test_logits.value, dataset.labels, dataset.test_mask)
    report.wall_ms = (time.perf_counter() - t0) * 1000.0
    return report


def _echo_config(model: UdgnnModel, config: TrainConfig, dropout: float) -> dict:
    return {
        "model": json.loads(model.spec.to_json()),
        "model_seed": model.seed,
        "learning_rate": config.learning_rate,
        "weight_decay": config.weight_decay,
        "max_epochs": config.max_epochs,
        "patience": config.patience,
        "dropout_rate": dropout,
        "seed": config.seed,
    }


# --- depth sweeps -----------------------------------------------------------

# Named architecture variants for sweeps and the CLI.
VARIANTS: dict[str, dict] = {
    "gcn": {"conv_kind": "GCN", "skip_kind": "NoSkip"},
    "gcn_res": {"conv_kind": "GCN", "skip_kind": "Residual"},
    "gcn_init": {"conv_kind": "GCN", "skip_kind": "Initial"},
    "gcn_jk": {"conv_kind": "GCN", "skip_kind": "JK"},
    "gcn_drive": {"conv_kind": "GCN", "skip_kind": "Drive"},
    "udgnn_gcn": {"conv_kind": "GCN", "skip_kind": "Drive", "with_ffn": True},
    "sgc": {"conv_kind": "SGC", "skip_kind": "NoSkip"},
    "sgc_res": {"conv_kind": "SGC", "skip_kind": "Residual"},
    "sgc_init": {"conv_kind": "SGC", "skip_kind": "Initial"},
    "sgc_drive": {"conv_kind": "SGC", "skip_kind": "Drive"},
    "udgnn_sgc": {"conv_kind": "SGC", "skip_kind": "Drive", "with_ffn": True},
    "sage_drive": {"conv_kind": "SageMean", "skip_kind": "Drive"},
    "udgnn_sage": {"conv_kind": "SageMean", "skip_kind": "Drive", "with_ffn": True},
    "ffn_res": {"conv_kind": "Dense", "skip_kind": "Residual"},
}

SWEEP_HEADER = "variant,conv,depth,repeat,seed,val_acc,test_acc,best_epoch,wall_ms"


def variant_spec(name: str, template: ModelSpec, depth: int) -> ModelSpec:
    if name not in VARIANTS:
        raise TrainError(f"unknown variant {name!r}; valid: {', '.join(sorted(VARIANTS))}")
    fields = json.loads(template.to_json())
    fields.update(VARIANTS[name])
    fields["with_ffn"] = VARIANTS[name].get("with_ffn", False)
    fields["depth"] = depth
    spec = ModelSpec(**fields)
    spec.validate()
    return spec


def depth_sweep(
    template: ModelSpec,
    graph: SparseGraph,
    dataset: NodeDataset,
    variants: list[str],
    depths: list[int],
    repeats: int,
    config: TrainConfig,
    n_threads: int | None = None,
) -> list[dict]:
    """Train every (variant, depth, repeat) cell; rows ordered by that key."""
    if not depths:
        raise TrainError("depths list is empty")
    for v in variants:
        if v not in VARIANTS:
            raise TrainError(f"unknown variant {v!r}; valid: {', '.join(sorted(VARIANTS))}")
    cells = [(v, d, r) for v in variants for d in depths for r in range(repeats)]

    def run_cell(cell):
        v, d, r = cell
        seed = derive_seed(config.seed, v, d, r)
        spec = variant_spec(v, template, d)
        model = UdgnnModel(spec, dataset.feature_dim, dataset.n_classes, seed=seed)
        cfg = TrainConfig(
            learning_rate=config.learning_rate,
            weight_decay=config.weight_decay,
            max_epochs=config.max_epochs,
            patience=config.patience,
            dropout_rate=config.dropout_rate,
            seed=seed,
        )
        rep = train(model, graph, dataset, cfg)
        return {
            "variant": v,
            "conv": spec.conv_kind,
            "depth": d,
            "repeat": r,
            "seed": seed,
            "val_acc": rep.best_val_acc,
            "test_acc": rep.test_acc,
            "best_epoch": rep.best_epoch,
            "wall_ms": rep.wall_ms,
        }

    if n_threads is None:
        n_threads = int(os.environ.get("UDGNN_THREADS", os.cpu_count() or 1))
    if n_threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(SWEEP_HEADER + "\n")
    for row in rows:
        buf.write(
            f"{row['variant']},{row['conv']},{row['depth']},{row['repeat']},{row['seed']},"
            f"{row['val_acc']!r},{row['test_acc']!r},{row['best_epoch']},{row['wall_ms']:.1f}\n"
        )
    return buf.getvalue()
