"""Executable oracles and over-smoothing metrics.

The forward/backward path-decomposition oracles expand a linear-mode model
into an explicit sum over branch-choice paths, independently of the autodiff
tape, so the two implementations check each other. The metrics quantify
identity mapping (ConvRatio), gradient spectral information (normalized von
Neumann entropy over a one-sided Jacobi SVD), and lazy-random-walk mixing.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .graph import PropagationMatrix
from .model import UdgnnModel
from .train import TrainConfig, TrainReport, train


class DiagnosticsError(ValueError):
    pass


# --- path-length weight distributions ---------------------------------------


def path_weight_distribution(skip_kind: str, depth: int, alphas=None):
    """Total path weight per length 0..L; also returned normalized to sum 1.

    Residual: binomial C(L, l). Initial: 1 per length. Drive: coefficients of
    prod_i (1 + alpha_i x), computed by the elementary-symmetric-polynomial
    recurrence (exact, works for any depth). NoSkip: a single length-L path.
    """
    if depth < 0:
        raise DiagnosticsError("depth must be >= 0")
    if skip_kind == "Residual":
        weights = [math.comb(depth, l) for l in range(depth + 1)]
    elif skip_kind == "Initial":
        weights = [1] * (depth + 1)
    elif skip_kind == "NoSkip":
        weights = [0] * depth + [1]
    elif skip_kind == "Drive":
        if alphas is None:
            raise DiagnosticsError("Drive distribution needs per-layer alphas")
        alphas = list(alphas)
        if len(alphas) != depth:
            raise DiagnosticsError(f"expected {depth} alphas, got {len(alphas)}")
        coeffs = [1.0] + [0.0] * depth
        for a in alphas:
            for l in range(depth, 0, -1):
                coeffs[l] += a * coeffs[l - 1]
        weights = coeffs
    else:
        raise DiagnosticsError(f"no path distribution for skip kind {skip_kind!r}")
    total = float(sum(weights))
    normalized = [w / total for w in weights] if total > 0 else [0.0] * (depth + 1)
    return weights, normalized


# --- forward path enumeration (the forward decomposition oracle) ------------


def _check_linear(model: UdgnnModel) -> None:
    if not model.spec.linear_mode:
        raise DiagnosticsError("path enumeration only applies in linear_mode")
    if model.spec.conv_kind not in ("GCN", "SGC"):
        raise DiagnosticsError("path enumeration covers GCN and SGC convolutions")
    if model.spec.with_ffn:
        raise DiagnosticsError("path enumeration does not cover FFN blocks")
    if model.spec.depth > 12:
        raise DiagnosticsError("path enumeration capped at depth 12")


def forward_path_masks(skip_kind: str, depth: int):
    """Admissible conv-branch layer sets (1-based), as sorted tuples.

    Residual/Drive admit every subset; Initial only suffixes {L-k+1..L}
    (including the bare input path); NoSkip the full chain only.
    """
    layers = range(1, depth + 1)
    if skip_kind in ("Residual", "Drive"):
        return [tuple(sorted(s)) for s in _all_subsets(layers)]
    if skip_kind == "Initial":
        return [tuple(range(depth - k + 1, depth + 1)) for k in range(depth + 1)]
    if skip_kind == "NoSkip":
        return [tuple(layers)]
    raise DiagnosticsError(f"no path set for skip kind {skip_kind!r}")


def _all_subsets(items):
    items = list(items)
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def _path_term(prop, h0, mask, weights, gates):
    out = h0.copy()
    for layer in mask:  # ascending: P applies commute with the right-multiplies
        out = prop.apply(out)
        w = weights[layer - 1]
        if w is not None:
            out = out @ w
        if gates is not None:
            out = gates[layer - 1] * out
    return out


def enumerate_paths_forward(
    prop: PropagationMatrix,
    h0: np.ndarray,
    weights: list,
    skip_kind: str,
    gates=None,
) -> np.ndarray:
    """Sum of P_path H^0 W_path over all admissible paths.

    ``weights[l]`` is the layer-(l+1) conv weight, or None for SGC. For Drive,
    ``gates`` holds the per-layer scalars multiplying each selected conv branch.
    """
    depth = len(weights)
    if depth > 12:
        raise DiagnosticsError("path enumeration capped at depth 12 (4096 paths)")
    if skip_kind == "Drive" and gates is None:
        raise DiagnosticsError("Drive enumeration needs gate values")
    total = np.zeros_like(h0)
    for mask in forward_path_masks(skip_kind, depth):
        total = total + _path_term(prop, h0, mask, weights, gates)
    return total


def enumerate_model_forward(model: UdgnnModel, prop: PropagationMatrix, h0: np.ndarray) -> np.ndarray:
    """Forward path-decomposition oracle applied to a model's own block weights (linear_mode)."""
    _check_linear(model)
    weights = [w.value if w is not None else None for w in model.conv_weights]
    gates = [float(a.value[0, 0]) for a in model.alphas] if model.spec.skip_kind == "Drive" else None
    return enumerate_paths_forward(prop, h0, weights, model.spec.skip_kind, gates)


# --- backward gradient paths (the gradient decomposition oracle) ------------


def _downstream_masks(skip_kind: str, layers):
    """Conv-branch sets among the layers strictly downstream of a fixed layer."""
    layers = list(layers)
    if skip_kind in ("Residual", "Drive"):
        return [tuple(sorted(s)) for s in _all_subsets(layers)]
    # NoSkip and Initial: the value of layer l only reaches the output through
    # the full downstream chain (Initial's shortcut carries H^0, not H^l).
    return [tuple(layers)]


def _upstream_through_paths(prop, upstream, masks, weights, gates):
    total = np.zeros_like(upstream)
    for mask in masks:
        m = upstream.copy()
        for layer in reversed(mask):
            m = prop.transpose_apply(m)
            w = weights[layer - 1]
            if w is not None:
                m = m @ w.T
            if gates is not None:
                m = gates[layer - 1] * m
        total = total + m
    return total


def grad_wrt_hidden(prop, upstream, weights, skip_kind, layer, gates=None) -> np.ndarray:
    """dL/dH^layer given dL/dH^L, by summing transposed downstream paths."""
    depth = len(weights)
    masks = _downstream_masks(skip_kind, range(layer + 1, depth + 1))
    return _upstream_through_paths(prop, upstream, masks, weights, gates)


def analytic_weight_grad(prop, hiddens, upstream, weights, skip_kind, layer, gates=None) -> np.ndarray:
    """dL/dW^layer for a linear-mode GCN stack (layer is 1-based).

    NoSkip/Initial collapse to (H^{l-1})^T (P^{L-l+1})^T dL/dH^L (prod W)^T;
    Residual/Drive sum over all downstream branch choices, with gate factors.
    """
    w = weights[layer - 1]
    if w is None:
        raise DiagnosticsError("layer has no weight (SGC); use analytic_gate_grad")
    dh = grad_wrt_hidden(prop, upstream, weights, skip_kind, layer, gates)
    grad = prop.apply(hiddens[layer - 1]).T @ dh
    if gates is not None:
        grad = gates[layer - 1] * grad
    return grad


def analytic_gate_grad(prop, hiddens, upstream, weights, skip_kind, layer, gates) -> float:
    """dL/dalpha_layer: Frobenius product of the conv branch output with dL/dH^layer."""
    dh = grad_wrt_hidden(prop, upstream, weights, skip_kind, layer, gates)
    branch = prop.apply(hiddens[layer - 1])
    w = weights[layer - 1]
    if w is not None:
        branch = branch @ w
    return float(np.sum(branch * dh))


def analytic_input_grad(prop, upstream, weights, skip_kind, gates=None) -> np.ndarray:
    """dL/dH^0, by summing every admissible transposed path."""
    depth = len(weights)
    masks = forward_path_masks(skip_kind, depth)
    return _upstream_through_paths(prop, upstream, masks, weights, gates)


# --- metrics ----------------------------------------------------------------

CONV_RATIO_CAP = 1e6
_DEGENERATE = 1e-12


def conv_ratio_flagged(h_prev: np.ndarray, h_next: np.ndarray) -> tuple[float, bool]:
    """Mean over nodes of ||h_next_i - h_prev_i|| / ||h_next_i||.

    Rows with vanishing output norm contribute 0 when the difference also
    vanishes, else the cap value; the flag reports whether the cap fired.
    """
    if h_prev.shape != h_next.shape:
        raise DiagnosticsError(f"shape mismatch {h_prev.shape} vs {h_next.shape}")
    diff = np.linalg.norm(h_next - h_prev, axis=1)
    denom = np.linalg.norm(h_next, axis=1)
    degenerate = denom < _DEGENERATE
    contrib = np.where(~degenerate, diff / np.where(degenerate, 1.0, denom), 0.0)
    capped = degenerate & (diff >= _DEGENERATE)
    contrib = np.where(capped, CONV_RATIO_CAP, contrib)
    return float(contrib.mean()), bool(capped.any())


def conv_ratio(h_prev: np.ndarray, h_next: np.ndarray) -> float:
    return conv_ratio_flagged(h_prev, h_next)[0]


def jacobi_singular_values(m: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100) -> np.ndarray:
    """Singular values by one-sided Jacobi column orthogonalization, descending."""
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2:
        raise DiagnosticsError("expected a matrix")
    if a.shape[0] < a.shape[1]:
        a = a.T.copy()
    n = a.shape[1]
    for _ in range(max_sweeps):
        converged = True
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p] @ a[:, q]
                if apq == 0.0:
                    continue
                app = a[:, p] @ a[:, p]
                aqq = a[:, q] @ a[:, q]
                if abs(apq) <= tol * math.sqrt(app * aqq):
                    continue
                converged = False
                tau = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                col_p = a[:, p].copy()
                a[:, p] = c * col_p - s * a[:, q]
                a[:, q] = s * col_p + c * a[:, q]
        if converged:
            break
    sv = np.sqrt(np.einsum("ij,ij->j", a, a))
    return np.sort(sv)[::-1]


def von_neumann_entropy(m: np.ndarray) -> float:
    """Shannon entropy of the normalized singular values, divided by log d.

    1.0 means uniform spectrum (maximally informative), 0.0 means rank one.
    The all-zero matrix is defined as 0 (see ``von_neumann_entropy_flagged``).
    """
    return von_neumann_entropy_flagged(m)[0]


def von_neumann_entropy_flagged(m: np.ndarray) -> tuple[float, bool]:
    m = np.asarray(m, dtype=np.float64)
    d = min(m.shape)
    if d < 2:
        raise DiagnosticsError("entropy needs at least a 2x2 spectrum")
    sv = jacobi_singular_values(m)
    total = sv.sum()
    if total == 0.0:
        return 0.0, True
    p = sv / total
    nz = p > 0
    h = -float(np.sum(p[nz] * np.log(p[nz]))) / math.log(d)
    return min(max(h, 0.0), 1.0), False


def row_dispersion(h: np.ndarray) -> float:
    """Mean pairwise Euclidean distance between rows."""
    n = h.shape[0]
    if n < 2:
        return 0.0
    sq = np.sum(h * h, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (h @ h.T)
    iu = np.triu_indices(n, k=1)
    return float(np.mean(np.sqrt(np.maximum(d2[iu], 0.0))))


def lazy_walk_convergence(prop: PropagationMatrix, l_list: list[int], h0: np.ndarray) -> list[float]:
    """Row dispersion of ((P+I)/2)^L H0 for each requested L (ascending order not required)."""
    want = {int(l) for l in l_list}
    if any(l < 0 for l in want):
        raise DiagnosticsError("walk lengths must be >= 0")
    out = {}
    h = np.asarray(h0, dtype=np.float64)
    for step in range(max(want) + 1):
        if step in want:
            out[step] = row_dispersion(h)
        h = 0.5 * (prop.apply(h) + h)
    return [out[int(l)] for l in l_list]


# --- training-time diagnostics ----------------------------------------------


@dataclass
class DiagnosticsRecord:
    epoch: int
    layer: int
    conv_ratio: float
    conv_ratio_capped: bool
    grad_entropy: float | None  # None when the layer has no conv weight
    abs_alpha: float | None
    abs_beta: float | None
    loss: float
    val_acc: float


def record_training_diagnostics(
    model: UdgnnModel,
    graph,
    dataset,
    config: TrainConfig,
    log_every: int = 10,
    entropy_layers=None,
) -> tuple[TrainReport, list[DiagnosticsRecord]]:
    """Train while capturing per-layer ConvRatio and gradient entropy.

    The hook runs after backward and before the Adam step, so gradient
    entropies are of the raw dL/dW^l. ``entropy_layers`` restricts the (costly)
    SVD to the listed layer indices; None computes all layers.
    """
    if log_every < 1:
        raise DiagnosticsError("log_every must be >= 1")
    records: list[DiagnosticsRecord] = []

    def hook(epoch, mdl, hiddens, loss, val_acc):
        if epoch != 1 and epoch % log_every != 0:
            return
        for layer in range(mdl.spec.depth):
            ratio, capped = conv_ratio_flagged(hiddens[layer], hiddens[layer + 1])
            entropy = None
            if entropy_layers is None or layer in entropy_layers:
                w = mdl.conv_weights[layer]
                if isinstance(w, tuple):
                    w = w[1]  # SageMean: the neighbor-path weight
                if w is not None:
                    entropy = von_neumann_entropy(w.grad)
            records.append(
                DiagnosticsRecord(
                    epoch=epoch,
                    layer=layer,
                    conv_ratio=ratio,
                    conv_ratio_capped=capped,
                    grad_entropy=entropy,
                    abs_alpha=abs(float(mdl.alphas[layer].value[0, 0])) if mdl.alphas else None,
                    abs_beta=abs(float(mdl.betas[layer].value[0, 0])) if mdl.betas else None,
                    loss=loss,
                    val_acc=val_acc,
                )
            )

    report = train(model, graph, dataset, config, epoch_hook=hook)
    return report, records


def diagnostics_csv(records: list[DiagnosticsRecord]) -> str:
    buf = io.StringIO()
    buf.write("epoch,layer,conv_ratio,grad_entropy,abs_alpha,abs_beta,loss,val_acc\n")

    def fmt(x):
        return "" if x is None else repr(float(x))

    for r in records:
        buf.write(
            f"{r.epoch},{r.layer},{fmt(r.conv_ratio)},{fmt(r.grad_entropy)},"
            f"{fmt(r.abs_alpha)},{fmt(r.abs_beta)},{fmt(r.loss)},{fmt(r.val_acc)}\n"
        )
    return buf.getvalue()
