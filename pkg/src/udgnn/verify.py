"""Randomized oracle-equivalence suites for the two path-decomposition claims.

Suite 1 ("theorem 1"): explicit path enumeration must reproduce the
linear-mode model forward. Suite 2 ("theorem 2"): the analytic path-sum
gradients must reproduce the autodiff tape gradients. Both sweep random small
instances over every skip kind and the GCN/SGC convolutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import backward
from .diagnostics import (
    analytic_gate_grad,
    analytic_input_grad,
    analytic_weight_grad,
    enumerate_model_forward,
)
from .graph import SYM_NORM, SparseGraph, build_propagation
from .model import ModelSpec, UdgnnModel, model_forward
from .rng import make_rng

THEOREM1_TOL = 1e-10
THEOREM2_TOL = 1e-8

_SKIP_GRID = ("NoSkip", "Residual", "Initial", "Drive")
_CONV_GRID = ("SGC", "GCN")


@dataclass
class VerifyResult:
    trials: int
    max_deviation: float
    worst_instance: int  # trial index of the largest deviation

    def passed(self, tol: float) -> bool:
        return self.max_deviation < tol


def _random_instance(rng: np.random.Generator, trial: int):
    n = int(rng.integers(5, 17))
    h = int(rng.integers(2, 9))
    d = int(rng.integers(2, 7))
    depth = int(rng.integers(1, 7))
    skip = _SKIP_GRID[trial % len(_SKIP_GRID)]
    conv = _CONV_GRID[(trial // len(_SKIP_GRID)) % len(_CONV_GRID)]
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < 0.4
    graph = SparseGraph.from_edges(n, np.stack([iu[keep], iv[keep]], axis=1))
    features = rng.standard_normal((n, d))
    spec = ModelSpec(
        conv_kind=conv,
        skip_kind=skip,
        depth=depth,
        hidden_dim=h,
        linear_mode=True,
        propagation_kind=SYM_NORM,
    )
    model = UdgnnModel(spec, d, 3, seed=int(rng.integers(0, 2**31)))
    for a in model.alphas:  # nonzero gates make the Drive paths non-trivial
        a.value[0, 0] = rng.uniform(-0.8, 0.8)
    prop = build_propagation(graph, SYM_NORM)
    return graph, features, model, prop


def verify_theorem1(trials: int, seed: int, corrupt: bool = False) -> VerifyResult:
    """Max elementwise |enumerate_paths_forward - model_forward| over random instances."""
    rng = make_rng(seed, "theorem1")
    worst, worst_i = 0.0, -1
    for trial in range(trials):
        _, features, model, prop = _random_instance(rng, trial)
        _, _, hiddens = model_forward(model, features, prop)
        expected = enumerate_model_forward(model, prop, hiddens[0])
        dev = float(np.max(np.abs(expected - hiddens[-1])))
        if corrupt:
            dev += 1e-6
        if dev > worst:
            worst, worst_i = dev, trial
    return VerifyResult(trials, worst, worst_i)


def verify_theorem2(trials: int, seed: int, corrupt: bool = False) -> VerifyResult:
    """Max relative error between analytic path-sum gradients and tape gradients.

    Checks dL/dW^l for every GCN layer, dL/dalpha_l for Drive, and dL/dH^0
    through the encoder weight (the SGC-compatible probe). The synthetic loss
    <logits, G> makes the last-layer upstream gradient known in closed form.
    """
    rng = make_rng(seed, "theorem2")
    worst, worst_i = 0.0, -1
    for trial in range(trials):
        _, features, model, prop = _random_instance(rng, trial)
        tape, logits, hiddens = model_forward(model, features, prop)
        g = rng.standard_normal(logits.value.shape)
        loss = tape.frobenius_inner(logits, g)
        for p in model.parameters():
            p.zero_grad()
        backward(tape, loss)

        upstream = g @ model.dec_w.value.T  # dL/dH^L
        spec = model.spec
        weights = [w.value if w is not None else None for w in model.conv_weights]
        gates = [float(a.value[0, 0]) for a in model.alphas] if spec.skip_kind == "Drive" else None

        def rel(a, b):
            return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a))))

        dev = 0.0
        for layer in range(1, spec.depth + 1):
            if weights[layer - 1] is not None:
                an = analytic_weight_grad(prop, hiddens, upstream, weights, spec.skip_kind, layer, gates)
                dev = max(dev, rel(an, model.conv_weights[layer - 1].grad))
            if spec.skip_kind == "Drive":
                an_gate = analytic_gate_grad(prop, hiddens, upstream, weights, spec.skip_kind, layer, gates)
                got = float(model.alphas[layer - 1].grad[0, 0])
                dev = max(dev, abs(an_gate - got) / max(1.0, abs(an_gate)))
        dh0 = analytic_input_grad(prop, upstream, weights, spec.skip_kind, gates)
        an_enc = features.T @ dh0
        dev = max(dev, rel(an_enc, model.enc_w.grad))
        if corrupt:
            dev += 1e-4
        if dev > worst:
            worst, worst_i = dev, trial
    return VerifyResult(trials, worst, worst_i)
