"""Model configuration and the encoder -> blocks -> decoder forward pass.

Skip variants, with GraphConv(H) depending on the conv kind:

    NoSkip:   H' = Conv(H)
    Residual: H' = H + Conv(H)
    Initial:  H' = H0 + Conv(H)
    JK:       NoSkip blocks, all layer outputs concatenated into the decoder
    Drive:    H' = H + alpha_l * Conv(H), optionally followed by the gated
              feed-forward step M + beta_l * FFN(M)

Conv kinds: GCN sigma(P H W); SGC P H (no weight, no nonlinearity); SageMean
sigma(P_rw H W_nb + H W_self); Dense sigma(H W), a propagation-free per-node
transformation (the residual feed-forward control variant). ``linear_mode``
drops every in-block nonlinearity so the path-decomposition oracles apply.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import AutodiffError, Parameter, Tape
from .graph import PROPAGATION_KINDS, SYM_NORM, PropagationMatrix
from .rng import make_rng

CONV_KINDS = ("GCN", "SGC", "SageMean", "Dense")
SKIP_KINDS = ("NoSkip", "Residual", "Initial", "JK", "Drive")


class ModelError(ValueError):
    pass


@dataclass
class ModelSpec:
    conv_kind: str = "GCN"
    skip_kind: str = "Drive"
    with_ffn: bool = False
    depth: int = 2
    hidden_dim: int = 64
    alpha_init: float = 0.0
    beta_init: float = 0.0
    linear_mode: bool = False
    dropout_rate: float = 0.0
    propagation_kind: str = SYM_NORM

    def validate(self) -> None:
        if self.conv_kind not in CONV_KINDS:
            raise ModelError(f"unknown conv_kind {self.conv_kind!r}; expected one of {CONV_KINDS}")
        if self.skip_kind not in SKIP_KINDS:
            raise ModelError(f"unknown skip_kind {self.skip_kind!r}; expected one of {SKIP_KINDS}")
        if self.depth < 0:
            raise ModelError("depth must be >= 0")
        if self.hidden_dim < 1:
            raise ModelError("hidden_dim must be >= 1")
        if self.with_ffn and self.skip_kind != "Drive":
            raise ModelError("with_ffn requires skip_kind='Drive'")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ModelError("dropout_rate must be in [0, 1)")
        if self.propagation_kind not in PROPAGATION_KINDS:
            raise ModelError(f"unknown propagation_kind {self.propagation_kind!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @staticmethod
    def from_json(text: str) -> "ModelSpec":
        obj = json.loads(text)
        spec = ModelSpec(**obj)
        spec.validate()
        return spec


class UdgnnModel:
    """Parameter set for one ModelSpec; construction is a pure function of (spec, dims, seed)."""

    def __init__(self, spec: ModelSpec, in_dim: int, n_classes: int, seed: int = 0):
        spec.validate()
        self.spec = spec
        self.in_dim = in_dim
        self.n_classes = n_classes
        self.seed = seed
        h, L = spec.hidden_dim, spec.depth
        rng = make_rng(seed, "init")

        def glorot(fan_in, fan_out, name):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return Parameter(rng.uniform(-limit, limit, size=(fan_in, fan_out)), name=name)

        def bias(dim, name):
            return Parameter(np.zeros((1, dim)), weight_decay_exempt=True, name=name)

        self.enc_w = glorot(in_dim, h, "enc_w")
        self.enc_b = bias(h, "enc_b")
        self.conv_weights: list = []
        self.ffn_weights: list = []
        self.alphas: list = []
        self.betas: list = []
        for l in range(L):
            if spec.conv_kind in ("GCN", "Dense"):
                self.conv_weights.append(glorot(h, h, f"conv_w{l}"))
            elif spec.conv_kind == "SageMean":
                self.conv_weights.append(
                    (glorot(h, h, f"sage_self_w{l}"), glorot(h, h, f"sage_nb_w{l}"))
                )
            else:  # SGC carries no per-layer weight
                self.conv_weights.append(None)
            if spec.with_ffn:
                self.ffn_weights.append(
                    (
                        glorot(h, h, f"ffn_w1_{l}"),
                        bias(h, f"ffn_b1_{l}"),
                        glorot(h, h, f"ffn_w2_{l}"),
                        bias(h, f"ffn_b2_{l}"),
                    )
                )
            else:
                self.ffn_weights.append(None)
            if spec.skip_kind == "Drive":
                self.alphas.append(
                    Parameter(np.array([[spec.alpha_init]]), weight_decay_exempt=True, name=f"alpha{l}")
                )
                if spec.with_ffn:
                    self.betas.append(
                        Parameter(np.array([[spec.beta_init]]), weight_decay_exempt=True, name=f"beta{l}")
                    )
        dec_in = h * L if (spec.skip_kind == "JK" and L >= 1) else h
        self.dec_w = glorot(dec_in, n_classes, "dec_w")
        self.dec_b = bias(n_classes, "dec_b")

    def parameters(self) -> list[Parameter]:
        params = [self.enc_w, self.enc_b]
        for w in self.conv_weights:
            if isinstance(w, tuple):
                params.extend(w)
            elif w is not None:
                params.append(w)
        for f in self.ffn_weights:
            if f is not None:
                params.extend(f)
        params.extend(self.alphas)
        params.extend(self.betas)
        params.extend([self.dec_w, self.dec_b])
        return params

    def snapshot(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.parameters()]

    def restore(self, values: list[np.ndarray]) -> None:
        for p, v in zip(self.parameters(), values):
            p.value[:] = v


def _activate(tape: Tape, node, linear_mode: bool):
    return node if linear_mode else tape.relu(node)


def _conv(tape: Tape, model: UdgnnModel, layer: int, h, prop, prop_rw):
    spec = model.spec
    if spec.conv_kind == "GCN":
        z = tape.matmul(tape.spmm(prop, h), tape.param(model.conv_weights[layer]))
        return _activate(tape, z, spec.linear_mode)
    if spec.conv_kind == "SGC":
        return tape.spmm(prop, h)
    if spec.conv_kind == "Dense":
        z = tape.matmul(h, tape.param(model.conv_weights[layer]))
        return _activate(tape, z, spec.linear_mode)
    # SageMean: row-normalized neighbor mean plus a separate self transform
    if prop_rw is None:
        raise ModelError("SageMean conv needs a row-normalized propagation operator")
    w_self, w_nb = model.conv_weights[layer]
    z = tape.add(
        tape.matmul(tape.spmm(prop_rw, h), tape.param(w_nb)),
        tape.matmul(h, tape.param(w_self)),
    )
    return _activate(tape, z, spec.linear_mode)


def block_forward(tape, model, layer, h, h0, prop, prop_rw=None, training=False, rng=None):
    """One skip-connected block; ``h0`` is required for Initial connections."""
    spec = model.spec
    h_in = tape.dropout(h, spec.dropout_rate, training, rng)
    conv = _conv(tape, model, layer, h_in, prop, prop_rw)
    if spec.skip_kind in ("NoSkip", "JK"):
        return conv
    if spec.skip_kind == "Residual":
        return tape.add(h, conv)
    if spec.skip_kind == "Initial":
        if h0 is None:
            raise ModelError("Initial connection needs the layer-0 representation")
        return tape.add(h0, conv)
    # Drive
    m = tape.add(h, tape.scale_by_param(model.alphas[layer], conv))
    if not spec.with_ffn:
        return m
    m_in = tape.dropout(m, spec.dropout_rate, training, rng)
    w1, b1, w2, b2 = model.ffn_weights[layer]
    hidden = _activate(tape, tape.add_row(tape.matmul(m_in, tape.param(w1)), tape.param(b1)), spec.linear_mode)
    ffn = tape.add_row(tape.matmul(hidden, tape.param(w2)), tape.param(b2))
    return tape.add(m, tape.scale_by_param(model.betas[layer], ffn))


def jk_readout(tape: Tape, layer_outputs: list):
    """Column concatenation [H^1 | ... | H^L]."""
    if not layer_outputs:
        raise ModelError("jk_readout needs at least one layer output")
    if len(layer_outputs) == 1:
        return layer_outputs[0]
    return tape.concat_cols(layer_outputs)


def model_forward(
    model: UdgnnModel,
    features: np.ndarray,
    prop: PropagationMatrix | None,
    training: bool = False,
    rng: np.random.Generator | None = None,
    prop_rw: PropagationMatrix | None = None,
):
    """Full stack; returns (tape, logits node, list of cached H^0..H^L arrays)."""
    spec = model.spec
    if features.shape[1] != model.in_dim:
        raise ModelError(f"features have dim {features.shape[1]}, encoder expects {model.in_dim}")
    if spec.depth > 0 and prop is None and spec.conv_kind != "Dense":
        raise ModelError("propagation operator required for depth > 0")
    tape = Tape()
    x = tape.constant(features)
    h = tape.add_row(tape.matmul(x, tape.param(model.enc_w)), tape.param(model.enc_b))
    h0 = h
    hiddens = [h.value]
    layer_nodes = []
    for layer in range(spec.depth):
        h = block_forward(tape, model, layer, h, h0, prop, prop_rw, training, rng)
        hiddens.append(h.value)
        layer_nodes.append(h)
    readout = jk_readout(tape, layer_nodes) if (spec.skip_kind == "JK" and spec.depth >= 1) else h
    logits = tape.add_row(tape.matmul(readout, tape.param(model.dec_w)), tape.param(model.dec_b))
    return tape, logits, hiddens
