"""Dense reverse-mode automatic differentiation on a recorded tape.

Everything is a 2-D float64 numpy array. A Tape owns the recorded forward
graph; calling :func:`backward` once sweeps it in reverse and accumulates
gradients into the :class:`Parameter` leaves. One backward pass per tape.
"""

from __future__ import annotations

import numpy as np


class AutodiffError(RuntimeError):
    pass


class Parameter:
    """Trainable matrix with gradient and Adam state.

    Scalar gates are 1x1 parameters. ``weight_decay_exempt`` marks gates and
    biases, which receive no L2 term during optimization.
    """

    def __init__(self, value: np.ndarray, weight_decay_exempt: bool = False, name: str = ""):
        self.value = np.atleast_2d(np.asarray(value, dtype=np.float64)).copy()
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)
        self.step_count = 0
        self.weight_decay_exempt = weight_decay_exempt
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[:] = 0.0


class Node:
    __slots__ = ("value", "parents", "vjps", "param")

    def __init__(self, value, parents=(), vjps=(), param=None):
        self.value = value
        self.parents = parents
        self.vjps = vjps
        self.param = param


class Tape:
    def __init__(self):
        self.nodes: list[Node] = []
        self.backward_done = False

    def _record(self, value, parents=(), vjps=(), param=None) -> Node:
        node = Node(np.asarray(value, dtype=np.float64), tuple(parents), tuple(vjps), param)
        self.nodes.append(node)
        return node

    # --- leaves ---

    def constant(self, arr) -> Node:
        return self._record(np.atleast_2d(np.asarray(arr, dtype=np.float64)))

    def param(self, p: Parameter) -> Node:
        return self._record(p.value, param=p)

    # --- primitives ---

    def matmul(self, a: Node, b: Node) -> Node:
        if a.value.shape[1] != b.value.shape[0]:
            raise AutodiffError(f"matmul shape mismatch {a.value.shape} x {b.value.shape}")
        return self._record(
            a.value @ b.value,
            parents=(a, b),
            vjps=(lambda g, bv=b.value: g @ bv.T, lambda g, av=a.value: av.T @ g),
        )

    def spmm(self, p, h: Node) -> Node:
        """Constant sparse operator times tracked dense matrix; backward applies P^T."""
        return self._record(
            p.apply(h.value), parents=(h,), vjps=(lambda g: p.transpose_apply(g),)
        )

    def add(self, a: Node, b: Node) -> Node:
        if a.value.shape != b.value.shape:
            raise AutodiffError(f"add shape mismatch {a.value.shape} vs {b.value.shape}")
        return self._record(a.value + b.value, parents=(a, b), vjps=(lambda g: g, lambda g: g))

    def add_row(self, h: Node, bias: Node) -> Node:
        """Add a 1 x d bias row to every row of h."""
        if bias.value.shape != (1, h.value.shape[1]):
            raise AutodiffError(f"bias shape {bias.value.shape} does not fit {h.value.shape}")
        return self._record(
            h.value + bias.value,
            parents=(h, bias),
            vjps=(lambda g: g, lambda g: g.sum(axis=0, keepdims=True)),
        )

    def scale_by_param(self, gate: Parameter, h: Node) -> Node:
        """Multiply by a 1x1 gate; d/dgate is the Frobenius inner product with h."""
        if gate.shape != (1, 1):
            raise AutodiffError("gate must be a 1x1 parameter")
        g_node = self.param(gate)
        scalar = gate.value[0, 0]
        return self._record(
            scalar * h.value,
            parents=(g_node, h),
            vjps=(
                lambda g, hv=h.value: np.array([[np.sum(g * hv)]]),
                lambda g, s=scalar: s * g,
            ),
        )

    def relu(self, h: Node) -> Node:
        mask = h.value > 0
        return self._record(h.value * mask, parents=(h,), vjps=(lambda g: g * mask,))

    def dropout(self, h: Node, rate: float, training: bool, rng: np.random.Generator | None = None) -> Node:
        if not 0.0 <= rate < 1.0:
            raise AutodiffError(f"dropout rate must be in [0, 1), got {rate}")
        if not training or rate == 0.0:
            return h  # exact identity, nothing recorded
        if rng is None:
            raise AutodiffError("training-mode dropout needs an rng")
        keep = (rng.random(h.value.shape) >= rate) / (1.0 - rate)
        return self._record(h.value * keep, parents=(h,), vjps=(lambda g: g * keep,))

    def concat_cols(self, parts: list[Node]) -> Node:
        if not parts:
            raise AutodiffError("concat_cols needs at least one input")
        widths = [p.value.shape[1] for p in parts]
        bounds = np.cumsum([0] + widths)
        vjps = tuple(
            (lambda g, lo=bounds[i], hi=bounds[i + 1]: g[:, lo:hi]) for i in range(len(parts))
        )
        return self._record(np.hstack([p.value for p in parts]), parents=tuple(parts), vjps=vjps)

    def softmax_cross_entropy(self, logits: Node, labels: np.ndarray, mask: np.ndarray) -> Node:
        """Mean over masked nodes of -log softmax(logits)[label], max-subtracted."""
        mask = np.asarray(mask, dtype=bool)
        idx = np.flatnonzero(mask)
        if len(idx) == 0:
            raise AutodiffError("loss mask selects no nodes")
        z = logits.value[idx]
        y = np.asarray(labels, dtype=np.int64)[idx]
        zmax = z.max(axis=1, keepdims=True)
        shifted = z - zmax
        logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        logp = shifted - logsumexp
        loss = -logp[np.arange(len(idx)), y].mean()
        if not np.isfinite(loss):
            raise AutodiffError("non-finite loss")
        probs = np.exp(logp)

        def vjp(g):
            d = probs.copy()
            d[np.arange(len(idx)), y] -= 1.0
            full = np.zeros_like(logits.value)
            full[idx] = d / len(idx)
            return g[0, 0] * full

        return self._record(np.array([[loss]]), parents=(logits,), vjps=(vjp,))

    def frobenius_inner(self, h: Node, const: np.ndarray) -> Node:
        """Scalar <h, const>; handy as a synthetic loss with known upstream gradient."""
        const = np.asarray(const, dtype=np.float64)
        if const.shape != h.value.shape:
            raise AutodiffError("frobenius_inner shape mismatch")
        return self._record(
            np.array([[np.sum(h.value * const)]]), parents=(h,), vjps=(lambda g: g[0, 0] * const,)
        )


def backward(tape: Tape, loss: Node) -> None:
    """Reverse-topological sweep; accumulates into Parameter.grad."""
    if tape.backward_done:
        raise AutodiffError("backward already ran on this tape")
    if loss.value.shape != (1, 1):
        raise AutodiffError("loss must be scalar (1x1)")
    tape.backward_done = True
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.param is not None:
            node.param.grad += g
        for parent, vjp in zip(node.parents, node.vjps):
            pg = vjp(g)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


def grad_check(loss_fn, parameters: list[Parameter], epsilon: float = 1e-6) -> float:
    """Max relative error between tape gradients and central finite differences.

    ``loss_fn(tape)`` must rebuild the forward pass and return the scalar loss
    node. Relative error uses a max(1, |analytic|) denominator per coordinate.
    """
    if not 1e-8 <= epsilon <= 1e-4:
        raise AutodiffError(f"epsilon must be in [1e-8, 1e-4], got {epsilon}")
    for p in parameters:
        p.zero_grad()
    tape = Tape()
    loss_node = loss_fn(tape)
    backward(tape, loss_node)
    analytic = [p.grad.copy() for p in parameters]

    def eval_loss() -> float:
        val = loss_fn(Tape()).value[0, 0]
        if not np.isfinite(val):
            raise AutodiffError("non-finite loss during finite-difference perturbation")
        return float(val)

    max_err = 0.0
    for p, an in zip(parameters, analytic):
        it = np.nditer(p.value, flags=["multi_index"])
        for _ in it:
            ij = it.multi_index
            orig = p.value[ij]
            p.value[ij] = orig + epsilon
            lp = eval_loss()
            p.value[ij] = orig - epsilon
            lm = eval_loss()
            p.value[ij] = orig
            fd = (lp - lm) / (2.0 * epsilon)
            err = abs(fd - an[ij]) / max(1.0, abs(an[ij]))
            max_err = max(max_err, err)
    return max_err
