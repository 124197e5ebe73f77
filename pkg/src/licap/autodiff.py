"""Minimal dense-tensor reverse-mode automatic differentiation engine.

Tensors wrap 64-bit numpy buffers. Every operation that sees a
gradient-requiring input records its parents and an adjoint closure; calling
:func:`backward` on a scalar result walks the graph in reverse topological
order and accumulates gradients into the participating leaves. Reductions run
in a fixed sequential order, so results are bitwise reproducible for a fixed
seed and thread count.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import TrainingDiverged

Array = np.ndarray
_BackwardFn = Callable[[Array], tuple[Array | None, ...]]


class Tensor:
    """A dense float64 array, optionally tracked for differentiation.

    Leaf tensors are created with ``requires_grad=True``; results of
    operations carry the graph structure internally and never store their own
    gradient. ``grad`` reads as zeros for a gradient-requiring leaf that no
    backward pass has touched yet.
    """

    __slots__ = ("values", "requires_grad", "_grad", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.array(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self._grad: Array | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: _BackwardFn | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    @property
    def grad(self) -> Array | None:
        if self._grad is None and self.requires_grad and self.is_leaf:
            return np.zeros_like(self.values)
        return self._grad

    def zero_grad(self) -> None:
        self._grad = None

    def item(self) -> float:
        return float(self.values)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)


def tensor(values, requires_grad: bool = False) -> Tensor:
    return Tensor(values, requires_grad=requires_grad)


def _result(values: Array, parents: tuple[Tensor, ...], backward: _BackwardFn) -> Tensor:
    """Build an op result, recording the graph only when a parent needs it."""
    out = Tensor(values)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.values.shape != b.values.shape:
        raise ValueError(f"{op}: shape mismatch {a.values.shape} vs {b.values.shape}")


# ---------------------------------------------------------------------------
# elementwise and linear algebra primitives
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    return _result(a.values + b.values, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")
    return _result(a.values - b.values, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")
    av, bv = a.values, b.values
    return _result(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Tensor, c: float) -> Tensor:
    return _result(a.values * c, (a,), lambda g: (g * c,))


def mul_const(a: Tensor, c) -> Tensor:
    """Elementwise product with a constant array (numpy broadcasting)."""
    cv = np.asarray(c, dtype=np.float64)
    out = a.values * cv
    if out.shape != a.values.shape:
        raise ValueError(
            f"mul_const: broadcast changed shape {a.values.shape} -> {out.shape}"
        )
    return _result(out, (a,), lambda g: (g * cv,))


def texp(a: Tensor) -> Tensor:
    out = np.exp(a.values)
    return _result(out, (a,), lambda g: (g * out,))


def tlog(a: Tensor) -> Tensor:
    av = a.values
    return _result(np.log(av), (a,), lambda g: (g / av,))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    """x for x > 0, slope*x otherwise; the subgradient at 0 is slope."""
    if not 0 < slope < 1:
        raise ValueError(f"slope must be in (0, 1), got {slope}")
    pos = a.values > 0
    factor = np.where(pos, 1.0, slope)
    return _result(a.values * factor, (a,), lambda g: (g * factor,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ValueError(
            f"matmul expects 2-D operands, got {a.values.shape} and {b.values.shape}"
        )
    if a.values.shape[1] != b.values.shape[0]:
        raise ValueError(
            f"matmul: inner dimensions disagree, {a.values.shape} x {b.values.shape}"
        )
    av, bv = a.values, b.values
    return _result(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def matvec(a: Tensor, x: Tensor) -> Tensor:
    """[m,k] @ [k] -> [m]."""
    if a.values.ndim != 2 or x.values.ndim != 1 or a.values.shape[1] != x.values.shape[0]:
        raise ValueError(
            f"matvec: incompatible shapes {a.values.shape} and {x.values.shape}"
        )
    av, xv = a.values, x.values
    return _result(av @ xv, (a, x), lambda g: (np.outer(g, xv), av.T @ g))


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 1 or b.values.ndim != 1:
        raise ValueError("dot expects 1-D operands")
    _check_same_shape(a, b, "dot")
    av, bv = a.values, b.values
    return _result(np.dot(av, bv), (a, b), lambda g: (g * bv, g * av))


def transpose(a: Tensor) -> Tensor:
    return _result(a.values.T.copy(), (a,), lambda g: (g.T,))


def tsum(a: Tensor) -> Tensor:
    av = a.values
    return _result(np.sum(av), (a,), lambda g: (np.broadcast_to(g, av.shape).copy(),))


def mean_rows(a: Tensor) -> Tensor:
    """Mean over axis 0; backward distributes 1/n to every row."""
    if a.values.ndim != 2:
        raise ValueError("mean_rows expects a 2-D tensor")
    n = a.values.shape[0]
    return _result(
        a.values.mean(axis=0),
        (a,),
        lambda g: (np.broadcast_to(g / n, a.values.shape).copy(),),
    )


def add_rowvec(a: Tensor, v: Tensor) -> Tensor:
    """Add a length-k vector to every row of an [n,k] tensor."""
    if a.values.ndim != 2 or v.values.ndim != 1 or a.values.shape[1] != v.values.shape[0]:
        raise ValueError(
            f"add_rowvec: incompatible shapes {a.values.shape} and {v.values.shape}"
        )
    return _result(a.values + v.values, (a, v), lambda g: (g, g.sum(axis=0)))


def add_scalar(a: Tensor, s: Tensor) -> Tensor:
    """Add a scalar tensor to every entry."""
    if s.values.ndim != 0:
        raise ValueError("add_scalar expects a scalar second operand")
    return _result(a.values + s.values, (a, s), lambda g: (g, np.sum(g)))


# ---------------------------------------------------------------------------
# structural primitives
# ---------------------------------------------------------------------------


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    """Horizontally stack [n, k_i] tensors; backward splits the gradient."""
    parts = list(parts)
    if not parts:
        raise ValueError("concat_cols needs at least one tensor")
    rows = parts[0].values.shape[0]
    for p in parts:
        if p.values.ndim != 2 or p.values.shape[0] != rows:
            raise ValueError("concat_cols: all parts must be 2-D with equal rows")
    widths = [p.values.shape[1] for p in parts]
    splits = np.cumsum(widths)[:-1]

    def backward(g: Array):
        return tuple(np.ascontiguousarray(piece) for piece in np.hsplit(g, splits))

    return _result(np.hstack([p.values for p in parts]), tuple(parts), backward)


def stack_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a matrix, one per row."""
    parts = list(parts)
    if not parts:
        raise ValueError("stack_rows needs at least one tensor")
    for p in parts:
        if p.values.ndim != 1 or p.values.shape != parts[0].values.shape:
            raise ValueError("stack_rows: all parts must be 1-D of equal length")

    def backward(g: Array):
        return tuple(g[i].copy() for i in range(len(parts)))

    return _result(np.stack([p.values for p in parts]), tuple(parts), backward)


def as_col(a: Tensor) -> Tensor:
    """View a length-n vector as an [n, 1] column."""
    if a.values.ndim != 1:
        raise ValueError("as_col expects a 1-D tensor")
    return _result(a.values[:, None].copy(), (a,), lambda g: (g[:, 0].copy(),))


def take_col(a: Tensor, j: int) -> Tensor:
    """Extract column j of an [n, k] tensor as a length-n vector."""
    if a.values.ndim != 2:
        raise ValueError("take_col expects a 2-D tensor")

    def backward(g: Array):
        out = np.zeros_like(a.values)
        out[:, j] = g
        return (out,)

    return _result(a.values[:, j].copy(), (a,), backward)


def gather_rows(a: Tensor, indices) -> Tensor:
    """Select rows (2-D) or entries (1-D) by index; backward scatter-adds."""
    idx = np.asarray(indices, dtype=np.int64)

    def backward(g: Array):
        out = np.zeros_like(a.values)
        np.add.at(out, idx, g)
        return (out,)

    return _result(a.values[idx].copy(), (a,), backward)


def scale_rows(a: Tensor, v: Tensor) -> Tensor:
    """Scale row i of an [n,k] tensor by v[i]."""
    if a.values.ndim != 2 or v.values.ndim != 1 or a.values.shape[0] != v.values.shape[0]:
        raise ValueError(
            f"scale_rows: incompatible shapes {a.values.shape} and {v.values.shape}"
        )
    av, vv = a.values, v.values
    return _result(
        av * vv[:, None],
        (a, v),
        lambda g: (g * vv[:, None], np.sum(g * av, axis=1)),
    )


def segment_sum(a: Tensor, segments, num_segments: int) -> Tensor:
    """Sum entries/rows sharing a segment id into per-segment slots."""
    seg = np.asarray(segments, dtype=np.int64)
    if seg.shape[0] != a.values.shape[0]:
        raise ValueError("segment_sum: one segment id per leading entry required")
    out_shape = (num_segments,) + a.values.shape[1:]

    def forward() -> Array:
        out = np.zeros(out_shape, dtype=np.float64)
        np.add.at(out, seg, a.values)
        return out

    return _result(forward(), (a,), lambda g: (g[seg].copy(),))


def segment_softmax(logits: Tensor, segments) -> Tensor:
    """Softmax normalized independently within each segment.

    Logits are max-shifted per segment before exponentiation, so uniformly
    shifting a segment's logits leaves its output unchanged.
    """
    if logits.values.ndim != 1:
        raise ValueError("segment_softmax expects 1-D logits")
    seg = np.asarray(segments, dtype=np.int64)
    if seg.shape != logits.values.shape:
        raise ValueError("segment_softmax: one segment id per logit required")
    if not np.all(np.isfinite(logits.values)):
        raise ValueError("segment_softmax: logits must be finite")
    nseg = int(seg.max()) + 1 if seg.size else 0
    seg_max = np.full(nseg, -np.inf)
    np.maximum.at(seg_max, seg, logits.values)
    e = np.exp(logits.values - seg_max[seg])
    denom = np.zeros(nseg, dtype=np.float64)
    np.add.at(denom, seg, e)
    y = e / denom[seg]

    def backward(g: Array):
        weighted = np.zeros(nseg, dtype=np.float64)
        np.add.at(weighted, seg, g * y)
        return (y * (g - weighted[seg]),)

    return _result(y, (logits,), backward)


def row_logsumexp(a: Tensor) -> Tensor:
    """Per-row log(sum(exp(.))) of an [n,k] tensor, max-shifted for stability."""
    if a.values.ndim != 2:
        raise ValueError("row_logsumexp expects a 2-D tensor")
    m = a.values.max(axis=1)
    e = np.exp(a.values - m[:, None])
    s = e.sum(axis=1)
    softmax = e / s[:, None]
    return _result(m + np.log(s), (a,), lambda g: (softmax * g[:, None],))


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate dloss/dleaf into every gradient-requiring leaf.

    Repeated calls without :meth:`Tensor.zero_grad` add up, matching the
    usual accumulate-then-step training pattern.
    """
    if loss.values.ndim != 0:
        raise ValueError(f"backward needs a scalar root, got shape {loss.values.shape}")
    if not loss.requires_grad:
        return
    order = _topological_order(loss)
    adjoint: dict[int, Array] = {id(loss): np.ones((), dtype=np.float64)}
    for node in reversed(order):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node._grad = g if node._grad is None else node._grad + g
            continue
        for parent, contribution in zip(node._parents, node._backward(g)):
            if contribution is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in adjoint:
                adjoint[key] = adjoint[key] + contribution
            else:
                adjoint[key] = contribution


def zero_grads(params: Sequence[Tensor]) -> None:
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------------------
# verification and optimization
# ---------------------------------------------------------------------------


def grad_check(f, xs, eps: float = 1e-6) -> float:
    """Max relative error of backward gradients vs central finite differences.

    ``f`` must be a deterministic function of the given leaf tensors that
    returns a scalar tensor. The leaves' buffers are perturbed in place
    during the sweep and restored afterwards. Relative error uses the
    denominator max(|a|, |b|, 1e-8).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if isinstance(xs, Tensor):
        xs = [xs]
    xs = list(xs)

    zero_grads(xs)
    backward(f(*xs))
    analytic = [x.grad.copy() for x in xs]

    worst = 0.0
    for x, ana in zip(xs, analytic):
        flat = x.values.reshape(-1)
        ana_flat = ana.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(f(*xs).values)
            flat[i] = orig - eps
            f_minus = float(f(*xs).values)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * eps)
            denom = max(abs(numeric), abs(ana_flat[i]), 1e-8)
            worst = max(worst, abs(numeric - ana_flat[i]) / denom)
    return worst


class Adam:
    """Bias-corrected Adam over a fixed list of leaf tensors."""

    def __init__(
        self,
        params: Sequence[Tensor],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def zero_grad(self) -> None:
        zero_grads(self.params)

    def step(self) -> None:
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.values)
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(
                    f"non-finite gradient in parameter {i} at step {self.t}"
                )
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1**self.t)
            v_hat = self.v[i] / (1 - self.beta2**self.t)
            p.values -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
