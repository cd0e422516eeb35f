"""Dense float64 matrices with a reverse-mode differentiation tape.

Every operation takes and returns `Node` objects. A node holds the forward
value and, when its tape records, a closure mapping the output gradient to
the gradients of its inputs. `Tape.backward` walks the recorded nodes in
reverse creation order, which is a reverse topological order.

Examples:
    >>> import numpy as np
    >>> from spanparse.tensor import Tape, matmul, total
    >>> tape = Tape()
    >>> a = tape.param("a", np.ones((2, 3)))
    >>> b = tape.constant(np.arange(6.0).reshape(3, 2))
    >>> grads = tape.backward(total(matmul(a, b)))
    >>> grads["a"].tolist()
    [[1.0, 5.0, 9.0], [1.0, 5.0, 9.0]]

"""

import logging
import struct
from collections.abc import Callable, Iterable, Iterator, MutableMapping, Sequence
from typing import Optional

import numpy as np

from .const import FD_STEP, LAYER_NORM_EPS, PARAMS_MAGIC
from .errors import IndexOutOfRange, NonScalarLoss, ShapeMismatch, VersionError

logger = logging.getLogger(__name__)

Backward = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def as_matrix(value) -> np.ndarray:
    """Copy *value* into a finite 2-D float64 array (scalars become 1x1)."""
    array = np.array(value, dtype=np.float64)
    if array.ndim == 0:
        array = array.reshape(1, 1)
    if array.ndim != 2 or 0 in array.shape:
        raise ShapeMismatch(f"expected a non-empty matrix, got shape {array.shape}")
    if not np.isfinite(array).all():
        raise ValueError("matrix entries must be finite")
    return array


class Node:
    """One value on a tape."""

    __slots__ = ("_backward", "id", "inputs", "name", "op", "tape", "value")

    def __init__(
        self,
        tape: "Tape",
        op: str,
        value: np.ndarray,
        inputs: tuple["Node", ...] = (),
        backward: Optional[Backward] = None,
        name: Optional[str] = None,
    ) -> None:
        self.tape = tape
        self.op = op
        self.value = value
        self.inputs = inputs
        self._backward = backward
        self.name = name
        self.id = -1

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise NonScalarLoss(f"node of shape {self.value.shape} is not a scalar")
        return float(self.value[0, 0])

    def __add__(self, other: "Node") -> "Node":
        return add(self, other)

    def __sub__(self, other: "Node") -> "Node":
        return sub(self, other)

    def __matmul__(self, other: "Node") -> "Node":
        return matmul(self, other)

    def __repr__(self) -> str:
        label = self.name or self.op
        return f"<Node {self.id} {label} {self.value.shape}>"


class Tape:
    """Records operations for one backward pass.

    Args:
        record: keep backward closures; inference tapes pass False.
    """

    def __init__(self, record: bool = True) -> None:
        self.record = record
        self.nodes: list[Node] = []
        self._params: dict[str, Node] = {}

    def constant(self, value) -> Node:
        return self._push("constant", as_matrix(value), (), None)

    def param(self, name: str, value: np.ndarray) -> Node:
        """Leaf for a named parameter, one node per name and tape.

        The array is used without copying, so in-place edits between tapes
        are seen by the next forward pass.
        """
        node = self._params.get(name)
        if node is None:
            node = self._push("param", value, (), None)
            node.name = name
            self._params[name] = node
        return node

    def _push(
        self,
        op: str,
        value: np.ndarray,
        inputs: tuple[Node, ...],
        backward: Optional[Backward],
    ) -> Node:
        if not self.record:
            return Node(self, op, value)
        node = Node(self, op, value, inputs, backward)
        node.id = len(self.nodes)
        self.nodes.append(node)
        return node

    def backward(self, loss: Node) -> dict[str, np.ndarray]:
        """Gradients of the scalar *loss* for every parameter it depends on."""
        if loss.value.shape != (1, 1):
            raise NonScalarLoss(f"loss has shape {loss.value.shape}")
        if not self.record or loss.tape is not self:
            raise ValueError("loss was not recorded on this tape")
        pending: dict[int, np.ndarray] = {loss.id: np.ones((1, 1))}
        result: dict[str, np.ndarray] = {}
        for node in reversed(self.nodes[: loss.id + 1]):
            grad = pending.pop(node.id, None)
            if grad is None:
                continue
            if node.name is not None:
                result[node.name] = grad
            if node._backward is None:
                continue
            for source, source_grad in zip(node.inputs, node._backward(grad)):
                if source_grad is None:
                    continue
                if source.id in pending:
                    pending[source.id] = pending[source.id] + source_grad
                else:
                    pending[source.id] = source_grad
        return result


def _tape(*nodes: Node) -> Tape:
    tape = nodes[0].tape
    for node in nodes[1:]:
        if node.tape is not tape:
            raise ValueError("nodes belong to different tapes")
    return tape


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def matmul(a: Node, b: Node) -> Node:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} x {b.shape}")
    av, bv = a.value, b.value
    return _tape(a, b)._push(
        "matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g)
    )


def add(a: Node, b: Node) -> Node:
    """Elementwise sum; *b* may be a 1 x cols row added to every row of *a*."""
    if a.shape == b.shape:
        backward = lambda g: (g, g)  # noqa: E731
    elif b.shape == (1, a.shape[1]):
        backward = lambda g: (g, g.sum(axis=0, keepdims=True))  # noqa: E731
    else:
        raise ShapeMismatch(f"add {a.shape} + {b.shape}")
    return _tape(a, b)._push("add", a.value + b.value, (a, b), backward)


def sub(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise ShapeMismatch(f"sub {a.shape} - {b.shape}")
    return _tape(a, b)._push("sub", a.value - b.value, (a, b), lambda g: (g, -g))


def scale(a: Node, factor: float) -> Node:
    factor = float(factor)
    return a.tape._push("scale", a.value * factor, (a,), lambda g: (g * factor,))


def transpose(a: Node) -> Node:
    return a.tape._push("transpose", a.value.T.copy(), (a,), lambda g: (g.T,))


def concat_cols(*nodes: Node) -> Node:
    rows = {node.shape[0] for node in nodes}
    if len(rows) != 1:
        raise ShapeMismatch(f"concat_cols over rows {sorted(rows)}")
    bounds = np.cumsum([node.shape[1] for node in nodes])[:-1]
    return _tape(*nodes)._push(
        "concat_cols",
        np.concatenate([node.value for node in nodes], axis=1),
        tuple(nodes),
        lambda g: np.split(g, bounds, axis=1),
    )


def concat_rows(*nodes: Node) -> Node:
    cols = {node.shape[1] for node in nodes}
    if len(cols) != 1:
        raise ShapeMismatch(f"concat_rows over cols {sorted(cols)}")
    bounds = np.cumsum([node.shape[0] for node in nodes])[:-1]
    return _tape(*nodes)._push(
        "concat_rows",
        np.concatenate([node.value for node in nodes], axis=0),
        tuple(nodes),
        lambda g: np.split(g, bounds, axis=0),
    )


def take_rows(a: Node, indices: Iterable[int]) -> Node:
    """Gather rows by index; repeated indices accumulate their gradients."""
    idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices)
    idx = idx.astype(np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ShapeMismatch("take_rows needs a non-empty index vector")
    if idx.min() < 0 or idx.max() >= a.shape[0]:
        raise IndexOutOfRange(f"row index outside 0..{a.shape[0] - 1}")
    rows = a.shape[0]

    def backward(g):
        grad = np.zeros((rows, g.shape[1]))
        np.add.at(grad, idx, g)
        return (grad,)

    return a.tape._push("take_rows", a.value[idx], (a,), backward)


def slice_cols(a: Node, start: int, stop: int) -> Node:
    if not 0 <= start < stop <= a.shape[1]:
        raise ShapeMismatch(f"column slice {start}:{stop} of {a.shape}")
    shape = a.shape

    def backward(g):
        grad = np.zeros(shape)
        grad[:, start:stop] = g
        return (grad,)

    return a.tape._push("slice_cols", a.value[:, start:stop].copy(), (a,), backward)


def softmax_rows(a: Node) -> Node:
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=1, keepdims=True)
    return a.tape._push(
        "softmax_rows",
        out,
        (a,),
        lambda g: (out * (g - (g * out).sum(axis=1, keepdims=True)),),
    )


def layer_norm(x: Node, gain: Node, bias: Node, eps: float = LAYER_NORM_EPS) -> Node:
    """Normalize every row over its features, then apply gain and bias rows."""
    cols = x.shape[1]
    if gain.shape != (1, cols) or bias.shape != (1, cols):
        raise ShapeMismatch(f"layer_norm gain/bias must be 1 x {cols}")
    mean = x.value.mean(axis=1, keepdims=True)
    centered = x.value - mean
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=1, keepdims=True) + eps)
    xhat = centered * inv_std
    gv = gain.value

    def backward(g):
        dxhat = g * gv
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
        )
        return (
            dx,
            (g * xhat).sum(axis=0, keepdims=True),
            g.sum(axis=0, keepdims=True),
        )

    return _tape(x, gain, bias)._push(
        "layer_norm", xhat * gv + bias.value, (x, gain, bias), backward
    )


def relu(a: Node) -> Node:
    mask = a.value > 0
    return a.tape._push("relu", a.value * mask, (a,), lambda g: (g * mask,))


def total(a: Node) -> Node:
    """Sum of all entries as a 1x1 node."""
    shape = a.shape
    return a.tape._push(
        "total",
        np.array([[a.value.sum()]]),
        (a,),
        lambda g: (np.full(shape, g[0, 0]),),
    )


def weighted_sum(a: Node, weights: np.ndarray) -> Node:
    """sum(a * weights) for a constant weight matrix, as a 1x1 node."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != a.shape:
        raise ShapeMismatch(f"weights {weights.shape} for node {a.shape}")
    return a.tape._push(
        "weighted_sum",
        np.array([[float((a.value * weights).sum())]]),
        (a,),
        lambda g: (weights * g[0, 0],),
    )


def cross_entropy(logits: Node, targets: Sequence[int]) -> Node:
    """Mean negative log-likelihood of *targets* (one class index per row)."""
    target = np.asarray(targets, dtype=np.intp)
    rows = logits.shape[0]
    if target.shape != (rows,):
        raise ShapeMismatch(f"{target.shape[0]} targets for {rows} rows")
    shifted = logits.value - logits.value.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -log_probs[np.arange(rows), target].mean()

    def backward(g):
        grad = np.exp(log_probs)
        grad[np.arange(rows), target] -= 1.0
        return (grad * (g[0, 0] / rows),)

    return logits.tape._push("cross_entropy", np.array([[loss]]), (logits,), backward)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


class Parameters(MutableMapping):
    """Ordered name -> matrix mapping holding every trainable weight."""

    def __init__(self, items: Optional[Iterable[tuple[str, np.ndarray]]] = None):
        self._data: dict[str, np.ndarray] = {}
        if items is not None:
            for name, value in items:
                self[name] = value

    def __getitem__(self, name: str) -> np.ndarray:
        return self._data[name]

    def __setitem__(self, name: str, value) -> None:
        self._data[name] = as_matrix(value)

    def __delitem__(self, name: str) -> None:
        del self._data[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def copy(self) -> "Parameters":
        return Parameters(self._data.items())

    def size(self) -> int:
        return sum(value.size for value in self._data.values())

    def __repr__(self) -> str:
        return f"Parameters({len(self)} matrices, {self.size()} values)"


def dump_params(params: Parameters) -> bytes:
    """Serialize into the flat CSPN1 container.

    Layout: magic, then per parameter: name length (uint32), UTF-8 name,
    rows and cols (uint32), row-major little-endian float64 values.
    """
    chunks = [PARAMS_MAGIC]
    for name, value in params.items():
        encoded = name.encode("utf-8")
        rows, cols = value.shape
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<II", rows, cols))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(chunks)


def load_params(data: bytes) -> Parameters:
    """Inverse of `dump_params`.

    Raises:
        VersionError: wrong magic bytes or a truncated container.
    """
    magic_len = len(PARAMS_MAGIC)
    if data[:magic_len] != PARAMS_MAGIC:
        raise VersionError(f"not a {PARAMS_MAGIC.decode()} parameter container")
    params = Parameters()
    view = memoryview(data)
    offset = magic_len
    try:
        while offset < len(data):
            (name_len,) = struct.unpack_from("<I", view, offset)
            offset += 4
            name = bytes(view[offset : offset + name_len]).decode("utf-8")
            offset += name_len
            rows, cols = struct.unpack_from("<II", view, offset)
            offset += 8
            count = rows * cols
            if offset + 8 * count > len(data):
                raise VersionError(f"truncated parameter {name!r}")
            values = np.frombuffer(view, dtype="<f8", count=count, offset=offset)
            offset += 8 * count
            params[name] = values.reshape(rows, cols)
    except (struct.error, UnicodeDecodeError) as exc:
        raise VersionError("corrupted parameter container") from exc
    return params


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


LossFn = Callable[[Tape, Parameters], Node]


def check_gradients(
    loss_fn: LossFn,
    params: Parameters,
    names: Optional[Iterable[str]] = None,
    step: float = FD_STEP,
    floor: float = 1e-4,
) -> dict[str, float]:
    """Compare tape gradients with central finite differences.

    Args:
        loss_fn: builds the scalar loss on the given tape from *params*.
        params: parameters, perturbed in place and restored.
        names: parameters to check, all by default.
        step: finite difference step.
        floor: lower bound of the relative error denominator, so entries
            with vanishing gradient are compared absolutely.

    Returns:
        worst relative error per parameter name.
    """
    tape = Tape()
    analytic = tape.backward(loss_fn(tape, params))
    errors: dict[str, float] = {}
    for name in params if names is None else names:
        value = params[name]
        numeric = np.zeros_like(value)
        for index in np.ndindex(value.shape):
            original = value[index]
            value[index] = original + step
            plus = loss_fn(Tape(record=False), params).item()
            value[index] = original - step
            minus = loss_fn(Tape(record=False), params).item()
            value[index] = original
            numeric[index] = (plus - minus) / (2.0 * step)
        grad = analytic.get(name, np.zeros_like(value))
        scale_ = np.maximum(np.maximum(np.abs(grad), np.abs(numeric)), floor)
        errors[name] = float((np.abs(grad - numeric) / scale_).max())
    logger.debug("gradient check: %s", errors)
    return errors
