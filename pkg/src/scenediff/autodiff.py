"""Reverse-mode automatic differentiation over dense float64 arrays.

A computation is a static graph with named input leaves and named parameter
leaves.  The graph is built once (shapes are inferred and checked at build
time) and can then be evaluated repeatedly against different input/parameter
bindings; gradients are accumulated by a reverse topological sweep.

The primitive op set is deliberately small: add, sub, mul, matmul, concat,
slice, transpose, broadcast, repeat, sum, mean, softmax, gelu, layernorm.
Everything the model needs compiles to these.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf

__all__ = [
    "GraphError",
    "NonFiniteError",
    "Node",
    "Graph",
    "ParamStore",
    "evaluate",
    "gradients",
    "gradcheck",
    "save_checkpoint",
    "load_checkpoint",
]

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class GraphError(ValueError):
    """Graph construction or binding error (shape mismatch, bad leaf, ...)."""


class NonFiniteError(FloatingPointError):
    """A node produced a NaN or infinity during evaluation."""


@dataclass
class Node:
    """One operation in a :class:`Graph`.  Created via the Graph methods."""

    graph: "Graph"
    idx: int
    op: str
    args: tuple[int, ...]
    shape: tuple[int, ...]
    meta: dict = field(default_factory=dict)
    name: str | None = None

    def __repr__(self):
        label = f" '{self.name}'" if self.name else ""
        return f"<node {self.idx}:{self.op}{label} {self.shape}>"

    # Operator sugar so graph-building code reads like array math.
    def __add__(self, other):
        return self.graph.add(self, self.graph.as_node(other))

    def __sub__(self, other):
        return self.graph.sub(self, self.graph.as_node(other))

    def __mul__(self, other):
        return self.graph.mul(self, self.graph.as_node(other))

    def __matmul__(self, other):
        return self.graph.matmul(self, other)

    def __getitem__(self, key):
        return self.graph.slice(self, key)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Graph:
    """A static computation graph over named input and parameter leaves."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.inputs: dict[str, int] = {}
        self.params: dict[str, int] = {}
        self.param_init: dict[str, object] = {}
        self.outputs: dict[str, int] = {}

    # ------------------------------------------------------------------ leaves

    def _new(self, op, args, shape, meta=None, name=None) -> Node:
        node = Node(self, len(self.nodes), op, tuple(a.idx for a in args),
                    tuple(int(s) for s in shape), meta or {}, name)
        self.nodes.append(node)
        return node

    def input(self, name: str, shape) -> Node:
        if name in self.inputs or name in self.params:
            raise GraphError(f"duplicate leaf name {name!r}")
        node = self._new("input", (), shape, name=name)
        self.inputs[name] = node.idx
        return node

    def param(self, name: str, shape, init="auto") -> Node:
        """Declare a learnable leaf.  `init` is 'auto' (uniform +-1/sqrt(fan_in)
        for matrices, zeros for vectors), 'zeros', 'ones', or an explicit array.
        Re-declaring the same name with the same shape returns the existing
        node, so layers can be shared by name."""
        if name in self.inputs:
            raise GraphError(f"duplicate leaf name {name!r}")
        if name in self.params:
            node = self.nodes[self.params[name]]
            if node.shape != tuple(int(s) for s in shape):
                raise GraphError(f"parameter {name!r} redeclared with shape "
                                 f"{tuple(shape)} != {node.shape}")
            return node
        node = self._new("param", (), shape, name=name)
        self.params[name] = node.idx
        self.param_init[name] = init
        return node

    def const(self, value, name=None) -> Node:
        value = np.asarray(value, dtype=np.float64)
        return self._new("const", (), value.shape, {"value": value}, name)

    def as_node(self, value) -> Node:
        return value if isinstance(value, Node) else self.const(value)

    def output(self, name: str, node: Node) -> Node:
        self.outputs[name] = node.idx
        return node

    # ----------------------------------------------------------------- op set

    def _broadcast_shape(self, op, a, b):
        try:
            return np.broadcast_shapes(a.shape, b.shape)
        except ValueError:
            raise GraphError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")

    def add(self, a: Node, b: Node) -> Node:
        return self._new("add", (a, b), self._broadcast_shape("add", a, b))

    def sub(self, a: Node, b: Node) -> Node:
        return self._new("sub", (a, b), self._broadcast_shape("sub", a, b))

    def mul(self, a: Node, b: Node) -> Node:
        return self._new("mul", (a, b), self._broadcast_shape("mul", a, b))

    def scale(self, a: Node, c: float) -> Node:
        return self.mul(a, self.const(float(c)))

    def matmul(self, a: Node, b: Node) -> Node:
        if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[0]:
            raise GraphError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
        return self._new("matmul", (a, b), (a.shape[0], b.shape[1]))

    def concat(self, parts: list[Node], axis: int = 0) -> Node:
        shapes = [p.shape for p in parts]
        base = list(shapes[0])
        for s in shapes[1:]:
            if len(s) != len(base) or any(s[i] != base[i] for i in range(len(base)) if i != axis % len(base)):
                raise GraphError(f"concat: incompatible shapes {shapes}")
        ax = axis % len(base)
        base[ax] = sum(s[ax] for s in shapes)
        return self._new("concat", tuple(parts), base, {"axis": ax})

    def slice(self, a: Node, key) -> Node:
        if not isinstance(key, tuple):
            key = (key,)
        shape = np.empty(a.shape, dtype=np.int8)[key].shape
        return self._new("slice", (a,), shape, {"key": key})

    def transpose(self, a: Node, axes=None) -> Node:
        if axes is None:
            axes = tuple(reversed(range(len(a.shape))))
        shape = tuple(a.shape[i] for i in axes)
        return self._new("transpose", (a,), shape, {"axes": tuple(axes)})

    def broadcast(self, a: Node, shape) -> Node:
        try:
            np.broadcast_to(np.empty(a.shape, dtype=np.int8), shape)
        except ValueError:
            raise GraphError(f"broadcast: cannot broadcast {a.shape} to {tuple(shape)}")
        return self._new("broadcast", (a,), shape)

    def repeat(self, a: Node, reps: int, axis: int) -> Node:
        shape = list(a.shape)
        shape[axis] = shape[axis] * reps
        return self._new("repeat", (a,), shape, {"reps": int(reps), "axis": int(axis)})

    def sum(self, a: Node, axis=None, keepdims: bool = False) -> Node:
        shape = np.empty(a.shape, dtype=np.int8).sum(axis=axis, keepdims=keepdims).shape
        return self._new("sum", (a,), shape, {"axis": axis, "keepdims": keepdims})

    def mean(self, a: Node, axis=None, keepdims: bool = False) -> Node:
        shape = np.empty(a.shape, dtype=np.int8).sum(axis=axis, keepdims=keepdims).shape
        return self._new("mean", (a,), shape, {"axis": axis, "keepdims": keepdims})

    def softmax(self, a: Node, axis: int = -1) -> Node:
        return self._new("softmax", (a,), a.shape, {"axis": axis})

    def gelu(self, a: Node) -> Node:
        return self._new("gelu", (a,), a.shape)

    def layernorm(self, x: Node, gain: Node, bias: Node, eps: float = 1e-5) -> Node:
        d = x.shape[-1]
        if gain.shape != (d,) or bias.shape != (d,):
            raise GraphError(f"layernorm: gain/bias must have shape ({d},)")
        return self._new("layernorm", (x, gain, bias), x.shape, {"eps": eps})

    # ------------------------------------------------------------- conveniences

    def linear(self, x: Node, w: Node, b: Node | None = None) -> Node:
        y = self.matmul(x, w)
        return y if b is None else self.add(y, b)


# --------------------------------------------------------------------- forward

def _softmax(x, axis):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _layernorm_fwd(x, gain, bias, eps):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv)


def _forward_node(node: Node, vals: list, caches: dict | None = None) -> np.ndarray:
    op, m = node.op, node.meta
    a = vals[node.args[0]] if node.args else None
    if op == "add":
        return a + vals[node.args[1]]
    if op == "sub":
        return a - vals[node.args[1]]
    if op == "mul":
        return a * vals[node.args[1]]
    if op == "matmul":
        return a @ vals[node.args[1]]
    if op == "concat":
        return np.concatenate([vals[i] for i in node.args], axis=m["axis"])
    if op == "slice":
        return a[m["key"]]
    if op == "transpose":
        return np.transpose(a, m["axes"])
    if op == "broadcast":
        return np.broadcast_to(a, node.shape)
    if op == "repeat":
        return np.repeat(a, m["reps"], axis=m["axis"])
    if op == "sum":
        return a.sum(axis=m["axis"], keepdims=m["keepdims"])
    if op == "mean":
        return a.mean(axis=m["axis"], keepdims=m["keepdims"])
    if op == "softmax":
        return _softmax(a, m["axis"])
    if op == "gelu":
        e = erf(a / _SQRT2)
        if caches is not None:
            caches[node.idx] = e
        return 0.5 * a * (1.0 + e)
    if op == "layernorm":
        y, cache = _layernorm_fwd(a, vals[node.args[1]], vals[node.args[2]], m["eps"])
        if caches is not None:
            caches[node.idx] = cache
        return y
    if op == "const":
        return m["value"]
    raise GraphError(f"unknown op {op!r}")


def _backward_node(node: Node, vals: list, g: np.ndarray,
                   caches: dict) -> list[np.ndarray]:
    """Vector-Jacobian product: gradient contribution for each input of `node`.
    Reuses the node's forward output (softmax) and side caches (gelu erf,
    layernorm stats) recorded during the forward pass."""
    op, m = node.op, node.meta
    ins = [vals[i] for i in node.args]
    shapes = [x.shape for x in ins]
    if op == "add":
        return [_unbroadcast(g, shapes[0]), _unbroadcast(g, shapes[1])]
    if op == "sub":
        return [_unbroadcast(g, shapes[0]), _unbroadcast(-g, shapes[1])]
    if op == "mul":
        return [_unbroadcast(g * ins[1], shapes[0]), _unbroadcast(g * ins[0], shapes[1])]
    if op == "matmul":
        return [g @ ins[1].T, ins[0].T @ g]
    if op == "concat":
        out, off, ax = [], 0, m["axis"]
        for s in shapes:
            sl = [slice(None)] * len(s)
            sl[ax] = slice(off, off + s[ax])
            out.append(g[tuple(sl)])
            off += s[ax]
        return out
    if op == "slice":
        full = np.zeros(shapes[0])
        full[m["key"]] = g
        return [full]
    if op == "transpose":
        inv = np.argsort(m["axes"])
        return [np.transpose(g, inv)]
    if op == "broadcast":
        return [_unbroadcast(g, shapes[0])]
    if op == "repeat":
        ax, reps = m["axis"], m["reps"]
        s = shapes[0]
        split = g.reshape(s[:ax] + (s[ax], reps) + s[ax + 1:])
        return [split.sum(axis=ax + 1)]
    if op == "sum":
        axis, keep = m["axis"], m["keepdims"]
        if axis is not None and not keep:
            g = np.expand_dims(g, axis)
        return [np.broadcast_to(g, shapes[0]).copy()]
    if op == "mean":
        axis, keep = m["axis"], m["keepdims"]
        n = np.prod(shapes[0]) if axis is None else shapes[0][axis]
        if axis is not None and not keep:
            g = np.expand_dims(g, axis)
        return [np.broadcast_to(g / n, shapes[0]).copy()]
    if op == "softmax":
        y = vals[node.idx]
        return [(g - (g * y).sum(axis=m["axis"], keepdims=True)) * y]
    if op == "gelu":
        x = ins[0]
        e = caches.get(node.idx)
        if e is None:
            e = erf(x / _SQRT2)
        phi = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return [g * (0.5 * (1.0 + e) + x * phi)]
    if op == "layernorm":
        cached = caches.get(node.idx)
        if cached is None:
            _, cached = _layernorm_fwd(ins[0], ins[1], ins[2], m["eps"])
        xhat, inv = cached
        gain = ins[1]
        gy = g * gain
        d = ins[0].shape[-1]
        dx = inv * (gy - gy.mean(axis=-1, keepdims=True)
                    - xhat * (gy * xhat).mean(axis=-1, keepdims=True))
        dgain = _unbroadcast(g * xhat, (1,) * (g.ndim - 1) + (d,)).reshape(d)
        dbias = _unbroadcast(g, (1,) * (g.ndim - 1) + (d,)).reshape(d)
        return [dx, dgain, dbias]
    raise GraphError(f"no gradient for op {op!r}")


# ----------------------------------------------------------------- param store

class ParamStore:
    """Named dense float64 arrays holding all learnable parameters.

    Shapes are fixed at construction; training mutates values in place under
    single-writer discipline.
    """

    def __init__(self, arrays: dict[str, np.ndarray], seed: int | None = None):
        self.arrays = {k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()}
        self.seed = seed

    @classmethod
    def initialize(cls, graph: Graph, seed: int = 0) -> "ParamStore":
        """Seeded init: uniform +-1/sqrt(fan_in) for matrices, zeros for vectors.

        Each parameter draws from its own (seed, name)-keyed stream so the
        values do not depend on declaration order.
        """
        arrays = {}
        for name, idx in graph.params.items():
            shape = graph.nodes[idx].shape
            init = graph.param_init[name]
            if isinstance(init, np.ndarray):
                if init.shape != shape:
                    raise GraphError(f"init for {name!r} has shape {init.shape}, expected {shape}")
                arrays[name] = init.astype(np.float64)
                continue
            if init == "zeros":
                arrays[name] = np.zeros(shape)
            elif init == "ones":
                arrays[name] = np.ones(shape)
            else:  # "auto" or ("auto", scale)
                scale = init[1] if isinstance(init, tuple) else 1.0
                if len(shape) >= 2:
                    rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
                    bound = scale / np.sqrt(shape[-2])
                    arrays[name] = rng.uniform(-bound, bound, size=shape)
                else:
                    arrays[name] = np.zeros(shape)
        return cls(arrays, seed=seed)

    def __getitem__(self, name):
        return self.arrays[name]

    def __setitem__(self, name, value):
        value = np.asarray(value, dtype=np.float64)
        if name in self.arrays and self.arrays[name].shape != value.shape:
            raise GraphError(f"parameter {name!r} shape is fixed at {self.arrays[name].shape}")
        self.arrays[name] = value

    def __contains__(self, name):
        return name in self.arrays

    def __iter__(self):
        return iter(self.arrays)

    def items(self):
        return self.arrays.items()

    def copy(self) -> "ParamStore":
        return ParamStore({k: v.copy() for k, v in self.arrays.items()}, seed=self.seed)

    def ensure(self, graph: Graph, seed: int = 0) -> "ParamStore":
        """Add (seeded) entries for any graph parameters missing from this store."""
        fresh = ParamStore.initialize(graph, seed=seed)
        for name, arr in fresh.items():
            if name not in self.arrays:
                self.arrays[name] = arr
        return self


# ------------------------------------------------------------------- execution

def _run_forward(graph: Graph, inputs: dict, params, check_finite=True,
                 caches: dict | None = None) -> list:
    vals: list = [None] * len(graph.nodes)
    for name, idx in graph.inputs.items():
        if name not in inputs:
            raise GraphError(f"unbound input leaf {name!r}")
        arr = np.asarray(inputs[name], dtype=np.float64)
        want = graph.nodes[idx].shape
        if arr.shape != want:
            raise GraphError(f"input {name!r}: expected shape {want}, got {arr.shape}")
        vals[idx] = arr
    for name, idx in graph.params.items():
        if name not in params:
            raise GraphError(f"unbound parameter leaf {name!r}")
        arr = np.asarray(params[name], dtype=np.float64)
        want = graph.nodes[idx].shape
        if arr.shape != want:
            raise GraphError(f"parameter {name!r}: expected shape {want}, got {arr.shape}")
        vals[idx] = arr
    for node in graph.nodes:
        if node.op in ("input", "param"):
            continue
        out = _forward_node(node, vals, caches)
        if out.shape != node.shape:
            raise GraphError(f"{node!r}: computed shape {out.shape} != declared {node.shape}")
        if check_finite:
            with np.errstate(over="ignore", invalid="ignore"):
                total = np.sum(out)
            if not np.isfinite(total):
                raise NonFiniteError(f"non-finite value at {node!r}")
        vals[node.idx] = out
    return vals


def evaluate(graph: Graph, inputs: dict, params, check_finite: bool = True) -> dict[str, np.ndarray]:
    """Run the graph forward; returns the named outputs."""
    vals = _run_forward(graph, inputs, params, check_finite)
    return {name: vals[idx] for name, idx in graph.outputs.items()}


def value_and_gradients(graph: Graph, loss: str, inputs: dict, params,
                        wrt_inputs: bool = False, check_finite: bool = False
                        ) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """One forward + one reverse sweep: returns (named outputs, gradients).

    `loss` names a declared scalar output.  Parameters that do not reach the
    loss get zero gradients.  With `wrt_inputs`, input-leaf gradients are
    included as well (keyed by leaf name).
    """
    if loss not in graph.outputs:
        raise GraphError(f"unknown output {loss!r}")
    loss_idx = graph.outputs[loss]
    loss_node = graph.nodes[loss_idx]
    if int(np.prod(loss_node.shape)) != 1:
        raise GraphError(f"loss node must be scalar, got shape {loss_node.shape}")
    caches: dict = {}
    vals = _run_forward(graph, inputs, params, check_finite, caches)
    adj: list = [None] * len(graph.nodes)
    adj[loss_idx] = np.ones(loss_node.shape)
    for node in reversed(graph.nodes[: loss_idx + 1]):
        g = adj[node.idx]
        if g is None or not node.args:
            continue
        for arg_idx, contrib in zip(node.args, _backward_node(node, vals, g, caches)):
            if adj[arg_idx] is None:
                adj[arg_idx] = contrib
            else:
                adj[arg_idx] = adj[arg_idx] + contrib
    grads = {}
    for name, idx in graph.params.items():
        grads[name] = adj[idx] if adj[idx] is not None else np.zeros(graph.nodes[idx].shape)
    if wrt_inputs:
        for name, idx in graph.inputs.items():
            grads[name] = adj[idx] if adj[idx] is not None else np.zeros(graph.nodes[idx].shape)
    outputs = {name: vals[idx] for name, idx in graph.outputs.items()}
    return outputs, grads


def gradients(graph: Graph, loss: str, inputs: dict, params,
              wrt_inputs: bool = False) -> dict[str, np.ndarray]:
    """d(loss)/d(param) for every parameter leaf, by reverse accumulation."""
    _, grads = value_and_gradients(graph, loss, inputs, params, wrt_inputs,
                                   check_finite=True)
    return grads


def gradcheck(graph: Graph, loss: str, inputs: dict, params, step: float = 1e-6,
              max_per_param: int = 6, seed: int = 0) -> dict[str, float]:
    """Compare analytic gradients against central finite differences.

    Subsamples up to `max_per_param` elements of each parameter.  Returns the
    max relative error per parameter, with the relative denominator floored at
    1e-4 so noise around zero gradients does not register as error.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    analytic = gradients(graph, loss, inputs, params)
    work = {k: np.array(params[k], dtype=np.float64) for k in graph.params}
    rng = np.random.default_rng(seed)
    report: dict[str, float] = {}
    for name in graph.params:
        arr = work[name]
        n = arr.size
        if n == 0:
            report[name] = 0.0
            continue
        picks = np.arange(n) if n <= max_per_param else rng.choice(n, size=max_per_param, replace=False)
        worst = 0.0
        flat = arr.reshape(-1)
        for j in picks:
            orig = flat[j]
            flat[j] = orig + step
            hi = evaluate(graph, inputs, work)[loss].item()
            flat[j] = orig - step
            lo = evaluate(graph, inputs, work)[loss].item()
            flat[j] = orig
            numeric = (hi - lo) / (2 * step)
            exact = analytic[name].reshape(-1)[j]
            err = abs(exact - numeric) / max(1e-4, abs(exact), abs(numeric))
            worst = max(worst, err)
        report[name] = worst
    return report


# ------------------------------------------------------------------ checkpoint

def save_checkpoint(store: ParamStore, path) -> None:
    """Write `manifest.txt` (name, shape, dtype, offset) + `params.bin` (f32 LE)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    blobs, lines, offset = [], [], 0
    for name in sorted(store.arrays):
        arr = store.arrays[name].astype("<f4")
        lines.append(f"{name}\t{','.join(map(str, arr.shape))}\tfloat32\t{offset}")
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    (path / "manifest.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
    (path / "params.bin").write_bytes(b"".join(blobs))


def load_checkpoint(path) -> ParamStore:
    """Read a checkpoint directory; values are upcast to float64."""
    path = Path(path)
    manifest = path / "manifest.txt"
    if not manifest.is_file():
        raise FileNotFoundError(f"no checkpoint manifest at {manifest}")
    blob = (path / "params.bin").read_bytes()
    arrays = {}
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        name, shape_s, dtype, offset_s = line.split("\t")
        shape = tuple(int(s) for s in shape_s.split(",")) if shape_s else ()
        count = int(np.prod(shape)) if shape else 1
        start = int(offset_s)
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start)
        arrays[name] = arr.reshape(shape).astype(np.float64)
    return ParamStore(arrays)


def checkpoint_hash(path) -> str:
    """Stable short hash of a checkpoint's binary blob (for health reporting)."""
    data = (Path(path) / "params.bin").read_bytes()
    return f"{zlib.crc32(data):08x}"
