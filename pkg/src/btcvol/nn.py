"""Network building blocks: layers, loss, initialization, AdamW, checkpoints.

Layers hold their parameters as requires_grad tensors and expose them via
``params()`` as a flat name -> Tensor mapping, which is what the optimizer
and the checkpoint writer consume.
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import (
    Tensor,
    add,
    add_rowvec,
    add_scalar,
    apply_mask,
    colnorm_scale,
    concat_cols,
    dense,
    matmul,
    mul,
    normalize_axis,
    pick_row,
    relu,
    scale,
    shift_rows,
    sigmoid,
    square,
    stack_rows,
    sub,
    tanh,
    tmean,
    transpose,
)

NORMALIZATIONS = ("none", "batch", "layer", "weight")


class NonFiniteGradientError(RuntimeError):
    """Raised when an optimizer step encounters NaN or infinite gradients."""


def fan_in_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Uniform init with variance 1/fan_in (bound sqrt(3/fan_in))."""
    bound = np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def receptive_field(kernel_size: int, dilation_base: int, num_layers: int) -> int:
    """Timesteps that can influence one output of a stacked dilated conv."""
    k, b, n = kernel_size, dilation_base, num_layers
    if b == 1:
        return 1 + (k - 1) * n
    return 1 + (k - 1) * (b**n - 1) // (b - 1)


def layers_for_span(kernel_size: int, dilation_base: int, span: int) -> int:
    """Smallest layer count whose receptive field covers ``span`` timesteps."""
    n = 1
    while receptive_field(kernel_size, dilation_base, n) < span:
        n += 1
    return n


class Linear:
    """Affine layer y = w @ x + b with fan-in uniform weights and zero bias."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.w = Tensor(fan_in_uniform(rng, (out_dim, in_dim), in_dim), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return dense(x, self.w, self.b)

    def apply_rows(self, x: Tensor) -> Tensor:
        """Apply to every row of a (T, in_dim) tensor."""
        return add_rowvec(matmul(x, transpose(self.w)), self.b)

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class CausalConv1d:
    """Multi-channel causal dilated convolution over a (T, C_in) signal.

    The kernel is stored as one (k*C_in, C_out) matrix so the forward pass
    is a single matmul over the time-shifted input taps. With
    ``weight_norm`` the kernel is reparameterized as direction times
    per-output-channel gain.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 dilation: int, rng: np.random.Generator, weight_norm: bool = False):
        if kernel_size < 1 or dilation < 1:
            raise ValueError("kernel size and dilation must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.weight_norm = weight_norm
        w0 = fan_in_uniform(rng, (kernel_size * in_channels, out_channels),
                            kernel_size * in_channels)
        if weight_norm:
            self.v = Tensor(w0, requires_grad=True)
            self.g = Tensor(np.sqrt((w0 * w0).sum(axis=0)), requires_grad=True)
        else:
            self.w = Tensor(w0, requires_grad=True)
        self.b = Tensor(np.zeros(out_channels), requires_grad=True)

    def weight(self) -> Tensor:
        if self.weight_norm:
            return colnorm_scale(self.v, self.g)
        return self.w

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.in_channels:
            raise ValueError(f"expected (T, {self.in_channels}) input, got {x.shape}")
        taps = [shift_rows(x, self.dilation * i) for i in range(self.kernel_size)]
        return add_rowvec(matmul(concat_cols(taps), self.weight()), self.b)

    def params(self, prefix: str) -> dict[str, Tensor]:
        if self.weight_norm:
            return {f"{prefix}.v": self.v, f"{prefix}.g": self.g, f"{prefix}.b": self.b}
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class TCNBlock:
    """Stack of causal dilated conv layers; layer l uses dilation base**l.

    Each layer runs conv -> (batch/layer norm) -> relu -> dropout, plus an
    additive identity path when skip connections are enabled (a 1x1
    projection bridges channel mismatches). The default layer count is the
    smallest whose receptive field covers one day of 96 bins.
    """

    def __init__(self, in_channels: int, filters: int, kernel_size: int,
                 dilation_base: int, rng: np.random.Generator,
                 num_layers: int | None = None, skip_connections: bool = True,
                 normalization: str = "none", dropout: float = 0.0,
                 span: int = 96):
        if normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.dilation_base = dilation_base
        self.num_layers = num_layers or layers_for_span(kernel_size, dilation_base, span)
        self.skip_connections = skip_connections
        self.normalization = normalization
        self.dropout = dropout

        self.convs: list[CausalConv1d] = []
        self.norms: list[tuple[Tensor, Tensor] | None] = []
        self.projections: list[Linear | None] = []
        channels = in_channels
        for layer in range(self.num_layers):
            conv = CausalConv1d(channels, filters, kernel_size, dilation_base**layer,
                                rng, weight_norm=(normalization == "weight"))
            self.convs.append(conv)
            if normalization in ("batch", "layer"):
                self.norms.append((Tensor(np.ones(filters), requires_grad=True),
                                   Tensor(np.zeros(filters), requires_grad=True)))
            else:
                self.norms.append(None)
            if skip_connections and channels != filters:
                proj = Linear(channels, filters, rng)
                proj.b.requires_grad = False  # identity path carries no bias
                self.projections.append(proj)
            else:
                self.projections.append(None)
            channels = filters

    def receptive_field(self) -> int:
        return receptive_field(self.kernel_size, self.dilation_base, self.num_layers)

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        h = x
        for layer in range(self.num_layers):
            z = self.convs[layer](h)
            norm = self.norms[layer]
            if norm is not None:
                axis = 0 if self.normalization == "batch" else 1
                z = normalize_axis(z, norm[0], norm[1], axis=axis)
            z = relu(z)
            if rng is not None and self.dropout > 0.0:
                keep = 1.0 - self.dropout
                mask = (rng.random(z.shape) < keep) / keep
                z = apply_mask(z, mask)
            if self.skip_connections:
                proj = self.projections[layer]
                identity = proj.apply_rows(h) if proj is not None else h
                z = add(z, identity)
            h = z
        return h

    def params(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, conv in enumerate(self.convs):
            out.update(conv.params(f"{prefix}.layer{i}.conv"))
            norm = self.norms[i]
            if norm is not None:
                out[f"{prefix}.layer{i}.norm.gamma"] = norm[0]
                out[f"{prefix}.layer{i}.norm.beta"] = norm[1]
            proj = self.projections[i]
            if proj is not None:
                out[f"{prefix}.layer{i}.proj.w"] = proj.w
        return out


class LSTMCell:
    """Standard LSTM gates: sigmoid input/forget/output, tanh candidate."""

    GATES = ("i", "f", "g", "o")

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator,
                 dropout: float = 0.0):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.dropout = dropout
        self.w = {}
        self.u = {}
        self.b = {}
        for gate in self.GATES:
            self.w[gate] = Tensor(fan_in_uniform(rng, (hidden_dim, input_dim), input_dim),
                                  requires_grad=True)
            self.u[gate] = Tensor(fan_in_uniform(rng, (hidden_dim, hidden_dim), hidden_dim),
                                  requires_grad=True)
            self.b[gate] = Tensor(np.zeros(hidden_dim), requires_grad=True)

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for gate in self.GATES:
            out[f"{prefix}.w_{gate}"] = self.w[gate]
            out[f"{prefix}.u_{gate}"] = self.u[gate]
            out[f"{prefix}.b_{gate}"] = self.b[gate]
        return out


class GRUCell:
    """GRU with update gate z, reset gate r and tanh candidate n.

    h_t = z * n + (1 - z) * h_{t-1}, so an update gate forced to one
    copies the candidate state.
    """

    GATES = ("z", "r", "n")

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator,
                 dropout: float = 0.0):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.dropout = dropout
        self.w = {}
        self.u = {}
        self.b = {}
        for gate in self.GATES:
            self.w[gate] = Tensor(fan_in_uniform(rng, (hidden_dim, input_dim), input_dim),
                                  requires_grad=True)
            self.u[gate] = Tensor(fan_in_uniform(rng, (hidden_dim, hidden_dim), hidden_dim),
                                  requires_grad=True)
            self.b[gate] = Tensor(np.zeros(hidden_dim), requires_grad=True)

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for gate in self.GATES:
            out[f"{prefix}.w_{gate}"] = self.w[gate]
            out[f"{prefix}.u_{gate}"] = self.u[gate]
            out[f"{prefix}.b_{gate}"] = self.b[gate]
        return out


def _gate(cell, name: str, xin_rows: dict, t: int, h: Tensor, activation) -> Tensor:
    pre = add(add(pick_row(xin_rows[name], t), matmul(cell.u[name], h)), cell.b[name])
    return activation(pre)


def recurrent_forward(x: Tensor, cell, rng: np.random.Generator | None = None) -> Tensor:
    """Run an LSTM or GRU cell over a (T, input_dim) sequence.

    Starts from a zero state and returns the (T, hidden_dim) hidden
    sequence; dropout applies to the stacked output during training.
    """
    if x.data.ndim != 2 or x.shape[1] != cell.input_dim:
        raise ValueError(f"expected (T, {cell.input_dim}) input, got {x.shape}")
    steps = x.shape[0]
    # per-gate input projections for all timesteps at once
    xin = {gate: matmul(x, transpose(cell.w[gate])) for gate in cell.GATES}
    h = Tensor(np.zeros(cell.hidden_dim))
    outputs = []
    if isinstance(cell, LSTMCell):
        c = Tensor(np.zeros(cell.hidden_dim))
        for t in range(steps):
            i = _gate(cell, "i", xin, t, h, sigmoid)
            f = _gate(cell, "f", xin, t, h, sigmoid)
            g = _gate(cell, "g", xin, t, h, tanh)
            o = _gate(cell, "o", xin, t, h, sigmoid)
            c = add(mul(f, c), mul(i, g))
            h = mul(o, tanh(c))
            outputs.append(h)
    elif isinstance(cell, GRUCell):
        for t in range(steps):
            z = _gate(cell, "z", xin, t, h, sigmoid)
            r = _gate(cell, "r", xin, t, h, sigmoid)
            pre = add(add(pick_row(xin["n"], t), matmul(cell.u["n"], mul(r, h))), cell.b["n"])
            n = tanh(pre)
            one_minus_z = add_scalar(scale(z, -1.0), 1.0)
            h = add(mul(z, n), mul(one_minus_z, h))
            outputs.append(h)
    else:
        raise TypeError(f"unsupported cell type {type(cell).__name__}")
    out = stack_rows(outputs)
    if rng is not None and cell.dropout > 0.0:
        keep = 1.0 - cell.dropout
        mask = (rng.random(out.shape) < keep) / keep
        out = apply_mask(out, mask)
    return out


def epsilon_insensitive_loss(r: Tensor, r_hat: Tensor, epsilon: float) -> Tensor:
    """Mean over elements of max{0, (r - r_hat)^2 - epsilon}.

    Residuals inside the epsilon band contribute neither loss nor
    gradient; epsilon = 0 recovers plain mean squared error.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if r.shape != r_hat.shape:
        raise ValueError(f"shape mismatch {r.shape} vs {r_hat.shape}")
    return tmean(relu(add_scalar(square(sub(r, r_hat)), -float(epsilon))))


class AdamW:
    """AdamW with decoupled weight decay and bias-corrected moments.

    theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
    """

    def __init__(self, params: dict[str, Tensor], lr: float, weight_decay: float = 0.0,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            p.data -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps)
                                 + self.weight_decay * p.data)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


# ---------------------------------------------------------------------------
# checkpoint format: little-endian flat file of (name, shape, float64 payload)

_CKPT_MAGIC = b"BVCKPT01"


def save_checkpoint(params: dict[str, Tensor | np.ndarray], path) -> None:
    """Write parameters to the documented little-endian flat format.

    Layout: 8-byte magic, uint32 entry count, then per entry a uint16
    name length, the utf-8 name, uint8 ndim, uint32 per dimension, and
    the row-major float64 payload.
    """
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for name, value in params.items():
            arr = np.ascontiguousarray(value.data if isinstance(value, Tensor) else value,
                                       dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _CKPT_MAGIC:
            raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
        (count,) = struct.unpack("<I", fh.read(4))
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
            out[name] = data.astype(np.float64)
        return out


def load_into(params: dict[str, Tensor], path) -> None:
    """Restore a parameter mapping in place from a checkpoint file."""
    stored = load_checkpoint(path)
    missing = set(params) - set(stored)
    extra = set(stored) - set(params)
    if missing or extra:
        raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}")
    for name, p in params.items():
        if stored[name].shape != p.data.shape:
            raise ValueError(f"shape mismatch for {name!r}: "
                             f"{stored[name].shape} vs {p.data.shape}")
        p.data = stored[name].copy()
