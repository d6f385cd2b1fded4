"""Fully connected tanh network (x, t) -> (u_raw, phi_raw) and the
hard-constraint transform that builds boundary-exact fields from it.

The constrained outputs are

    u   = x(1-x)*u_raw   + sin(pi x)*(1-t)
    phi = x(1-x)*phi_raw + 0.5*sin(pi x)*(1-t)

so u and phi vanish identically at x=0 and x=1 for any network, and at t=0
with a silent network they reproduce the initial profiles. The transform does
NOT enforce the initial condition for a nonzero network; the initial-condition
loss term stays necessary.

Parameters live as numpy arrays in an immutable container. The differentiable
forward pass runs over DiffValue-lifted copies; `predict` is a plain numpy
fast path for evaluation grids where no graph is wanted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DiffValue
from .errors import CheckpointError, ConfigurationError

__all__ = [
    "FieldPair",
    "NetworkParameters",
    "init_parameters",
    "lift_parameters",
    "forward_raw",
    "apply_hard_constraints",
    "predict",
    "flatten_parameters",
    "unflatten_parameters",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"PPINN"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class FieldPair:
    """Displacement and potential, as numpy arrays or DiffValue expressions."""

    u: object
    phi: object


@dataclass(frozen=True)
class NetworkParameters:
    """Affine layers (weight [out, in], bias [out]) plus the width chain.

    `widths` is the full chain including input and output, e.g. a network of
    8 hidden layers of 180 has widths (2, 180, ..., 180, 2).
    """

    layers: tuple
    widths: tuple
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation != "tanh":
            raise ConfigurationError(f"unsupported activation {self.activation!r}")
        if len(self.widths) < 3:
            raise ConfigurationError("need at least one hidden layer")
        if self.widths[0] != 2 or self.widths[-1] != 2:
            raise ConfigurationError(f"width chain must start and end at 2, got {self.widths}")
        hidden = set(self.widths[1:-1])
        if len(hidden) != 1:
            raise ConfigurationError(f"hidden widths must all be equal, got {self.widths}")
        if len(self.layers) != len(self.widths) - 1:
            raise ConfigurationError(
                f"{len(self.layers)} layers do not fit a {len(self.widths)}-entry width chain"
            )
        for i, (W, b) in enumerate(self.layers):
            want = (self.widths[i + 1], self.widths[i])
            if W.shape != want or b.shape != (self.widths[i + 1],):
                raise ConfigurationError(
                    f"layer {i}: weight {W.shape} / bias {b.shape}, expected {want} / ({want[0]},)"
                )
            if W.dtype != self.dtype or b.dtype != self.dtype:
                raise ConfigurationError(f"layer {i}: mixed dtypes in parameter set")

    @property
    def dtype(self):
        return self.layers[0][0].dtype

    @property
    def hidden_layers(self) -> int:
        return len(self.widths) - 2

    @property
    def width(self) -> int:
        return self.widths[1]

    @property
    def parameter_count(self) -> int:
        return sum(W.size + b.size for W, b in self.layers)


def init_parameters(
    width: int, hidden_layers: int, seed: int, dtype=np.float64
) -> NetworkParameters:
    """Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.

    Deterministic for a fixed seed. Draws happen in float64 and are cast,
    so a float32 net is the rounded image of the float64 one.
    """
    if width < 1 or hidden_layers < 1:
        raise ConfigurationError(
            f"width and hidden_layers must be >= 1, got {width}, {hidden_layers}"
        )
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ConfigurationError(f"unsupported parameter dtype {dtype}")
    widths = (2,) + (width,) * hidden_layers + (2,)
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype)
        b = np.zeros(fan_out, dtype=dtype)
        layers.append((W, b))
    return NetworkParameters(layers=tuple(layers), widths=widths)


def lift_parameters(params: NetworkParameters, requires_grad: bool):
    """Wrap every layer array as a DiffValue.

    Returns (pairs, flat) where `pairs` feeds forward_raw and `flat` is the
    canonical differentiation ordering: all weight nodes in layer order, then
    all bias nodes. flatten_parameters and the checkpoint payload use the same
    ordering, so optimizer vectors and gradients align by construction.
    """
    pairs = [
        (ad.leaf(W, requires_grad=requires_grad), ad.leaf(b, requires_grad=requires_grad))
        for W, b in params.layers
    ]
    flat = [W for W, _ in pairs] + [b for _, b in pairs]
    return pairs, flat


def forward_raw(params, x: DiffValue, t: DiffValue) -> FieldPair:
    """Raw network outputs as differentiable expressions.

    `params` is either a NetworkParameters (wrapped as constants: inference)
    or the lifted pair list from lift_parameters (training). `x` and `t` are
    1-D DiffValues of equal length.
    """
    if isinstance(params, NetworkParameters):
        pairs = [(ad.constant(W), ad.constant(b)) for W, b in params.layers]
    else:
        pairs = list(params)
    a = ad.stack_cols(x, t)
    for W, b in pairs[:-1]:
        a = ad.tanh(ad.matmul(a, ad.transpose(W)) + b)
    W, b = pairs[-1]
    out = ad.matmul(a, ad.transpose(W)) + b
    return FieldPair(u=ad.column(out, 0), phi=ad.column(out, 1))


def apply_hard_constraints(raw: FieldPair, x, t) -> FieldPair:
    """Boundary/initial lift around the raw outputs; differentiable when the
    inputs are DiffValues, plain numpy otherwise."""
    if isinstance(x, DiffValue) or isinstance(raw.u, DiffValue):
        dtype = x.value.dtype if isinstance(x, DiffValue) else raw.u.value.dtype
        sin, pi = ad.sin, ad.constant(np.asarray(np.pi, dtype=dtype))
    else:
        sin, pi = np.sin, np.pi
    mask = x * (1.0 - x)
    lift = sin(pi * x) * (1.0 - t)
    return FieldPair(u=mask * raw.u + lift, phi=mask * raw.phi + 0.5 * lift)


def predict(params: NetworkParameters, x, t) -> FieldPair:
    """Constrained fields on plain numpy arrays (no autodiff graph)."""
    x = np.asarray(x)
    t = np.asarray(t)
    a = np.stack([x, t], axis=1).astype(params.dtype)
    for W, b in params.layers[:-1]:
        a = np.tanh(a @ W.T + b)
    W, b = params.layers[-1]
    out = a @ W.T + b
    return apply_hard_constraints(FieldPair(u=out[:, 0], phi=out[:, 1]), x, t)


def flatten_parameters(params: NetworkParameters) -> np.ndarray:
    """All weights (row-major, layer order) then all biases, as one vector."""
    chunks = [W.reshape(-1) for W, _ in params.layers] + [b for _, b in params.layers]
    return np.concatenate(chunks)


def unflatten_parameters(flat: np.ndarray, template: NetworkParameters) -> NetworkParameters:
    """Inverse of flatten_parameters against a shape/dtype template."""
    flat = np.asarray(flat, dtype=template.dtype)
    if flat.size != template.parameter_count:
        raise ConfigurationError(
            f"flat vector has {flat.size} entries, template needs {template.parameter_count}"
        )
    weights = []
    biases = []
    k = 0
    for W, _ in template.layers:
        weights.append(flat[k : k + W.size].reshape(W.shape).copy())
        k += W.size
    for _, b in template.layers:
        biases.append(flat[k : k + b.size].copy())
        k += b.size
    layers = tuple((W, b) for W, b in zip(weights, biases))
    return NetworkParameters(layers=layers, widths=template.widths)


def save_checkpoint(params: NetworkParameters, path) -> None:
    """Versioned binary dump, little-endian IEEE-754, bit-exact round-trip.

    Layout: magic "PPINN", version u8, precision u8 (bytes per float),
    width-count u32, widths u32 each, then flatten_parameters payload.
    """
    precision = params.dtype.itemsize
    header = CHECKPOINT_MAGIC + struct.pack(
        "<BBI", CHECKPOINT_VERSION, precision, len(params.widths)
    )
    header += struct.pack(f"<{len(params.widths)}I", *params.widths)
    payload = flatten_parameters(params).astype(f"<f{precision}").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_checkpoint(path) -> NetworkParameters:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a parameter checkpoint")
    off = len(CHECKPOINT_MAGIC)
    try:
        version, precision, nw = struct.unpack_from("<BBI", blob, off)
        off += struct.calcsize("<BBI")
        widths = struct.unpack_from(f"<{nw}I", blob, off)
        off += 4 * nw
    except struct.error as broken:
        raise CheckpointError(f"{path}: truncated header") from broken
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if precision not in (4, 8):
        raise CheckpointError(f"{path}: unsupported precision tag {precision}")
    dtype = np.dtype(f"<f{precision}")
    count = sum(
        w_out * w_in + w_out for w_in, w_out in zip(widths[:-1], widths[1:])
    )
    payload = blob[off:]
    if len(payload) != count * precision:
        raise CheckpointError(
            f"{path}: payload holds {len(payload)} bytes, expected {count * precision}"
        )
    flat = np.frombuffer(payload, dtype=dtype).astype(dtype.newbyteorder("="))
    zero_layers = tuple(
        (
            np.zeros((w_out, w_in), dtype=dtype.newbyteorder("=")),
            np.zeros(w_out, dtype=dtype.newbyteorder("=")),
        )
        for w_in, w_out in zip(widths[:-1], widths[1:])
    )
    try:
        template = NetworkParameters(layers=zero_layers, widths=tuple(int(w) for w in widths))
    except ConfigurationError as bad:
        raise CheckpointError(f"{path}: invalid width chain {tuple(widths)}") from bad
    return unflatten_parameters(flat, template)
