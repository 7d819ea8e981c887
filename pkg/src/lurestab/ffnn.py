"""Feedforward networks: evaluation, sector bounds, and empirical checks.

A network with ``q`` hidden layers, one shared activation inside a slope
sector ``[a1, a2]``, and zero biases is sector bounded on nonnegative
inputs by ``[-G, G]`` with ``G = c^q |W_out| |W_q| ... |W_1|`` and
``c = max(|a1|, |a2|)``.  The empirical routines sample that claim and
drive the sign selection for refined bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatchError,
    MixedActivationsError,
    NonFiniteEntriesError,
    NonzeroBiasError,
    NotSisoError,
    ProblemFormatError,
)
from .linalg import as_matrix
from .radius import SectorBound


def _relu(x):
    return np.maximum(x, 0.0)


@dataclass(frozen=True)
class ActivationSpec:
    """Scalar activation with declared slope sector ``[a1, a2]``, a1 < a2."""

    name: str
    a1: float
    a2: float
    fn: Callable | None = None

    def __post_init__(self):
        if not self.a1 < self.a2:
            raise ValueError(f"activation sector needs a1 < a2, got [{self.a1}, {self.a2}]")

    @property
    def slope_gain(self) -> float:
        """The constant c = max(|a1|, |a2|) entering the sector product."""
        return max(abs(self.a1), abs(self.a2))


RELU = ActivationSpec("relu", 0.0, 1.0, _relu)
TANH = ActivationSpec("tanh", 0.0, 1.0, np.tanh)

_BUILTIN_ACTIVATIONS = {"relu": RELU, "tanh": TANH}


def activation_from_name(name: str, a1: float | None = None, a2: float | None = None) -> ActivationSpec:
    """Resolve a built-in activation, or build a custom one from explicit slopes."""
    key = str(name).strip().lower()
    if key in _BUILTIN_ACTIVATIONS:
        spec = _BUILTIN_ACTIVATIONS[key]
        if a1 is not None or a2 is not None:
            spec = ActivationSpec(spec.name, float(a1), float(a2), spec.fn)
        return spec
    if a1 is None or a2 is None:
        raise ValueError(f"activation {name!r} is not built in; explicit a1/a2 required")
    return ActivationSpec(key, float(a1), float(a2), None)


@dataclass(frozen=True)
class Layer:
    """One affine layer ``w @ x + b`` with ``b`` stored as a 1-D vector."""

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        w = as_matrix(self.w, "layer weight")
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if b.shape[0] != w.shape[0]:
            raise DimensionMismatchError(
                f"bias length {b.shape[0]} does not match {w.shape[0]} layer outputs"
            )
        if not np.isfinite(b).all():
            raise ProblemFormatError("layer bias contains non-finite entries")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)

    @classmethod
    def linear(cls, w) -> "Layer":
        w = as_matrix(w, "layer weight")
        return cls(w, np.zeros(w.shape[0]))


@dataclass(frozen=True)
class Ffnn:
    """Fully connected network: ``q`` activated hidden layers, affine output.

    ``activation`` is shared by all hidden layers.  ``layer_activations``
    may override it per hidden layer for evaluation purposes, but any
    mixture disqualifies the network from the product sector bound.
    """

    hidden: tuple[Layer, ...]
    output: Layer
    activation: ActivationSpec
    layer_activations: tuple[ActivationSpec, ...] | None = None

    def __post_init__(self):
        hidden = tuple(self.hidden)
        object.__setattr__(self, "hidden", hidden)
        dims = [layer.w.shape for layer in hidden] + [self.output.w.shape]
        for prev, nxt in zip(dims, dims[1:]):
            if nxt[1] != prev[0]:
                raise DimensionMismatchError(
                    f"layer dimensions do not chain: {prev} feeds {nxt}"
                )
        if self.layer_activations is not None:
            acts = tuple(self.layer_activations)
            if len(acts) != len(hidden):
                raise DimensionMismatchError(
                    f"{len(acts)} per-layer activations for {len(hidden)} hidden layers"
                )
            object.__setattr__(self, "layer_activations", acts)

    @property
    def q(self) -> int:
        return len(self.hidden)

    @property
    def input_dim(self) -> int:
        first = self.hidden[0] if self.hidden else self.output
        return first.w.shape[1]

    @property
    def output_dim(self) -> int:
        return self.output.w.shape[0]

    def activation_for(self, i: int) -> ActivationSpec:
        if self.layer_activations is not None:
            return self.layer_activations[i]
        return self.activation


def ffnn_eval(net: Ffnn, z) -> np.ndarray:
    """Forward pass.  ``z`` may be a single input (p,) or a batch (p, k)."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    x = z.reshape(-1, 1) if single else z
    if x.shape[0] != net.input_dim:
        raise DimensionMismatchError(
            f"input dimension {x.shape[0]} does not match network input {net.input_dim}"
        )
    for i, layer in enumerate(net.hidden):
        act = net.activation_for(i)
        if act.fn is None:
            raise ValueError(f"activation {act.name!r} has no callable for evaluation")
        x = act.fn(layer.w @ x + layer.b[:, None])
    x = net.output.w @ x + net.output.b[:, None]
    return x[:, 0] if single else x


def sector_bound_ffnn(net: Ffnn) -> SectorBound:
    """Symmetric sector from the activation gain and the |weight| product.

    Requires zero biases and a single shared activation; the bound is
    ``c^q |W_out| |W_q| ... |W_1]`` with ``c = max(|a1|, |a2|)``, valid for
    nonnegative inputs.
    """
    bad = [
        i + 1
        for i, layer in enumerate(list(net.hidden) + [net.output])
        if np.any(layer.b != 0.0)
    ]
    if bad:
        raise NonzeroBiasError(bad)
    if net.layer_activations is not None:
        names = {act.name for act in net.layer_activations}
        if len(names) > 1 or (net.hidden and names != {net.activation.name}):
            raise MixedActivationsError(
                "sector bound requires one shared activation; got " + ", ".join(sorted(names))
            )
    c = net.activation.slope_gain
    product = np.abs(net.output.w)
    for layer in reversed(net.hidden):
        product = product @ np.abs(layer.w)
    upper = (c ** net.q) * product
    return SectorBound(-upper, upper)


@dataclass(frozen=True)
class SectorCheck:
    """Sampled sector-membership report.

    ``violations`` holds (input, output) pairs that escaped the sector;
    ``max_ratio`` is the largest output-to-upper-bound ratio seen where the
    upper bound was positive.
    """

    samples: int
    violations: list
    max_ratio: float

    @property
    def count(self) -> int:
        return len(self.violations)


def empirical_sector_check(
    net: Ffnn,
    sector: SectorBound,
    samples: int = 1000,
    input_box: tuple[float, float] = (0.0, 10.0),
    seed: int = 42,
) -> SectorCheck:
    """Sample nonnegative inputs and test ``S1 z <= pi(z) <= S2 z`` componentwise.

    A small relative slack absorbs float rounding so that exact-equality
    cases (e.g. identity relu chains) do not count as violations.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    lo, hi = float(input_box[0]), float(input_box[1])
    if lo < 0 or hi < lo:
        raise ValueError("input box must satisfy 0 <= lo <= hi")
    p = net.input_dim
    if sector.lower.shape[1] != p:
        raise DimensionMismatchError(
            f"sector has {sector.lower.shape[1]} input columns, network expects {p}"
        )
    rng = np.random.default_rng(seed)
    z = rng.uniform(lo, hi, size=(p, samples))
    out = ffnn_eval(net, z)
    lower = sector.lower @ z
    upper = sector.upper @ z
    slack = 1e-9 * np.maximum(1.0, np.abs(upper))
    bad = (out > upper + slack) | (out < lower - slack)
    bad_cols = np.flatnonzero(bad.any(axis=0))
    violations = [(z[:, j].copy(), out[:, j].copy()) for j in bad_cols]
    positive = upper > 0
    max_ratio = float((out[positive] / upper[positive]).max()) if positive.any() else 0.0
    return SectorCheck(samples=samples, violations=violations, max_ratio=max_ratio)


def select_refined_sign(
    net: Ffnn,
    magnitude: float,
    samples: int = 1000,
    input_box: tuple[float, float] = (0.0, 10.0),
    seed: int = 42,
) -> SectorBound:
    """Pick the sign of a refined scalar upper bound by sampling the network.

    Candidates ``+magnitude`` and ``-magnitude`` are each paired with the
    lower bound ``-|G2|`` from the weight-product sector, and the candidate
    with fewer sampled violations wins.  A violation-free tie means the
    output sits below ``-magnitude * z`` everywhere sampled, so the tighter
    negative candidate carries more information; any other tie keeps the
    conservative positive sign.
    """
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    if net.output_dim != 1 or net.input_dim != 1:
        raise NotSisoError("sign selection needs a scalar network (one input, one output)")
    base = sector_bound_ffnn(net)
    lower = -np.abs(base.upper)
    plus = SectorBound(np.minimum(lower, magnitude), np.array([[magnitude]]))
    minus = SectorBound(np.minimum(lower, -magnitude), np.array([[-magnitude]]))
    plus_check = empirical_sector_check(net, plus, samples, input_box, seed)
    minus_check = empirical_sector_check(net, minus, samples, input_box, seed)
    if plus_check.count != minus_check.count:
        return plus if plus_check.count < minus_check.count else minus
    return minus if plus_check.count == 0 else plus


def load_ffnn(path) -> Ffnn:
    """Load a network from its JSON file (see ``ffnn_to_dict`` for the schema)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ProblemFormatError(f"cannot read network file ({exc})", path=path) from None
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None
    try:
        return ffnn_from_dict(data)
    except ProblemFormatError:
        raise
    except (KeyError, TypeError, ValueError, DimensionMismatchError, NonFiniteEntriesError) as exc:
        raise ProblemFormatError(f"invalid network description: {exc}", path=path) from None


def ffnn_from_dict(data: dict) -> Ffnn:
    """Build a network from the JSON schema.

    Expected fields: ``activation: {name, a1, a2}`` and ``layers``, a list
    of ``{rows, cols, weights, bias}`` with row-major flat weights; the
    final entry is the affine output layer.
    """
    act_spec = data["activation"]
    activation = activation_from_name(
        act_spec["name"], act_spec.get("a1"), act_spec.get("a2")
    )
    raw_layers = data["layers"]
    if not raw_layers:
        raise ValueError("a network needs at least an output layer")
    layers = []
    for i, entry in enumerate(raw_layers):
        rows, cols = int(entry["rows"]), int(entry["cols"])
        weights = np.asarray(entry["weights"], dtype=float)
        if weights.size != rows * cols:
            raise ValueError(
                f"layer {i + 1}: {weights.size} weights for declared {rows}x{cols}"
            )
        w = weights.reshape(rows, cols)
        b = np.asarray(entry.get("bias", np.zeros(rows)), dtype=float)
        layers.append(Layer(w, b))
    return Ffnn(hidden=tuple(layers[:-1]), output=layers[-1], activation=activation)


def ffnn_to_dict(net: Ffnn) -> dict:
    """Serialize a network to the JSON schema accepted by ``ffnn_from_dict``."""
    layers = []
    for layer in list(net.hidden) + [net.output]:
        layers.append(
            {
                "rows": layer.w.shape[0],
                "cols": layer.w.shape[1],
                "weights": [float(x) for x in layer.w.ravel()],
                "bias": [float(x) for x in layer.b],
            }
        )
    return {
        "activation": {
            "name": net.activation.name,
            "a1": net.activation.a1,
            "a2": net.activation.a2,
        },
        "layers": layers,
    }
