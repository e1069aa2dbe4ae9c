"""Declarative network specs for the two nets, and the executable Network.

Both nets are shape-preserving encoder-decoders over inputs whose spatial
dims are divisible by 16 (four exact 2x poolings):

* net1: 3-channel edge map in, bridge conv between encoder and decoder, and
  an extra conv in every decoder stage (the depth increasers).
* net2: 1-channel mask in, no bridge, plain decoder stages.

Encoder widths are 16/32/64/128; the decoder mirrors them back down. Every
conv is 3x3 same-padding except the final 1x1 head, which feeds a sigmoid.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .layers import BatchNormLayer, ConvLayer, MaxPoolLayer, ReLULayer, SigmoidLayer, TConvLayer

ENCODER_WIDTHS = (16, 32, 64, 128)
POOL_STAGES = 4
DIM_MULTIPLE = 2**POOL_STAGES


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv | tconv | maxpool | batchnorm | relu | sigmoid
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    padding: int = 0


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    in_channels: int
    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        validate_shapes(self)


def _conv_block(layers, cin, cout):
    layers.append(LayerSpec("conv", cin, cout, kernel=3, stride=1, padding=1))
    layers.append(LayerSpec("batchnorm", cout, cout))
    layers.append(LayerSpec("relu", cout, cout))


def _tconv_block(layers, cin, cout):
    layers.append(LayerSpec("tconv", cin, cout, kernel=2, stride=2))
    layers.append(LayerSpec("batchnorm", cout, cout))
    layers.append(LayerSpec("relu", cout, cout))


def _build_spec(name, in_channels, with_bridge, extra_decoder_conv):
    layers = []
    cin = in_channels
    for width in ENCODER_WIDTHS:
        _conv_block(layers, cin, width)
        layers.append(LayerSpec("maxpool", width, width, kernel=2, stride=2))
        cin = width
    if with_bridge:
        _conv_block(layers, cin, cin)
    decoder_widths = (*reversed(ENCODER_WIDTHS[:-1]), ENCODER_WIDTHS[0])  # 64, 32, 16, 16
    for width in decoder_widths:
        _tconv_block(layers, cin, width)
        if extra_decoder_conv:
            _conv_block(layers, width, width)
        cin = width
    layers.append(LayerSpec("conv", cin, 1, kernel=1, stride=1, padding=0))
    layers.append(LayerSpec("sigmoid", 1, 1))
    return NetworkSpec(name, in_channels, tuple(layers))


def net1_spec():
    """Initial-guess net: edge fusion map (3 channels) to boundary probability."""
    return _build_spec("net1", 3, with_bridge=True, extra_decoder_conv=True)


def net2_spec():
    """Refinement net: binary mask (1 channel) to boundary probability."""
    return _build_spec("net2", 1, with_bridge=False, extra_decoder_conv=False)


def validate_shapes(spec):
    """Chain the shape algebra through the layer list; raise on any mismatch."""
    channels = spec.in_channels
    scale = 1  # spatial downscale factor relative to the input
    for i, layer in enumerate(spec.layers):
        if layer.kind in ("conv", "tconv"):
            if layer.in_channels != channels:
                raise ValueError(
                    f"{spec.name} layer {i} ({layer.kind}) expects {layer.in_channels} "
                    f"channels but receives {channels}"
                )
            channels = layer.out_channels
            if layer.kind == "conv":
                if layer.kernel != 2 * layer.padding + 1 or layer.stride != 1:
                    raise ValueError(f"{spec.name} layer {i}: conv must preserve spatial dims")
            else:
                scale //= 2
        elif layer.kind == "maxpool":
            scale *= 2
        elif layer.kind in ("batchnorm", "relu", "sigmoid"):
            if layer.in_channels not in (0, channels):
                raise ValueError(f"{spec.name} layer {i} channel mismatch")
        else:
            raise ValueError(f"unknown layer kind {layer.kind!r}")
        if scale < 1:
            raise ValueError(f"{spec.name} layer {i}: upsampling past input resolution")
    if scale != 1:
        raise ValueError(f"{spec.name}: output resolution differs from input (scale {scale})")
    if channels != 1:
        raise ValueError(f"{spec.name}: output must have a single channel")


def spec_digest(spec):
    """SHA-256 of the canonical JSON form; stored in weight files."""
    payload = json.dumps(asdict(spec), sort_keys=True).encode()
    return hashlib.sha256(payload).digest()


_LAYER_BUILDERS = {
    "maxpool": lambda s, rng: MaxPoolLayer(),
    "batchnorm": lambda s, rng: BatchNormLayer(s.in_channels),
    "relu": lambda s, rng: ReLULayer(),
    "sigmoid": lambda s, rng: SigmoidLayer(),
    "conv": lambda s, rng: ConvLayer(s.in_channels, s.out_channels, s.kernel, s.stride, s.padding, rng),
    "tconv": lambda s, rng: TConvLayer(s.in_channels, s.out_channels, rng),
}


class Network:
    """Executable layer stack built from a NetworkSpec."""

    def __init__(self, spec, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.spec = spec
        self.layers = [_LAYER_BUILDERS[ls.kind](ls, rng) for ls in spec.layers]

    def forward(self, x, mode="train"):
        if x.ndim != 4 or x.shape[1] != self.spec.in_channels:
            raise ValueError(
                f"{self.spec.name} expects (N, {self.spec.in_channels}, H, W), got {x.shape}"
            )
        if x.shape[2] % DIM_MULTIPLE or x.shape[3] % DIM_MULTIPLE:
            raise ValueError(f"spatial dims must be divisible by {DIM_MULTIPLE}, got {x.shape}")
        for i, layer in enumerate(self.layers):
            try:
                x = layer.forward(x, mode)
            except ValueError as exc:
                raise ValueError(f"{self.spec.name} layer {i}: {exc}") from exc
        return x

    def backward(self, dy):
        for i in range(len(self.layers) - 1, 0, -1):
            dy = self.layers[i].backward(dy)
        # input gradient is never consumed; the first layer (a conv) skips it
        return self.layers[0].backward(dy, need_dx=False)

    def param_entries(self):
        """(layer_index, role, value, grad) for every learnable parameter.

        Grad arrays are rebound on every backward pass, so call this after
        backward, not once up front.
        """
        out = []
        for i, layer in enumerate(self.layers):
            for role, value, grad in layer.params():
                out.append((i, role, value, grad))
        return out

    def state_entries(self):
        """(layer_index, role, value) for all persisted arrays, incl. BN stats."""
        out = []
        for i, layer in enumerate(self.layers):
            for role, value in layer.state().items():
                out.append((i, role, value))
        return out

    def get_state(self):
        return {(i, role): value.copy() for i, role, value in self.state_entries()}

    def set_state(self, state):
        attr_for_role = {"weight": "w", "bias": "b"}
        seen = set()
        for i, layer in enumerate(self.layers):
            for role in layer.state():
                key = (i, role)
                if key not in state:
                    raise ValueError(f"missing weights for layer {i} role {role}")
                value = np.asarray(state[key], dtype=np.float64)
                current = layer.state()[role]
                if value.shape != current.shape:
                    raise ValueError(
                        f"layer {i} role {role}: shape {value.shape} != {current.shape}"
                    )
                setattr(layer, attr_for_role.get(role, role), value.copy())
                seen.add(key)
        extra = set(state) - seen
        if extra:
            raise ValueError(f"weights contain unknown entries: {sorted(extra)}")
