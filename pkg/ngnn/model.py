import json
import struct
import logging
from dataclasses import dataclass, asdict, fields, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ngnn.graph import Block, Graph, SampledBlock
from ngnn.layers import GNNLayer, GatLayer, GcnLayer, NgnnBlock, SageLayer
from ngnn.tensor import ACTIVATIONS, Tensor, activation, dropout
from ngnn.utils.errors import CheckpointError, ConfigError, ShapeError, SpecParseError
from ngnn.utils.rng import make_rng
from ngnn.utils.system import canonical_json

logger = logging.getLogger(__name__)

ARCHS = ('gcn', 'sage', 'gat')
POSITIONS = ('none', 'input', 'hidden', 'output', 'all')
POSITION_ALIASES = {
    'hidden-only': 'hidden',
    'hidden-layers': 'hidden',
    'input-only': 'input',
    'output-only': 'output',
    'all-layers': 'all',
}

CHECKPOINT_MAGIC = b"NGNNCKPT"
CHECKPOINT_VERSION = 1

__all__ = [
    'ARCHS',
    'POSITIONS',
    'ModelConfig',
    'Model',
    'parse_ngnn_spec',
    'expand_ngnn_spec',
    'render_ngnn_spec',
    'attached_layers',
    'build_model',
    'model_forward',
    'model_param_count',
    'save_checkpoint',
    'load_checkpoint',
]


def parse_ngnn_spec(s: str) -> List[Tuple[int, str]]:
    """
    parse_ngnn_spec: parse strings such as "1-relu+1-sigmoid" or "2-relu".
    Grammar: <n>-<act> ("+" <n>-<act>)*, n >= 1, act one of the known activations.
    :return: the (count, activation) terms in order.
    """
    if not isinstance(s, str) or not s:
        raise SpecParseError("empty NGNN spec", 0)

    terms = []
    pos = 0
    while True:
        start = pos
        while pos < len(s) and s[pos].isdigit():
            pos += 1
        if pos == start:
            raise SpecParseError(f"expected a layer count in '{s}'", start)
        count = int(s[start:pos])
        if count < 1:
            raise SpecParseError(f"layer count must be at least 1 in '{s}'", start)
        if pos >= len(s) or s[pos] != '-':
            raise SpecParseError(f"expected '-' after the layer count in '{s}'", pos)
        pos += 1
        start = pos
        while pos < len(s) and (s[pos].isalpha() or s[pos] == '_'):
            pos += 1
        act = s[start:pos]
        if act not in ACTIVATIONS:
            raise SpecParseError(f"unknown activation '{act}' in '{s}', expected one of {ACTIVATIONS}", start)
        terms.append((count, act))
        if pos == len(s):
            return terms
        if s[pos] != '+':
            raise SpecParseError(f"expected '+' between terms in '{s}'", pos)
        pos += 1


def expand_ngnn_spec(s: str) -> List[str]:
    """The per-layer activation list of a spec; its length is the block depth k."""
    return [act for count, act in parse_ngnn_spec(s) for _ in range(count)]


def render_ngnn_spec(terms: Sequence[Tuple[int, str]]) -> str:
    return '+'.join(f"{count}-{act}" for count, act in terms)


@dataclass
class ModelConfig:
    """
    Attributes:
        arch: gcn, sage or gat.
        in_dim, hidden_dim, out_dim: input, hidden and output widths.
        num_layers: GNN layer count L (>= 2).
        heads: attention heads of the non-output GAT layers.
        ngnn_position: which layers get an NGNN block (none, input, hidden, output, all).
        ngnn_spec: block layout, e.g. "1-relu+1-sigmoid".
        inter_layer_activation: activation after non-output layers without a block.
        dropout: dropout between layers at train time.
    """
    arch: str = 'sage'
    in_dim: int = 100
    hidden_dim: int = 256
    out_dim: int = 47
    num_layers: int = 3
    heads: int = 8
    ngnn_position: str = 'none'
    ngnn_spec: str = '1-relu'
    inter_layer_activation: str = 'relu'
    dropout: float = 0.0

    def __post_init__(self):
        self.ngnn_position = POSITION_ALIASES.get(self.ngnn_position, self.ngnn_position)
        self.validate()

    def validate(self, prefix: str = 'model') -> None:
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown architecture '{self.arch}', expected one of {ARCHS}", field=f'{prefix}.arch')
        for name in ('in_dim', 'hidden_dim', 'out_dim'):
            if not isinstance(getattr(self, name), int) or getattr(self, name) <= 0:
                raise ConfigError("must be a positive integer", field=f'{prefix}.{name}')
        if not isinstance(self.num_layers, int) or self.num_layers < 2:
            raise ConfigError("at least two GNN layers are required", field=f'{prefix}.num_layers')
        if self.ngnn_position not in POSITIONS:
            raise ConfigError(f"unknown position '{self.ngnn_position}', expected one of {POSITIONS}",
                              field=f'{prefix}.ngnn_position')
        if self.ngnn_position != 'none':
            try:
                parse_ngnn_spec(self.ngnn_spec)
            except SpecParseError as e:
                raise ConfigError(str(e), field=f'{prefix}.ngnn_spec') from e
        if self.arch == 'gat' and (self.heads < 1 or self.hidden_dim % self.heads):
            raise ConfigError(f"hidden_dim {self.hidden_dim} is not divisible by {self.heads} heads",
                              field=f'{prefix}.heads')
        if self.inter_layer_activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation '{self.inter_layer_activation}'",
                              field=f'{prefix}.inter_layer_activation')
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("must lie in [0, 1)", field=f'{prefix}.dropout')

    @classmethod
    def from_dict(cls, data: Dict[str, Any], prefix: str = 'model') -> 'ModelConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown keys {unknown}", field=prefix)
        cfg = cls.__new__(cls)
        for f in fields(cls):
            setattr(cfg, f.name, data.get(f.name, f.default))
        cfg.ngnn_position = POSITION_ALIASES.get(cfg.ngnn_position, cfg.ngnn_position)
        cfg.validate(prefix)
        return cfg

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_changes(self, **changes: Any) -> 'ModelConfig':
        return replace(self, **changes)

    @property
    def block_activations(self) -> List[str]:
        return [] if self.ngnn_position == 'none' else expand_ngnn_spec(self.ngnn_spec)


def attached_layers(position: str, num_layers: int) -> List[int]:
    """Indices of the GNN layers that receive an NGNN block under a position policy."""
    position = POSITION_ALIASES.get(position, position)
    if position == 'none':
        return []
    if position == 'input':
        return [0]
    if position == 'hidden':
        return list(range(1, num_layers - 1))
    if position == 'output':
        return [num_layers - 1]
    if position == 'all':
        return list(range(num_layers))
    raise ConfigError(f"unknown position '{position}'", field='ngnn_position')


Hops = Union[Graph, Block, SampledBlock, Sequence[Block]]


class Model:

    def __init__(self, config: ModelConfig, layers: List[GNNLayer], blocks: Dict[int, NgnnBlock]):
        """
        Model: an L-layer GNN stack with NGNN blocks attached to some of its layers.
        Args:
            config: the originating configuration.
            layers: the GNN layers, input layer first.
            blocks: NGNN blocks keyed by the index of their host layer.
        """
        for i in range(len(layers) - 1):
            if layers[i].out_dim != layers[i + 1].in_dim:
                raise ShapeError(f"layer {i} outputs {layers[i].out_dim} columns, layer {i + 1} expects {layers[i + 1].in_dim}")
        self.config = config
        self.layers = layers
        self.blocks = blocks

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        """The parameter registry: every trainable tensor in a fixed order."""
        params = []
        for i, layer in enumerate(self.layers):
            params += [(f"layers.{i}.{name}", p) for name, p in layer.named_parameters()]
            if i in self.blocks:
                params += [(f"ngnn.{i}.{name}", p) for name, p in self.blocks[i].named_parameters()]
        return params

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_params(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def param_breakdown(self) -> List[Tuple[str, int]]:
        """(component, trainable scalars) per GNN layer and per attached block."""
        rows = []
        for i, layer in enumerate(self.layers):
            rows.append((f"layer {i}: {layer!r}", layer.num_params()))
            if i in self.blocks:
                rows.append((f"ngnn {i}: {self.blocks[i]!r}", self.blocks[i].num_params()))
        return rows

    def _hops(self, g: Hops) -> List[Block]:
        if isinstance(g, Graph):
            return [g.block] * self.num_layers
        if isinstance(g, Block):
            return [g] * self.num_layers
        hops = list(g.blocks if isinstance(g, SampledBlock) else g)
        if len(hops) != self.num_layers:
            raise ShapeError(f"{len(hops)} message-passing hops for {self.num_layers} layers")
        return hops

    def _layer_activation(self, i: int) -> str:
        return self.config.inter_layer_activation if i < self.num_layers - 1 else 'identity'

    def forward(self, g: Hops, x: Tensor, train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Run the stack. A layer with a block emits the block output, whose last activation stands in
        for the layer activation; an identity-terminated block is followed by the layer activation.
        Dropout applies between layers in train mode only.
        """
        if x.cols != self.config.in_dim:
            raise ShapeError(f"model expects input width {self.config.in_dim}, got {x.cols}")
        hops = self._hops(g)
        h = x
        for i, (layer, hop) in enumerate(zip(self.layers, hops)):
            z = layer.forward(hop, h)
            act = self._layer_activation(i)
            block = self.blocks.get(i)
            if block is not None:
                z = block.forward(z)
                if block.final_activation != 'identity':
                    act = 'identity'
            h = z if act == 'identity' else activation(z, act)
            if i < self.num_layers - 1:
                h = dropout(h, self.config.dropout, rng, training=train)
        return h

    def __call__(self, g: Hops, x: Tensor, train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        return self.forward(g, x, train=train, rng=rng)

    def __repr__(self) -> str:
        return f"Model({self.config.arch}, layers={self.num_layers}, blocks={sorted(self.blocks)})"


def _make_layer(cfg: ModelConfig, in_dim: int, out_dim: int, is_output: bool, rng, dtype) -> GNNLayer:
    if cfg.arch == 'sage':
        return SageLayer(in_dim, out_dim, rng, dtype)
    if cfg.arch == 'gcn':
        return GcnLayer(in_dim, out_dim, rng, dtype)
    # the output layer predicts class logits with a single head
    return GatLayer(in_dim, out_dim, 1 if is_output else cfg.heads, rng, dtype)


def build_model(cfg: ModelConfig, rng: Union[np.random.Generator, int], dtype=np.float32) -> Model:
    """
    build_model: instantiate the layers (in -> hidden -> ... -> hidden -> out) and attach NGNN blocks
    at the positions the policy names. Weights are Xavier-uniform, biases zero.
    :param cfg: the model configuration.
    :param rng: an initialization stream, or a seed (the 'init' stream of that seed is used).
    :param dtype: float32 for training, float64 for gradient checks.
    """
    cfg.validate()
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(int(rng), 'init')

    L = cfg.num_layers
    widths = [cfg.in_dim] + [cfg.hidden_dim] * (L - 1) + [cfg.out_dim]
    activations = cfg.block_activations
    layers: List[GNNLayer] = []
    blocks: Dict[int, NgnnBlock] = {}
    attach = set(attached_layers(cfg.ngnn_position, L))
    for i in range(L):
        layers.append(_make_layer(cfg, widths[i], widths[i + 1], i == L - 1, rng, dtype))
        if i in attach and activations:
            blocks[i] = NgnnBlock(widths[i + 1], activations, rng, dtype)
    model = Model(cfg, layers, blocks)
    logger.debug("built %r with %d parameters", model, model.num_params())
    return model


def model_forward(m: Model, g: Hops, x: Tensor, train_mode: bool = False,
                  rng: Optional[np.random.Generator] = None) -> Tensor:
    return m.forward(g, x, train=train_mode, rng=rng)


def model_param_count(m: Union[Model, ModelConfig]) -> int:
    """
    Exact trainable scalar count. A config is counted without allocating its weights.
    """
    if isinstance(m, Model):
        return m.num_params()
    cfg = m
    L = cfg.num_layers
    widths = [cfg.in_dim] + [cfg.hidden_dim] * (L - 1) + [cfg.out_dim]
    total = 0
    for i in range(L):
        fan_in, fan_out = widths[i], widths[i + 1]
        if cfg.arch == 'sage':
            total += 2 * fan_in * fan_out + fan_out
        elif cfg.arch == 'gcn':
            total += fan_in * fan_out + fan_out
        else:
            # per-head widths sum to fan_out, so the head count cancels out
            total += fan_in * fan_out + 2 * fan_out + fan_out
    k = len(cfg.block_activations)
    for i in attached_layers(cfg.ngnn_position, L):
        total += k * (widths[i + 1] ** 2 + widths[i + 1])
    return total


def save_checkpoint(m: Model, path: str) -> None:
    """
    Write NGNNCKPT: magic, u32 version, u32 length + canonical config JSON, u32 tensor count, then
    each registry tensor as u32 rows, u32 cols and little-endian float32 values.
    """
    config = canonical_json(m.config.to_dict()).encode('utf-8')
    params = m.parameters()
    with open(path, 'wb') as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack('<I', CHECKPOINT_VERSION))
        f.write(struct.pack('<I', len(config)))
        f.write(config)
        f.write(struct.pack('<I', len(params)))
        for p in params:
            f.write(struct.pack('<II', *p.shape))
            f.write(np.ascontiguousarray(p.data, dtype='<f4').tobytes())


class _Reader:
    def __init__(self, buf: bytes, path: str):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack('<I', self.take(4))[0]


def load_checkpoint(path: str) -> Model:
    """
    load_checkpoint: rebuild a model from a checkpoint file. The file is fully validated before a
    model is returned.
    """
    with open(path, 'rb') as f:
        reader = _Reader(f.read(), path)

    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a NGNN checkpoint")
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        config = ModelConfig.from_dict(json.loads(reader.take(reader.u32()).decode('utf-8')))
    except (ValueError, UnicodeDecodeError) as e:
        raise CheckpointError(f"{path}: bad embedded configuration ({e})") from e

    count = reader.u32()
    arrays = []
    for _ in range(count):
        rows, cols = reader.u32(), reader.u32()
        data = np.frombuffer(reader.take(rows * cols * 4), dtype='<f4').reshape(rows, cols)
        arrays.append(data.astype(np.float32))
    if reader.pos != len(reader.buf):
        raise CheckpointError(f"{path}: trailing bytes after the last tensor")

    model = build_model(config, 0)
    params = model.parameters()
    if len(params) != count:
        raise CheckpointError(f"{path}: {count} tensors stored, model has {len(params)}")
    for p, data in zip(params, arrays):
        if p.shape != data.shape:
            raise CheckpointError(f"{path}: tensor shape {data.shape} does not match {p.shape}")
    for p, data in zip(params, arrays):
        p.data[...] = data
    return model
