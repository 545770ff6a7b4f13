"""Transformer noise predictor: embed -> one pre-norm transformer block -> row projection."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import numeric as nm
from .embedding import EmbeddingConfig, embed_batch


NORM_PLACEMENTS = ("pre", "post", "none")


@dataclass(frozen=True)
class DenoiserConfig:
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    heads: int = 2
    ff_dim: int | None = None  # None -> same as embedding dim
    n_steps: int = 1000
    seed: int = 0
    norm: str = "none"  # "pre", "post" or "none"

    def __post_init__(self):
        if self.heads < 1 or self.dim % self.heads:
            raise ValueError(f"heads={self.heads} must divide D={self.dim}")
        if self.norm not in NORM_PLACEMENTS:
            raise ValueError(f"norm must be one of {NORM_PLACEMENTS}, got {self.norm!r}")
        if self.ff_dim is not None and self.ff_dim < 1:
            raise ValueError("ff_dim must be positive")

    @property
    def dim(self) -> int:
        return self.embedding.dim

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    @property
    def hidden(self) -> int:
        return self.dim if self.ff_dim is None else self.ff_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "DenoiserConfig":
        raw = dict(raw)
        raw["embedding"] = EmbeddingConfig(**raw["embedding"])
        return cls(**raw)


def param_shapes(config: DenoiserConfig) -> dict[str, tuple[int, ...]]:
    D, dk, F = config.dim, config.head_dim, config.hidden
    shapes: dict[str, tuple[int, ...]] = {}
    for h in range(config.heads):
        for w in ("q", "k", "v"):
            shapes[f"w_{w}{h}"] = (D, dk)
    shapes.update(
        w_o=(D, D),
        ln1_gain=(D,),
        ln1_offset=(D,),
        ln2_gain=(D,),
        ln2_offset=(D,),
        w_1=(D, F),
        b_1=(F,),
        w_2=(F, D),
        b_2=(D,),
        w_p=(D, 1),
        b_p=(1,),
    )
    return shapes


def init_params(config: DenoiserConfig, prng: nm.Prng) -> dict[str, np.ndarray]:
    """Weights ~ N(0, 1/D); biases and offsets zero; layer-norm gains one.

    The output projection ``w_p`` starts at zero so the untrained model
    predicts zero noise.
    """
    std = 1.0 / np.sqrt(config.dim)
    params = {}
    for name, shape in param_shapes(config).items():
        if name.startswith("w_") and name != "w_p":
            params[name] = prng.normal(shape) * std
        elif name.endswith("_gain"):
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return params


def zero_params(config: DenoiserConfig) -> dict[str, np.ndarray]:
    params = {name: np.zeros(shape) for name, shape in param_shapes(config).items()}
    for name in params:
        if name.endswith("_gain"):
            params[name] = np.ones_like(params[name])
    return params


def _attention(z: nm.Var, p: dict[str, nm.Var], config: DenoiserConfig, weights_out=None) -> nm.Var:
    heads = []
    inv_sqrt = 1.0 / np.sqrt(config.head_dim)
    for h in range(config.heads):
        q = nm.matmul(z, p[f"w_q{h}"])
        k = nm.matmul(z, p[f"w_k{h}"])
        v = nm.matmul(z, p[f"w_v{h}"])
        a = nm.softmax(nm.scale(nm.matmul(q, nm.transpose(k)), inv_sqrt))
        if weights_out is not None:
            weights_out.append(a.value)
        heads.append(nm.matmul(a, v))
    joined = heads[0] if len(heads) == 1 else nm.concat(heads, axis=-1)
    return nm.matmul(joined, p["w_o"])


def _ffn(z: nm.Var, p: dict[str, nm.Var]) -> nm.Var:
    hidden = nm.relu(nm.add_bias(nm.matmul(z, p["w_1"]), p["b_1"]))
    return nm.add_bias(nm.matmul(hidden, p["w_2"]), p["b_2"])


def _block(z: nm.Var, p: dict[str, nm.Var], config: DenoiserConfig) -> nm.Var:
    if config.norm == "pre":
        z1 = nm.add(z, _attention(nm.layer_norm(z, p["ln1_gain"], p["ln1_offset"]), p, config))
        return nm.add(z1, _ffn(nm.layer_norm(z1, p["ln2_gain"], p["ln2_offset"]), p))
    if config.norm == "post":
        z1 = nm.layer_norm(nm.add(z, _attention(z, p, config)), p["ln1_gain"], p["ln1_offset"])
        return nm.layer_norm(nm.add(z1, _ffn(z1, p)), p["ln2_gain"], p["ln2_offset"])
    z1 = nm.add(z, _attention(z, p, config))
    return nm.add(z1, _ffn(z1, p))


def forward(tape: nm.Tape, z: nm.Var, p: dict[str, nm.Var], config: DenoiserConfig) -> nm.Var:
    """Noise prediction (B, d, 1) from an embedded batch ``z`` of shape (B, d+1, D)."""
    rows = z.shape[-2]
    out = nm.add_bias(nm.matmul(_block(z, p, config), p["w_p"]), p["b_p"])
    return nm.slice_rows(out, 0, rows - 1)


def _bind(tape: nm.Tape, params: dict[str, np.ndarray], trainable: bool) -> dict[str, nm.Var]:
    if trainable:
        return {k: tape.parameter(k, v) for k, v in params.items()}
    return {k: tape.constant(v) for k, v in params.items()}


def loss_and_grads(x_t: np.ndarray, t: np.ndarray, target: np.ndarray, params, config: DenoiserConfig):
    """Batch MSE between predicted and true noise, with parameter gradients."""
    tape = nm.Tape()
    p = _bind(tape, params, trainable=True)
    z = tape.constant(embed_batch(x_t, t, config.embedding, config.n_steps))
    pred = forward(tape, z, p, config)
    loss = nm.mse_loss(pred, tape.constant(target[:, :, None]))
    return float(loss.value), tape.backward(loss)


def predict_noise_batch(x: np.ndarray, t: np.ndarray, params, config: DenoiserConfig) -> np.ndarray:
    tape = nm.Tape()
    p = _bind(tape, params, trainable=False)
    z = tape.constant(embed_batch(x, t, config.embedding, config.n_steps))
    return forward(tape, z, p, config).value[:, :, 0]


def predict_noise(x, t: int, params, config: DenoiserConfig) -> np.ndarray:
    if not 1 <= t <= config.n_steps:
        raise ValueError(f"timestep {t} outside [1, {config.n_steps}]")
    x = np.asarray(x, dtype=np.float64)
    return predict_noise_batch(x[None, :], np.array([t]), params, config)[0]


def attention(z: np.ndarray, params, config: DenoiserConfig, return_weights: bool = False):
    """Multi-head self-attention on a (rows, D) matrix (no normalization, no residual)."""
    tape = nm.Tape()
    p = _bind(tape, params, trainable=False)
    weights: list[np.ndarray] = []
    out = _attention(tape.constant(z), p, config, weights).value
    return (out, weights) if return_weights else out


def transformer_block(z: np.ndarray, params, config: DenoiserConfig) -> np.ndarray:
    tape = nm.Tape()
    return _block(tape.constant(z), _bind(tape, params, trainable=False), config).value


def save_checkpoint(path, params: dict[str, np.ndarray], config: DenoiserConfig, **meta) -> None:
    header = json.dumps({"config": config.to_dict(), "meta": meta}, sort_keys=True)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(header), **params)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], DenoiserConfig, dict]:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["__header__"]))
        params = {k: data[k].copy() for k in data.files if k != "__header__"}
    config = DenoiserConfig.from_dict(header["config"])
    expected = param_shapes(config)
    for name, shape in expected.items():
        if name not in params or params[name].shape != shape:
            raise ValueError(f"checkpoint {path}: parameter {name!r} missing or misshapen")
    return params, config, header.get("meta", {})
