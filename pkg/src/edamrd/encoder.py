"""
Spectral-mixing / self-attention image encoder and classification heads.

Tokens are kept on a single-resolution ``h x w`` grid (14 x 14 for a
224 px diagram with 16 px patches). Each block pair is

    spectral:  x + MLP_dw(LN(IFFT2(K * FFT2(LN(x)))))
    attention: x + MHA(LN(x)), then  x + MLP(LN(x))

Tensors inside the encoder use channels-last layout ``(B, h, w, d)``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .dataio import atomic_write
from .errors import ConfigError, FileError, InvalidParameterError

CHECKPOINT_FORMAT = "edamrd-checkpoint/1"


@dataclass(frozen=True)
class EncoderConfig:
    image_size: int = 224
    patch_size: int = 16
    in_chans: int = 1
    embed_dim: int = 64
    n_blocks: int = 2
    n_heads: int = 4
    mlp_ratio: float = 2.0
    dw_kernel: int = 3
    n_classes: int = 3

    def __post_init__(self):
        if self.image_size % self.patch_size:
            raise ConfigError(f"image size {self.image_size} not divisible by patch size {self.patch_size}")
        if self.embed_dim % self.n_heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by n_heads {self.n_heads}")
        if self.dw_kernel % 2 == 0:
            raise ConfigError("depthwise kernel size must be odd")

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def hidden_dim(self) -> int:
        return int(round(self.embed_dim * self.mlp_ratio))


class PatchEmbed(nn.Module):
    """Non-overlapping patch projection plus learned positional encodings."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.proj = nn.Conv2d(cfg.in_chans, cfg.embed_dim, cfg.patch_size, stride=cfg.patch_size)
        self.pos = nn.Parameter(torch.zeros(1, cfg.grid, cfg.grid, cfg.embed_dim))
        nn.init.trunc_normal_(self.pos, std=0.02)

    def forward(self, images):
        c, s = self.cfg.in_chans, self.cfg.image_size
        if images.dim() != 4 or images.shape[2:] != (s, s):
            raise ConfigError(f"expected images of shape (B, C, {s}, {s}), got {tuple(images.shape)}")
        if images.shape[1] != c:
            if images.shape[1] == 1:
                images = images.expand(-1, c, -1, -1)
            else:
                raise ConfigError(f"expected {c} input channel(s), got {images.shape[1]}")
        return self.proj(images).permute(0, 2, 3, 1) + self.pos


class GlobalFilter(nn.Module):
    """Element-wise complex filter in the 2-D Fourier domain of the token grid."""

    def __init__(self, h: int, w: int, d: int):
        super().__init__()
        k = torch.zeros(h, w, d, 2)
        k[..., 0] = 1.0
        self.K = nn.Parameter(k)

    def forward(self, x):
        X = torch.fft.fft2(x, dim=(1, 2))
        K = torch.view_as_complex(self.K)
        return torch.fft.ifft2(X * K, dim=(1, 2)).real


class ConvMLP(nn.Module):
    """W2 . GELU(DWConv(W1 . x + b1)) + b2 on the token grid."""

    def __init__(self, d: int, hidden: int, kernel: int = 3):
        super().__init__()
        self.fc1 = nn.Linear(d, hidden)
        self.dw = nn.Conv2d(hidden, hidden, kernel, padding=kernel // 2, groups=hidden)
        self.fc2 = nn.Linear(hidden, d)

    def forward(self, x):
        h = self.fc1(x).permute(0, 3, 1, 2)
        h = self.dw(h).permute(0, 2, 3, 1)
        return self.fc2(F.gelu(h))


class MLP(nn.Module):
    def __init__(self, d: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(d, hidden)
        self.fc2 = nn.Linear(hidden, d)

    def forward(self, x):
        return self.fc2(F.gelu(self.fc1(x)))


class SpectralLayer(nn.Module):
    def __init__(self, cfg: EncoderConfig, residual: bool = True):
        super().__init__()
        g = cfg.grid
        self.norm1 = nn.LayerNorm(cfg.embed_dim)
        self.filter = GlobalFilter(g, g, cfg.embed_dim)
        self.norm2 = nn.LayerNorm(cfg.embed_dim)
        self.mlp = ConvMLP(cfg.embed_dim, cfg.hidden_dim, cfg.dw_kernel)
        self.residual = residual

    def forward(self, x):
        y = self.mlp(self.norm2(self.filter(self.norm1(x))))
        return x + y if self.residual else y


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention; scale is 1/sqrt(head_dim)."""

    def __init__(self, d: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.wq = nn.Linear(d, d, bias=False)
        self.wk = nn.Linear(d, d, bias=False)
        self.wv = nn.Linear(d, d, bias=False)
        self.proj = nn.Linear(d, d, bias=False)
        self.last_weights = None

    def forward(self, x, keep_weights: bool = False):
        B, N, d = x.shape
        hd = d // self.n_heads

        def split(t):
            return t.view(B, N, self.n_heads, hd).transpose(1, 2)

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        att = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(hd), dim=-1)
        if keep_weights:
            self.last_weights = att.detach()
        out = (att @ v).transpose(1, 2).reshape(B, N, d)
        return self.proj(out)


class AttentionLayer(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.embed_dim)
        self.attn = MultiHeadAttention(cfg.embed_dim, cfg.n_heads)
        self.norm2 = nn.LayerNorm(cfg.embed_dim)
        self.mlp = MLP(cfg.embed_dim, cfg.hidden_dim)

    def forward(self, x, keep_weights: bool = False):
        B, h, w, d = x.shape
        seq = x.reshape(B, h * w, d)
        seq = seq + self.attn(self.norm1(seq), keep_weights=keep_weights)
        seq = seq + self.mlp(self.norm2(seq))
        return seq.reshape(B, h, w, d)


class Encoder(nn.Module):
    def __init__(self, cfg: EncoderConfig = EncoderConfig()):
        super().__init__()
        self.cfg = cfg
        self.patch = PatchEmbed(cfg)
        layers = []
        for _ in range(cfg.n_blocks):
            layers += [SpectralLayer(cfg), AttentionLayer(cfg)]
        self.layers = nn.ModuleList(layers)

    def patchify(self, images):
        return self.patch(images)

    def forward(self, images):
        x = self.patchify(images)
        for layer in self.layers:
            x = layer(x)
        return x.mean(dim=(1, 2))


def fuse(embeddings, mode: str):
    """Late fusion of per-representation embeddings (``add`` or ``concat``)."""
    if len(embeddings) < 2:
        raise InvalidParameterError("fusion needs at least two embeddings")
    if mode == "add":
        shapes = {tuple(e.shape) for e in embeddings}
        if len(shapes) != 1:
            raise InvalidParameterError(f"add fusion needs equal shapes, got {sorted(shapes)}")
        out = embeddings[0]
        for e in embeddings[1:]:
            out = out + e
        return out
    if mode == "concat":
        return torch.cat(list(embeddings), dim=-1)
    raise InvalidParameterError(f"unknown fusion mode {mode!r}")


class PainModel(nn.Module):
    """Encoder, post-encoder dropout and a linear classification head.

    ``fusion="mrd"`` takes one diagram per sample, input ``(B, 1, H, W)``.
    ``"add"`` / ``"concat"`` take ``(B, k, H, W)``: one single-representation
    image per view, encoded by the shared encoder then fused.
    """

    def __init__(self, cfg: EncoderConfig = EncoderConfig(), fusion: str = "mrd", n_views: int = 1):
        super().__init__()
        if fusion not in ("mrd", "add", "concat"):
            raise InvalidParameterError(f"unknown fusion mode {fusion!r}")
        if fusion == "mrd" and n_views != 1:
            raise InvalidParameterError("a multi-representation diagram is a single view")
        if fusion != "mrd" and n_views < 2:
            raise InvalidParameterError("late fusion needs at least two views")
        self.cfg = cfg
        self.fusion = fusion
        self.n_views = n_views
        self.encoder = Encoder(cfg)
        self.dropout = nn.Dropout(0.0)
        width = cfg.embed_dim * (n_views if fusion == "concat" else 1)
        self.head = nn.Linear(width, cfg.n_classes)

    def set_dropout(self, p: float) -> None:
        self.dropout.p = float(p)

    def embed(self, views):
        if self.fusion == "mrd":
            return self.encoder(views)
        return fuse([self.encoder(views[:, i:i + 1]) for i in range(views.shape[1])], self.fusion)

    def classify(self, embedding):
        return self.head(embedding)

    def forward(self, views):
        return self.classify(self.dropout(self.embed(views)))


def images_to_tensor(images, dtype=torch.float32):
    """uint8 ``(B, k, H, W)`` array -> ink intensity in [0, 1].

    Pixels are inverted so the trace is 1 and the background is 0; blank
    patches then embed to the projection bias alone.
    """
    return 1.0 - torch.as_tensor(np.asarray(images), dtype=dtype) / 255.0


def save_checkpoint(model: PainModel, directory, extra: dict | None = None) -> None:
    """Write ``manifest.json`` + ``weights.bin`` (flat little-endian blob)."""
    os.makedirs(directory, exist_ok=True)
    entries, chunks, offset = [], [], 0
    for name, tensor in model.state_dict().items():
        arr = tensor.detach().cpu().numpy()
        dt = "<f8" if arr.dtype == np.float64 else "<f4"
        data = arr.astype(dt).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": dt,
                        "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "encoder": asdict(model.cfg),
        "fusion": model.fusion,
        "n_views": model.n_views,
        "tensors": entries,
        "extra": extra or {},
    }
    atomic_write(os.path.join(directory, "weights.bin"), b"".join(chunks))
    atomic_write(os.path.join(directory, "manifest.json"),
                 (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())


def load_checkpoint(directory) -> tuple[PainModel, dict]:
    mpath = os.path.join(directory, "manifest.json")
    bpath = os.path.join(directory, "weights.bin")
    try:
        with open(mpath) as fh:
            manifest = json.load(fh)
        with open(bpath, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FileError(str(exc), directory) from exc
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise FileError(f"unsupported checkpoint format {manifest.get('format')!r}", mpath)
    model = PainModel(EncoderConfig(**manifest["encoder"]), manifest["fusion"], manifest["n_views"])
    state = {}
    for e in manifest["tensors"]:
        raw = blob[e["offset"]:e["offset"] + e["nbytes"]]
        state[e["name"]] = torch.from_numpy(np.frombuffer(raw, dtype=e["dtype"]).reshape(e["shape"]).copy())
    if any(e["dtype"] == "<f8" for e in manifest["tensors"]):
        model = model.double()
    model.load_state_dict(state)
    return model, manifest
