"""FSNet at desk scale: spectral-gate stem, micro residual encoder,
multi-spectral channel attention and a two-layer decoder head.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from functools import lru_cache

import numpy as np

from .autodiff import functional as F
from .autodiff.checkpoint import load_arrays, save_arrays
from .autodiff.layers import BatchNorm, Conv2d, Layer, Linear
from .autodiff.optim import AdamW
from .autodiff.tensor import Tape, Tensor
from .errors import FormatError, ShapeError
from .image_core import RasterImage, bilinear_matrix, resize_bilinear, resize_plane
from .prng import DetRng
from .spectral import dct_basis, dct_matrix, zigzag_order


@dataclass(frozen=True)
class FsnetConfig:
    input_size: int = 64
    c_stem: int = 16
    stages: tuple[int, ...] = (16, 32, 64)
    mask_size: int = 32
    n_freq: int = 16
    reduction: int = 4
    basis_ref: int = 8
    dropout: float = 0.3
    seed: int = 0
    # "filtered": R = idct(gated spectrum); "complement": R = x - idct(gated spectrum)
    residual_mode: str = "filtered"
    # "branch": pool descriptors over the frequency-branch axis; "spatial": pool each branch map
    dmsa_pooling: str = "branch"
    # ablation switches
    learnable_gate: bool = True
    fusion: bool = True
    multi_branch: bool = True
    extremum_pooling: bool = True
    # BN + ReLU on the stem output before the first stage
    stem_norm: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(int(s) for s in self.stages))
        if self.residual_mode not in ("filtered", "complement"):
            raise ValueError(f"residual_mode must be 'filtered' or 'complement', got {self.residual_mode!r}")
        if self.dmsa_pooling not in ("branch", "spatial"):
            raise ValueError(f"dmsa_pooling must be 'branch' or 'spatial', got {self.dmsa_pooling!r}")
        if not self.stages:
            raise ValueError("need at least one backbone stage")
        if self.input_size % (2 ** len(self.stages)):
            raise ValueError("input_size must be divisible by 2**len(stages)")
        if self.n_freq < 1 or self.n_freq > self.basis_ref ** 2:
            raise ValueError("n_freq must be in [1, basis_ref**2]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stages"] = list(self.stages)
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "FsnetConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**obj)


def _const(arr: np.ndarray, dtype) -> Tensor:
    return Tensor(np.asarray(arr, dtype=dtype))


def fixed_highpass_mask(n: int) -> np.ndarray:
    """Ramp from 0 at DC to 1 at the highest diagonal frequency (gate ablation)."""
    u = np.arange(n)
    return (u[:, None] + u[None, :]) / (2.0 * (n - 1))


class Aspm(Layer):
    """Learnable DCT-domain gate, residual fusion and a 3x3 fusion conv."""

    def __init__(self, cfg: FsnetConfig, rng: DetRng):
        super().__init__()
        self.cfg = cfg
        if cfg.learnable_gate:
            self.mask = Tensor.parameter(np.ones((cfg.mask_size, cfg.mask_size)))
            self._params["mask"] = self.mask
        else:
            self.mask = Tensor(fixed_highpass_mask(cfg.mask_size).astype(np.float32))
        self.conv = Conv2d(3, cfg.c_stem, 3, rng)
        self._params.update({f"conv.{k}": v for k, v in self.conv.named_parameters()})

    def gate(self, h: int, w: int) -> Tensor:
        """Mask resized bilinearly to ``h x w``."""
        n = self.cfg.mask_size
        ah = _const(bilinear_matrix(n, h), self.mask.dtype)
        aw_t = _const(bilinear_matrix(n, w).T, self.mask.dtype)
        return F.matmul(F.matmul(ah, self.mask), aw_t)

    def spatial_residual(self, x: Tensor) -> Tensor:
        h, w = x.shape[-2:]
        dh = dct_matrix(h)
        dw = dct_matrix(w)
        freq = F.matmul(F.matmul(_const(dh, x.dtype), x), _const(dw.T, x.dtype))
        gated = F.mul(freq, self.gate(h, w))
        r = F.matmul(F.matmul(_const(dh.T, x.dtype), gated), _const(dw, x.dtype))
        if self.cfg.residual_mode == "complement":
            r = F.sub(x, r)
        return r

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"ASPM expects N x 3 x H x W, got {x.shape}")
        if min(x.shape[-2:]) < 8:
            raise ShapeError("ASPM needs H, W >= 8")
        return self.conv(self.fusion_input(x))

    def fusion_input(self, x: Tensor) -> Tensor:
        r = self.spatial_residual(x)
        fused = F.add(x, r)
        if self.cfg.fusion:
            fused = F.add(fused, F.maxpool2d(r, 3, 1, 1))
        return fused


class ResidualStage(Layer):
    """maxpool 2 -> conv3 -> BN -> ReLU -> conv3 -> BN (+ skip) -> ReLU."""

    def __init__(self, c_in: int, c_out: int, rng: DetRng):
        super().__init__()
        self.conv1 = Conv2d(c_in, c_out, 3, rng, bias=False)
        self.bn1 = BatchNorm(c_out)
        self.conv2 = Conv2d(c_out, c_out, 3, rng, bias=False)
        self.bn2 = BatchNorm(c_out)
        self.proj = Conv2d(c_in, c_out, 1, rng, bias=False) if c_in != c_out else None
        for name in ("conv1", "bn1", "conv2", "bn2", "proj"):
            layer = getattr(self, name)
            if layer is None:
                continue
            self._params.update({f"{name}.{k}": v for k, v in layer.named_parameters()})
            self._buffers.update({f"{name}.{k}": v for k, v in layer.named_buffers()})

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        x = F.maxpool2d(x, 2)
        y = F.relu(self.bn1(self.conv1(x), training))
        y = self.bn2(self.conv2(y), training)
        skip = self.proj(x) if self.proj is not None else x
        return F.relu(F.add(y, skip))


class Backbone(Layer):
    def __init__(self, cfg: FsnetConfig, rng: DetRng):
        super().__init__()
        self.stages = []
        c_in = cfg.c_stem
        self.stem_bn = BatchNorm(c_in) if cfg.stem_norm else None
        if self.stem_bn is not None:
            self._params.update({f"stem_bn.{k}": v for k, v in self.stem_bn.named_parameters()})
            self._buffers.update({f"stem_bn.{k}": v for k, v in self.stem_bn.named_buffers()})
        for i, c_out in enumerate(cfg.stages):
            stage = ResidualStage(c_in, c_out, rng)
            self.stages.append(stage)
            self._params.update({f"stage{i}.{k}": v for k, v in stage.named_parameters()})
            self._buffers.update({f"stage{i}.{k}": v for k, v in stage.named_buffers()})
            c_in = c_out

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        if self.stem_bn is not None:
            x = F.relu(self.stem_bn(x, training))
        for stage in self.stages:
            x = stage(x, training)
        return x


@lru_cache(maxsize=32)
def dmsa_basis_matrix(freqs: tuple[tuple[int, int], ...], ref: int, h: int, w: int) -> np.ndarray:
    """``(h*w) x K`` matrix whose columns are the resized attention bases."""
    cols = [resize_plane(dct_basis(u, v, ref, ref), h, w).reshape(-1) for u, v in freqs]
    m = np.stack(cols, axis=1)
    m.setflags(write=False)
    return m


class Dmsa(Layer):
    def __init__(self, cfg: FsnetConfig, channels: int, rng: DetRng):
        super().__init__()
        self.cfg = cfg
        self.channels = channels
        if cfg.multi_branch:
            self.freqs = tuple(zigzag_order(cfg.basis_ref, cfg.basis_ref)[:cfg.n_freq])
        else:
            self.freqs = ((0, 0),)
        hidden = max(1, channels // cfg.reduction)
        self.fc1 = Linear(channels, hidden, rng)
        self.fc2 = Linear(hidden, channels, rng, gain=1.0)
        self._params.update({f"fc1.{k}": v for k, v in self.fc1.named_parameters()})
        self._params.update({f"fc2.{k}": v for k, v in self.fc2.named_parameters()})
        self.last_descriptors: np.ndarray | None = None
        self.last_attention: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.freqs)

    def spectral_descriptors(self, f: Tensor) -> Tensor:
        """Projection of each channel onto each basis: N x C x K."""
        n, c, h, w = f.shape
        basis = _const(dmsa_basis_matrix(self.freqs, self.cfg.basis_ref, h, w), f.dtype)
        return F.matmul(F.reshape(f, (n, c, h * w)), basis)

    def pooled(self, f: Tensor) -> Tensor:
        k = self.k
        if self.cfg.dmsa_pooling == "spatial":
            n, c, h, w = f.shape
            basis = dmsa_basis_matrix(self.freqs, self.cfg.basis_ref, h, w).T
            maps = F.mul(F.reshape(f, (n, c, 1, h * w)), _const(basis, f.dtype))
            v_avg = F.sum(F.mean(maps, axis=3), axis=2)
            if not self.cfg.extremum_pooling:
                return F.mul(v_avg, 3.0 / k)
            v_max = F.sum(F.amax(maps, axis=3), axis=2)
            v_min = F.sum(F.amin(maps, axis=3), axis=2)
        else:
            s = self.spectral_descriptors(f)
            self.last_descriptors = s.data
            v_avg = F.mean(s, axis=2)
            if not self.cfg.extremum_pooling:
                return F.mul(v_avg, 3.0 / k)
            v_max = F.amax(s, axis=2)
            v_min = F.amin(s, axis=2)
        return F.mul(F.add(F.add(v_avg, v_max), v_min), 1.0 / k)

    def attention(self, f: Tensor) -> Tensor:
        v = self.pooled(f)
        v_total = F.sigmoid(self.fc2(F.relu(self.fc1(v))))
        self.last_attention = v_total.data
        return v_total

    def __call__(self, f: Tensor) -> Tensor:
        if f.ndim != 4 or f.shape[1] != self.channels:
            raise ShapeError(f"DMSA expects N x {self.channels} x H x W, got {f.shape}")
        v_total = self.attention(f)
        n, c = v_total.shape
        return F.mul(f, F.reshape(v_total, (n, c, 1, 1)))


class Decoder(Layer):
    def __init__(self, cfg: FsnetConfig, channels: int, rng: DetRng):
        super().__init__()
        hidden = max(1, channels // 2)
        self.fc1 = Linear(channels, hidden, rng)
        self.bn = BatchNorm(hidden)
        self.fc2 = Linear(hidden, 2, rng, gain=0.01)
        self.p = cfg.dropout
        self.rng = DetRng(cfg.seed ^ 0xD20F)
        for name in ("fc1", "bn", "fc2"):
            layer = getattr(self, name)
            self._params.update({f"{name}.{k}": v for k, v in layer.named_parameters()})
            self._buffers.update({f"{name}.{k}": v for k, v in layer.named_buffers()})

    def __call__(self, z2d: Tensor, training: bool) -> Tensor:
        z = F.avgpool_global(z2d)
        h = F.relu(self.bn(self.fc1(z), training))
        h = F.dropout(h, self.p, training, self.rng)
        return self.fc2(h)


class FsnetModel(Layer):
    def __init__(self, cfg: FsnetConfig | None = None):
        super().__init__()
        self.cfg = cfg or FsnetConfig()
        rng = DetRng(self.cfg.seed)
        self.aspm = Aspm(self.cfg, rng)
        self.backbone = Backbone(self.cfg, rng)
        c = self.cfg.stages[-1]
        self.dmsa = Dmsa(self.cfg, c, rng)
        self.decoder = Decoder(self.cfg, c, rng)
        for name in ("aspm", "backbone", "dmsa", "decoder"):
            part = getattr(self, name)
            self._params.update({f"{name}.{k}": v for k, v in part.named_parameters()})
            self._buffers.update({f"{name}.{k}": v for k, v in part.named_buffers()})

    def parameters(self) -> list[Tensor]:
        return list(self._params.values())

    def parameter_groups(self) -> dict[str, list[Tensor]]:
        groups: dict[str, list[Tensor]] = {}
        for name, p in self._params.items():
            key = name.split(".")[0]
            if name == "aspm.mask":
                key = "mask"
            groups.setdefault(key, []).append(p)
        return groups

    def zero_grad(self):
        for p in self._params.values():
            p.zero_grad()

    def astype(self, dtype) -> "FsnetModel":
        """Cast every parameter in place (float64 for gradient checks)."""
        for p in self._params.values():
            p.data = p.data.astype(dtype)
            p.zero_grad()
        return self

    def features(self, x: Tensor, training: bool) -> Tensor:
        stem = self.aspm(x)
        deep = self.backbone(stem, training)
        return self.dmsa(deep)

    def __call__(self, x, training: bool = False) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=np.float32))
        if x.ndim != 4:
            raise ShapeError(f"FSNet expects a batch N x 3 x H x W, got {x.shape}")
        return self.decoder(self.features(x, training), training)

    @property
    def mask_values(self) -> np.ndarray:
        return self.aspm.mask.data

    # ---------------------------------------------------------- persistence

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {f"param/{k}": v.data for k, v in self._params.items()}
        arrays.update({f"buffer/{k}": v for k, v in self._buffers.items()})
        arrays["rng/decoder_dropout"] = np.array([self.decoder.rng.state], dtype=np.uint64)
        return arrays

    def save(self, path, extra_meta: dict | None = None):
        meta = {"model_config": self.cfg.to_dict()}
        if extra_meta:
            meta.update(extra_meta)
        save_arrays(path, self.state_arrays(), meta)

    @classmethod
    def load(cls, path) -> "FsnetModel":
        arrays, meta = load_arrays(path)
        if "model_config" not in meta:
            raise FormatError(f"{path}: checkpoint has no model_config")
        model = cls(FsnetConfig.from_dict(meta["model_config"]))
        for k, p in model._params.items():
            src = arrays[f"param/{k}"]
            if src.shape != p.shape:
                raise FormatError(f"{path}: {k} has shape {src.shape}, expected {p.shape}")
            p.data[...] = src
        for k, b in model._buffers.items():
            b[...] = arrays[f"buffer/{k}"]
        if "rng/decoder_dropout" in arrays:
            model.decoder.rng.state = int(arrays["rng/decoder_dropout"][0])
        return model


# -------------------------------------------------------------- functional API

def aspm_forward(model_or_aspm, x: Tensor) -> Tensor:
    aspm = model_or_aspm.aspm if isinstance(model_or_aspm, FsnetModel) else model_or_aspm
    if x.ndim == 3:
        return F.reshape(aspm(F.reshape(x, (1,) + x.shape)), (aspm.cfg.c_stem,) + x.shape[1:])
    return aspm(x)


def dmsa_forward(model_or_dmsa, f: Tensor) -> Tensor:
    dmsa = model_or_dmsa.dmsa if isinstance(model_or_dmsa, FsnetModel) else model_or_dmsa
    if f.ndim == 3:
        return F.reshape(dmsa(F.reshape(f, (1,) + f.shape)), f.shape)
    return dmsa(f)


def backbone_forward(model: FsnetModel, x: Tensor, training: bool = False) -> Tensor:
    return model.backbone(x, training)


def decoder_forward(model: FsnetModel, z2d: Tensor, training: bool = False) -> Tensor:
    return model.decoder(z2d, training)


def fsnet_forward(model: FsnetModel, batch, training: bool = False) -> Tensor:
    return model(batch, training)


def make_optimizer(model: FsnetModel, lr: float = 1e-3, weight_decay: float = 0.01,
                   mask_lr_scale: float = 1.0) -> AdamW:
    """AdamW over all parameters; the ASPM mask may get its own lr multiplier."""
    scales = [mask_lr_scale if name == "aspm.mask" else 1.0 for name in model._params]
    return AdamW(model.parameters(), lr=lr, weight_decay=weight_decay, lr_scales=scales)


def train_step(model: FsnetModel, optimizer: AdamW, batch, labels) -> float:
    """One AdamW step on cross-entropy; returns the pre-step loss."""
    x = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch, dtype=np.float32))
    with Tape() as tape:
        loss = F.cross_entropy_logits(model(x, training=True), labels)
    tape.backward(loss)
    optimizer.step()
    optimizer.zero_grad()
    return float(loss.data)


def image_to_array(img: RasterImage, size: int) -> np.ndarray:
    """Resize to ``size x size`` and scale to [0, 1]; returns 3 x size x size float32."""
    if (img.height, img.width) != (size, size):
        img = resize_bilinear(img, size, size)
    return (img.samples.astype(np.float32) / 255.0).transpose(2, 0, 1).copy()


def images_to_batch(images, size: int) -> np.ndarray:
    return np.stack([image_to_array(im, size) for im in images])


def predict_batch(model: FsnetModel, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode labels and softmax probabilities for an N x 3 x H x W array."""
    logits = model(Tensor(np.asarray(batch, dtype=np.float32)), training=False).data
    probs = F.softmax(logits)
    return logits.argmax(axis=1), probs


def predict(model: FsnetModel, image: RasterImage) -> tuple[int, np.ndarray]:
    labels, probs = predict_batch(model, image_to_array(image, model.cfg.input_size)[None])
    return int(labels[0]), probs[0]


__all__ = [
    "Aspm", "Backbone", "Decoder", "Dmsa", "FsnetConfig", "FsnetModel", "ResidualStage",
    "aspm_forward", "backbone_forward", "decoder_forward", "dmsa_forward", "fsnet_forward",
    "image_to_array", "images_to_batch", "make_optimizer", "predict", "predict_batch",
    "train_step",
]
