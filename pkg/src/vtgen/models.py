"""Generator, critic, classifier and perceptual extractor.

All networks take single-channel ``[B, 1, S, S]`` tensors. Spatial sizes in
the docstrings below assume the desk configuration (S = 64).
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from vtgen.errors import CheckpointError, ValidationError

CHECKPOINT_FORMAT = "vtgen-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class GeneratorConfig:
    input_size: int = 64
    base_channels: int = 16
    n_levels: int = 3
    max_channels: int = 512
    rf_blocks: int = 9
    label_feature_channels: int = 32
    use_rf: bool = True
    output_activation: str = "tanh"

    def __post_init__(self):
        if self.n_levels < 1:
            raise ValidationError("n_levels must be >= 1")
        if self.input_size % (2 ** self.n_levels):
            raise ValidationError(
                f"input_size {self.input_size} is not 2^{self.n_levels} x bottleneck")
        if self.rf_blocks < 0:
            raise ValidationError("rf_blocks must be >= 0")
        if self.output_activation != "tanh":
            raise ValidationError("only tanh output is supported")

    @property
    def bottleneck_size(self) -> int:
        return self.input_size // 2 ** self.n_levels

    def channels(self, level: int) -> int:
        return min(self.base_channels * 2 ** level, self.max_channels)

    @property
    def bottleneck_channels(self) -> int:
        return self.channels(self.n_levels - 1)


@dataclass
class CriticConfig:
    input_size: int = 64
    base_channels: int = 16
    n_layers: int = 4
    max_channels: int = 256

    def __post_init__(self):
        if self.n_layers < 2:
            raise ValidationError("critic needs at least 2 feature layers")
        if self.input_size % (2 ** self.n_layers):
            raise ValidationError("input_size not divisible by 2^n_layers")


@dataclass
class ClassifierConfig:
    input_size: int = 64
    n_classes: int = 3
    widths: tuple = (16, 32, 32, 32)

    def __post_init__(self):
        self.widths = tuple(self.widths)
        if self.input_size % (2 ** len(self.widths)):
            raise ValidationError("input_size not divisible by 2^blocks")

    @property
    def reduction(self) -> int:
        return 2 ** len(self.widths)

    @property
    def feature_channels(self) -> int:
        return self.widths[-1]


@dataclass
class EncoderFeature:
    bottleneck: torch.Tensor
    skips: list = field(default_factory=list)


@dataclass
class CriticOutput:
    score: torch.Tensor
    features: list


def _norm(kind, channels, spatial):
    # a 1x1 map has no spatial statistics; instance norm would zero it
    if kind == "instance":
        return nn.InstanceNorm2d(channels, affine=True) if spatial > 1 else nn.Identity()
    if kind == "layer":
        return nn.GroupNorm(1, channels)
    raise ValueError(kind)


class ResidualBlock(nn.Module):
    """conv-norm-ReLU-conv-norm plus identity shortcut."""

    def __init__(self, channels, spatial):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, 1, 1),
            _norm("instance", channels, spatial),
            nn.ReLU(),
            nn.Conv2d(channels, channels, 3, 1, 1),
            _norm("instance", channels, spatial),
        )

    def forward(self, x):
        return x + self.body(x)


class Generator(nn.Module):
    """U-Net with a residue-fusion bottleneck.

    The encoder halves the spatial size per level with 4x4 stride-2
    convolutions; the decoder mirrors it with transposed convolutions and
    concatenates the encoder output of the matching resolution.
    """

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        n = cfg.n_levels
        self.down = nn.ModuleList()
        in_ch, size = 1, cfg.input_size
        for level in range(n):
            out_ch = cfg.channels(level)
            size //= 2
            self.down.append(nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 4, 2, 1),
                _norm("instance", out_ch, size),
                nn.ReLU(),
            ))
            in_ch = out_ch

        c_e = cfg.bottleneck_channels
        if cfg.use_rf:
            self.label_proj = nn.Conv2d(cfg.label_feature_channels, c_e, 1)
            self.fuse_proj = nn.Conv2d(2 * c_e, c_e, 1)
            self.rf = nn.Sequential(*[ResidualBlock(c_e, cfg.bottleneck_size)
                                      for _ in range(cfg.rf_blocks)])

        self.up = nn.ModuleList()
        in_ch = c_e
        for j in range(n):
            level = n - 2 - j
            last = level < 0
            out_ch = 1 if last else cfg.channels(level)
            layers = [nn.ConvTranspose2d(in_ch, out_ch, 4, 2, 1)]
            if last:
                layers.append(nn.Tanh())
            else:
                layers += [_norm("instance", out_ch, cfg.input_size >> (level + 1)), nn.ReLU()]
            self.up.append(nn.Sequential(*layers))
            in_ch = 2 * out_ch

    def encode(self, x) -> EncoderFeature:
        s = self.cfg.input_size
        if x.dim() != 4 or x.shape[1] != 1 or x.shape[-2:] != (s, s):
            raise ValidationError(f"expected [B,1,{s},{s}] input, got {tuple(x.shape)}")
        skips = []
        h = x
        for layer in self.down:
            h = layer(h)
            skips.append(h)
        return EncoderFeature(h, skips[:-1])

    def rf_fuse(self, phi: EncoderFeature, psi):
        """Concatenate Phi with the projected, upsampled label feature psi."""
        if not self.cfg.use_rf:
            raise ValidationError("generator was built without residue fusion")
        bottleneck = phi.bottleneck if isinstance(phi, EncoderFeature) else phi
        psi = match_spatial(psi, bottleneck.shape[-1])
        fused = torch.cat([bottleneck, self.label_proj(psi)], dim=1)
        return self.rf(self.fuse_proj(fused))

    def decode(self, latent, skips):
        if len(skips) != self.cfg.n_levels - 1:
            raise ValidationError("skip list does not match n_levels")
        h = latent
        for j, layer in enumerate(self.up):
            h = layer(h)
            if j < len(skips):
                skip = skips[-1 - j]
                if skip.shape != h.shape:
                    raise ValidationError(
                        f"skip {tuple(skip.shape)} vs decoder {tuple(h.shape)}")
                h = torch.cat([h, skip], dim=1)
        return h

    def forward(self, x, psi=None):
        phi = self.encode(x)
        if self.cfg.use_rf:
            if psi is None:
                raise ValidationError("residue fusion needs the label feature psi")
            latent = self.rf_fuse(phi, psi)
        else:
            latent = phi.bottleneck
        return self.decode(latent, phi.skips)


def match_spatial(psi, size):
    """Nearest-neighbour upsample (or average-pool) psi to ``size``."""
    h = psi.shape[-1]
    if h == size:
        return psi
    if h < size:
        if size % h:
            raise ValidationError(f"cannot upsample {h} to {size} by an integer factor")
        return F.interpolate(psi, scale_factor=size // h, mode="nearest")
    if h % size:
        raise ValidationError(f"cannot pool {h} down to {size}")
    return F.avg_pool2d(psi, h // size)


class PatchCritic(nn.Module):
    """PatchGAN critic on the channel-concatenated (condition, candidate).

    Every down layer is 4x4 / stride 2 with layer norm and LeakyReLU; a 3x3
    head maps to an unbounded score per patch.
    """

    def __init__(self, cfg: CriticConfig):
        super().__init__()
        self.cfg = cfg
        self.layers = nn.ModuleList()
        in_ch = 2
        for i in range(cfg.n_layers):
            out_ch = min(cfg.base_channels * 2 ** i, cfg.max_channels)
            self.layers.append(nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 4, 2, 1),
                _norm("layer", out_ch, cfg.input_size >> (i + 1)),
                nn.LeakyReLU(0.2),
            ))
            in_ch = out_ch
        self.head = nn.Conv2d(in_ch, 1, 3, 1, 1)

    def forward(self, condition, candidate) -> CriticOutput:
        if condition.shape != candidate.shape:
            raise ValidationError(
                f"condition {tuple(condition.shape)} vs candidate {tuple(candidate.shape)}")
        h = torch.cat([condition, candidate], dim=1)
        features = []
        for layer in self.layers:
            h = layer(h)
            features.append(h)
        return CriticOutput(self.head(h), features)


class Classifier(nn.Module):
    """Compact conv classifier; its last feature map is the label feature."""

    def __init__(self, cfg: ClassifierConfig):
        super().__init__()
        self.cfg = cfg
        blocks, in_ch = [], 1
        for width in cfg.widths:
            blocks.append(nn.Sequential(
                nn.Conv2d(in_ch, width, 3, 1, 1),
                nn.BatchNorm2d(width),
                nn.ReLU(),
                nn.MaxPool2d(2),
            ))
            in_ch = width
        self.features = nn.Sequential(*blocks)
        self.head = nn.Linear(in_ch, cfg.n_classes)

    def forward(self, x):
        """Return ``(logits, label_feature_map)``."""
        s = self.cfg.input_size
        if x.dim() != 4 or x.shape[1] != 1 or x.shape[-2:] != (s, s):
            raise ValidationError(f"expected [B,1,{s},{s}] input, got {tuple(x.shape)}")
        fmap = self.features(x)
        return self.head(fmap.mean(dim=(2, 3))), fmap

    def embed(self, x):
        """Pooled penultimate features, used for FID."""
        return self.features(x).mean(dim=(2, 3))


def classifier_forward(x, classifier: Classifier):
    return classifier(x)


class PerceptualExtractor(nn.Module):
    """Frozen conv stack with fixed random weights; returns tapped activations."""

    def __init__(self, channels=(16, 32, 32), taps=None, seed=1234):
        super().__init__()
        layers, in_ch = [], 1
        for i, ch in enumerate(channels):
            layers.append(nn.Sequential(nn.Conv2d(in_ch, ch, 3, 1 if i == 0 else 2, 1), nn.ReLU()))
            in_ch = ch
        self.layers = nn.ModuleList(layers)
        self.taps = tuple(range(len(channels))) if taps is None else tuple(taps)
        init_weights(self, seed)
        freeze(self)

    def forward(self, x):
        out = []
        h = x
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i in self.taps:
                out.append(h)
        return out


def init_weights(model: nn.Module, seed):
    """Xavier-normal conv/linear weights, zero biases, identity norms."""
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                nn.init.xavier_normal_(m.weight, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, (nn.InstanceNorm2d, nn.GroupNorm, nn.BatchNorm2d)):
                if getattr(m, "weight", None) is not None:
                    m.weight.fill_(1.0)
                    m.bias.zero_()
    return model


def freeze(model: nn.Module):
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


def parameter_digest(model: nn.Module) -> str:
    h = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def config_digest(config) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(blob.encode()).hexdigest()


def save_checkpoint(path, config: dict, modules: dict, optimizers=None, step=0, extra=None):
    """Write a versioned checkpoint of named module/optimizer states."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config,
        "config_digest": config_digest(config),
        "step": int(step),
        "state": {k: m.state_dict() for k, m in modules.items()},
        "optim": {k: o.state_dict() for k, o in (optimizers or {}).items()},
        "extra": extra or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def load_checkpoint(path, expected_config=None, force=False):
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a vtgen checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')}")
    if config_digest(payload["config"]) != payload["config_digest"]:
        raise CheckpointError(f"{path}: stored config does not match its digest")
    if expected_config is not None and not force:
        if config_digest(expected_config) != payload["config_digest"]:
            raise CheckpointError(
                f"{path}: config digest mismatch (use --force to load anyway)")
    return payload


def build_classifier(cfg: ClassifierConfig, seed=0) -> Classifier:
    return init_weights(Classifier(cfg), seed)


def classifier_from_checkpoint(path_or_payload) -> Classifier:
    payload = path_or_payload
    if not isinstance(payload, dict):
        payload = load_checkpoint(path_or_payload)
    cfg = ClassifierConfig(**payload["config"]["classifier"])
    clf = Classifier(cfg)
    clf.load_state_dict(payload["state"]["classifier"])
    return freeze(clf)


def as_dict(cfg) -> dict:
    d = asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
