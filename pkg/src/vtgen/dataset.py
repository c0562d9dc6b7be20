"""Weakly paired visual/tactile corpus: originals, pairing, splits, payloads.

Directory layout written by :func:`materialize`::

    DATA/
      manifest.json          # classes, originals, pairs, splits, stats, digest
      visual/p00000.xmdg     # augmented grey image, unit scale, desk size
      tactile/p00000.xmdg    # log amplitude spectrogram, desk size

LMT-style import layout read by :func:`import_lmt`::

    ROOT/<class_dir>/meta.json          # optional {"name", "sample_rate_hz"}
    ROOT/<class_dir>/images/*.png|jpg|bmp|xmdg
    ROOT/<class_dir>/traces/*.txt|xmdg  # Z-axis samples, one per line

Class ids follow the sorted order of ``<class_dir>`` names.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from vtgen import container
from vtgen.errors import LMTImportError, PreconditionError, ValidationError
from vtgen.signal_pipeline import (
    LMT_SAMPLE_RATE,
    AccelerationTrace,
    AugmentParams,
    Spectrogram,
    StftConfig,
    TextureImage,
    augment_image,
    block_mean,
    clamp_stats,
    compute_spectrogram,
    crop_time,
    log_scale,
    normalize_signed,
    trim_and_crop,
)

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "vtgen-manifest"
MANIFEST_VERSION = 1
SPLITS = ("train", "val", "test")
MODALITIES = ("visual", "tactile")

TRACE_SECONDS = 4.8
DROP_SECONDS = 1.0
KEEP_SECONDS = 3.8
FULL_SIZE = 256
SOURCE_IMAGE_SHAPE = (480, 640)
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".xmdg")
TRACE_SUFFIXES = (".txt", ".csv", ".xmdg")


@dataclass(frozen=True)
class MaterialClass:
    id: int
    name: str


@dataclass
class Original:
    """One un-augmented source recording (image or acceleration trace)."""

    modality: str
    class_id: int
    source_id: int
    data: np.ndarray = None
    path: str = None
    sample_rate_hz: int = LMT_SAMPLE_RATE

    def array(self) -> np.ndarray:
        if self.data is not None:
            return self.data
        return _read_original(self.modality, self.path)


@dataclass
class Pool:
    modality: str
    classes: list
    items: list

    def by_class(self):
        out = {c.id: [] for c in self.classes}
        for item in self.items:
            out[item.class_id].append(item)
        return out


@dataclass(frozen=True)
class SampleRecord:
    modality: str
    class_id: int
    source_id: int
    augment_seed: int
    path: str

    def to_dict(self):
        return {"modality": self.modality, "class_id": self.class_id,
                "source_id": self.source_id, "augment_seed": self.augment_seed,
                "path": self.path}


@dataclass(frozen=True)
class WeaklyPairedSample:
    visual: SampleRecord
    tactile: SampleRecord
    class_id: int

    def __post_init__(self):
        if not self.visual.class_id == self.tactile.class_id == self.class_id:
            raise ValidationError("weak pair mixes material classes")


@dataclass
class DatasetManifest:
    classes: list
    originals: list
    pairs: list
    splits: list
    ratios: tuple
    global_seed: int
    source: str = "synthetic"
    desk_size: int = FULL_SIZE
    stft: StftConfig = field(default_factory=StftConfig)
    normalization: dict = field(default_factory=dict)

    def indices(self, split):
        return [i for i, s in enumerate(self.splits) if s == split]

    def split_counts(self):
        counts = {}
        for pair, split in zip(self.pairs, self.splits):
            counts.setdefault(pair.class_id, {s: 0 for s in SPLITS})[split] += 1
        return counts

    def content(self):
        return {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "global_seed": int(self.global_seed),
            "source": self.source,
            "desk_size": int(self.desk_size),
            "stft": {"window_len": self.stft.window_len, "hop": self.stft.hop,
                     "window_kind": self.stft.window_kind,
                     "centered": self.stft.centered},
            "trace": {"drop_seconds": DROP_SECONDS, "keep_seconds": KEEP_SECONDS,
                      "crop_frames": FULL_SIZE},
            "ratios": [int(r) if float(r).is_integer() else float(r)
                       for r in self.ratios],
            "classes": [{"id": c.id, "name": c.name} for c in self.classes],
            "originals": [
                {"modality": o.modality, "class_id": o.class_id,
                 "source_id": o.source_id, "path": o.path}
                for o in self.originals],
            "pairs": [
                {"index": i, "class_id": p.class_id, "split": s,
                 "visual": p.visual.to_dict(), "tactile": p.tactile.to_dict()}
                for i, (p, s) in enumerate(zip(self.pairs, self.splits))],
            "normalization": {k: {"lo": float(v[0]), "hi": float(v[1])}
                              for k, v in sorted(self.normalization.items())},
        }

    @property
    def digest(self) -> str:
        return content_digest(self.content())

    def to_json(self) -> str:
        doc = self.content()
        doc["digest"] = content_digest(doc)
        return json.dumps(doc, indent=1)

    def save(self, directory) -> Path:
        path = Path(directory) / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path

    @classmethod
    def from_dict(cls, doc, verify=True):
        if doc.get("format") != MANIFEST_FORMAT:
            raise ValidationError("not a dataset manifest")
        stored = doc.pop("digest", None)
        if verify and stored is not None and stored != content_digest(doc):
            raise ValidationError("manifest digest mismatch (file edited?)")
        classes = [MaterialClass(c["id"], c["name"]) for c in doc["classes"]]
        originals = [Original(o["modality"], o["class_id"], o["source_id"],
                              path=o["path"]) for o in doc["originals"]]
        pairs, splits = [], []
        for p in doc["pairs"]:
            pairs.append(WeaklyPairedSample(SampleRecord(**p["visual"]),
                                            SampleRecord(**p["tactile"]),
                                            p["class_id"]))
            splits.append(p["split"])
        st = doc["stft"]
        return cls(classes=classes, originals=originals, pairs=pairs,
                   splits=splits, ratios=tuple(doc["ratios"]),
                   global_seed=doc["global_seed"], source=doc["source"],
                   desk_size=doc["desk_size"],
                   stft=StftConfig(st["window_len"], st["hop"],
                                   st["window_kind"], st["centered"]),
                   normalization={k: (v["lo"], v["hi"])
                                  for k, v in doc["normalization"].items()})

    @classmethod
    def load(cls, directory):
        path = Path(directory)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.exists():
            raise ValidationError(f"no manifest at {path}")
        return cls.from_dict(json.loads(path.read_text()))


def content_digest(doc) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from integer parts."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(2)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)


# pairing and splitting ------------------------------------------------------

def build_weak_pairs(visual_pool: Pool, tactile_pool: Pool, reps: int, seed):
    """Augment every original ``reps`` times and pair randomly within class.

    A class with ``n`` originals (the larger of its visual and tactile
    counts) contributes ``n * reps`` pairs. Visual and tactile augment seeds
    are drawn independently.
    """
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    vis_ids = {c.id for c in visual_pool.classes}
    tac_ids = {c.id for c in tactile_pool.classes}
    if vis_ids != tac_ids:
        raise ValidationError(
            f"pools cover different classes: {sorted(vis_ids ^ tac_ids)}")
    vis_by, tac_by = visual_pool.by_class(), tactile_pool.by_class()
    pairs = []
    for cid in sorted(vis_ids):
        vis, tac = vis_by[cid], tac_by[cid]
        if not vis or not tac:
            raise ValidationError(f"class {cid} lacks visual or tactile originals")
        count = max(len(vis), len(tac)) * reps
        vis_records = [_record("visual", vis[j % len(vis)], seed, j) for j in range(count)]
        tac_records = [_record("tactile", tac[j % len(tac)], seed, j) for j in range(count)]
        perm = np.random.default_rng(derive_seed(seed, cid, 7)).permutation(count)
        for j in range(count):
            pairs.append(WeaklyPairedSample(vis_records[j], tac_records[perm[j]], cid))
    for i, p in enumerate(pairs):
        pairs[i] = WeaklyPairedSample(
            _with_path(p.visual, f"visual/p{i:05d}.xmdg"),
            _with_path(p.tactile, f"tactile/p{i:05d}.xmdg"), p.class_id)
    return pairs


def _record(modality, original, seed, j):
    code = MODALITIES.index(modality)
    return SampleRecord(modality, original.class_id, original.source_id,
                        derive_seed(seed, original.class_id, code, j), "")


def _with_path(rec, path):
    return SampleRecord(rec.modality, rec.class_id, rec.source_id,
                        rec.augment_seed, path)


def largest_remainder(total: int, ratios) -> list:
    ratios = np.asarray(ratios, dtype=float)
    if np.any(ratios < 0) or ratios.sum() <= 0:
        raise ValidationError(f"invalid split ratios {ratios.tolist()}")
    quotas = total * ratios / ratios.sum()
    counts = np.floor(quotas).astype(int)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: total - counts.sum()]:
        counts[i] += 1
    return counts.tolist()


def split_manifest(pairs, ratios=(8, 1, 1), seed=0, classes=None,
                   originals=(), **manifest_kwargs) -> DatasetManifest:
    """Stratified per-class split with largest-remainder rounding."""
    if len(ratios) != 3:
        raise ValidationError("ratios must be (train, val, test)")
    if classes is None:
        ids = sorted({p.class_id for p in pairs})
        classes = [MaterialClass(i, f"class{i}") for i in ids]
    by_class = {c.id: [] for c in classes}
    for i, p in enumerate(pairs):
        if p.class_id not in by_class:
            raise ValidationError(f"pair {i} has unknown class {p.class_id}")
        by_class[p.class_id].append(i)
    splits = [None] * len(pairs)
    for cid, members in by_class.items():
        if not members:
            raise ValidationError(f"class {cid} has no pairs")
        counts = largest_remainder(len(members), ratios)
        rng = np.random.default_rng(derive_seed(seed, cid, 11))
        shuffled = [members[k] for k in rng.permutation(len(members))]
        start = 0
        for name, n in zip(SPLITS, counts):
            for idx in shuffled[start:start + n]:
                splits[idx] = name
            start += n
    return DatasetManifest(classes=list(classes), originals=list(originals),
                           pairs=list(pairs), splits=splits,
                           ratios=tuple(ratios), global_seed=int(seed),
                           **manifest_kwargs)


# synthetic corpus -----------------------------------------------------------

# the top end still spans 6 pixels per cycle after the 4x desk-scale reduction
SYNTH_FREQ_RANGE = (1 / 64, 1 / 24)
SYNTH_HZ_PER_CYCLE = 30000.0
SYNTH_KINDS = ("stripes", "checker", "blobs")
# photographed materials keep one orientation; originals only jitter around the axis
SYNTH_ORIENTATION_JITTER = np.deg2rad(5.0)


def class_spatial_frequency(class_id: int, n_classes: int) -> float:
    """Cycles per source pixel, geometric in the class index."""
    lo, hi = SYNTH_FREQ_RANGE
    if n_classes == 1:
        return lo
    return lo * (hi / lo) ** (class_id / (n_classes - 1))


def class_band_hz(class_id: int, n_classes: int) -> float:
    """Centre of the tactile band, a monotone map of the spatial frequency."""
    return SYNTH_HZ_PER_CYCLE * class_spatial_frequency(class_id, n_classes)


def _synth_image(freq, kind, rng, shape=SOURCE_IMAGE_SHAPE):
    rows, cols = shape
    y, x = np.mgrid[0:rows, 0:cols].astype(float)
    theta = rng.uniform(-SYNTH_ORIENTATION_JITTER, SYNTH_ORIENTATION_JITTER)
    if kind == "stripes":
        u = x * np.cos(theta) + y * np.sin(theta)
        pattern = np.cos(2 * np.pi * freq * u + rng.uniform(0, 2 * np.pi))
    elif kind == "checker":
        f = freq / np.sqrt(2)
        u = x * np.cos(theta) + y * np.sin(theta)
        v = -x * np.sin(theta) + y * np.cos(theta)
        pattern = 2 * (np.cos(2 * np.pi * f * u + rng.uniform(0, 2 * np.pi))
                       * np.cos(2 * np.pi * f * v + rng.uniform(0, 2 * np.pi)))
    else:
        noise = rng.normal(size=shape)
        fy = np.fft.fftfreq(rows)[:, None]
        fx = np.fft.rfftfreq(cols)[None, :]
        radius = np.hypot(fy, fx)
        ring = np.exp(-0.5 * ((radius - freq) / (0.08 * freq)) ** 2)
        pattern = np.fft.irfft2(np.fft.rfft2(noise) * ring, s=shape)
        pattern /= pattern.std() * np.sqrt(2)
    img = 0.5 + 0.3 * pattern + rng.normal(0, 0.03, size=shape)
    return np.clip(img, 0.0, 1.0)


def _synth_trace(center_hz, rng, rate=LMT_SAMPLE_RATE, seconds=TRACE_SECONDS):
    n = int(round(rate * seconds))
    centre = center_hz * (1 + rng.uniform(-0.02, 0.02))
    freqs = np.fft.rfftfreq(n, 1 / rate)
    band = np.exp(-0.5 * ((freqs - centre) / (0.04 * centre)) ** 2)
    x = np.fft.irfft(np.fft.rfft(rng.normal(size=n)) * band, n=n)
    x /= x.std()
    t = np.arange(n) / rate
    envelope = 1 + 0.5 * np.sin(2 * np.pi * rng.uniform(2, 6) * t + rng.uniform(0, 2 * np.pi))
    onset = 1 + 3 * np.exp(-t / 0.2)
    floor = 0.05 * rng.normal(size=n)
    return rng.uniform(0.7, 1.3) * envelope * onset * x + floor


def synth_corpus(n_classes: int, originals_per_class: int, desk_size: int = 64,
                 seed=0):
    """Procedural stand-in for LMT-108.

    Class ``c`` gets textures at spatial frequency ``f_c`` and tactile traces
    band-limited around ``30000 * f_c`` Hz, so the two modalities are coupled
    through the class. Traces are 4.8 s at 10 kHz, images 480 x 640.
    """
    if n_classes < 2:
        raise ValidationError("synthetic corpus needs at least 2 classes")
    if originals_per_class < 1:
        raise ValidationError("originals_per_class must be >= 1")
    if desk_size <= 0 or FULL_SIZE % desk_size:
        raise ValidationError(f"desk size must divide {FULL_SIZE}")
    classes = [MaterialClass(c, f"S{c + 1} synthetic f={class_spatial_frequency(c, n_classes):.4f}")
               for c in range(n_classes)]
    visual, tactile = [], []
    for c in range(n_classes):
        freq = class_spatial_frequency(c, n_classes)
        kind = SYNTH_KINDS[c % len(SYNTH_KINDS)]
        for k in range(originals_per_class):
            rng_v = np.random.default_rng(derive_seed(seed, c, 0, k, 101))
            rng_t = np.random.default_rng(derive_seed(seed, c, 1, k, 101))
            visual.append(Original("visual", c, k, _synth_image(freq, kind, rng_v).astype(np.float32),
                                   path=f"synthetic:visual/{c}/{k}"))
            tactile.append(Original("tactile", c, k,
                                    _synth_trace(class_band_hz(c, n_classes), rng_t).astype(np.float32),
                                    path=f"synthetic:tactile/{c}/{k}"))
    return Pool("visual", classes, visual), Pool("tactile", classes, tactile)


# LMT import -----------------------------------------------------------------

def _read_original(modality, path):
    if path is None or path.startswith("synthetic:"):
        raise ValidationError(f"original {path!r} has no stored payload")
    if modality == "visual":
        return read_image(path)
    return read_trace(path)[0]


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".xmdg":
        img = container.load_array(path)
        if img.ndim == 3:
            img = img.mean(axis=-1)
        return np.clip(img, 0.0, 1.0).astype(np.float32)
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float32) / 255.0


def read_trace(path, default_rate=LMT_SAMPLE_RATE):
    """Return ``(samples, sample_rate_hz)``; text headers may set the rate."""
    path = Path(path)
    rate = default_rate
    if path.suffix.lower() == ".xmdg":
        samples = container.load_array(path).ravel()
    else:
        values = []
        for line in path.read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].replace(":", "=").partition("=")
                if key.strip() == "sample_rate_hz":
                    rate = int(float(val))
                continue
            values.append(float(line.split(",")[-1]))
        samples = np.asarray(values, dtype=np.float32)
    return samples, rate


def import_lmt(root):
    """Read an LMT-style directory into visual and tactile pools."""
    root = Path(root)
    if not root.is_dir():
        raise LMTImportError(f"{root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise LMTImportError(f"{root} contains no class directories")
    classes, visual, tactile = [], [], []
    for cid, cdir in enumerate(class_dirs):
        meta = {}
        if (cdir / "meta.json").exists():
            meta = json.loads((cdir / "meta.json").read_text())
        classes.append(MaterialClass(cid, meta.get("name", cdir.name)))
        class_rate = int(meta.get("sample_rate_hz", LMT_SAMPLE_RATE))
        images = _listing(cdir / "images", IMAGE_SUFFIXES)
        traces = _listing(cdir / "traces", TRACE_SUFFIXES)
        for k, path in enumerate(images):
            try:
                read_image(path)
            except Exception as exc:
                raise LMTImportError(f"unreadable image {path}: {exc}") from exc
            visual.append(Original("visual", cid, k, path=str(path)))
        for k, path in enumerate(traces):
            try:
                samples, rate = read_trace(path, class_rate)
            except Exception as exc:
                raise LMTImportError(f"unreadable trace {path}: {exc}") from exc
            if rate != LMT_SAMPLE_RATE:
                raise LMTImportError(f"{path}: sample rate {rate} Hz, expected {LMT_SAMPLE_RATE}")
            if samples.size < round(TRACE_SECONDS * rate):
                raise LMTImportError(
                    f"{path}: {samples.size / rate:.3f} s is shorter than {TRACE_SECONDS} s")
            if not np.all(np.isfinite(samples)):
                raise LMTImportError(f"{path}: non-finite samples")
            tactile.append(Original("tactile", cid, k, path=str(path), sample_rate_hz=rate))
    return Pool("visual", classes, visual), Pool("tactile", classes, tactile)


def _listing(directory, suffixes):
    if not directory.is_dir():
        raise LMTImportError(f"missing directory {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in suffixes)
    if not files:
        raise LMTImportError(f"no usable files in {directory}")
    return files


# payloads -------------------------------------------------------------------

def tactile_payload(trace_samples, seed, stft=StftConfig(), desk_size=64):
    """Trim, STFT, random time crop, pool to desk size, log-scale."""
    trace = trim_and_crop(AccelerationTrace(trace_samples), DROP_SECONDS, KEEP_SECONDS)
    return tactile_payload_from_spec(compute_spectrogram(trace, stft), seed, desk_size)


def tactile_payload_from_spec(amplitude: Spectrogram, seed, desk_size=64):
    cropped = crop_time(amplitude, FULL_SIZE, seed)
    pooled = Spectrogram(block_mean(cropped.values, FULL_SIZE // desk_size))
    return log_scale(pooled).values


def visual_payload(image, seed, desk_size=64):
    """Random flip/contrast/brightness/crop, then pool to desk size."""
    params = AugmentParams.sample(seed, image.shape, (FULL_SIZE, FULL_SIZE))
    out = augment_image(TextureImage(np.asarray(image, dtype=np.float64)), params)
    return block_mean(out.pixels, FULL_SIZE // desk_size)


def materialize(manifest: DatasetManifest, visual_pool: Pool, tactile_pool: Pool,
                out_dir) -> DatasetManifest:
    """Render every pair's payloads and record train-split normalization."""
    out_dir = Path(out_dir)
    vis_lookup = {(o.class_id, o.source_id): o for o in visual_pool.items}
    tac_lookup = {(o.class_id, o.source_id): o for o in tactile_pool.items}

    @lru_cache(maxsize=None)
    def amplitude(key):
        samples = tac_lookup[key].array()
        trace = trim_and_crop(AccelerationTrace(samples), DROP_SECONDS, KEEP_SECONDS)
        return compute_spectrogram(trace, manifest.stft)

    @lru_cache(maxsize=4)
    def image(key):
        return vis_lookup[key].array()

    tac_lo, tac_hi = np.inf, -np.inf
    clamped_before = clamp_stats.clamped
    for pair, split in zip(manifest.pairs, manifest.splits):
        v, t = pair.visual, pair.tactile
        vis = visual_payload(image((v.class_id, v.source_id)), v.augment_seed,
                             manifest.desk_size)
        tac = tactile_payload_from_spec(amplitude((t.class_id, t.source_id)),
                                        t.augment_seed, manifest.desk_size)
        container.save_array(out_dir / v.path, vis)
        container.save_array(out_dir / t.path, tac)
        if split == "train":
            stored = container.load_array(out_dir / t.path)
            tac_lo = min(tac_lo, float(stored.min()))
            tac_hi = max(tac_hi, float(stored.max()))
    if clamp_stats.clamped > clamped_before:
        log.warning("augmentation clamped %d pixels into [0, 1]",
                    clamp_stats.clamped - clamped_before)
    if not np.isfinite(tac_lo):
        raise PreconditionError("train split is empty; cannot fit normalization")
    if tac_hi <= tac_lo:
        tac_hi = tac_lo + 1.0
    manifest.normalization = {"visual": (0.0, 1.0), "tactile": (tac_lo, tac_hi)}
    manifest.save(out_dir)
    return manifest


def prepare_corpus(out_dir, source="synthetic", n_classes=3, originals=8, reps=40,
                   seed=0, desk_size=64, lmt_dir=None, ratios=(8, 1, 1)):
    """Build pools, pairs and split, then materialize everything under ``out_dir``."""
    if source == "synthetic":
        vis_pool, tac_pool = synth_corpus(n_classes, originals, desk_size, seed)
    elif source == "lmt":
        if lmt_dir is None:
            raise ValidationError("--lmt-dir is required for source=lmt")
        vis_pool, tac_pool = import_lmt(lmt_dir)
    else:
        raise ValidationError(f"unknown source {source!r}")
    pairs = build_weak_pairs(vis_pool, tac_pool, reps, seed)
    manifest = split_manifest(pairs, ratios, seed, classes=vis_pool.classes,
                              originals=vis_pool.items + tac_pool.items,
                              source=source, desk_size=desk_size)
    return materialize(manifest, vis_pool, tac_pool, out_dir)


# loading --------------------------------------------------------------------

@dataclass
class SplitArrays:
    """Normalized payloads of one split, shape [N, S, S] each, plus labels."""

    visual: np.ndarray
    tactile: np.ndarray
    labels: np.ndarray
    indices: list

    def __len__(self):
        return len(self.labels)

    def modality(self, name):
        return getattr(self, name)


def load_split(data_dir, split, manifest: DatasetManifest = None) -> SplitArrays:
    data_dir = Path(data_dir)
    manifest = manifest or DatasetManifest.load(data_dir)
    if split not in SPLITS and split != "all":
        raise ValidationError(f"unknown split {split!r}")
    idx = list(range(len(manifest.pairs))) if split == "all" else manifest.indices(split)
    if not idx:
        raise PreconditionError(f"split {split!r} is empty")
    if not manifest.normalization:
        raise PreconditionError("manifest has no normalization stats")
    vis_lo, vis_hi = manifest.normalization["visual"]
    tac_lo, tac_hi = manifest.normalization["tactile"]
    vis = np.stack([container.load_array(data_dir / manifest.pairs[i].visual.path) for i in idx])
    tac = np.stack([container.load_array(data_dir / manifest.pairs[i].tactile.path) for i in idx])
    labels = np.array([manifest.pairs[i].class_id for i in idx])
    return SplitArrays(
        visual=normalize_signed(vis, vis_lo, vis_hi).astype(np.float32),
        tactile=normalize_signed(tac, tac_lo, tac_hi).astype(np.float32),
        labels=labels, indices=idx)
