"""Deterministic conversions between tactile traces, spectrograms and images.

Every random choice is drawn from a ``numpy.random.Generator`` built from an
explicit seed, so each function is a pure function of its arguments.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from vtgen.errors import PreconditionError, StateError, ValidationError

log = logging.getLogger(__name__)

LOG_EPS = 1e-6
LMT_SAMPLE_RATE = 10000


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 512
    hop: int = 128
    window_kind: str = "hamming"
    centered: bool = True

    def __post_init__(self):
        if self.window_len <= 0 or self.hop <= 0:
            raise ValidationError("window_len and hop must be positive")
        if self.hop > self.window_len:
            raise ValidationError("hop must not exceed window_len")
        if self.window_kind != "hamming":
            raise ValidationError(f"unsupported window {self.window_kind!r}")

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1

    def n_frames(self, length: int) -> int:
        if self.centered:
            return 1 + length // self.hop
        return 1 + (length - self.window_len) // self.hop


@dataclass
class AccelerationTrace:
    samples: np.ndarray
    sample_rate_hz: int = LMT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValidationError("trace must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("trace contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise ValidationError("sample rate must be positive")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate_hz


SPEC_SCALES = ("amplitude", "log", "normalized")


@dataclass
class Spectrogram:
    values: np.ndarray
    scale: str = "amplitude"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.scale not in SPEC_SCALES:
            raise ValidationError(f"unknown spectrogram scale {self.scale!r}")
        if self.values.ndim != 2:
            raise ValidationError("spectrogram must be 2-D [bins x frames]")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("spectrogram contains non-finite values")
        if self.scale == "amplitude" and np.any(self.values < 0):
            raise ValidationError("amplitude spectrogram has negative values")
        if self.scale == "normalized" and np.any(np.abs(self.values) > 1 + 1e-9):
            raise ValidationError("normalized spectrogram outside [-1, 1]")

    @property
    def shape(self):
        return self.values.shape


IMAGE_RANGES = {"unit": (0.0, 1.0), "normalized": (-1.0, 1.0)}


@dataclass
class TextureImage:
    pixels: np.ndarray
    scale: str = "unit"

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.scale not in IMAGE_RANGES:
            raise ValidationError(f"unknown image scale {self.scale!r}")
        if self.pixels.ndim != 2:
            raise ValidationError("texture image must be single-channel 2-D")
        if not np.all(np.isfinite(self.pixels)):
            raise ValidationError("image contains non-finite pixels")
        lo, hi = IMAGE_RANGES[self.scale]
        if self.pixels.min() < lo - 1e-9 or self.pixels.max() > hi + 1e-9:
            raise ValidationError(f"pixels outside the {self.scale} range")

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True)
class AugmentParams:
    flip_h: bool = False
    flip_v: bool = False
    brightness_delta: float = 0.0
    contrast_factor: float = 1.0
    crop_offset: tuple = (0, 0)
    crop_size: tuple = (256, 256)
    seed: int = 0

    @classmethod
    def sample(cls, seed, image_shape, crop_size=(256, 256), b_max=0.2,
               c_range=(0.8, 1.2)):
        """Draw augmentation parameters for an image of ``image_shape``."""
        rows, cols = image_shape
        ch, cw = crop_size
        if ch > rows or cw > cols:
            raise PreconditionError(
                f"crop {crop_size} larger than image {image_shape}")
        rng = np.random.default_rng(seed)
        return cls(
            flip_h=bool(rng.integers(2)),
            flip_v=bool(rng.integers(2)),
            brightness_delta=float(rng.uniform(-b_max, b_max)),
            contrast_factor=float(rng.uniform(*c_range)),
            crop_offset=(int(rng.integers(rows - ch + 1)),
                         int(rng.integers(cols - cw + 1))),
            crop_size=tuple(crop_size),
            seed=int(seed),
        )


@dataclass
class ClampStats:
    """Counts elements clamped back into range instead of raising."""

    clamped: int = 0
    events: int = 0

    def record(self, n, what):
        if n:
            self.clamped += int(n)
            self.events += 1
            log.debug("clamped %d out-of-range values in %s", n, what)


clamp_stats = ClampStats()


def hamming(window_len: int) -> np.ndarray:
    """Periodic Hamming window (DFT-even), as used for spectral analysis."""
    n = np.arange(window_len)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / window_len)


def _frames(signal, window_len, hop, n_frames):
    idx = np.arange(window_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return signal[idx]


def _analysis(padded, cfg: StftConfig, n_frames):
    """Complex STFT of an already-padded signal, shape [frames, bins]."""
    frames = _frames(padded, cfg.window_len, cfg.hop, n_frames)
    return np.fft.rfft(frames * hamming(cfg.window_len), axis=1)


def compute_spectrogram(trace, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Amplitude STFT of ``trace``.

    Centered analysis reflect-pads ``window_len // 2`` samples on both ends,
    so a trace of length ``L`` yields ``1 + L // hop`` frames.
    """
    if not isinstance(trace, AccelerationTrace):
        trace = AccelerationTrace(trace)
    x = trace.samples
    if x.size < cfg.window_len:
        raise PreconditionError(
            f"trace has {x.size} samples, needs at least {cfg.window_len}")
    if cfg.centered:
        half = cfg.window_len // 2
        x = np.pad(x, (half, half), mode="reflect")
    n_frames = cfg.n_frames(trace.samples.size)
    spec = _analysis(x, cfg, n_frames)
    return Spectrogram(np.abs(spec).T, "amplitude")


def trim_and_crop(trace: AccelerationTrace, drop_seconds: float,
                  keep_seconds: float) -> AccelerationTrace:
    rate = trace.sample_rate_hz
    start = int(round(drop_seconds * rate))
    count = int(round(keep_seconds * rate))
    if drop_seconds < 0 or count <= 0:
        raise PreconditionError("drop must be >= 0 and keep > 0")
    if start + count > len(trace):
        raise PreconditionError(
            f"trace of {trace.duration:.3f} s cannot cover "
            f"{drop_seconds} s + {keep_seconds} s")
    return AccelerationTrace(trace.samples[start:start + count].copy(), rate)


def log_scale(spec: Spectrogram, eps: float = LOG_EPS) -> Spectrogram:
    if spec.scale != "amplitude":
        raise StateError(f"log_scale expects amplitude, got {spec.scale}")
    return Spectrogram(np.log(spec.values + eps), "log")


def unlog_scale(spec: Spectrogram, eps: float = LOG_EPS) -> Spectrogram:
    """Inverse of :func:`log_scale`, floored at zero."""
    if spec.scale != "log":
        raise StateError(f"unlog_scale expects log, got {spec.scale}")
    return Spectrogram(np.maximum(np.exp(spec.values) - eps, 0.0), "amplitude")


def crop_time(spec: Spectrogram, width: int, seed) -> Spectrogram:
    """Random contiguous column crop.

    An odd bin count (``window_len/2 + 1``) additionally loses its top
    (Nyquist) row so a 257-row input becomes 256 rows.
    """
    n_bins, n_frames = spec.shape
    if width <= 0 or width > n_frames:
        raise PreconditionError(f"crop width {width} vs {n_frames} frames")
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(n_frames - width + 1))
    values = spec.values[:, offset:offset + width]
    if n_bins % 2 == 1:
        values = values[:-1]
    return Spectrogram(values.copy(), spec.scale)


def crop_offset(n_frames: int, width: int, seed) -> int:
    """The column offset :func:`crop_time` picks for ``seed``."""
    return int(np.random.default_rng(seed).integers(n_frames - width + 1))


def restore_nyquist(values: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Append a zero Nyquist row if a crop removed it."""
    if values.shape[0] == cfg.n_bins - 1:
        values = np.vstack([values, np.zeros((1, values.shape[1]))])
    if values.shape[0] != cfg.n_bins:
        raise ValidationError(
            f"{values.shape[0]} rows does not fit window {cfg.window_len}")
    return values


def _source_index(length, cfg: StftConfig, n_frames):
    """Map every windowed cell [frame, tap] to the trace sample it reads."""
    src = np.arange(length)
    if cfg.centered:
        half = cfg.window_len // 2
        src = np.pad(src, (half, half), mode="reflect")
    return _frames(src, cfg.window_len, cfg.hop, n_frames)


def _overlap_add(spec_tf, cfg: StftConfig, cells, norm):
    """Least-squares inverse of the (reflect-padded) framing operator.

    Each padded sample reads exactly one trace sample, so the normal
    equations are diagonal: fold the windowed frames back onto their
    sources and divide by the folded window energy.
    """
    frames = np.fft.irfft(spec_tf, n=cfg.window_len, axis=1) * hamming(cfg.window_len)
    acc = np.bincount(cells.ravel(), weights=frames.ravel(), minlength=norm.size)
    return np.divide(acc, norm, out=np.zeros_like(acc), where=norm > 0)


def _hermitian_norm(m):
    """Frobenius norm over the implied two-sided spectrum of [frames, bins]."""
    weights = np.full(m.shape[1], 2.0)
    weights[0] = 1.0
    if m.shape[1] % 2 == 1:
        weights[-1] = 1.0
    return float(np.sqrt(np.sum(weights * m ** 2)))


def _locked_phase(target, hop, window_len, rng):
    """Random frame-0 phase carried forward at each spectral peak's frequency.

    Bins are assigned to their nearest magnitude peak; the peak frequency is
    refined by parabolic interpolation on log magnitude. Coherent start
    phases keep stationary partials from locking into opposite-phase
    segments, which plain i.i.d. phase cannot escape.
    """
    n_frames, n_bins = target.shape
    bins = np.arange(n_bins)
    phase = np.empty(target.shape)
    phase[0] = 2.0 * np.pi * rng.uniform(size=n_bins)
    for t in range(1, n_frames):
        mag = target[t]
        peaks = np.flatnonzero((mag[1:-1] > mag[:-2]) & (mag[1:-1] >= mag[2:])) + 1
        if peaks.size == 0:
            freq = bins.astype(float)
        else:
            logm = np.log(mag + 1e-12)
            left, mid, right = logm[peaks - 1], logm[peaks], logm[peaks + 1]
            curv = left - 2.0 * mid + right
            safe = np.where(curv != 0, curv, 1.0)
            delta = np.where(curv != 0, 0.5 * (left - right) / safe, 0.0)
            refined = peaks + np.clip(delta, -0.5, 0.5)
            owner = np.searchsorted((peaks[1:] + peaks[:-1]) / 2.0, bins)
            freq = refined[owner]
        phase[t] = phase[t - 1] + 2.0 * np.pi * freq * hop / window_len
    return phase


def invert_spectrogram(spec: Spectrogram, cfg: StftConfig = StftConfig(),
                       n_iters: int = 100, seed=0, length=None,
                       sample_rate_hz: int = LMT_SAMPLE_RATE, init="locked"):
    """Griffin-Lim phase recovery.

    Returns ``(trace, errors)`` where ``errors[k]`` is the relative
    consistency error ``||abs(STFT(x_k)) - A|| / ||A||`` after iteration
    ``k``. Each step is the exact least-squares inverse of the
    reflect-padded analysis, so the error sequence cannot increase. The
    norm runs over the two-sided spectrum (interior bins weigh twice).
    ``length`` defaults to ``(n_frames - 1) * hop``.

    ``init="random"`` draws i.i.d. uniform phase for every cell;
    ``init="locked"`` (default) draws uniform phase for the first frame and
    propagates it, see :func:`_locked_phase`.
    """
    if n_iters < 1:
        raise PreconditionError("n_iters must be >= 1")
    if spec.scale != "amplitude":
        raise StateError("invert_spectrogram needs an amplitude spectrogram; "
                         "undo log/normalized scaling first")
    if not cfg.centered:
        raise ValidationError("inversion supports centered analysis only")
    if init not in ("locked", "random"):
        raise ValidationError(f"unknown phase init {init!r}")
    target = restore_nyquist(spec.values, cfg).T
    n_frames = target.shape[0]
    hop, win_len = cfg.hop, cfg.window_len
    if length is None:
        length = max((n_frames - 1) * hop, win_len // 2 + 1)
    if cfg.n_frames(length) != n_frames:
        raise ValidationError(
            f"length {length} gives {cfg.n_frames(length)} frames, "
            f"spectrogram has {n_frames}")
    if length <= win_len // 2:
        raise PreconditionError("length too short for reflect padding")

    target_norm = _hermitian_norm(target)
    if target_norm == 0.0:
        return AccelerationTrace(np.zeros(length), sample_rate_hz), [0.0] * n_iters

    cells = _source_index(length, cfg, n_frames)
    window = hamming(win_len)
    norm = np.bincount(cells.ravel(),
                       weights=np.broadcast_to(window ** 2, cells.shape).ravel(),
                       minlength=length)
    rng = np.random.default_rng(seed)
    if init == "locked":
        phase = _locked_phase(target, hop, win_len, rng)
    else:
        phase = 2.0 * np.pi * rng.uniform(size=target.shape)
    estimate = target * np.exp(1j * phase)
    errors = []
    x = None
    for _ in range(n_iters):
        x = _overlap_add(estimate, cfg, cells, norm)
        rebuilt = np.fft.rfft(x[cells] * window, axis=1)
        errors.append(_hermitian_norm(np.abs(rebuilt) - target) / target_norm)
        estimate = target * np.exp(1j * np.angle(rebuilt))
    return AccelerationTrace(x, sample_rate_hz), errors


def normalize_signed(data, lo: float, hi: float, stats: ClampStats = None):
    """Affine map ``[lo, hi] -> [-1, 1]``; out-of-range values are clamped."""
    if not hi > lo:
        raise ValidationError(f"need hi > lo, got lo={lo}, hi={hi}")
    data = np.asarray(data, dtype=np.float64)
    outside = int(np.count_nonzero((data < lo) | (data > hi)))
    (stats or clamp_stats).record(outside, "normalize_signed")
    data = np.clip(data, lo, hi)
    return 2.0 * (data - lo) / (hi - lo) - 1.0


def denormalize_signed(data, lo: float, hi: float):
    if not hi > lo:
        raise ValidationError(f"need hi > lo, got lo={lo}, hi={hi}")
    data = np.asarray(data, dtype=np.float64)
    return (data + 1.0) * 0.5 * (hi - lo) + lo


def augment_image(img: TextureImage, params: AugmentParams,
                  stats: ClampStats = None) -> TextureImage:
    """Flips, then contrast about the mean, then brightness, then crop."""
    x = img.pixels
    ch, cw = params.crop_size
    r0, c0 = params.crop_offset
    if r0 < 0 or c0 < 0 or r0 + ch > x.shape[0] or c0 + cw > x.shape[1]:
        raise PreconditionError(
            f"crop {params.crop_size} at {params.crop_offset} exceeds "
            f"image {x.shape}")
    if params.flip_h:
        x = x[:, ::-1]
    if params.flip_v:
        x = x[::-1, :]
    if params.contrast_factor != 1.0:
        mean = x.mean()
        x = params.contrast_factor * (x - mean) + mean
    if params.brightness_delta != 0.0:
        x = x + params.brightness_delta
    x = x[r0:r0 + ch, c0:c0 + cw]
    lo, hi = IMAGE_RANGES[img.scale]
    outside = int(np.count_nonzero((x < lo) | (x > hi)))
    (stats or clamp_stats).record(outside, "augment_image")
    return TextureImage(np.clip(x, lo, hi), img.scale)


def spec_augment(spec: Spectrogram, n_time_masks: int, n_freq_masks: int,
                 max_width: int, seed) -> Spectrogram:
    """Time/frequency stripe masking; masked cells take the spectrogram mean.

    Each mask has a width drawn uniformly from ``1..max_width``.
    """
    n_bins, n_frames = spec.shape
    if n_time_masks < 0 or n_freq_masks < 0:
        raise ValidationError("mask counts must be >= 0")
    if (n_time_masks or n_freq_masks) and max_width < 1:
        raise ValidationError("max_width must be >= 1")
    if n_time_masks and max_width >= n_frames:
        raise PreconditionError("time mask as wide as the time axis")
    if n_freq_masks and max_width >= n_bins:
        raise PreconditionError("frequency mask as wide as the frequency axis")
    rng = np.random.default_rng(seed)
    out = spec.values.copy()
    fill = spec.values.mean()
    for _ in range(n_time_masks):
        width = int(rng.integers(1, max_width + 1))
        start = int(rng.integers(n_frames - width + 1))
        out[:, start:start + width] = fill
    for _ in range(n_freq_masks):
        width = int(rng.integers(1, max_width + 1))
        start = int(rng.integers(n_bins - width + 1))
        out[start:start + width, :] = fill
    return Spectrogram(out, spec.scale)


def add_gaussian_noise(img: TextureImage, sigma: float, seed,
                       stats: ClampStats = None) -> TextureImage:
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    if sigma == 0:
        return TextureImage(img.pixels.copy(), img.scale)
    rng = np.random.default_rng(seed)
    x = img.pixels + rng.normal(0.0, sigma, size=img.shape)
    lo, hi = IMAGE_RANGES[img.scale]
    (stats or clamp_stats).record(
        int(np.count_nonzero((x < lo) | (x > hi))), "add_gaussian_noise")
    return TextureImage(np.clip(x, lo, hi), img.scale)


def block_mean(values: np.ndarray, factor: int) -> np.ndarray:
    """Downsample a 2-D array by averaging ``factor x factor`` blocks."""
    if factor == 1:
        return np.asarray(values, dtype=np.float64)
    rows, cols = values.shape
    if rows % factor or cols % factor:
        raise ValidationError(f"shape {values.shape} not divisible by {factor}")
    return values.reshape(rows // factor, factor, cols // factor, factor).mean(axis=(1, 3))


def block_repeat(values: np.ndarray, factor: int) -> np.ndarray:
    """Nearest-neighbour upsampling, the approximate inverse of block_mean."""
    if factor == 1:
        return np.asarray(values, dtype=np.float64)
    return np.repeat(np.repeat(values, factor, axis=0), factor, axis=1)
