"""Metrics for generated data: classification accuracy and confusion matrix,
Frechet distance, dynamic time warping and intra-class variance.
"""

import csv
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import torch
from numba import njit

from vtgen.errors import PreconditionError, ValidationError

log = logging.getLogger(__name__)

ICV_DEFINITION = "mean over flattened dimensions of the unbiased per-dimension variance"
FID_FEATURES = "pooled penultimate features of the frozen task classifier"


@dataclass
class EvalReport:
    n_classes: int
    confusion: list
    accuracy: float
    per_class_accuracy: list
    counts: list
    fid: float = None
    fid_baseline: float = None
    config_digest: str = ""
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        cm = np.asarray(self.confusion)
        if cm.shape != (self.n_classes, self.n_classes):
            raise ValidationError("confusion matrix is not C x C")
        if list(cm.sum(axis=1)) != list(self.counts):
            raise ValidationError("confusion rows must sum to per-class counts")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path


def confusion_matrix(labels, predictions, n_classes):
    labels, predictions = np.asarray(labels, int), np.asarray(predictions, int)
    if labels.shape != predictions.shape:
        raise ValidationError("labels and predictions differ in length")
    if labels.size and (labels.max() >= n_classes or predictions.max() >= n_classes
                        or min(labels.min(), predictions.min()) < 0):
        raise ValidationError(f"class ids outside 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    return cm


def report_from_predictions(labels, predictions, n_classes, **extra) -> EvalReport:
    cm = confusion_matrix(labels, predictions, n_classes)
    counts = cm.sum(axis=1)
    total = int(counts.sum())
    if total == 0:
        raise PreconditionError("nothing to evaluate")
    per_class = [float(cm[c, c] / counts[c]) if counts[c] else float("nan")
                 for c in range(n_classes)]
    return EvalReport(n_classes=n_classes, confusion=cm.tolist(),
                      accuracy=float(np.trace(cm) / total),
                      per_class_accuracy=per_class, counts=counts.tolist(), **extra)


def to_classifier_range(x):
    """Map generator output in [-1, 1] to the classifier's [0, 1] inputs."""
    return (x + 1.0) / 2.0


def as_batch(data):
    x = torch.as_tensor(np.asarray(data), dtype=torch.float32)
    if x.dim() == 3:
        x = x.unsqueeze(1)
    return x


@torch.no_grad()
def predict(classifier, data, batch_size=64):
    """Argmax predictions and max-softmax confidences for [-1, 1] data."""
    x = to_classifier_range(as_batch(data))
    preds, conf = [], []
    for i in range(0, len(x), batch_size):
        probs = torch.softmax(classifier(x[i:i + batch_size])[0], dim=1)
        c, p = probs.max(dim=1)
        preds.append(p)
        conf.append(c)
    return torch.cat(preds).numpy(), torch.cat(conf).numpy()


@torch.no_grad()
def embed(classifier, data, batch_size=64):
    x = to_classifier_range(as_batch(data))
    return torch.cat([classifier.embed(x[i:i + batch_size])
                      for i in range(0, len(x), batch_size)]).double().numpy()


def classify_generated(classifier, generated, labels, n_classes=None, **extra) -> EvalReport:
    n = classifier.cfg.n_classes
    if n_classes is not None and n_classes != n:
        raise ValidationError(f"classifier knows {n} classes, data has {n_classes}")
    preds, _ = predict(classifier, generated)
    return report_from_predictions(labels, preds, n, **extra)


def _sqrtm_psd_product(a, b, eps):
    covmean, _ = scipy.linalg.sqrtm(a @ b, disp=False)
    if not np.isfinite(covmean).all():
        log.warning("singular product in FID; adding %.1e to the diagonal", eps)
        jitter = eps * np.eye(a.shape[0])
        covmean, _ = scipy.linalg.sqrtm((a + jitter) @ (b + jitter), disp=False)
        if not np.isfinite(covmean).all():
            raise PreconditionError("degenerate covariance even after jitter")
    if np.iscomplexobj(covmean):
        if not np.allclose(np.diagonal(covmean).imag, 0, atol=1e-3):
            raise PreconditionError(
                f"imaginary component {np.abs(covmean.imag).max():.3g} in sqrtm")
        covmean = covmean.real
    return covmean


def fid(features_real, features_gen, eps=1e-6) -> float:
    """Frechet distance between Gaussians fitted to two feature sets."""
    x = np.asarray(features_real, dtype=np.float64)
    y = np.asarray(features_gen, dtype=np.float64)
    # a flat vector is a set of scalar features
    x = x.reshape(-1, 1) if x.ndim == 1 else x
    y = y.reshape(-1, 1) if y.ndim == 1 else y
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValidationError(f"feature shapes {x.shape} vs {y.shape}")
    if min(len(x), len(y)) < 2:
        raise PreconditionError("need at least two samples per set")
    d = x.shape[1]
    if min(len(x), len(y)) <= d:
        warnings.warn(f"FID with {min(len(x), len(y))} samples in {d} dims is poorly conditioned")
    mu1, mu2 = x.mean(0), y.mean(0)
    s1 = np.atleast_2d(np.cov(x, rowvar=False))
    s2 = np.atleast_2d(np.cov(y, rowvar=False))
    covmean = _sqrtm_psd_product(s1, s2, eps)
    diff = mu1 - mu2
    return float(diff @ diff + np.trace(s1) + np.trace(s2) - 2 * np.trace(covmean))


@njit(cache=True)
def _dtw_cost(a, b):
    # two rolling rows keep memory at O(len(b)) for long traces
    m = b.shape[0]
    prev = np.full(m + 1, np.inf)
    cur = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(a.shape[0]):
        cur[0] = np.inf
        for j in range(1, m + 1):
            best = min(prev[j], cur[j - 1], prev[j - 1])
            cur[j] = abs(a[i] - b[j - 1]) + best
        prev, cur = cur, prev
    return prev[m]


def dtw_distance(a, b) -> float:
    """Accumulated optimal alignment cost with steps (1,0), (0,1), (1,1)."""
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    b = np.ascontiguousarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValidationError("DTW needs non-empty sequences")
    return float(_dtw_cost(a, b))


def intra_class_variance(samples_by_class) -> dict:
    """Per-class mean of per-dimension unbiased variances of flattened samples."""
    out = {}
    for cls, samples in samples_by_class.items():
        flat = np.asarray([np.ravel(s) for s in samples], dtype=np.float64)
        if len(flat) < 2:
            raise PreconditionError(f"class {cls} has fewer than two samples")
        out[cls] = float(flat.var(axis=0, ddof=1).mean())
    return out


def group_by_class(data, labels):
    groups = {}
    for x, y in zip(data, labels):
        groups.setdefault(int(y), []).append(x)
    return groups


def noise_baseline(shape, seed=0):
    """Uniform noise in [-1, 1], the reference point for FID comparisons."""
    return np.random.default_rng(seed).uniform(-1, 1, size=shape).astype(np.float32)


TABLE_FIELDS = ("direction", "variant", "accuracy", "fid", "fid_noise", "steps", "seconds")


def write_table(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path
