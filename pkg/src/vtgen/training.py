"""Classifier pretraining, the adversarial loop for both directions, and
single-shot generation from a trained run.

Every stochastic choice in the GAN loop (batch indices, penalty
interpolation) is drawn from a seed derived from ``(seed, step, j)``, so a
run resumed from a checkpoint replays the exact same batches.
"""

import copy
import csv
import json
import logging
import os
import shutil
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from vtgen import plotting
from vtgen.dataset import DatasetManifest, derive_seed, load_split
from vtgen.errors import (
    CheckpointError,
    PreconditionError,
    StateError,
    TrainingFault,
    ValidationError,
)
from vtgen.evaluation import (
    classify_generated,
    embed,
    fid,
    noise_baseline,
    predict,
    to_classifier_range,
)
from vtgen.losses import (
    LOG_FIELDS,
    LossConfig,
    bce_discriminator_loss,
    bce_generator_loss,
    critic_loss,
    fm_loss,
    l1_loss,
    perceptual_loss,
    total_generator_loss,
    weighted_total,
)
from vtgen.models import (
    ClassifierConfig,
    CriticConfig,
    Generator,
    GeneratorConfig,
    PatchCritic,
    PerceptualExtractor,
    as_dict,
    build_classifier,
    classifier_from_checkpoint,
    freeze,
    init_weights,
    load_checkpoint,
    parameter_digest,
    save_checkpoint,
)
from vtgen.signal_pipeline import (
    Spectrogram,
    StftConfig,
    TextureImage,
    add_gaussian_noise,
    block_repeat,
    denormalize_signed,
    invert_spectrogram,
    restore_nyquist,
    spec_augment,
    unlog_scale,
)

log = logging.getLogger(__name__)

VARIANTS = {
    "A": "A_pix2pix",
    "B": "B_no_rf",
    "C": "C_no_fm",
    "D": "D_no_perceptual",
    "E": "E_full",
}
DIRECTIONS = ("t2v", "v2t")
MODALITY_OF = {"t2v": ("tactile", "visual"), "v2t": ("visual", "tactile")}


def variant_key(name) -> str:
    key = str(name)[:1].upper()
    if key not in VARIANTS or str(name) not in (key, VARIANTS[key]):
        raise ValidationError(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}")
    return key


# classifier pretraining -------------------------------------------------------

@dataclass
class ClassifierResult:
    classifier: object
    modality: str
    val_accuracy: float
    test_accuracy: float
    history: list = field(default_factory=list)
    checkpoint: Path = None


def _augment_batch(x, modality, seed, epoch, sigma=0.05):
    """x in [0, 1], shape [N, S, S]; returns an augmented copy."""
    out = np.empty_like(x)
    size = x.shape[-1]
    for i, item in enumerate(x):
        s = derive_seed(seed, epoch, i)
        if modality == "tactile":
            out[i] = spec_augment(Spectrogram(item, "normalized"), 1, 1, max(1, size // 8), s).values
        else:
            out[i] = add_gaussian_noise(TextureImage(item, "unit"), sigma, s).pixels
    return out


@torch.no_grad()
def _accuracy(clf, x01, labels):
    clf.eval()
    if len(labels) == 0:
        return float("nan")
    logits = torch.cat([clf(x01[i:i + 128])[0] for i in range(0, len(x01), 128)])
    return float((logits.argmax(1).numpy() == labels).mean())


def pretrain_classifier(data_dir, modality, epochs=15, seed=0, batch_size=32, lr=1e-4,
                        widths=(16, 32, 32, 32), out=None) -> ClassifierResult:
    """Train on the train split, keep the best-on-val weights, report test."""
    if modality not in ("visual", "tactile"):
        raise ValidationError(f"unknown modality {modality!r}")
    manifest = DatasetManifest.load(data_dir)
    splits = {s: load_split(data_dir, s, manifest) for s in ("train", "val", "test")
              if manifest.indices(s)}
    if "train" not in splits:
        raise PreconditionError("train split is empty")
    train = splits["train"]
    x_train = (train.modality(modality) + 1.0) / 2.0
    y_train = torch.as_tensor(train.labels, dtype=torch.long)
    size = x_train.shape[-1]
    cfg = ClassifierConfig(input_size=size, n_classes=len(manifest.classes), widths=widths)
    torch.manual_seed(seed)
    clf = build_classifier(cfg, seed)
    opt = torch.optim.Adam(clf.parameters(), lr=lr)

    def x01(split):
        return torch.as_tensor((splits[split].modality(modality) + 1.0) / 2.0).unsqueeze(1)

    select = "val" if "val" in splits else "train"
    x_sel, y_sel = (x01(select), splits[select].labels)
    best_acc, best_state, history = -1.0, None, []
    for epoch in range(epochs):
        clf.train()
        xb_all = torch.as_tensor(_augment_batch(x_train, modality, seed, epoch),
                                 dtype=torch.float32).unsqueeze(1)
        order = np.random.default_rng(derive_seed(seed, epoch, 1 << 20)).permutation(len(y_train))
        total = 0.0
        for i in range(0, len(order), batch_size):
            idx = order[i:i + batch_size]
            if len(idx) < 2:
                continue  # BatchNorm needs more than one sample
            opt.zero_grad()
            loss = F.cross_entropy(clf(xb_all[idx])[0], y_train[idx])
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        acc = _accuracy(clf, x_sel, y_sel)
        history.append({"epoch": epoch, "loss": total / len(order), f"{select}_accuracy": acc})
        log.info("classifier %s epoch %d loss %.4f %s acc %.4f", modality, epoch,
                 total / len(order), select, acc)
        if acc > best_acc:
            best_acc, best_state = acc, copy.deepcopy(clf.state_dict())
    if best_state is not None:
        clf.load_state_dict(best_state)
    freeze(clf)
    test_acc = _accuracy(clf, x01("test"), splits["test"].labels) if "test" in splits else float("nan")
    result = ClassifierResult(clf, modality, best_acc, test_acc, history)
    if out is not None:
        result.checkpoint = save_checkpoint(
            out, {"classifier": as_dict(cfg)}, {"classifier": clf},
            extra={"modality": modality, "val_accuracy": best_acc, "test_accuracy": test_acc,
                   "manifest_digest": manifest.digest, "seed": seed, "epochs": epochs})
    return result


def load_classifier(path):
    payload = load_checkpoint(path)
    clf = classifier_from_checkpoint(payload)
    return clf, payload.get("extra", {})


# adversarial training ------------------------------------------------------------

@dataclass
class TrainConfig:
    direction: str = "t2v"
    variant: str = "E"
    batch_size: int = 8
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    steps: int = 2000
    lr_decay_from: float = 0.5
    seed: int = 0
    desk_scale: bool = True
    loss: LossConfig = None
    generator: GeneratorConfig = None
    critic: CriticConfig = None
    l1_weight: float = 100.0
    sample_every: int = 200
    checkpoint_every: int = 500
    check_isolation: bool = True
    ood_quantile: float = 0.01

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValidationError(f"direction must be one of {DIRECTIONS}")
        self.variant = variant_key(self.variant)
        if self.batch_size < 1 or self.steps < 0 or min(self.lr_g, self.lr_d) <= 0:
            raise ValidationError("batch_size, steps and learning rates must be positive")
        if not 0.0 <= self.lr_decay_from <= 1.0:
            raise ValidationError("lr_decay_from must lie in [0, 1]")
        if isinstance(self.loss, dict):
            self.loss = LossConfig(**self.loss)
        if isinstance(self.generator, dict):
            self.generator = GeneratorConfig(**self.generator)
        if isinstance(self.critic, dict):
            self.critic = CriticConfig(**self.critic)
        if self.loss is None:
            self.loss = variant_loss(self.direction, self.variant)
        if self.generator is None:
            self.generator = GeneratorConfig()
        if self.critic is None:
            self.critic = CriticConfig(input_size=self.generator.input_size)
        self.generator = replace(self.generator, use_rf=self.variant not in ("A", "B"))

    def lr_factor(self, step) -> float:
        """Constant rates, then a linear ramp to zero over the last part of the budget.

        The ramp starts at ``lr_decay_from * steps``; 1.0 keeps the rates fixed.
        """
        start = int(self.lr_decay_from * self.steps)
        if step < start or self.steps <= start:
            return 1.0
        return (self.steps - step) / (self.steps - start)

    @property
    def variant_name(self):
        return VARIANTS[self.variant]

    def to_dict(self):
        d = asdict(self)
        d["generator"] = as_dict(self.generator)
        d["critic"] = as_dict(self.critic)
        return d

    def identity(self):
        """Everything that must match to resume; the step budget may grow."""
        d = self.to_dict()
        for key in ("steps", "sample_every", "checkpoint_every"):
            d.pop(key)
        return d


def variant_loss(direction, variant) -> LossConfig:
    key = variant_key(variant)
    base = LossConfig.for_direction(direction)
    if key == "A":
        # vanilla conditional GAN: one discriminator step per generator step
        return replace(base, n_critic=1)
    if key == "C":
        return replace(base, alpha=0.0)
    if key == "D":
        return replace(base, beta=0.0)
    return base


@dataclass
class StepCounters:
    critic_steps: int = 0
    generator_steps: int = 0
    isolation_checks: int = 0


@dataclass
class RunArtifacts:
    run_dir: Path
    config: TrainConfig
    checkpoints: list
    loss_log: Path
    samples: list
    counters: StepCounters
    classifier_digest_before: str
    classifier_digest_after: str
    ood_threshold: float
    seconds: float = 0.0

    @property
    def last_checkpoint(self):
        return self.checkpoints[-1] if self.checkpoints else None


class RunLock:
    def __init__(self, run_dir):
        self.path = Path(run_dir) / ".lock"

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StateError(f"{self.path.parent} is locked by another writer "
                             f"(remove {self.path} if that process is gone)") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)


def prepare_run_dir(run_dir, overwrite=False, resume=False):
    run_dir = Path(run_dir)
    if run_dir.exists() and any(run_dir.iterdir()) and not resume:
        if (run_dir / ".lock").exists():
            raise StateError(f"{run_dir} is locked by another writer")
        if not overwrite:
            raise StateError(f"{run_dir} is not empty; pass --overwrite to replace it")
        shutil.rmtree(run_dir)
    for sub in ("checkpoints", "samples", "eval"):
        (run_dir / sub).mkdir(parents=True, exist_ok=True)
    return run_dir


def _batch(n_items, batch_size, seed, step, j):
    rng = np.random.default_rng(derive_seed(seed, step, j))
    return rng.choice(n_items, size=batch_size, replace=n_items < batch_size)


def _gp_generator(seed, step, j):
    return torch.Generator().manual_seed(derive_seed(seed, step, j, 7))


@torch.no_grad()
def label_features(classifier, x, batch_size=128):
    """psi for inputs in [-1, 1]."""
    return torch.cat([classifier(to_classifier_range(x[i:i + batch_size]))[1]
                      for i in range(0, len(x), batch_size)])


def ood_threshold(classifier, x, quantile):
    if len(x) == 0:
        return 0.0
    _, conf = predict(classifier, x)
    return float(np.quantile(conf, quantile))


def build_models(cfg: TrainConfig, label_channels):
    gcfg = replace(cfg.generator, label_feature_channels=label_channels)
    gen = init_weights(Generator(gcfg), derive_seed(cfg.seed, 1))
    critic = init_weights(PatchCritic(cfg.critic), derive_seed(cfg.seed, 2))
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr_g, betas=(cfg.adam_beta1, cfg.adam_beta2))
    opt_d = torch.optim.Adam(critic.parameters(), lr=cfg.lr_d, betas=(cfg.adam_beta1, cfg.adam_beta2))
    return gen, critic, opt_g, opt_d


def _forward(gen, x, psi):
    return gen(x, psi) if gen.cfg.use_rf else gen(x)


def _critic_step(cfg, gen, critic, opt_d, x, y, psi, step, j):
    with torch.no_grad():
        fake = _forward(gen, x, psi)
    opt_d.zero_grad(set_to_none=True)
    if cfg.variant == "A":
        loss, gp = bce_discriminator_loss(critic, x, y, fake), torch.zeros(())
    else:
        loss, gp = critic_loss(critic, x, y, fake, cfg.loss.lambda_gp,
                               generator=_gp_generator(cfg.seed, step, j))
    loss.backward()
    opt_d.step()
    return loss.item(), gp.item()


def _generator_step(cfg, gen, critic, opt_g, extractor, x, y, psi):
    opt_g.zero_grad(set_to_none=True)
    fake = _forward(gen, x, psi)
    if cfg.variant == "A":
        # pixel L1 rides in the fm slot with the L1 weight as alpha
        l_adv = bce_generator_loss(critic, x, fake)
        l_fm = l1_loss(y, fake)
        l_p = torch.zeros(())
        weights = replace(cfg.loss, alpha=cfg.l1_weight, beta=0.0)
    else:
        out_fake = critic(x, fake)
        l_adv = -out_fake.score.reshape(len(x), -1).mean(1).mean()
        with torch.no_grad():
            real_feats = critic(x, y).features
        l_fm = fm_loss(real_feats, out_fake.features)
        l_p = perceptual_loss(y, fake, extractor)
        weights = cfg.loss
    total = weighted_total(l_adv, l_fm, l_p, weights)
    total.backward()
    opt_g.step()
    return l_adv, l_fm, l_p, total, weights


def _read_log(path):
    if not path.exists():
        return []
    with path.open() as fh:
        return [r for r in csv.reader(fh)][1:]


def _write_log(path, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_FIELDS)
        w.writerows(rows)


def _load_arrays(data_dir, manifest, cfg):
    src_mod, tgt_mod = MODALITY_OF[cfg.direction]
    train = load_split(data_dir, "train", manifest)
    x = torch.as_tensor(train.modality(src_mod)).unsqueeze(1)
    y = torch.as_tensor(train.modality(tgt_mod)).unsqueeze(1)
    if x.shape[-1] != cfg.generator.input_size:
        raise ValidationError(
            f"data is {x.shape[-1]} px but the generator expects {cfg.generator.input_size}")
    return x, y, train.labels


def train_gan(cfg: TrainConfig, data_dir, classifier, run_dir, overwrite=False, resume=False,
              stop_after=None, plots=True, command=None) -> RunArtifacts:
    """Alternate ``n_critic`` critic updates with one generator update.

    ``classifier`` is the frozen classifier of the *input* modality; its
    label feature feeds the residue-fusion bottleneck. ``stop_after`` halts
    early (with a checkpoint) so a later ``resume=True`` call can continue.
    ``command`` (a dict) is written to ``command.json`` before any work.
    """
    t0 = time.time()
    data_dir = Path(data_dir)
    manifest = DatasetManifest.load(data_dir)
    if not manifest.normalization:
        raise PreconditionError("manifest has no normalization stats")
    run_dir = prepare_run_dir(run_dir, overwrite, resume)
    if command is not None:
        (run_dir / "command.json").write_text(json.dumps(command, indent=2, sort_keys=True))
    freeze(classifier)
    clf_digest = parameter_digest(classifier)

    with RunLock(run_dir):
        x_all, y_all, labels = _load_arrays(data_dir, manifest, cfg)
        psi_all = label_features(classifier, x_all)
        src_mod = MODALITY_OF[cfg.direction][0]
        val_x = (torch.as_tensor(load_split(data_dir, "val", manifest).modality(src_mod))
                 if manifest.indices("val") else torch.zeros(0))
        threshold = ood_threshold(classifier, val_x, cfg.ood_quantile)

        gen, critic, opt_g, opt_d = build_models(cfg, psi_all.shape[1])
        extractor = PerceptualExtractor()
        identity = {"train": cfg.identity(), "classifier": as_dict(classifier.cfg)}
        extra = {"manifest_digest": manifest.digest, "classifier_digest": clf_digest,
                 "ood_threshold": threshold, "normalization": manifest.normalization,
                 "stft": asdict(manifest.stft), "desk_size": manifest.desk_size,
                 "direction": cfg.direction, "variant": cfg.variant}
        ckpt_dir = run_dir / "checkpoints"
        log_path = run_dir / "loss.csv"
        counters = StepCounters()
        start = 0
        rows = []
        if resume:
            payload = load_checkpoint(ckpt_dir / "last.pt", expected_config=identity)
            if payload["extra"].get("manifest_digest") != manifest.digest:
                raise CheckpointError("checkpoint was trained on a different manifest")
            gen.load_state_dict(payload["state"]["generator"])
            critic.load_state_dict(payload["state"]["critic"])
            opt_g.load_state_dict(payload["optim"]["generator"])
            opt_d.load_state_dict(payload["optim"]["critic"])
            start = payload["step"]
            counters = StepCounters(**payload["extra"]["counters"])
            rows = [r for r in _read_log(log_path) if int(r[0]) <= start]
        else:
            (run_dir / "config.json").write_text(json.dumps(
                {"train": cfg.to_dict(), "data_dir": str(data_dir),
                 "manifest_digest": manifest.digest, "classifier_digest": clf_digest},
                indent=2, sort_keys=True))
            (run_dir / "manifest_digest.txt").write_text(manifest.digest + "\n")

        checkpoints = sorted(ckpt_dir.glob("step_*.pt"))

        def checkpoint(step):
            state_extra = {**extra, "counters": asdict(counters), "steps_budget": cfg.steps}
            modules = {"generator": gen, "critic": critic, "psi_classifier": classifier}
            optims = {"generator": opt_g, "critic": opt_d}
            path = save_checkpoint(ckpt_dir / f"step_{step:06d}.pt", identity, modules,
                                   optims, step, state_extra)
            shutil.copyfile(path, ckpt_dir / "last.pt")
            checkpoints.append(path)
            return path

        if not resume:
            checkpoint(0)
        samples = sorted((run_dir / "samples").glob("*.png"))
        n = len(x_all)
        end = cfg.steps if stop_after is None else min(cfg.steps, stop_after)
        for step in range(start, end):
            factor = cfg.lr_factor(step)
            for opt, lr in ((opt_g, cfg.lr_g), (opt_d, cfg.lr_d)):
                for group in opt.param_groups:
                    group["lr"] = lr * factor
            gen_digest = parameter_digest(gen) if cfg.check_isolation else None
            c_loss = gp = 0.0
            for j in range(cfg.loss.n_critic):
                idx = _batch(n, cfg.batch_size, cfg.seed, step, j)
                c_loss, gp = _critic_step(cfg, gen, critic, opt_d, x_all[idx], y_all[idx],
                                          psi_all[idx], step, j)
                counters.critic_steps += 1
                if not np.isfinite(c_loss):
                    raise TrainingFault(f"non-finite critic loss at step {step}", step,
                                        checkpoints[-1] if checkpoints else None)
            crit_digest = parameter_digest(critic) if cfg.check_isolation else None
            if cfg.check_isolation and gen_digest != parameter_digest(gen):
                raise TrainingFault("generator changed during critic updates", step)

            idx = _batch(n, cfg.batch_size, cfg.seed, step, cfg.loss.n_critic)
            l_adv, l_fm, l_p, total, weights = _generator_step(
                cfg, gen, critic, opt_g, extractor, x_all[idx], y_all[idx], psi_all[idx])
            counters.generator_steps += 1
            if cfg.check_isolation:
                if crit_digest != parameter_digest(critic):
                    raise TrainingFault("critic changed during the generator update", step)
                counters.isolation_checks += 1
            try:
                report = total_generator_loss(l_adv, l_fm, l_p, weights, c_loss, gp)
            except TrainingFault as exc:
                raise TrainingFault(f"step {step + 1}: {exc}", step + 1,
                                    checkpoints[-1] if checkpoints else None) from exc
            if abs(report.l_total - total.item()) > 1e-4 * max(1.0, abs(report.l_total)):
                raise TrainingFault("loss report does not match the optimized objective", step)
            rows.append(report.row(step + 1))

            done = step + 1
            if cfg.sample_every and done % cfg.sample_every == 0 and plots:
                samples.append(_sample_grid(gen, x_all, y_all, psi_all, labels, run_dir, done))
            if cfg.checkpoint_every and done % cfg.checkpoint_every == 0:
                _write_log(log_path, rows)
                checkpoint(done)
        _write_log(log_path, rows)
        if end > start and (not checkpoints or checkpoints[-1].name != f"step_{end:06d}.pt"):
            checkpoint(end)
        if plots and rows:
            plotting.loss_curves(log_path, run_dir / "eval" / "loss_curves.png")

    after = parameter_digest(classifier)
    if after != clf_digest:
        raise TrainingFault("frozen classifier parameters changed during training")
    if counters.critic_steps != cfg.loss.n_critic * counters.generator_steps:
        raise TrainingFault("critic/generator step ratio broken")
    return RunArtifacts(run_dir, cfg, checkpoints, log_path, samples, counters,
                        clf_digest, after, threshold, time.time() - t0)


@torch.no_grad()
def _sample_grid(gen, x_all, y_all, psi_all, labels, run_dir, step, per_class=1):
    gen.eval()
    picks = [int(np.flatnonzero(labels == c)[0]) for c in np.unique(labels)][:6]
    out = _forward(gen, x_all[picks], psi_all[picks])
    gen.train()
    return plotting.sample_grid(x_all[picks].numpy(), out.numpy(), y_all[picks].numpy(),
                                run_dir / "samples" / f"step_{step:06d}.png",
                                title=f"step {step}")


# inference -----------------------------------------------------------------------

@dataclass
class LoadedRun:
    generator: Generator
    classifier: object
    extra: dict
    config: dict
    step: int


def load_run(path) -> LoadedRun:
    """Load ``last.pt`` of a run directory, or a checkpoint file directly."""
    path = Path(path)
    if path.is_dir():
        path = path / "checkpoints" / "last.pt"
    payload = load_checkpoint(path)
    config = payload["config"]
    try:
        train = TrainConfig(**{**config["train"], "steps": 0})
        clf = classifier_from_checkpoint({"config": {"classifier": config["classifier"]},
                                          "state": {"classifier": payload["state"]["psi_classifier"]}})
        gen = Generator(replace(train.generator,
                                label_feature_channels=clf.cfg.feature_channels))
        gen.load_state_dict(payload["state"]["generator"])
    except (KeyError, TypeError, RuntimeError) as exc:
        raise CheckpointError(f"{path}: not a GAN run checkpoint ({exc})") from exc
    gen.eval()
    for p in gen.parameters():
        p.requires_grad_(False)
    return LoadedRun(gen, clf, payload["extra"], config, payload["step"])


@dataclass
class GenerateResult:
    output: np.ndarray
    out_of_distribution: np.ndarray
    confidence: np.ndarray
    signal: list = None


@torch.no_grad()
def generate(run, inputs, invert_to_signal=False, gl_iters=100, gl_seed=0) -> GenerateResult:
    """One frozen forward pass. ``inputs`` is [S, S] or [B, S, S] in [-1, 1]."""
    run = run if isinstance(run, LoadedRun) else load_run(run)
    arr = np.asarray(inputs, dtype=np.float32)
    single = arr.ndim == 2
    arr = arr[None] if single else arr
    size = run.generator.cfg.input_size
    if arr.ndim != 3 or arr.shape[1:] != (size, size):
        raise ValidationError(f"expected [{size}, {size}] input(s), got {arr.shape}")
    x = torch.as_tensor(arr).unsqueeze(1)
    psi = label_features(run.classifier, x)
    out = _forward(run.generator, x, psi).squeeze(1).numpy()
    _, conf = predict(run.classifier, x)
    ood = conf < run.extra.get("ood_threshold", 0.0)
    signals = None
    if invert_to_signal:
        if run.extra.get("direction") != "v2t":
            raise ValidationError("only v2t outputs are spectrograms")
        signals = [spectrogram_to_signal(o, run.extra, gl_iters, gl_seed)[0] for o in out]
    if single:
        return GenerateResult(out[0], ood[:1], conf[:1], signals)
    return GenerateResult(out, ood, conf, signals)


def spectrogram_to_signal(normalized, meta, n_iters=100, seed=0):
    """Undo normalization, log scale and desk pooling, then Griffin-Lim."""
    lo, hi = meta["normalization"]["tactile"]
    stft = StftConfig(**meta["stft"]) if isinstance(meta.get("stft"), dict) else StftConfig()
    log_values = denormalize_signed(np.asarray(normalized, dtype=np.float64), lo, hi)
    factor = (stft.n_bins - 1) // log_values.shape[0]
    amplitude = unlog_scale(Spectrogram(block_repeat(log_values, factor), "log"))
    full = Spectrogram(restore_nyquist(amplitude.values, stft))
    return invert_spectrogram(full, stft, n_iters=n_iters, seed=seed)


# evaluation of a run -------------------------------------------------------------

@torch.no_grad()
def evaluate_run(run, data_dir, eval_classifier, split="test", out_dir=None, plots=True,
                 noise_seed=0):
    """Accuracy, confusion and FID of generated data against real targets.

    ``eval_classifier`` is the frozen classifier of the *target* modality.
    """
    run = run if isinstance(run, LoadedRun) else load_run(run)
    manifest = DatasetManifest.load(data_dir)
    if run.extra.get("manifest_digest") != manifest.digest:
        raise CheckpointError("run was trained on a different manifest")
    direction = run.extra["direction"]
    src_mod, tgt_mod = MODALITY_OF[direction]
    data = load_split(data_dir, split, manifest)
    generated = generate(run, data.modality(src_mod)).output
    real = data.modality(tgt_mod)
    feats_real = embed(eval_classifier, real)
    report = classify_generated(eval_classifier, generated, data.labels)
    report.fid = fid(feats_real, embed(eval_classifier, generated))
    report.fid_baseline = fid(feats_real, embed(eval_classifier,
                                                noise_baseline(real.shape, noise_seed)))
    report.config_digest = run.extra.get("manifest_digest", "")
    report.notes = {"direction": direction, "variant": run.extra.get("variant"),
                    "split": split, "n_samples": int(len(real)), "step": run.step,
                    "fid_features": "pooled penultimate features of the frozen "
                                    f"{tgt_mod} classifier",
                    "noise_baseline": "uniform noise in [-1, 1]"}
    if out_dir is not None:
        out_dir = Path(out_dir)
        report.save(out_dir / "report.json")
        if plots:
            plotting.confusion_figure(report.confusion, out_dir / "confusion.png",
                                      [c.name for c in manifest.classes],
                                      title=f"{direction} {run.extra.get('variant')}")
    return report
