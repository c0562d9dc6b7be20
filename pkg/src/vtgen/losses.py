"""Training objectives: WGAN-GP critic/generator terms, feature matching,
perceptual distance and their weighted combination.

Critic callables take ``(condition, candidate)`` and return either a
:class:`~vtgen.models.CriticOutput` or a raw score tensor. Patch scores are
averaged spatially to one scalar per sample before any expectation.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from vtgen.errors import TrainingFault, ValidationError


@dataclass
class LossConfig:
    alpha: float = 10.0
    beta: float = 1.0
    lambda_gp: float = 10.0
    n_critic: int = 5

    def __post_init__(self):
        if min(self.alpha, self.beta, self.lambda_gp) < 0 or self.n_critic < 1:
            raise ValidationError("loss weights must be >= 0 and n_critic >= 1")

    @classmethod
    def for_direction(cls, direction, **overrides):
        """alpha/beta of 10/1 for t2v and 100/10 for v2t."""
        weights = {"t2v": (10.0, 1.0), "v2t": (100.0, 10.0)}
        if direction not in weights:
            raise ValidationError(f"unknown direction {direction!r}")
        alpha, beta = weights[direction]
        return cls(**{"alpha": alpha, "beta": beta, **overrides})


LOG_FIELDS = ("step", "critic_loss", "gp", "l_adv", "l_fm", "l_p", "l_total")


@dataclass
class LossReport:
    l_adv: float
    l_fm: float
    l_p: float
    l_total: float
    critic_loss: float = 0.0
    gp: float = 0.0

    def row(self, step):
        return [step, self.critic_loss, self.gp, self.l_adv, self.l_fm, self.l_p, self.l_total]


def per_sample_score(critic, condition, candidate):
    out = critic(condition, candidate)
    score = out.score if hasattr(out, "score") else out
    return score.reshape(score.shape[0], -1).mean(dim=1)


def critic_features(critic, condition, candidate):
    return critic(condition, candidate).features


def fm_loss(real_feats, fake_feats):
    """Sum over layers of the mean absolute feature difference."""
    if len(real_feats) != len(fake_feats):
        raise ValidationError(f"{len(real_feats)} vs {len(fake_feats)} feature layers")
    total = 0.0
    for r, f in zip(real_feats, fake_feats):
        r, f = torch.as_tensor(r), torch.as_tensor(f)
        if r.shape != f.shape:
            raise ValidationError(f"feature shapes {tuple(r.shape)} vs {tuple(f.shape)}")
        total = total + (r - f).abs().mean()
    return total


def perceptual_loss(y, y_tilde, extractor):
    """Mean over tap layers of ||F(y) - F(y~)||_2 / M, batch-averaged."""
    if y.shape != y_tilde.shape:
        raise ValidationError(f"shapes {tuple(y.shape)} vs {tuple(y_tilde.shape)}")
    taps_real, taps_fake = extractor(y), extractor(y_tilde)
    terms = []
    for a, b in zip(taps_real, taps_fake):
        diff = (a - b).reshape(a.shape[0], -1)
        terms.append((diff.norm(dim=1) / diff.shape[1]).mean())
    return torch.stack(terms).mean()


def gradient_penalty(critic, condition, real, fake, seed=None, generator=None):
    """E[(||grad_x D(cond, x)||_2 - 1)^2] on random real/fake interpolates."""
    if real.shape != fake.shape:
        raise ValidationError("real and fake batches differ in shape")
    if generator is None:
        generator = torch.Generator().manual_seed(0 if seed is None else int(seed))
    u = torch.rand((real.shape[0],) + (1,) * (real.dim() - 1), generator=generator,
                   dtype=real.dtype)
    mixed = (u * real.detach() + (1 - u) * fake.detach()).requires_grad_(True)
    scores = per_sample_score(critic, condition, mixed)
    try:
        (grad,) = torch.autograd.grad(scores.sum(), mixed, create_graph=True)
    except RuntimeError as exc:
        raise TrainingFault(f"gradient penalty differentiation failed: {exc}") from exc
    norms = grad.reshape(grad.shape[0], -1).norm(dim=1)
    return ((norms - 1) ** 2).mean()


def critic_loss(critic, condition, real, fake, lambda_gp=10.0, seed=None, generator=None):
    """Return ``(loss, gp)`` with loss = E[D(fake)] - E[D(real)] + lambda*gp."""
    fake = fake.detach()
    wasserstein = (per_sample_score(critic, condition, fake).mean()
                   - per_sample_score(critic, condition, real).mean())
    gp = gradient_penalty(critic, condition, real, fake, seed=seed, generator=generator)
    loss = wasserstein + lambda_gp * gp
    if not torch.isfinite(loss):
        raise TrainingFault("non-finite critic loss")
    return loss, gp


def generator_adv_loss(critic, condition, fake):
    return -per_sample_score(critic, condition, fake).mean()


def weighted_total(l_adv, l_fm, l_p, cfg: LossConfig):
    return l_adv + cfg.alpha * l_fm + cfg.beta * l_p


def total_generator_loss(l_adv, fm, p, cfg: LossConfig, critic_loss=0.0, gp=0.0) -> LossReport:
    values = [float(v.detach()) if torch.is_tensor(v) else float(v)
              for v in (l_adv, fm, p, critic_loss, gp)]
    if not all(math.isfinite(v) for v in values):
        raise TrainingFault(f"non-finite loss term in {values}")
    l_adv, fm, p, c_loss, gp = values
    return LossReport(l_adv=l_adv, l_fm=fm, l_p=p,
                      l_total=weighted_total(l_adv, fm, p, cfg),
                      critic_loss=c_loss, gp=gp)


# Model-A baseline (vanilla conditional GAN + pixel L1)

def bce_discriminator_loss(critic, condition, real, fake):
    real_logits = critic(condition, real).score
    fake_logits = critic(condition, fake.detach()).score
    return (F.binary_cross_entropy_with_logits(real_logits, torch.ones_like(real_logits))
            + F.binary_cross_entropy_with_logits(fake_logits, torch.zeros_like(fake_logits)))


def bce_generator_loss(critic, condition, fake):
    logits = critic(condition, fake).score
    return F.binary_cross_entropy_with_logits(logits, torch.ones_like(logits))


def l1_loss(real, fake):
    return (real - fake).abs().mean()
