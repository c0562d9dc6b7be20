"""Acceptance criteria, one verdict line each.

Every test records ``CRITERION n: PASS|FAIL <measurements>`` through the
``verdict`` fixture; the lines are repeated in the terminal summary. The
GAN criteria train all five variants at full budget and take about an hour
on one CPU core.
"""
import sys
import time

import numpy as np
import pytest
import torch

from vtgen import container
from vtgen.cli import run_ablation
from vtgen.dataset import (
    build_weak_pairs,
    prepare_corpus,
    split_manifest,
    synth_corpus,
)
from vtgen.evaluation import dtw_distance, fid
from vtgen.losses import fm_loss, gradient_penalty, per_sample_score, perceptual_loss
from vtgen.models import (
    ClassifierConfig,
    Classifier,
    CriticConfig,
    Generator,
    GeneratorConfig,
    PatchCritic,
    as_dict,
    init_weights,
    load_checkpoint,
    parameter_digest,
    save_checkpoint,
)
from vtgen.signal_pipeline import (
    AccelerationTrace,
    StftConfig,
    compute_spectrogram,
    denormalize_signed,
    invert_spectrogram,
    normalize_signed,
)
from vtgen.training import load_run, pretrain_classifier

from test_losses import Identity, LinearCritic, TinyCritic


# oracles --------------------------------------------------------------------

def naive_stft_magnitude(x, window_len=512, hop=128):
    """Frame-by-frame DFT by explicit summation, reflect padding by index."""
    x = np.asarray(x, dtype=float)
    n, half = len(x), window_len // 2

    def reflect(i):
        if i < 0:
            return -i
        if i >= n:
            return 2 * (n - 1) - i
        return i

    taps = np.arange(window_len)
    window = 0.54 - 0.46 * np.cos(2 * np.pi * taps / window_len)
    kernel = np.exp(-2j * np.pi * np.outer(np.arange(window_len // 2 + 1), taps) / window_len)
    frames = []
    for t in range(1 + n // hop):
        seg = np.array([x[reflect(t * hop + k - half)] for k in taps])
        frames.append(np.abs(kernel @ (seg * window)))
    return np.array(frames).T


def exhaustive_dtw(a, b):
    """Depth-first walk over every monotone path, pruned by the best cost so far."""
    n, m = len(a), len(b)
    best = [float("inf")]

    def walk(i, j, cost):
        cost += abs(a[i] - b[j])
        if cost >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = cost
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, cost)
        if i + 1 < n:
            walk(i + 1, j, cost)
        if j + 1 < m:
            walk(i, j + 1, cost)

    walk(0, 0, 0)
    return best[0]


# signal processing ----------------------------------------------------------

def test_criterion_01_frame_law(verdict):
    t0 = time.perf_counter()
    shape = compute_spectrogram(AccelerationTrace(np.random.default_rng(0).normal(size=38000))).shape
    rng = np.random.default_rng(1)
    mismatches = 0
    for _ in range(50):
        hop = int(rng.integers(16, 257))
        length = int(rng.integers(512, 20001))
        cfg = StftConfig(window_len=512, hop=hop)
        spec = compute_spectrogram(AccelerationTrace(rng.normal(size=length)), cfg)
        mismatches += spec.shape != (257, 1 + length // hop)
    seconds = time.perf_counter() - t0
    ok = shape == (257, 297) and mismatches == 0 and seconds < 5
    verdict(1, ok, f"38000 samples -> {shape}; {mismatches}/50 frame-law mismatches; {seconds:.2f}s")


def test_criterion_02_naive_dft(verdict):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(8):
        length = int(rng.integers(512, 4097))
        x = rng.normal(size=length)
        got = compute_spectrogram(AccelerationTrace(x)).values
        ref = naive_stft_magnitude(x)
        per_frame = np.linalg.norm(got - ref, axis=0) / np.linalg.norm(ref, axis=0)
        worst = max(worst, float(per_frame.max()))
    verdict(2, worst <= 1e-6, f"worst per-frame relative error {worst:.2e} over 8 traces")


def test_criterion_03_griffin_lim(verdict):
    details, ok = [], True
    for seconds in (1.0, 3.8):
        n = int(round(seconds * 10000))
        x = np.sin(2 * np.pi * 500 * np.arange(n) / 10000)
        spec = compute_spectrogram(AccelerationTrace(x))
        t0 = time.perf_counter()
        _, errors = invert_spectrogram(spec, n_iters=100, seed=0, length=n)
        elapsed = time.perf_counter() - t0
        rises = int(np.sum(np.diff(errors) > 1e-9))
        ok &= rises == 0 and errors[-1] < 0.1 and elapsed < 10
        details.append(f"{seconds}s: final {errors[-1]:.4f}, {rises} rises, {elapsed:.2f}s")
    verdict(3, ok, "; ".join(details))


# losses ---------------------------------------------------------------------

def test_criterion_04_fm_and_perceptual(verdict):
    t = torch.tensor
    checks = [
        fm_loss([t([1.0, 2.0, 3.0, 4.0])], [t([1.0, 1.0, 3.0, 5.0])]).item() - 0.5,
        fm_loss([t([1.0, 2.0, 3.0, 4.0])] * 2, [t([1.0, 1.0, 3.0, 5.0])] * 2).item() - 1.0,
        perceptual_loss(torch.zeros(1, 4), t([[0.0, 1.0, 0.0, 0.0]]), Identity()).item() - 0.25,
    ]
    identical = torch.randn(2, 3, 4, 4)
    zeros = [fm_loss([identical], [identical.clone()]).item(),
             perceptual_loss(identical.flatten(1), identical.flatten(1).clone(), Identity()).item()]
    rng = np.random.default_rng(4)
    for _ in range(100):
        a, b = rng.normal(size=(3, 6)), rng.normal(size=(3, 6))
        checks.append(fm_loss([t(a)], [t(b)]).item() - np.abs(a - b).mean())
        checks.append(perceptual_loss(t(a), t(b), Identity()).item()
                      - np.mean(np.linalg.norm(a - b, axis=1) / 6))
    worst = float(np.max(np.abs(checks)))
    ok = worst <= 1e-6 and max(zeros) == 0.0
    verdict(4, ok, f"worst deviation {worst:.2e} over {len(checks)} cases; identical inputs -> {zeros}")


def test_criterion_05_gradient_penalty(verdict):
    rng = torch.Generator().manual_seed(5)
    exact = []
    for norm, expected in ((1.0, 0.0), (3.0, 4.0)):
        w = torch.randn(1, 1, 4, 4, generator=rng, dtype=torch.float64)
        w = norm * w / w.norm()
        real = torch.randn(4, 1, 4, 4, generator=rng, dtype=torch.float64)
        fake = torch.randn(4, 1, 4, 4, generator=rng, dtype=torch.float64)
        exact.append(abs(gradient_penalty(LinearCritic(w), real, real, fake, seed=0).item() - expected))
    worst_fd = 0.0
    for seed in range(20):
        critic = TinyCritic(seed).double()
        gen = torch.Generator().manual_seed(seed)
        cond = torch.randn(1, 1, 4, 4, generator=gen, dtype=torch.float64)
        x = torch.randn(1, 1, 4, 4, generator=gen, dtype=torch.float64, requires_grad=True)
        (grad,) = torch.autograd.grad(per_sample_score(critic, cond, x).sum(), x)
        numeric = torch.zeros(x.numel(), dtype=torch.float64)
        h = 1e-6
        with torch.no_grad():
            for i in range(x.numel()):
                e = torch.zeros(x.numel(), dtype=torch.float64)
                e[i] = h
                e = e.view_as(x)
                numeric[i] = (per_sample_score(critic, cond, x + e).item()
                              - per_sample_score(critic, cond, x - e).item()) / (2 * h)
        rel = ((grad.flatten() - numeric).norm() / numeric.norm()).item()
        worst_fd = max(worst_fd, rel)
    ok = max(exact) <= 1e-9 and worst_fd < 1e-4
    verdict(5, ok, f"linear critic deviations {exact[0]:.1e}/{exact[1]:.1e}; "
                   f"worst finite-difference rel {worst_fd:.2e} over 20 critics")


# metrics --------------------------------------------------------------------

def test_criterion_06_fid(verdict):
    rng = np.random.default_rng(6)
    a = rng.normal(size=(500, 4))
    same = abs(fid(a, a))
    one_d = fid(rng.normal(0, 1, 10000), rng.normal(1, 1, 10000))
    mu1, sd1 = np.array([0.0, 1.0]), np.array([1.0, 2.0])
    mu2, sd2 = np.array([1.0, -1.0]), np.array([0.5, 3.0])
    x = mu1 + sd1 * rng.normal(size=(200000, 2))
    y = mu2 + sd2 * rng.normal(size=(200000, 2))
    closed = np.sum((mu1 - mu2) ** 2) + np.sum((sd1 - sd2) ** 2)
    two_d = fid(x, y)
    rel = abs(two_d - closed) / closed
    ok = same <= 1e-6 and abs(one_d - 1.0) <= 0.05 and rel <= 0.02
    verdict(6, ok, f"fid(A,A)={same:.1e}; 1-D {one_d:.4f}; 2-D {two_d:.4f} vs {closed:.4f} ({rel:.2%})")


def test_criterion_07_dtw(verdict):
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 10000))
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(200):
        a = rng.integers(-9, 10, size=rng.integers(1, 11)).tolist()
        b = rng.integers(-9, 10, size=rng.integers(1, 11)).tolist()
        mismatches += dtw_distance(a, b) != exhaustive_dtw(a, b)
    verdict(7, mismatches == 0, f"{mismatches}/200 pairs differ from the exhaustive search")


# data -----------------------------------------------------------------------

def test_criterion_08_pairing_and_split(verdict):
    visual, tactile = synth_corpus(9, 20, seed=0)
    first = split_manifest(build_weak_pairs(visual, tactile, 100, 0), seed=0,
                           classes=visual.classes)
    again = split_manifest(build_weak_pairs(visual, tactile, 100, 0), seed=0,
                           classes=visual.classes)
    same_class = all(p.visual.class_id == p.tactile.class_id == p.class_id for p in first.pairs)
    per_class = {(c["train"], c["val"], c["test"]) for c in first.split_counts().values()}
    ok = (len(first.pairs) == 18000 and same_class and first.digest == again.digest
          and per_class == {(1600, 200, 200)})
    verdict(8, ok, f"{len(first.pairs)} pairs; same class {same_class}; per-class splits "
                   f"{sorted(per_class)}; digest stable {first.digest == again.digest}")


# end-to-end -----------------------------------------------------------------

GAN_STEPS = 2000


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    data = root / "data"
    prepare_corpus(data, n_classes=3, originals=8, reps=80, seed=0, desk_size=64)
    out = {"root": root, "data": data, "seconds": {}}
    for modality in ("tactile", "visual"):
        t0 = time.perf_counter()
        out[modality] = pretrain_classifier(data, modality, epochs=15, seed=0,
                                            out=root / f"clf_{modality}.pt")
        out["seconds"][modality] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def ablation(desk):
    classifiers = {m: desk[m].classifier for m in ("tactile", "visual")}
    before = parameter_digest(classifiers["tactile"])
    _, rows = run_ablation(desk["data"], desk["root"] / "ablation", ["t2v"],
                           ["E", "A", "B", "C", "D"], GAN_STEPS, 0, classifiers, plots=True)
    return {"rows": {r["variant"][0]: r for r in rows}, "before": before,
            "after": parameter_digest(classifiers["tactile"]),
            "dir": desk["root"] / "ablation"}


def test_criterion_09_classifiers(desk, verdict):
    acc = {m: desk[m].test_accuracy for m in ("tactile", "visual")}
    total = sum(desk["seconds"].values())
    ok = min(acc.values()) >= 0.95 and total < 600
    verdict(9, ok, f"test accuracy tactile {acc['tactile']:.3f}, visual {acc['visual']:.3f}; "
                   f"{total:.0f}s for both")


def test_criterion_10_t2v_ablation(ablation, verdict):
    rows = ablation["rows"]
    e = rows["E"]
    finished = all(v in rows and np.isfinite(rows[v]["fid"]) for v in "ABCD")
    ok = e["accuracy"] >= 0.80 and e["fid"] < 0.5 * e["fid_noise"] and finished
    summary = ", ".join(f"{k} acc {r['accuracy']:.3f} fid {r['fid']:.2f} ({r['seconds']:.0f}s)"
                        for k, r in sorted(rows.items()))
    order = "E >= A" if e["accuracy"] >= rows["A"]["accuracy"] else "E < A"
    verdict(10, ok, f"E acc {e['accuracy']:.3f}, fid {e['fid']:.2f} vs noise "
                    f"{e['fid_noise']:.2f}; {order} (not gating); {summary}")


def test_criterion_11_isolation(ablation, verdict):
    details, ok = [], ablation["before"] == ablation["after"]
    for v in "ABCDE":
        counters = load_run(ablation["dir"] / f"t2v_{v}").extra["counters"]
        n_critic = 1 if v == "A" else 5
        match = counters["critic_steps"] == n_critic * counters["generator_steps"] == n_critic * GAN_STEPS
        ok &= match
        details.append(f"{v} {counters['critic_steps']}/{counters['generator_steps']}")
    verdict(11, ok, f"classifier digest unchanged {ablation['before'] == ablation['after']}; "
                    f"critic/generator steps {', '.join(details)}")


# persistence ----------------------------------------------------------------

def test_criterion_12_round_trips(tmp_path, verdict):
    rng = np.random.default_rng(12)
    exact = True
    for shape in [(7,), (3, 5), (2, 4, 6), (1, 1, 64, 64)]:
        a = rng.normal(size=shape).astype(np.float32)
        container.save_array(tmp_path / "a.xmdg", a)
        b = container.load_array(tmp_path / "a.xmdg")
        exact &= b.dtype == a.dtype and b.shape == a.shape and a.tobytes() == b.tobytes()

    torch.manual_seed(0)
    x = torch.rand(2, 1, 64, 64) * 2 - 1
    gen = Generator(GeneratorConfig(input_size=64, base_channels=8, n_levels=3, rf_blocks=2))
    critic = PatchCritic(CriticConfig(input_size=64))
    clf = Classifier(ClassifierConfig(input_size=64, n_classes=3))
    for i, m in enumerate((gen, critic, clf)):
        init_weights(m, i)
        m.eval()
    psi = torch.randn(2, gen.cfg.label_feature_channels, 4, 4)
    config = {"generator": as_dict(gen.cfg), "critic": as_dict(critic.cfg),
              "classifier": as_dict(clf.cfg)}
    save_checkpoint(tmp_path / "m.pt", config,
                    {"generator": gen, "critic": critic, "classifier": clf})
    payload = load_checkpoint(tmp_path / "m.pt", expected_config=config)
    gen2 = Generator(GeneratorConfig(**payload["config"]["generator"]))
    critic2 = PatchCritic(CriticConfig(**payload["config"]["critic"]))
    clf2 = Classifier(ClassifierConfig(**payload["config"]["classifier"]))
    for name, m in (("generator", gen2), ("critic", critic2), ("classifier", clf2)):
        m.load_state_dict(payload["state"][name])
        m.eval()
    with torch.no_grad():
        diffs = [
            (gen(x, psi) - gen2(x, psi)).abs().max().item(),
            (critic(x, x).score - critic2(x, x).score).abs().max().item(),
            (clf(x)[0] - clf2(x)[0]).abs().max().item(),
        ]

    data = rng.uniform(-3.0, 7.0, size=1000)
    norm_err = float(np.abs(denormalize_signed(normalize_signed(data, -3.0, 7.0), -3.0, 7.0) - data).max())
    ok = exact and max(diffs) <= 1e-6 and norm_err <= 1e-6
    verdict(12, ok, f"container bit-exact {exact}; checkpoint forward max diff {max(diffs):.1e}; "
                    f"normalize round trip {norm_err:.1e}")
