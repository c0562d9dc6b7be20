import json

import numpy as np
import pytest

from vtgen import container
from vtgen.dataset import (
    DatasetManifest,
    MaterialClass,
    Original,
    Pool,
    build_weak_pairs,
    class_band_hz,
    class_spatial_frequency,
    import_lmt,
    largest_remainder,
    load_split,
    prepare_corpus,
    split_manifest,
    synth_corpus,
)
from vtgen.errors import LMTImportError, ValidationError

from lmt_fixture import write_lmt


def bandpass_energy_class(trace, n_classes, rate=10000):
    spectrum = np.abs(np.fft.rfft(trace)) ** 2
    freqs = np.fft.rfftfreq(trace.size, 1 / rate)
    energies = []
    for c in range(n_classes):
        centre = class_band_hz(c, n_classes)
        band = (freqs > centre * 0.9) & (freqs < centre * 1.1)
        energies.append(spectrum[band].sum())
    return int(np.argmax(energies))


def spatial_frequency_class(image, n_classes):
    spec = np.abs(np.fft.rfft2(image - image.mean()))
    fy = np.fft.fftfreq(image.shape[0])[:, None]
    fx = np.fft.rfftfreq(image.shape[1])[None, :]
    radius = np.hypot(fy, fx)
    spec[radius < 0.005] = 0
    peak = radius.flat[np.argmax(spec)]
    targets = [class_spatial_frequency(c, n_classes) for c in range(n_classes)]
    return int(np.argmin([abs(np.log(peak / t)) for t in targets]))


def toy_pools(n_classes, originals):
    classes = [MaterialClass(c, f"m{c}") for c in range(n_classes)]
    vis = [Original("visual", c, k) for c in range(n_classes) for k in range(originals)]
    tac = [Original("tactile", c, k) for c in range(n_classes) for k in range(originals)]
    return Pool("visual", classes, vis), Pool("tactile", classes, tac)


class TestWeakPairs:
    def test_full_corpus_count(self):
        vis, tac = toy_pools(9, 20)
        pairs = build_weak_pairs(vis, tac, 100, seed=0)
        assert len(pairs) == 18000
        assert all(p.visual.class_id == p.tactile.class_id == p.class_id for p in pairs)

    def test_minimal(self):
        vis, tac = toy_pools(1, 1)
        pairs = build_weak_pairs(vis, tac, 1, seed=0)
        assert len(pairs) == 1
        assert pairs[0].visual.class_id == pairs[0].tactile.class_id

    def test_determinism(self):
        vis, tac = toy_pools(3, 4)
        a = build_weak_pairs(vis, tac, 5, seed=3)
        b = build_weak_pairs(vis, tac, 5, seed=3)
        assert a == b
        c = build_weak_pairs(vis, tac, 5, seed=4)
        assert a != c

    def test_fresh_augment_seeds(self):
        vis, tac = toy_pools(2, 3)
        pairs = build_weak_pairs(vis, tac, 10, seed=0)
        seeds = [p.visual.augment_seed for p in pairs] + [p.tactile.augment_seed for p in pairs]
        assert len(set(seeds)) == len(seeds)

    def test_class_mismatch(self):
        vis, _ = toy_pools(3, 2)
        _, tac = toy_pools(2, 2)
        with pytest.raises(ValidationError):
            build_weak_pairs(vis, tac, 1, seed=0)


class TestSplit:
    def test_ratio_counts(self):
        vis, tac = toy_pools(2, 20)
        pairs = build_weak_pairs(vis, tac, 100, seed=0)
        manifest = split_manifest(pairs, (8, 1, 1), seed=0)
        for counts in manifest.split_counts().values():
            assert counts == {"train": 1600, "val": 200, "test": 200}

    def test_degenerate(self):
        vis, tac = toy_pools(2, 2)
        pairs = build_weak_pairs(vis, tac, 3, seed=0)
        manifest = split_manifest(pairs, (1, 0, 0), seed=0)
        assert set(manifest.splits) == {"train"}

    def test_determinism_and_partition(self):
        vis, tac = toy_pools(3, 3)
        pairs = build_weak_pairs(vis, tac, 7, seed=1)
        a = split_manifest(pairs, (8, 1, 1), seed=5)
        b = split_manifest(pairs, (8, 1, 1), seed=5)
        assert a.splits == b.splits and a.digest == b.digest
        parts = [set(a.indices(s)) for s in ("train", "val", "test")]
        assert set().union(*parts) == set(range(len(pairs)))
        assert sum(len(p) for p in parts) == len(pairs)

    @pytest.mark.parametrize("total,expected", [
        (21, [17, 2, 2]), (10, [8, 1, 1]), (7, [5, 1, 1]), (3, [3, 0, 0]),
    ])
    def test_largest_remainder(self, total, expected):
        # quotas 7 -> (5.6, .7, .7): floors (5,0,0), two leftovers go to the .7s
        assert largest_remainder(total, (8, 1, 1)) == expected
        assert sum(largest_remainder(total, (8, 1, 1))) == total

    def test_empty_class(self):
        vis, tac = toy_pools(2, 1)
        pairs = build_weak_pairs(vis, tac, 1, seed=0)
        with pytest.raises(ValidationError):
            split_manifest(pairs, seed=0, classes=[MaterialClass(0, "a"),
                                                   MaterialClass(1, "b"),
                                                   MaterialClass(2, "c")])

    def test_manifest_json_roundtrip(self):
        vis, tac = toy_pools(2, 2)
        pairs = build_weak_pairs(vis, tac, 2, seed=0)
        manifest = split_manifest(pairs, seed=0)
        manifest.normalization = {"visual": (0.0, 1.0), "tactile": (-2.0, 3.0)}
        back = DatasetManifest.from_dict(json.loads(manifest.to_json()))
        assert back.digest == manifest.digest
        assert back.splits == manifest.splits

    def test_tampered_manifest(self):
        vis, tac = toy_pools(2, 2)
        manifest = split_manifest(build_weak_pairs(vis, tac, 2, seed=0), seed=0)
        doc = json.loads(manifest.to_json())
        doc["pairs"][0]["split"] = "test" if doc["pairs"][0]["split"] != "test" else "val"
        with pytest.raises(ValidationError):
            DatasetManifest.from_dict(doc)


class TestSynthetic:
    def test_counts(self):
        vis, tac = synth_corpus(3, 4, 64, seed=0)
        assert len(vis.items) == 12 and len(tac.items) == 12
        assert tac.items[0].data.size == 48000
        assert vis.items[0].data.shape == (480, 640)

    def test_determinism(self):
        a = synth_corpus(2, 2, 64, seed=5)
        b = synth_corpus(2, 2, 64, seed=5)
        for pa, pb in zip(a, b):
            for x, y in zip(pa.items, pb.items):
                assert x.data.tobytes() == y.data.tobytes()

    @pytest.mark.parametrize("n_classes", [3, 9])
    def test_bandpass_oracle_separates(self, n_classes):
        _, tac = synth_corpus(n_classes, 3, 64, seed=1)
        hits = [bandpass_energy_class(o.data.astype(float), n_classes) == o.class_id
                for o in tac.items]
        assert all(hits)

    @pytest.mark.parametrize("n_classes", [3, 9])
    def test_spatial_frequency_oracle_separates(self, n_classes):
        vis, _ = synth_corpus(n_classes, 3, 64, seed=2)
        hits = [spatial_frequency_class(o.data.astype(float), n_classes) == o.class_id
                for o in vis.items]
        assert all(hits)

    def test_bands_monotone_in_frequency(self):
        bands = [class_band_hz(c, 9) for c in range(9)]
        assert np.all(np.diff(bands) > 0)

    def test_needs_two_classes(self):
        with pytest.raises(ValidationError):
            synth_corpus(1, 2)


class TestLMTImport:
    def test_counts(self, tmp_path):
        vis, tac = import_lmt(write_lmt(tmp_path))
        assert len(vis.items) == 4 and len(tac.items) == 4

    def test_short_trace(self, tmp_path):
        write_lmt(tmp_path, n_classes=1, originals=1, seconds=4.0)
        with pytest.raises(LMTImportError, match="trace0.txt"):
            import_lmt(tmp_path)

    def test_wrong_rate(self, tmp_path):
        write_lmt(tmp_path, n_classes=1, originals=1, rate=8000, seconds=5)
        with pytest.raises(LMTImportError, match="8000"):
            import_lmt(tmp_path)

    def test_class_ids_sorted(self, tmp_path):
        names = ["M9_leather", "M1_mesh", "M5_rubber", "M3_acrylic", "M7_foam",
                 "M2_marble", "M8_carbon", "M4_wood", "M6_carpet"]
        root = tmp_path / "lmt"
        # traces are the slow part; one original per class is enough here
        write_lmt(root, originals=1, names=names)
        vis, _ = import_lmt(root)
        assert [c.id for c in vis.classes] == list(range(9))
        assert [c.name for c in vis.classes] == sorted(names)

    def test_missing_traces_dir(self, tmp_path):
        (tmp_path / "M1" / "images").mkdir(parents=True)
        with pytest.raises(LMTImportError):
            import_lmt(tmp_path)

    def test_empty_root(self, tmp_path):
        with pytest.raises(LMTImportError):
            import_lmt(tmp_path)

    def test_prepare_from_lmt(self, tmp_path):
        root = write_lmt(tmp_path / "lmt")
        manifest = prepare_corpus(tmp_path / "data", source="lmt", lmt_dir=root,
                                  reps=5, seed=0, desk_size=32)
        assert len(manifest.pairs) == 2 * 2 * 5
        arr = container.load_array(tmp_path / "data" / manifest.pairs[0].tactile.path)
        assert arr.shape == (32, 32)


def test_prepare_and_load(tmp_path):
    manifest = prepare_corpus(tmp_path, n_classes=2, originals=2, reps=5, seed=0, desk_size=32)
    assert len(manifest.pairs) == 20
    lo, hi = manifest.normalization["tactile"]
    train = load_split(tmp_path, "train")
    assert train.tactile.min() == pytest.approx(-1.0) and train.tactile.max() == pytest.approx(1.0)
    assert train.visual.shape == (16, 32, 32)
    reloaded = DatasetManifest.load(tmp_path)
    assert reloaded.digest == manifest.digest
    # normalization stats come from the training split only
    raw = [container.load_array(tmp_path / manifest.pairs[i].tactile.path)
           for i in manifest.indices("train")]
    assert lo == pytest.approx(min(float(r.min()) for r in raw))
    assert hi == pytest.approx(max(float(r.max()) for r in raw))
