import numpy as np
import pytest
from PIL import Image

from ganad.data import (
    ArraySource,
    LabeledImage,
    SplitSpec,
    load_folder_binary,
    make_nine_vs_one,
    make_one_vs_nine,
    make_synthetic,
    save_synthetic_folder,
    scale_pixels,
    unscale_pixels,
)
from ganad.errors import ConfigError


def toy_source(seed=0, n_train=400, n_test=200):
    rng = np.random.RandomState(seed)
    return ArraySource(
        name="toy",
        train_images=rng.randint(0, 256, size=(n_train, 1, 28, 28), dtype=np.uint8),
        train_classes=rng.randint(0, 10, size=n_train),
        test_images=rng.randint(0, 256, size=(n_test, 1, 28, 28), dtype=np.uint8),
        test_classes=rng.randint(0, 10, size=n_test),
    )


class TestScaling:
    def test_uint8_range(self):
        arr = np.array([0, 128, 255], dtype=np.uint8)
        out = scale_pixels(arr)
        assert out.dtype == np.float32
        assert out[0] == pytest.approx(-1.0)
        assert out[2] == pytest.approx(1.0)

    def test_round_trip_within_quantum(self, rng):
        raw = rng.randint(0, 256, size=(1, 8, 8)).astype(np.uint8)
        assert np.array_equal(unscale_pixels(scale_pixels(raw)), raw)

    def test_rejects_out_of_range_floats(self):
        with pytest.raises(ConfigError):
            scale_pixels(np.array([0.0, 2.0], dtype=np.float32))


class TestClassSplits:
    def test_one_vs_nine_excludes_pivot_from_train(self):
        src = toy_source()
        spec = make_one_vs_nine(src, anomalous_class=7, seed=0)
        assert all(it.class_id != 7 for it in spec.train)
        assert all(it.class_id != 7 for it in spec.validation)
        assert all(it.anomaly_label == 0 for it in spec.train)
        # the pivot class appears in test and is labeled anomalous there
        assert any(it.class_id == 7 and it.anomaly_label == 1 for it in spec.test)
        assert all((it.class_id == 7) == (it.anomaly_label == 1) for it in spec.test)

    def test_nine_vs_one_trains_on_pivot_only(self):
        src = toy_source()
        spec = make_nine_vs_one(src, normal_class=3, seed=0)
        assert all(it.class_id == 3 for it in spec.train + spec.validation)
        assert all((it.class_id != 3) == (it.anomaly_label == 1) for it in spec.test)

    def test_test_pool_keeps_canonical_partition_whole(self):
        src = toy_source()
        spec = make_one_vs_nine(src, anomalous_class=0, seed=1)
        assert len(spec.test) == len(src.test_images)

    def test_validation_fraction(self):
        src = toy_source()
        spec = make_one_vs_nine(src, anomalous_class=2, seed=0)
        n_normal = int((src.train_classes != 2).sum())
        assert len(spec.validation) == max(1, round(0.05 * n_normal))
        assert len(spec.train) + len(spec.validation) == n_normal

    def test_disjoint_and_deterministic(self):
        src = toy_source()
        a = make_nine_vs_one(src, normal_class=5, seed=4)
        b = make_nine_vs_one(src, normal_class=5, seed=4)
        assert a.manifest() == b.manifest()
        c = make_nine_vs_one(src, normal_class=5, seed=9)
        assert a.manifest()["train_ids"] != c.manifest()["train_ids"]

    def test_bad_pivot_rejected(self):
        with pytest.raises(ConfigError):
            make_one_vs_nine(toy_source(), anomalous_class=11, seed=0)


class TestSplitSpecValidation:
    def item(self, i, label):
        return LabeledImage(f"i{i}", np.zeros((1, 2, 2), np.float32), 0, label)

    def test_rejects_anomalies_in_train(self):
        spec = SplitSpec(
            "synthetic", None, 0,
            train=[self.item(0, 1)],
            test=[self.item(1, 0), self.item(2, 1)],
        )
        with pytest.raises(ConfigError, match="normal"):
            spec.validate()

    def test_rejects_single_label_test(self):
        spec = SplitSpec("synthetic", None, 0, train=[self.item(0, 0)], test=[self.item(1, 0)])
        with pytest.raises(ConfigError, match="both labels"):
            spec.validate()

    def test_rejects_duplicate_ids(self):
        spec = SplitSpec(
            "synthetic", None, 0,
            train=[self.item(0, 0)],
            test=[self.item(0, 0), self.item(1, 1)],
        )
        with pytest.raises(ConfigError, match="disjoint"):
            spec.validate()


class TestSynthetic:
    def test_sizes_and_labels(self, synthetic_splits):
        assert len(synthetic_splits.train) == 240
        assert len(synthetic_splits.validation) == 30
        assert len(synthetic_splits.test) == 90
        assert all(it.anomaly_label == 0 for it in synthetic_splits.train)
        assert sum(it.anomaly_label for it in synthetic_splits.test) == 60

    def test_pixel_contract(self, synthetic_splits):
        for it in synthetic_splits.train[:5] + synthetic_splits.test[:5]:
            assert it.pixels.shape == (1, 28, 28)
            assert it.pixels.dtype == np.float32
            assert it.pixels.min() >= -1.0 and it.pixels.max() <= 1.0

    def test_normal_mass_is_central(self, synthetic_splits):
        def centroid(px):
            img = px[0] + 1.0
            yy, xx = np.mgrid[0:28, 0:28]
            return (yy * img).sum() / img.sum(), (xx * img).sum() / img.sum()

        for it in synthetic_splits.train[:20]:
            cy, cx = centroid(it.pixels)
            assert abs(cy - 14) < 4 and abs(cx - 14) < 4
        anomalous = [it for it in synthetic_splits.test if it.anomaly_label][:20]
        for it in anomalous:
            cy, cx = centroid(it.pixels)
            assert max(abs(cy - 14), abs(cx - 14)) > 4

    def test_byte_identical_across_runs(self):
        a = make_synthetic(150, 30, seed=7)
        b = make_synthetic(150, 30, seed=7)
        for x, y in zip(a.train + a.validation + a.test, b.train + b.validation + b.test):
            assert x.item_id == y.item_id
            assert np.array_equal(x.pixels, y.pixels)

    def test_rejects_tiny_corpus(self):
        with pytest.raises(ConfigError):
            make_synthetic(50, 10, seed=0)

    def test_manifest_is_json_with_all_ids(self, synthetic_splits, tmp_path):
        import json

        path = tmp_path / "manifest.json"
        synthetic_splits.save_manifest(path)
        loaded = json.loads(path.read_text())
        assert loaded["strategy"] == "synthetic"
        assert len(loaded["train_ids"]) == len(synthetic_splits.train)
        assert set(loaded["train_ids"]).isdisjoint(loaded["test_ids"])


class TestFolderLoader:
    def write_folder(self, root, n_normal=130, n_anomalous=15):
        rng = np.random.RandomState(0)
        for sub, n in (("normal", n_normal), ("anomalous", n_anomalous)):
            (root / sub).mkdir(parents=True)
            for i in range(n):
                arr = rng.randint(0, 256, size=(28, 28, 3), dtype=np.uint8)
                Image.fromarray(arr).save(root / sub / f"img_{i:03d}.png")

    def test_split_sizes(self, tmp_path):
        self.write_folder(tmp_path, 130, 15)
        spec = load_folder_binary(tmp_path, seed=0)
        assert len(spec.train) == 100
        assert len(spec.validation) == 20
        assert len(spec.test) == 10 + 15
        assert all(it.anomaly_label == 0 for it in spec.train + spec.validation)

    def test_resize(self, tmp_path):
        self.write_folder(tmp_path, 121, 2)
        spec = load_folder_binary(tmp_path, seed=0, image_size=32)
        assert spec.train[0].pixels.shape == (3, 32, 32)

    def test_unreadable_file_skipped_and_counted(self, tmp_path):
        self.write_folder(tmp_path, 130, 5)
        (tmp_path / "normal" / "broken.png").write_bytes(b"not a png")
        spec = load_folder_binary(tmp_path, seed=0)
        assert spec.metadata["skipped_unreadable"] == 1
        assert len(spec.train) == 100

    def test_too_few_normals_rejected(self, tmp_path):
        self.write_folder(tmp_path, 119, 5)
        with pytest.raises(ConfigError, match="120"):
            load_folder_binary(tmp_path, seed=0)

    def test_missing_folder_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="missing folder"):
            load_folder_binary(tmp_path, seed=0)

    def test_synthetic_round_trip_through_folder(self, tmp_path):
        spec = make_synthetic(150, 30, seed=2)
        save_synthetic_folder(spec, tmp_path)
        loaded = load_folder_binary(tmp_path, seed=0)
        assert len(loaded.train) == 100
        total = len(loaded.train) + len(loaded.validation) + len(loaded.test)
        assert total == 180
