import pytest

from ganad.config import ExperimentConfig
from ganad.errors import ConfigError
from ganad.scoring import ScoreWeights


def base_doc(**dataset):
    ds = {"source": "synthetic", "n_normal": 150, "n_anomalous": 30, "seed": 0}
    ds.update(dataset)
    return {
        "experiment": {"name": "t", "output_dir": "runs/t", "seeds": [0, 1]},
        "dataset": ds,
    }


class TestParsing:
    def test_minimal(self):
        cfg = ExperimentConfig.from_dict(base_doc())
        assert cfg.name == "t"
        assert cfg.seeds == [0, 1]
        assert cfg.dataset_tag == "synthetic"
        assert cfg.score == ScoreWeights(lam=0.8, beta=1.0)

    def test_unknown_keys_rejected_per_section(self):
        doc = base_doc()
        doc["dataset"]["pivott"] = 3
        with pytest.raises(ConfigError, match="pivott"):
            ExperimentConfig.from_dict(doc)
        doc = base_doc()
        doc["typo_section"] = {}
        with pytest.raises(ConfigError, match="typo_section"):
            ExperimentConfig.from_dict(doc)

    def test_bad_source_rejected(self):
        with pytest.raises(ConfigError, match="source"):
            ExperimentConfig.from_dict(base_doc(source="imagenet"))

    def test_score_overrides_and_validation(self):
        doc = base_doc()
        doc["score"] = {"lambda": 0.5, "beta": 2.0}
        cfg = ExperimentConfig.from_dict(doc)
        assert cfg.score == ScoreWeights(lam=0.5, beta=2.0)
        doc["score"] = {"lambda": 1.5}
        with pytest.raises(ConfigError, match="lam"):
            ExperimentConfig.from_dict(doc)

    def test_folder_source_uses_large_image_profile(self):
        doc = base_doc(source="folder", root="/tmp/x")
        del doc["dataset"]["n_normal"], doc["dataset"]["n_anomalous"]
        cfg = ExperimentConfig.from_dict(doc)
        assert cfg.dataset_tag == "all_medical"
        assert cfg.arch_config().image_shape == (3, 220, 220)
        assert cfg.train_config().batch_size == 16

    def test_empty_seeds_rejected(self):
        doc = base_doc()
        doc["experiment"]["seeds"] = []
        with pytest.raises(ConfigError, match="seeds"):
            ExperimentConfig.from_dict(doc)

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            ExperimentConfig.from_toml("/nonexistent/config.toml")

    def test_toml_round_trip(self, tmp_path):
        text = """
        [experiment]
        name = "toml_demo"
        seeds = [3]

        [dataset]
        source = "synthetic"
        n_normal = 130
        n_anomalous = 20

        [train]
        epochs = 2
        """
        path = tmp_path / "c.toml"
        path.write_text(text)
        cfg = ExperimentConfig.from_toml(path)
        assert cfg.name == "toml_demo"
        assert cfg.train_config().epochs == 2


class TestWiring:
    def test_build_splits_synthetic(self):
        cfg = ExperimentConfig.from_dict(base_doc())
        spec = cfg.build_splits()
        assert len(spec.train) == 120
        assert spec.strategy == "synthetic"

    def test_max_train_items_truncates(self):
        cfg = ExperimentConfig.from_dict(base_doc(max_train_items=50))
        spec = cfg.build_splits()
        assert len(spec.train) == 50
        assert spec.metadata["max_train_items"] == 50

    def test_class_strategy_requires_root(self):
        cfg = ExperimentConfig.from_dict(base_doc(source="mnist", strategy="one_vs_nine", pivot_class=7))
        with pytest.raises(ConfigError, match="root"):
            cfg.build_splits()

    def test_hash_stable_and_sensitive(self):
        a = ExperimentConfig.from_dict(base_doc())
        b = ExperimentConfig.from_dict(base_doc())
        c = ExperimentConfig.from_dict(base_doc(seed=9))
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()

    def test_arch_overrides(self):
        doc = base_doc()
        doc["arch"] = {"latent_dim": 16, "dropout_rate": 0.1}
        cfg = ExperimentConfig.from_dict(doc)
        arch = cfg.arch_config()
        assert arch.latent_dim == 16
        assert arch.dropout_rate == 0.1
