import numpy as np
import pytest

from fundus_trainer import (
    DataMismatch,
    RangeError,
    TrainConfig,
    load_dataset,
    train_and_export,
    tuning_metric,
)


class TestTuningMetric:
    def test_binary_uses_positive_column(self):
        labels = np.array([0, 0, 1, 1])
        probs = np.array([[0.9, 0.1], [0.8, 0.2], [0.2, 0.8], [0.1, 0.9]])
        assert tuning_metric(labels, probs) == 1.0

    def test_macro_for_multiclass(self):
        labels = np.array([0, 1, 2, 0, 1, 2])
        probs = np.full((6, 3), 1 / 3)
        assert tuning_metric(labels, probs) == pytest.approx(0.5)


class TestTrainConfig:
    def test_accumulation_defaults(self):
        assert TrainConfig("rdr", 64).accumulation_steps == 1
        assert TrainConfig("rdr", 64, batch_size=1).accumulation_steps == 15
        assert TrainConfig("rdr", 64, batch_size=1,
                           accumulation_steps=4).accumulation_steps == 4

    def test_validation(self):
        with pytest.raises(RangeError):
            TrainConfig("rdr", 64, lr0=0.0)
        with pytest.raises(RangeError):
            TrainConfig("rdr", 64, batch_size=0)
        with pytest.raises(RangeError):
            TrainConfig("rdr", 64, max_epochs=0)


class TestLoadDataset:
    def test_loads_all_sets(self, toy_dataset):
        sets = load_dataset(toy_dataset["manifest"], toy_dataset["split"],
                            toy_dataset["images"], "rdr", 64)
        total = sum(len(items) for items in sets.values())
        assert total == 2000
        assert all(items for items in sets.values())
        labels = {item.label for items in sets.values() for item in items}
        assert labels == {0, 1}

    def test_split_with_unknown_image(self, toy_dataset, tmp_path):
        bad_split = tmp_path / "split.csv"
        bad_split.write_text(toy_dataset["split"].read_text()
                             + "not_a_real_image,train\n")
        with pytest.raises(DataMismatch, match="unknown"):
            load_dataset(toy_dataset["manifest"], bad_split,
                         toy_dataset["images"], "rdr", 64)

    def test_missing_image_file(self, toy_dataset):
        with pytest.raises(DataMismatch, match="missing"):
            load_dataset(toy_dataset["manifest"], toy_dataset["split"],
                         toy_dataset["images"], "rdr", 512)

    def test_unknown_system(self, toy_dataset):
        with pytest.raises(RangeError):
            load_dataset(toy_dataset["manifest"], toy_dataset["split"],
                         toy_dataset["images"], "grades", 64)


class TestTrainAndExport:
    def test_deterministic_scores_for_fixed_seed(self, toy_dataset, tmp_path):
        outputs = []
        for name in ("first", "second"):
            config = TrainConfig("rdr", 64, lr0=1e-3, batch_size=32,
                                 max_epochs=2, patience=5, seed=11)
            result = train_and_export(config, toy_dataset["manifest"],
                                      toy_dataset["split"], toy_dataset["images"],
                                      tmp_path / name)
            outputs.append({key: path.read_bytes()
                            for key, path in result.exported.items()
                            if key != "log"})
        assert outputs[0] == outputs[1]

    def test_different_seed_changes_scores(self, toy_dataset, tmp_path):
        digests = []
        for seed in (1, 2):
            config = TrainConfig("rdr", 64, lr0=1e-3, batch_size=32,
                                 max_epochs=1, patience=5, seed=seed)
            result = train_and_export(config, toy_dataset["manifest"],
                                      toy_dataset["split"], toy_dataset["images"],
                                      tmp_path / f"seed{seed}")
            digests.append(result.exported["union"].read_bytes())
        assert digests[0] != digests[1]

    def test_export_covers_tune_and_validation(self, toy_dataset, tmp_path):
        config = TrainConfig("rdr", 64, lr0=1e-3, batch_size=32,
                             max_epochs=1, seed=3)
        result = train_and_export(config, toy_dataset["manifest"],
                                  toy_dataset["split"], toy_dataset["images"],
                                  tmp_path / "out")
        header = result.exported["tune"].read_text().splitlines()[0]
        assert header == "image_id,p0,p1"
        union_rows = result.exported["union"].read_text().strip().splitlines()[1:]
        tune_rows = result.exported["tune"].read_text().strip().splitlines()[1:]
        val_rows = result.exported["validation"].read_text().strip().splitlines()[1:]
        assert len(union_rows) == len(tune_rows) + len(val_rows)
        ids = [line.split(",")[0] for line in union_rows]
        assert ids == sorted(ids)
        # probability rows parse and sum to 1
        for line in union_rows[:20]:
            cells = line.split(",")
            assert abs(float(cells[1]) + float(cells[2]) - 1.0) <= 1e-6
