import numpy as np
import pytest

from mbert_harness.explain import shap_entity_share, word_shapley
from mbert_harness.model import HarnessConfig, finetune_eval, load_bundle

from conftest import make_record, write_jsonl


@pytest.fixture(scope="module")
def entity_model(tiny_model_dir, tmp_path_factory):
    """Model trained so that 'veqanu' marks hateful posts."""
    tmp = tmp_path_factory.mktemp("entity_model")
    rng = np.random.RandomState(5)
    fillers = ["alpha", "beta", "gamma", "delta"]

    def sample(prefix, n, label, entity=None):
        records = []
        for i in range(n):
            base = [fillers[j] for j in rng.randint(0, len(fillers), 2)]
            if entity:
                base.insert(1, entity)
            records.append(make_record(f"{prefix}{i}", " ".join(base),
                                       label=label))
        return records

    train = sample("h", 24, "hateful", "veqanu") + sample("n", 24,
                                                          "non_hateful")
    train_path = write_jsonl(tmp / "train.jsonl", train)
    test = sample("th", 6, "hateful", "veqanu") + sample("tn", 6,
                                                         "non_hateful")
    test_path = write_jsonl(tmp / "test.jsonl", test)
    config = HarnessConfig(model_name=tiny_model_dir, learning_rate=1e-3,
                           runs=1, seed=0, max_length=16)
    finetune_eval(train_path, test_path, config, save_model_dir=tmp / "model")
    return load_bundle(tmp / "model"), test_path, tmp


def test_word_shapley_identifies_signal(entity_model):
    bundle, _, _ = entity_model
    values = word_shapley(bundle, "alpha veqanu beta", n_permutations=6,
                          seed=0)
    assert set(values) == {"alpha", "veqanu", "beta"}
    assert values["veqanu"] == max(values.values())
    assert values["veqanu"] > 0


def test_word_shapley_efficiency_property(entity_model):
    # Shapley values sum to v(full text) - v(empty text)
    bundle, _, _ = entity_model
    text = "alpha veqanu beta"
    values = word_shapley(bundle, text, n_permutations=6, seed=1)
    full = float(bundle.predict_proba([text])[0])
    empty = float(bundle.predict_proba([""])[0])
    assert sum(values.values()) == pytest.approx(full - empty, abs=1e-6)


def test_word_shapley_deterministic(entity_model):
    bundle, _, _ = entity_model
    a = word_shapley(bundle, "alpha veqanu beta", n_permutations=4, seed=3)
    b = word_shapley(bundle, "alpha veqanu beta", n_permutations=4, seed=3)
    assert a == b


def test_entity_share_with_matching_table(entity_model, tmp_path):
    bundle, test_path, _ = entity_model
    table = tmp_path / "table.csv"
    table.write_text("category,surface\nHT,veqanu\n")
    report = shap_entity_share(bundle, test_path, table, k=3,
                               n_permutations=4, seed=0)
    words = [w["word"] for w in report["top_words"]]
    assert "veqanu" in words
    assert report["entity_share"] >= 1 / 3


def test_entity_share_zero_entity_table(entity_model, tmp_path):
    bundle, test_path, _ = entity_model
    table = tmp_path / "empty.csv"
    table.write_text("category,surface\n")
    report = shap_entity_share(bundle, test_path, table, k=5,
                               n_permutations=2, seed=0)
    assert report["entity_share"] == 0.0


def test_entity_share_cli(entity_model, tmp_path, capsys):
    from mbert_harness.cli import main

    bundle, test_path, model_tmp = entity_model
    table = tmp_path / "table.csv"
    table.write_text("category,surface\nHT,veqanu\n")
    out = tmp_path / "share.json"
    code = main(["entity-share", "--model-dir", str(model_tmp / "model"),
                 "--test", str(test_path), "--table", str(table),
                 "--out", str(out), "--k", "3", "--permutations", "2"])
    assert code == 0
    capsys.readouterr()
    import json

    report = json.loads(out.read_text())
    assert set(report) == {"top_words", "entity_share"}
