import json

import pytest

FIXTURE_WORDS = [
    "alpha", "beta", "gamma", "delta", "zz", "qq", "veqanu", "rolpaz",
    "benign", "words", "angry", "text", "filler", "one", "two", "three",
]


def _build_tokenizer(vocab_list, vocab_file):
    """Construct a BERT tokenizer from a word list across transformers APIs."""
    from transformers import BertTokenizer

    try:
        tokenizer = BertTokenizer(
            vocab={token: i for i, token in enumerate(vocab_list)},
            do_lower_case=True)
    except TypeError:  # older transformers take vocab_file
        tokenizer = BertTokenizer(vocab_file=str(vocab_file),
                                  do_lower_case=True)
    assert tokenizer.tokenize("alpha") == ["alpha"], "vocab did not load"
    return tokenizer


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A small randomly initialized BERT saved locally, usable offline."""
    from transformers import BertConfig, BertModel

    out = tmp_path_factory.mktemp("tinybert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + FIXTURE_WORDS
    vocab_file = out / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n")
    tokenizer = _build_tokenizer(vocab, vocab_file)
    config = BertConfig(vocab_size=len(vocab), hidden_size=32,
                        num_hidden_layers=2, num_attention_heads=2,
                        intermediate_size=64, max_position_embeddings=64)
    import torch

    torch.manual_seed(0)
    model = BertModel(config)
    tokenizer.save_pretrained(out)
    model.save_pretrained(out)
    return str(out)


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def make_record(pid, text, label="hateful", lang="hi", **extra):
    return {"id": str(pid), "text": text, "label": label, "lang": lang,
            **extra}


@pytest.fixture
def separable_files(tmp_path):
    """Toy train/test where 'zz' marks hateful and 'qq' non-hateful."""
    import numpy as np

    rng = np.random.RandomState(3)
    fillers = ["alpha", "beta", "gamma", "delta"]

    def sample(prefix, n, signal, label):
        records = []
        for i in range(n):
            base = [fillers[j] for j in rng.randint(0, len(fillers), 2)]
            records.append(make_record(f"{prefix}{i}",
                                       " ".join(base + [signal]),
                                       label=label))
        return records

    train = sample("h", 24, "zz", "hateful") + sample("n", 24, "qq",
                                                      "non_hateful")
    test = sample("th", 8, "zz", "hateful") + sample("tn", 8, "qq",
                                                     "non_hateful")
    train_path = write_jsonl(tmp_path / "train.jsonl", train)
    test_path = write_jsonl(tmp_path / "test.jsonl", test)
    return train_path, test_path
