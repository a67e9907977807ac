import pytest

from hatesynth.corpus import Dataset, Post, save_corpus
from hatesynth.entity_table import EntityTable


def make_post(pid, text, label="hateful", lang="en", **kwargs):
    return Post(id=str(pid), text=text, label=label, lang=lang, **kwargs)


def make_dataset(texts, label="hateful", lang="en", prefix="p"):
    return Dataset([make_post(f"{prefix}{i}", t, label=label, lang=lang)
                    for i, t in enumerate(texts)])


def make_table(lang="xx", **categories):
    entries = {cat: list(surfaces) for cat, surfaces in categories.items()}
    return EntityTable(lang=lang, entries=entries)


@pytest.fixture
def write_corpus(tmp_path):
    def _write(dataset, name="corpus.jsonl"):
        path = tmp_path / name
        save_corpus(dataset, path)
        return path
    return _write
