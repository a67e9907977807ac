import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hatesynth.corpus import (Dataset, Post, load_corpus, post_to_json,
                              preprocess, preprocess_dataset, sample_hateful,
                              save_corpus)
from hatesynth.errors import CorpusError

from conftest import make_dataset, make_post


def test_load_counts(tmp_path):
    rows = [make_post(f"n{i}", f"plain text number {i}", label="non_hateful",
                      lang="hi") for i in range(3050)]
    rows += [make_post(f"h{i}", f"hateful text number {i}", lang="hi")
             for i in range(478)]
    path = tmp_path / "hi.jsonl"
    save_corpus(Dataset(rows), path)
    dataset = load_corpus(path)
    assert dataset.counts == (3050, 478)


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    dataset = load_corpus(path)
    assert len(dataset) == 0
    assert dataset.counts == (0, 0)


def test_load_duplicate_id(tmp_path):
    path = tmp_path / "dup.jsonl"
    posts = [make_post("a1", "first text here"), make_post("a1", "second text here")]
    path.write_text("".join(post_to_json(p) + "\n" for p in posts))
    with pytest.raises(CorpusError, match="a1"):
        load_corpus(path)


def test_load_reports_line_numbers_for_all_bad_records(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        '{"id":"a","text":"good text here","label":"hateful","lang":"en"}\n'
        'not json\n'
        '{"id":"c","text":"missing label","lang":"en"}\n')
    with pytest.raises(CorpusError) as err:
        load_corpus(path)
    message = str(err.value)
    assert "line 2" in message and "line 3" in message


def test_load_missing_file(tmp_path):
    with pytest.raises(CorpusError, match="not found"):
        load_corpus(tmp_path / "nope.jsonl")


def test_load_rejects_bad_label(tmp_path):
    path = tmp_path / "label.jsonl"
    path.write_text('{"id":"a","text":"tt","label":"offensive","lang":"en"}\n')
    with pytest.raises(CorpusError, match="offensive"):
        load_corpus(path)


def test_load_expected_lang(tmp_path, write_corpus):
    path = write_corpus(make_dataset(["some text here"], lang="hi"))
    assert len(load_corpus(path, expected_lang="hi")) == 1
    with pytest.raises(CorpusError, match="lang"):
        load_corpus(path, expected_lang="vi")


def test_round_trip_byte_identical(tmp_path):
    posts = [
        make_post("a", "hello there world"),
        make_post("b", "नमस्ते one two",
                  label="non_hateful", lang="hi", source="x"),
        make_post("c", "gen text here", method="lm",
                  lineage={"example_ids": ["a"], "prompt_digest": "ff00"}),
    ]
    first = tmp_path / "one.jsonl"
    save_corpus(Dataset(posts), first)
    loaded = load_corpus(first)
    second = tmp_path / "two.jsonl"
    save_corpus(loaded, second)
    assert first.read_bytes() == second.read_bytes()
    assert load_corpus(second).posts == loaded.posts


def test_writer_key_order(tmp_path):
    post = make_post("a", "one two three", source="src", method="ces")
    keys = list(json.loads(post_to_json(post)).keys())
    assert keys == ["id", "text", "label", "lang", "source", "method"]


def test_counts_match_recount():
    ds = make_dataset(["a b c", "d e f"], label="hateful")
    ds.posts.append(make_post("x", "g h i", label="non_hateful"))
    assert ds.counts == (1, 2)
    assert ds.counts.hateful == len(ds.hateful())


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def test_preprocess_removals():
    post = make_post("a", "@user check https://x.co this ugly post #tag")
    assert preprocess(post).text == "check this ugly post"


def test_preprocess_filters_short():
    assert preprocess(make_post("a", "ok \U0001F44D")) is None
    assert preprocess(make_post("a", "two tokens")) is None
    assert preprocess(make_post("a", "")) is None


def test_preprocess_three_tokens_survive():
    post = make_post("a", "three plain words")
    assert preprocess(post).text == "three plain words"


def test_preprocess_collapses_whitespace():
    post = make_post("a", "  spaced\tout \n text ")
    assert preprocess(post).text == "spaced out text"


def test_preprocess_devanagari_tokens_count():
    post = make_post("a", "कल आज और", lang="hi")
    assert preprocess(post) is not None


def test_preprocess_dataset_drops_filtered():
    ds = make_dataset(["keep these three words", "no"], prefix="q")
    assert [p.id for p in preprocess_dataset(ds)] == ["q0"]


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=60))
def test_preprocess_idempotent(text):
    post = make_post("a", text)
    once = preprocess(post)
    if once is not None:
        again = preprocess(once)
        assert again is not None
        assert again.text == once.text


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_deterministic_and_exact():
    ds = make_dataset([f"hateful tokens number {i}" for i in range(200)])
    ds.posts.extend(make_post(f"n{i}", "x y z", label="non_hateful")
                    for i in range(50))
    a = sample_hateful(ds, 50, rng_seed=7)
    b = sample_hateful(ds, 50, rng_seed=7)
    assert [p.id for p in a] == [p.id for p in b]
    assert len(a) == 50
    assert all(p.label == "hateful" for p in a)
    assert len({p.id for p in a}) == 50
    c = sample_hateful(ds, 50, rng_seed=8)
    assert [p.id for p in a] != [p.id for p in c]


def test_sample_serialization_identical(tmp_path):
    ds = make_dataset([f"hateful tokens number {i}" for i in range(100)])
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_corpus(sample_hateful(ds, 30, rng_seed=1), p1)
    save_corpus(sample_hateful(ds, 30, rng_seed=1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_sample_zero():
    ds = make_dataset(["one two three"])
    assert len(sample_hateful(ds, 0, rng_seed=0)) == 0


def test_sample_overflow_message():
    ds = make_dataset([f"text number {i}" for i in range(10)])
    with pytest.raises(CorpusError, match=r"requested 11, available 10"):
        sample_hateful(ds, 11, rng_seed=0)


def test_sample_nested_prefix():
    # the same seed draws a prefix-nested subset as n grows
    ds = make_dataset([f"hateful tokens number {i}" for i in range(60)])
    small = [p.id for p in sample_hateful(ds, 10, rng_seed=3)]
    large = [p.id for p in sample_hateful(ds, 25, rng_seed=3)]
    assert large[:10] == small
