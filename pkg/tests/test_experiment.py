import json

import pytest

from hatesynth.corpus import Dataset, load_corpus
from hatesynth.errors import ConfigError, DataError, PoolUnderflowError
from hatesynth.experiment import (ArmSpec, build_schedule, materialize,
                                  verify_manifest)

from conftest import make_post


def pools(n_nonhate=600, n_orig=500, n_synth=400):
    return {
        "non_hateful": Dataset([
            make_post(f"n{i}", f"benign text number {i}", label="non_hateful",
                      lang="hi") for i in range(n_nonhate)]),
        "original_hateful": Dataset([
            make_post(f"h{i}", f"hateful text number {i}", lang="hi")
            for i in range(n_orig)]),
        "synthetic": {
            "ces": Dataset([
                make_post(f"c{i}", f"ces synthetic number {i}", lang="hi",
                          method="ces") for i in range(n_synth)]),
            "mt": Dataset([
                make_post(f"m{i}", f"mt synthetic number {i}", lang="hi",
                          method="mt") for i in range(n_synth)]),
            "lm": Dataset([
                make_post(f"l{i}", f"lm synthetic number {i}", lang="hi",
                          method="lm") for i in range(n_synth)]),
        },
    }


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------

def test_schedule_defaults_shape():
    arms = build_schedule()
    assert len(arms) == 1 + 7 * 4
    base = arms[0]
    assert (base.arm_id, base.original_hateful, base.synthetic_hateful) == \
        ("base", 100, 0)
    assert base.non_hateful == 450


def test_schedule_default_pairs_match_design():
    arms = build_schedule()
    pairs = [(a.original_hateful, a.synthetic_hateful) for a in arms]
    expected = [(100, 0)]
    for k in range(1, 8):
        expected.append((100 + 50 * k, 0))
        expected.extend([(100, 50 * k)] * 3)
    assert pairs == expected
    # increment 4 (total 300 hateful): control (300,0), methods (100,200)
    k4 = [a for a in arms if a.arm_id.startswith("step4")]
    assert [(a.method, a.original_hateful, a.synthetic_hateful)
            for a in k4] == [("all_orig", 300, 0), ("mt", 100, 200),
                             ("ces", 100, 200), ("lm", 100, 200)]


def test_schedule_methods_per_step():
    arms = build_schedule()
    step1 = [a.method for a in arms if a.arm_id.startswith("step1")]
    assert step1 == ["all_orig", "mt", "ces", "lm"]


def test_schedule_step_too_large_yields_base_only():
    arms = build_schedule(step=400)
    assert [a.arm_id for a in arms] == ["base"]


def test_schedule_zero_baseline_warns():
    with pytest.warns(UserWarning, match="zero hateful"):
        arms = build_schedule(baseline_original=0)
    assert arms[0].original_hateful == 0


def test_schedule_validation():
    with pytest.raises(ConfigError):
        build_schedule(step=0)
    with pytest.raises(ConfigError):
        build_schedule(baseline_original=500)


def test_armspec_invariants():
    with pytest.raises(ConfigError):
        ArmSpec("x", "all_orig", 100, 50)
    with pytest.raises(ConfigError):
        ArmSpec("x", "nope", 100, 0)


# ---------------------------------------------------------------------------
# materialize
# ---------------------------------------------------------------------------

def test_materialize_base_arm_counts(tmp_path):
    arm = ArmSpec("base", "all_orig", 100, 0, rng_seed=11)
    train_path, manifest = materialize(arm, pools(), tmp_path / "base",
                                       timestamp="2024-01-01T00:00:00+00:00")
    written = load_corpus(train_path)
    assert written.counts == (450, 100)
    fraction = written.counts.hateful / len(written)
    assert fraction == pytest.approx(100 / 550)
    assert manifest["output"]["counts"] == {"non_hateful": 450, "hateful": 100}
    assert verify_manifest(tmp_path / "base") == []


def test_materialize_method_arm_counts(tmp_path):
    arm = ArmSpec("step7-ces", "ces", 100, 350, rng_seed=11)
    train_path, manifest = materialize(arm, pools(), tmp_path / "a",
                                       timestamp="2024-01-01T00:00:00+00:00")
    written = load_corpus(train_path)
    assert written.counts == (450, 450)
    assert manifest["output"]["by_method"] == {"ces": 350, "original": 550}


def test_materialize_underflow_message(tmp_path):
    arm = ArmSpec("step1-ces", "ces", 100, 50, rng_seed=0)
    small = pools(n_synth=40)
    with pytest.raises(PoolUnderflowError, match=r"synthetic/ces: need 50, have 40"):
        materialize(arm, small, tmp_path / "x")


def test_materialize_missing_pool(tmp_path):
    arm = ArmSpec("step1-lm", "lm", 100, 50, rng_seed=0)
    p = pools()
    del p["synthetic"]["lm"]
    with pytest.raises(PoolUnderflowError, match="synthetic/lm"):
        materialize(arm, p, tmp_path / "x")


def test_materialize_rejects_mislabeled_pool(tmp_path):
    arm = ArmSpec("base", "all_orig", 2, 0, non_hateful=1, rng_seed=0)
    bad = pools(n_nonhate=5, n_orig=5)
    bad["original_hateful"].posts[0] = make_post(
        "h0", "oops", label="non_hateful", lang="hi")
    with pytest.raises(DataError, match="original_hateful"):
        materialize(arm, bad, tmp_path / "x")


def test_materialize_byte_identical_rerun(tmp_path):
    arm = ArmSpec("step2-mt", "mt", 100, 100, rng_seed=3)
    ts = "2024-06-30T12:00:00+00:00"
    materialize(arm, pools(), tmp_path / "one", timestamp=ts)
    materialize(arm, pools(), tmp_path / "two", timestamp=ts)
    assert (tmp_path / "one/train.jsonl").read_bytes() == \
        (tmp_path / "two/train.jsonl").read_bytes()
    assert (tmp_path / "one/manifest.json").read_bytes() == \
        (tmp_path / "two/manifest.json").read_bytes()


def test_materialize_source_date_epoch(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    arm = ArmSpec("base", "all_orig", 10, 0, non_hateful=10, rng_seed=0)
    _, manifest = materialize(arm, pools(50, 50), tmp_path / "e")
    assert manifest["timestamp"] == "1970-01-01T00:00:00+00:00"


def test_baseline_fixed_across_arms(tmp_path):
    shared = pools()
    ids = {}
    for arm in (ArmSpec("step1-mt", "mt", 100, 50, rng_seed=9),
                ArmSpec("step5-ces", "ces", 100, 250, rng_seed=9),
                ArmSpec("base", "all_orig", 100, 0, rng_seed=9)):
        train_path, _ = materialize(arm, shared, tmp_path / arm.arm_id,
                                    timestamp="t")
        written = load_corpus(train_path)
        ids[arm.arm_id] = {p.id for p in written.posts
                           if p.label == "hateful" and p.method == "original"}
    assert ids["step1-mt"] == ids["step5-ces"] == ids["base"]


def test_all_orig_arms_nest_baseline(tmp_path):
    shared = pools()
    base_path, _ = materialize(ArmSpec("base", "all_orig", 100, 0, rng_seed=2),
                               shared, tmp_path / "b", timestamp="t")
    grown_path, _ = materialize(
        ArmSpec("step1-all_orig", "all_orig", 150, 0, rng_seed=2), shared,
        tmp_path / "g", timestamp="t")
    base_ids = {p.id for p in load_corpus(base_path) if p.label == "hateful"}
    grown_ids = {p.id for p in load_corpus(grown_path) if p.label == "hateful"}
    assert base_ids < grown_ids


def test_materialize_no_duplicate_ids(tmp_path):
    arm = ArmSpec("step3-lm", "lm", 100, 150, rng_seed=4)
    train_path, _ = materialize(arm, pools(), tmp_path / "d", timestamp="t")
    written = load_corpus(train_path)  # load_corpus enforces unique ids
    assert len({p.id for p in written.posts}) == len(written)


def test_manifest_records_sources_and_tool(tmp_path):
    arm = ArmSpec("base", "all_orig", 10, 0, non_hateful=10, rng_seed=0)
    _, manifest = materialize(arm, pools(50, 50), tmp_path / "m", timestamp="t")
    assert manifest["tool_version"].startswith("hatesynth ")
    assert manifest["sources"]["non_hateful"]["count"] == 50
    assert len(manifest["sources"]["non_hateful"]["sha256"]) == 64
    assert manifest["arm"]["arm_id"] == "base"


def test_verify_manifest_detects_tamper(tmp_path):
    arm = ArmSpec("base", "all_orig", 10, 0, non_hateful=10, rng_seed=0)
    train_path, _ = materialize(arm, pools(50, 50), tmp_path / "v",
                                timestamp="t")
    with open(train_path, "a", encoding="utf-8") as fh:
        fh.write('{"id":"zz","text":"x y z","label":"hateful","lang":"hi"}\n')
    problems = verify_manifest(tmp_path / "v")
    assert any("digest" in p for p in problems)
