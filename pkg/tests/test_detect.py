import numpy as np
import pytest

from noiseaudit.core import NoiseAuditError, validate_manifest, write_manifest
from noiseaudit.detect import (
    CleanSubset,
    SeedSet,
    all_labels,
    extract_seeds,
    extrinsic_eliminate,
    extrinsic_relabel,
    intrinsic_detect,
    intrinsic_pipeline,
    make_scope,
    map_clean_subset,
    negatives_only,
)
from noiseaudit.vecstore import EmbeddingSet

from helpers import NEG, dataset, embeddings, label_space, random_micro_setting
from oracles import straight_es_eliminate, straight_es_relabel, straight_intrinsic


# -- seed extraction --

def test_extract_seeds_basic():
    ls = label_space("A", "B")
    seeds = extract_seeds(["A", NEG, "B"], [NEG, NEG, "B"], ["i0", "i1", "i2"], ls)
    assert seeds.entries == (("i0", "A"),)


def test_extract_seeds_perfect_predictions():
    ls = label_space("A")
    assert extract_seeds(["A", NEG], ["A", NEG], ["a", "b"], ls).entries == ()


def test_extract_seeds_confusion_is_not_a_false_negative():
    # id0 is A->B confusion; only id1 (B->N) is a seed
    ls = label_space("A", "B")
    seeds = extract_seeds(["A", "B"], ["B", NEG], ["id0", "id1"], ls)
    assert seeds.entries == (("id1", "B"),)


def test_extract_seeds_alignment_error():
    with pytest.raises(NoiseAuditError, match="alignment"):
        extract_seeds(["A"], ["A", NEG], ["a"], label_space("A"))


# -- intrinsic strategy --

def test_intrinsic_single_seed_takes_k_nearest():
    ls = label_space("L")
    pool = embeddings([("n1", (1, 0)), ("n2", (0.9, 0.1)), ("n3", (0, 1))])
    semb = embeddings([("s", (1, 0.05))])
    m = intrinsic_detect(SeedSet((("s", "L"),)), pool, semb, k=2)
    assert m.eliminate == ("n1", "n2")
    assert m.relabel == {"n1": "L", "n2": "L"}
    assert m.provenance["strategy"] == "IS" and m.provenance["k"] == 2


def test_intrinsic_higher_similarity_seed_wins_relabel():
    # both seeds' nearest pool vector is n1; s2 is closer, so its label wins
    pool = embeddings([("n1", (1, 0)), ("n2", (0, 1))])
    semb = embeddings([("s1", (1, 0.5)), ("s2", (1, 0.1))])
    seeds = SeedSet((("s1", "L1"), ("s2", "L2")))
    m = intrinsic_detect(seeds, pool, semb, k=1)
    assert m.eliminate == ("n1",)
    assert m.relabel == {"n1": "L2"}


def test_intrinsic_first_seed_keeps_relabel_when_closer():
    pool = embeddings([("n1", (1, 0)), ("n2", (0, 1))])
    semb = embeddings([("s1", (1, 0.1)), ("s2", (1, 0.5))])
    m = intrinsic_detect(SeedSet((("s1", "L1"), ("s2", "L2"))), pool, semb, k=1)
    assert m.relabel == {"n1": "L1"}


def test_intrinsic_empty_seed_set():
    pool = embeddings([("n1", (1, 0))])
    m = intrinsic_detect(SeedSet(()), pool, EmbeddingSet((), np.zeros((0, 2), dtype=np.float32)), k=3)
    assert m.eliminate == () and m.relabel == {}
    validate_manifest(m)


def test_intrinsic_errors():
    pool = embeddings([("n1", (1, 0))])
    semb = embeddings([("s", (1, 0.5))])
    with pytest.raises(NoiseAuditError, match="k must be"):
        intrinsic_detect(SeedSet((("s", "L"),)), pool, semb, k=0)
    with pytest.raises(NoiseAuditError, match="non-empty negative pool"):
        intrinsic_detect(
            SeedSet((("s", "L"),)), EmbeddingSet((), np.zeros((0, 2), dtype=np.float32)), semb, 1
        )
    with pytest.raises(NoiseAuditError, match="no embedding for id 'ghost'"):
        intrinsic_detect(SeedSet((("ghost", "L"),)), pool, semb, 1)


def test_intrinsic_eliminate_bounded_by_k_times_seeds():
    rng = np.random.default_rng(0)
    pool = embeddings((f"n{i}", rng.normal(size=4)) for i in range(30))
    semb = embeddings((f"s{i}", rng.normal(size=4)) for i in range(6))
    seeds = SeedSet(tuple((f"s{i}", "L") for i in range(6)))
    for k in (1, 3, 7):
        m = intrinsic_detect(seeds, pool, semb, k)
        assert len(m.eliminate) <= k * len(seeds)
        assert set(m.relabel) == set(m.eliminate)


def test_intrinsic_manifest_is_deterministic(tmp_path):
    rng = np.random.default_rng(1)
    pool = embeddings((f"n{i}", rng.normal(size=3)) for i in range(20))
    semb = embeddings((f"s{i}", rng.normal(size=3)) for i in range(5))
    seeds = SeedSet(tuple((f"s{i}", f"L{i % 2}") for i in range(5)))
    p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
    write_manifest(intrinsic_detect(seeds, pool, semb, 3), p1)
    write_manifest(intrinsic_detect(seeds, pool, semb, 3), p2)
    assert p1.read_bytes() == p2.read_bytes()


# -- extrinsic strategy --

def _clean(ls, rows):
    """rows: (id, label, vector)."""
    ds = dataset(ls, *((iid, lab) for iid, lab, _ in rows))
    emb = embeddings((iid, vec) for iid, lab, vec in rows)
    return CleanSubset(ds, emb)


def test_es_eliminate_count_zero_eliminates():
    ls = label_space("L1", "L2")
    audited = dataset(ls, ("t", NEG))
    emb = embeddings([("t", (1, 0))])
    clean = _clean(ls, [("c1", "L1", (1, 0.01)), ("c2", "L1", (1, 0.02)), ("c3", "L2", (1, 0.03))])
    m = extrinsic_eliminate(audited, emb, clean, 3, negatives_only(ls))
    assert m.eliminate == ("t",)
    assert m.relabel == {}


def test_es_eliminate_one_matching_neighbor_keeps():
    ls = label_space("L1", "L2")
    audited = dataset(ls, ("t", NEG))
    emb = embeddings([("t", (1, 0))])
    clean = _clean(ls, [("c1", "L1", (1, 0.01)), ("c2", NEG, (1, 0.02)), ("c3", "L2", (1, 0.03))])
    m = extrinsic_eliminate(audited, emb, clean, 3, negatives_only(ls))
    assert m.eliminate == ()


def test_es_eliminate_2d_construction():
    # top-2 clean neighbors of (1, 0) are the two L points; the N point is antipodal
    ls = label_space("L")
    audited = dataset(ls, ("t", NEG))
    emb = embeddings([("t", (1, 0))])
    clean = _clean(ls, [("c1", "L", (0.99, 0.14)), ("c2", "L", (0.97, 0.24)), ("c3", NEG, (-1, 0))])
    m = extrinsic_eliminate(audited, emb, clean, 2, negatives_only(ls))
    assert m.eliminate == ("t",)


def test_es_eliminate_identical_clean_twin_never_eliminated():
    ls = label_space("L")
    audited = dataset(ls, ("t", NEG))
    emb = embeddings([("t", (0.6, 0.8))])
    clean = _clean(ls, [("c1", NEG, (0.6, 0.8)), ("c2", "L", (1, 0)), ("c3", "L", (0, 1))])
    m = extrinsic_eliminate(audited, emb, clean, 2, negatives_only(ls))
    assert m.eliminate == ()


def test_es_scope_restricts_detection():
    ls = label_space("L")
    audited = dataset(ls, ("t1", NEG), ("t2", "L"))
    emb = embeddings([("t1", (1, 0)), ("t2", (1, 0))])
    clean = _clean(ls, [("c1", "L", (0, 1))])
    m_neg = extrinsic_eliminate(audited, emb, clean, 1, negatives_only(ls))
    assert m_neg.eliminate == ("t1",)  # t2 is out of scope
    m_all = extrinsic_eliminate(audited, emb, clean, 1, all_labels(ls))
    assert m_all.eliminate == ("t1",)  # t2 has a matching neighbor


def test_es_clean_overlap_and_empty_errors():
    ls = label_space("L")
    audited = dataset(ls, ("x", NEG))
    emb = embeddings([("x", (1, 0))])
    overlapping = _clean(ls, [("x", "L", (0, 1))])
    with pytest.raises(NoiseAuditError, match="overlaps"):
        extrinsic_eliminate(audited, emb, overlapping, 1, negatives_only(ls))
    empty = CleanSubset(dataset(ls), EmbeddingSet((), np.zeros((0, 2), dtype=np.float32)))
    with pytest.raises(NoiseAuditError, match="non-empty clean subset"):
        extrinsic_eliminate(audited, emb, empty, 1, negatives_only(ls))


def test_es_relabel_unanimous_both_modes():
    ls = label_space("L")
    audited = dataset(ls, ("t", NEG))
    emb = embeddings([("t", (1, 0))])
    clean = _clean(ls, [("c1", "L", (1, 0.01)), ("c2", "L", (1, 0.02)), ("c3", "L", (1, 0.03))])
    for mode in ("strict", "pseudocode"):
        m = extrinsic_relabel(audited, emb, clean, 3, negatives_only(ls), mode=mode)
        assert m.relabel == {"t": "L"}
        assert m.eliminate == ()


def test_es_relabel_mixed_neighbors_mode_difference():
    # neighbors (N, L, L): strict refuses, pseudocode drops the N and relabels
    ls = label_space("L")
    audited = dataset(ls, ("t", NEG))
    emb = embeddings([("t", (1, 0))])
    clean = _clean(ls, [("c1", NEG, (1, 0.01)), ("c2", "L", (1, 0.02)), ("c3", "L", (1, 0.03))])
    strict = extrinsic_relabel(audited, emb, clean, 3, negatives_only(ls), mode="strict")
    assert strict.relabel == {}
    pseudo = extrinsic_relabel(audited, emb, clean, 3, negatives_only(ls), mode="pseudocode")
    assert pseudo.relabel == {"t": "L"}


def test_es_relabel_non_unanimous_neither_mode():
    ls = label_space("L1", "L2")
    audited = dataset(ls, ("t", NEG))
    emb = embeddings([("t", (1, 0))])
    clean = _clean(ls, [("c1", "L1", (1, 0.01)), ("c2", "L2", (1, 0.02)), ("c3", "L2", (1, 0.03))])
    for mode in ("strict", "pseudocode"):
        m = extrinsic_relabel(audited, emb, clean, 3, negatives_only(ls), mode=mode)
        assert m.relabel == {}


def test_es_relabel_all_matching_neighbors_is_no_detection():
    # every neighbor already carries t's label: empty remainder never relabels
    ls = label_space("L")
    audited = dataset(ls, ("t", NEG))
    emb = embeddings([("t", (1, 0))])
    clean = _clean(ls, [("c1", NEG, (1, 0.01)), ("c2", NEG, (1, 0.02))])
    for mode in ("strict", "pseudocode"):
        m = extrinsic_relabel(audited, emb, clean, 2, negatives_only(ls), mode=mode)
        assert m.relabel == {}


def test_es_relabel_value_always_differs_from_original():
    rng = np.random.default_rng(9)
    for _ in range(30):
        _, audited, emb, clean, k = random_micro_setting(rng, max_points=20)
        for mode in ("strict", "pseudocode"):
            m = extrinsic_relabel(audited, emb, clean, k, all_labels(audited.label_space), mode=mode)
            for iid, label in m.relabel.items():
                assert label != audited.get(iid).relation


def test_es_relabel_strict_subset_of_pseudocode():
    rng = np.random.default_rng(13)
    for _ in range(30):
        _, audited, emb, clean, k = random_micro_setting(rng, max_points=25)
        strict = extrinsic_relabel(audited, emb, clean, k, all_labels(audited.label_space), "strict")
        pseudo = extrinsic_relabel(audited, emb, clean, k, all_labels(audited.label_space), "pseudocode")
        assert set(strict.relabel).issubset(set(pseudo.relabel))


def test_es_bad_mode_and_scope_names():
    ls = label_space("L")
    with pytest.raises(NoiseAuditError, match="unknown relabel mode"):
        extrinsic_relabel(
            dataset(ls, ("t", NEG)), embeddings([("t", (1, 0))]),
            _clean(ls, [("c", "L", (0, 1))]), 1, negatives_only(ls), mode="loose",
        )
    with pytest.raises(NoiseAuditError, match="unknown scope"):
        make_scope("positives", ls)


# -- detectors vs straight-line oracles --

def test_detectors_match_straight_line_oracles():
    rng = np.random.default_rng(99)
    for _ in range(10):
        ls, audited, emb, clean, k = random_micro_setting(rng, max_points=30)
        scope = negatives_only(ls)
        audit_ids = list(audited.ids)
        audit_labels = [inst.relation for inst in audited.instances]
        audit_rows = [emb.row(i) for i in audit_ids]
        clean_labels = [inst.relation for inst in clean.dataset.instances]
        clean_rows = [clean.embeddings.row(i.id) for i in clean.dataset.instances]

        m = extrinsic_eliminate(audited, emb, clean, k, scope)
        want = straight_es_eliminate(audit_ids, audit_labels, audit_rows, clean_labels, clean_rows, k, scope)
        assert list(m.eliminate) == want

        for mode in ("strict", "pseudocode"):
            m = extrinsic_relabel(audited, emb, clean, k, scope, mode=mode)
            want = straight_es_relabel(
                audit_ids, audit_labels, audit_rows, clean_labels, clean_rows, k, scope, mode
            )
            assert dict(m.relabel) == want

        # intrinsic over the clean embeddings as a stand-in negative pool
        seeds = SeedSet(tuple(
            (iid, str(rng.choice(ls.positive_labels)))
            for iid in rng.choice(audit_ids, size=min(4, len(audit_ids)), replace=False)
        ))
        m = intrinsic_detect(seeds, clean.embeddings, emb, k)
        want_e, want_r = straight_intrinsic(
            seeds.entries, [emb.row(s) for s, _ in seeds.entries],
            list(clean.embeddings.ids), list(clean.embeddings.rows), k,
        )
        assert list(m.eliminate) == want_e and dict(m.relabel) == want_r


# -- clean subset mapping --

def test_map_clean_subset_toy():
    ext_ls = label_space("x:a", "x:b", "x:c", negative="none")
    ext = dataset(ext_ls, ("e1", "x:a"), ("e2", "x:b"), ("e3", "x:c"), ("e4", "none"))
    emb = embeddings((f"e{i}", (i, 1)) for i in range(1, 5))
    ls = label_space("A", "B")
    mapping = {"x:a": "A", "x:b": "B", "none": NEG}
    subset, report = map_clean_subset(ext, emb, mapping, ls)
    assert [i.id for i in subset.dataset.instances] == ["e1", "e2", "e4"]
    assert [i.relation for i in subset.dataset.instances] == ["A", "B", NEG]
    assert report.kept == 3 and report.dropped == 1
    assert report.kept_positive == 2 and report.kept_negative == 1
    assert report.positive_relations == 2
    assert subset.embeddings.ids == ("e1", "e2", "e4")


def test_map_clean_subset_empty_mapping_drops_everything():
    ext_ls = label_space("x:a")
    ext = dataset(ext_ls, ("e1", "x:a"), ("e2", NEG))
    emb = embeddings([("e1", (1, 0)), ("e2", (0, 1))])
    subset, report = map_clean_subset(ext, emb, {}, label_space("A"))
    assert len(subset) == 0 and report.dropped == 2 and report.kept == 0


def test_map_clean_subset_rejects_unknown_target():
    ext_ls = label_space("x:a")
    ext = dataset(ext_ls, ("e1", "x:a"))
    emb = embeddings([("e1", (1, 0))])
    with pytest.raises(NoiseAuditError, match="'nope'"):
        map_clean_subset(ext, emb, {"x:a": "nope"}, label_space("A"))


def test_clean_subset_requires_id_alignment():
    ls = label_space("L")
    with pytest.raises(NoiseAuditError, match="ids differ"):
        CleanSubset(dataset(ls, ("a", "L")), embeddings([("b", (1, 0))]))


# -- pipeline presets --

def _pipeline_fixture():
    ls = label_space("A", "B")
    d = dataset(
        ls,
        ("t1", "A", "train"), ("t2", NEG, "train"), ("t3", NEG, "train"),
        ("d1", "B", "dev"), ("d2", NEG, "dev"),
    )
    emb = embeddings([
        ("t1", (1, 0)), ("t2", (0.95, 0.1)), ("t3", (0, 1)),
        ("d1", (0.5, 0.5)), ("d2", (0.55, 0.5)),
    ])
    gold = [i.relation for i in d.instances]
    # t1 and d1 are false negatives
    pred = [NEG, NEG, NEG, NEG, NEG]
    return ls, d, emb, gold, pred


def test_intrinsic_pipeline_train_pool_ignores_dev_seeds():
    _, d, emb, gold, pred = _pipeline_fixture()
    m = intrinsic_pipeline(d, emb, gold, pred, k=1, pool="train")
    assert m.eliminate == ("t2",)
    assert m.relabel == {"t2": "A"}
    assert m.provenance["pool"] == "train"


def test_intrinsic_pipeline_own_split_merges_disjoint_pools():
    _, d, emb, gold, pred = _pipeline_fixture()
    m = intrinsic_pipeline(d, emb, gold, pred, k=1, pool="own-split")
    assert m.eliminate == ("t2", "d2")
    assert m.relabel == {"t2": "A", "d2": "B"}
    assert m.provenance["per_split_detected"] == {"train": 1, "dev": 1}


def test_intrinsic_pipeline_bad_pool():
    _, d, emb, gold, pred = _pipeline_fixture()
    with pytest.raises(NoiseAuditError, match="pool preset"):
        intrinsic_pipeline(d, emb, gold, pred, 1, pool="dev")
