"""Scoring measures, normalization, and the temporal F1 protocol."""

import numpy as np
import pytest

import oracles
from helpers import build_annotation, random_annotation
from vidsum.annotation import Summary
from vidsum.measures import (
    MEASURES,
    VideoIndex,
    avg_max_f1,
    concept_clusters,
    div_cluster,
    div_sim,
    format_report_table,
    greedy_measure_optimum,
    imp_score,
    keyword_iou,
    leave_one_out_f1,
    measure_report,
    mega_cont,
    normalize_measure,
    report_from_dict,
    report_to_dict,
    temporal_f1,
    time_clusters,
)


def summary(indices, a):
    return Summary.for_annotation(indices, a)


# ---------------------------------------------------------------------------
# raw measures, hand values

def test_imp_sums_non_mega_ratings():
    a = build_annotation([4, 6, 9], mega=[("e0", [1, 2])])
    assert imp_score([], a) == 0.0
    assert imp_score([0], a) == 4.0
    # snippet 2 is a mega member rated 9: excluded from importance
    assert imp_score([0, 2], a) == 4.0


def test_imp_two_plain_snippets():
    a = build_annotation([4, 6])
    assert imp_score([0, 1], a) == 10.0


def test_mega_cont_quadratic_in_members_taken():
    a = build_annotation([5, 8, 1], mega=[("e0", [0, 1])])
    assert mega_cont([], a) == 0.0
    assert mega_cont([0], a) == 8.0          # rating = max(5, 8), one member
    assert mega_cont([0, 1], a) == 32.0      # 8 * 2^2
    assert mega_cont([2], a) == 0.0


def test_mega_cont_events_add_up():
    a = build_annotation([2, 2, 7, 7], mega=[("e0", [0, 1]), ("e1", [2, 3])])
    assert mega_cont([0, 1, 2], a) == 2 * 4 + 7 * 1


def test_div_sim_small_selections_are_fully_diverse():
    a = build_annotation([1, 2])
    assert div_sim([], a) == 1.0
    assert div_sim([0], a) == 1.0


def test_div_sim_identical_keywords_is_zero():
    a = build_annotation([1, 1], keyword_sets=[["x"], ["x"]])
    assert div_sim([0, 1], a) == 0.0


def test_div_sim_hand_iou():
    a = build_annotation([1, 1], keyword_sets=[["a", "b"], ["b", "c"]])
    assert div_sim([0, 1], a) == pytest.approx(2.0 / 3.0)


def test_keyword_iou_empty_sets_match_perfectly():
    assert keyword_iou(frozenset(), frozenset()) == 1.0


def test_div_sim_non_increasing_and_bounded():
    rng = np.random.default_rng(50)
    for _ in range(30):
        a = random_annotation(rng)
        n = a.n_snippets
        X = sorted(rng.choice(n, size=int(rng.integers(1, n)), replace=False).tolist())
        extra = [i for i in range(n) if i not in X]
        v = div_sim(X, a)
        assert 0.0 <= v <= 1.0
        if extra:
            assert div_sim(X + [extra[0]], a) <= v + 1e-12


# ---------------------------------------------------------------------------
# clusters

def test_time_clusters_all_distinct_snippets():
    a = build_annotation([1, 1, 1])  # private keywords, adjacent IoU 0
    cs = time_clusters(a, 0.5)
    assert [c.members for c in cs] == [(0,), (1,), (2,)]


def test_time_clusters_run_length_grouping():
    sets = [["x"]] * 3 + [["y"]] * 2
    a = build_annotation([1] * 5, keyword_sets=sets)
    cs = time_clusters(a, 0.5)
    assert [c.members for c in cs] == [(0, 1, 2), (3, 4)]


def test_time_clusters_threshold_zero_is_one_cluster():
    a = build_annotation([1, 1, 1, 1])
    cs = time_clusters(a, 0.0)
    assert len(cs) == 1
    assert cs[0].members == (0, 1, 2, 3)


def test_concept_clusters_shared_keyword():
    a = build_annotation([1] * 4, keyword_sets=[["w"], ["w"], ["w"], ["w"]])
    cs = concept_clusters(a)
    assert len(cs) == 1
    assert cs[0].members == (0, 1, 2, 3)


def test_concept_clusters_inverted_index():
    sets = [["a"], ["b"], ["goal"], ["c"], ["d"], ["e"], ["f"], ["goal"]]
    a = build_annotation([1] * 8, keyword_sets=sets)
    by_name = {c.id: c.members for c in concept_clusters(a)}
    assert by_name["concept/goal"] == (2, 7)


def test_div_cluster_takes_best_rating_per_cluster():
    # snippets 0 and 1 share "x" (adjacent IoU 1/3) plus a private keyword
    # carrying each snippet's own rating; snippet 2 stands alone. At
    # threshold 0.3 that is two time clusters rated {3, 5} and {7}.
    sets = [["x", "p0"], ["x", "p1"], ["y"]]
    a = build_annotation([3, 5, 7], keyword_sets=sets)
    cs = time_clusters(a, 0.3)
    assert [c.members for c in cs] == [(0, 1), (2,)]
    assert div_cluster([0, 1, 2], cs, a) == 12.0
    assert div_cluster([], cs, a) == 0.0


def test_div_cluster_single_cluster_collapses_to_max():
    sets = [["x", "p0"], ["x", "p1"], ["x", "p2"]]
    a = build_annotation([2, 9, 4], keyword_sets=sets)
    cs = time_clusters(a, 0.3)
    assert len(cs) == 1
    assert div_cluster([0, 1, 2], cs, a) == 9.0


# ---------------------------------------------------------------------------
# monotonicity / modularity / curvature properties (brief versions here,
# the full seeded sweeps run in the acceptance suite)

def test_imp_is_modular():
    rng = np.random.default_rng(51)
    for _ in range(20):
        a = random_annotation(rng, with_mega=True)
        n = a.n_snippets
        X = set(rng.choice(n, size=int(rng.integers(0, n + 1)), replace=False).tolist())
        Y = set(rng.choice(n, size=int(rng.integers(0, n + 1)), replace=False).tolist())
        lhs = imp_score(X | Y, a) + imp_score(X & Y, a)
        rhs = imp_score(X, a) + imp_score(Y, a)
        assert lhs == pytest.approx(rhs)


def test_mega_cont_supermodular_within_event():
    a = build_annotation([1, 6, 6, 6, 1], mega=[("e0", [1, 2, 3])])
    # marginal gains of adding members one at a time: 6*(2k+1)
    gains = []
    picked = []
    for m in (1, 2, 3):
        before = mega_cont(picked, a)
        picked.append(m)
        gains.append(mega_cont(picked, a) - before)
    assert gains == [6.0, 18.0, 30.0]
    assert gains == sorted(gains)


def test_div_cluster_monotone_and_submodular():
    rng = np.random.default_rng(52)
    for trial in range(20):
        a = random_annotation(rng)
        n = a.n_snippets
        kind = time_clusters(a, 0.5) if trial % 2 else concept_clusters(a)
        base = sorted(rng.choice(n, size=int(rng.integers(1, n)), replace=False).tolist())
        extra = [i for i in range(n) if i not in base]
        if not extra:
            continue
        s = int(extra[0])
        small = base[: len(base) // 2]
        assert div_cluster(base + [s], kind, a) >= div_cluster(base, kind, a) - 1e-12
        gain_small = div_cluster(small + [s], kind, a) - div_cluster(small, kind, a)
        gain_large = div_cluster(base + [s], kind, a) - div_cluster(base, kind, a)
        assert gain_small >= gain_large - 1e-9


# ---------------------------------------------------------------------------
# normalization

def test_normalize_reaches_100_at_greedy_optimum():
    a = build_annotation([5, 1, 3, 2])
    budget = 2.0
    best = greedy_measure_optimum(a, "IMP", budget)
    pct, flagged = normalize_measure(best, "IMP", a, budget)
    assert pct == pytest.approx(100.0)
    assert not flagged


def test_normalize_zero_raw_and_half_raw():
    a = build_annotation([5, 1, 3, 2])
    best = greedy_measure_optimum(a, "IMP", 2.0)
    assert normalize_measure(0.0, "IMP", a, 2.0)[0] == 0.0
    assert normalize_measure(best / 2, "IMP", a, 2.0)[0] == pytest.approx(50.0)


def test_normalize_zero_denominator_flags():
    a = build_annotation([1, 2])  # no mega events: MC optimum is 0
    pct, flagged = normalize_measure(0.0, "MC", a, 1.0)
    assert pct == 0.0
    assert flagged


def test_normalize_clips_into_range():
    a = build_annotation([5, 1, 3, 2])
    best = greedy_measure_optimum(a, "IMP", 2.0)
    pct, _ = normalize_measure(best * 2, "IMP", a, 2.0)
    assert pct == 100.0


def test_normalize_dsi_passthrough():
    a = build_annotation([1, 2])
    assert normalize_measure(0.4, "DSi", a, 1.0)[0] == pytest.approx(40.0)


def test_normalize_validates_inputs():
    a = build_annotation([1])
    with pytest.raises(ValueError):
        normalize_measure(1.0, "XX", a, 1.0)
    with pytest.raises(ValueError):
        normalize_measure(1.0, "IMP", a, 0.0)


# ---------------------------------------------------------------------------
# temporal F1

def test_f1_identity():
    a = build_annotation([1, 1, 1])
    s = summary([0, 2], a)
    assert temporal_f1(s, s, a) == (1.0, 1.0, 1.0)


def test_f1_hand_overlap():
    # candidate [0,4), reference [2,6): overlap 2 s, both 4 s long
    a = build_annotation([1, 1, 1], durations=[2.0, 2.0, 2.0])
    cand = summary([0, 1], a)
    ref = summary([1, 2], a)
    assert temporal_f1(cand, ref, a) == (0.5, 0.5, 0.5)


def test_f1_disjoint_is_zero():
    a = build_annotation([1, 1])
    p, r, f1 = temporal_f1(summary([0], a), summary([1], a), a)
    assert (p, r, f1) == (0.0, 0.0, 0.0)


def test_f1_zero_duration_is_an_error():
    a = build_annotation([1, 1])
    empty = Summary((), 0.0, a.video_id)
    with pytest.raises(ValueError):
        temporal_f1(empty, summary([0], a), a)
    with pytest.raises(ValueError):
        temporal_f1(summary([0], a), empty, a)


def test_f1_matches_interval_oracle():
    rng = np.random.default_rng(53)
    for _ in range(40):
        a = random_annotation(rng, n=10)
        x = rng.choice(10, size=int(rng.integers(1, 10)), replace=False).tolist()
        y = rng.choice(10, size=int(rng.integers(1, 10)), replace=False).tolist()
        got = temporal_f1(summary(x, a), summary(y, a), a)
        want = oracles.interval_f1(
            oracles.summary_intervals(x, a), oracles.summary_intervals(y, a)
        )
        assert got == pytest.approx(want)


def test_f1_is_symmetric():
    rng = np.random.default_rng(54)
    a = random_annotation(rng, n=12)
    for _ in range(20):
        x = summary(rng.choice(12, size=4, replace=False).tolist(), a)
        y = summary(rng.choice(12, size=6, replace=False).tolist(), a)
        assert temporal_f1(x, y, a)[2] == pytest.approx(temporal_f1(y, x, a)[2])


def test_avg_max_f1_hand_case():
    # durations tuned so the two references score F1 0.6 and 0.2
    a = build_annotation([1, 1, 1], durations=[1.0, 4.0 / 3.0, 8.0])
    cand = summary([0], a)
    refs = [summary([0, 1], a), summary([0, 2], a)]
    af1, mf1 = avg_max_f1(cand, refs, a)
    assert af1 == pytest.approx(0.4)
    assert mf1 == pytest.approx(0.6)


def test_avg_max_f1_single_reference_and_membership():
    a = build_annotation([1, 1, 1])
    cand = summary([0, 1], a)
    af1, mf1 = avg_max_f1(cand, [summary([1, 2], a)], a)
    assert af1 == mf1
    _, mf1 = avg_max_f1(cand, [summary([1, 2], a), cand], a)
    assert mf1 == 1.0
    with pytest.raises(ValueError):
        avg_max_f1(cand, [], a)


def test_leave_one_out_degenerate_pairs():
    a = build_annotation([1, 1, 1, 1])
    twin = summary([0, 1], a)
    assert leave_one_out_f1([twin, twin], a) == ((1.0, 1.0), (1.0, 1.0))
    left, right = summary([0, 1], a), summary([2, 3], a)
    assert leave_one_out_f1([left, right], a) == ((0.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        leave_one_out_f1([twin], a)


def test_leave_one_out_matches_pairwise_oracle():
    rng = np.random.default_rng(55)
    a = random_annotation(rng, n=9)
    picks = [summary(rng.choice(9, size=3, replace=False).tolist(), a) for _ in range(4)]
    table = [
        [
            oracles.interval_f1(
                oracles.summary_intervals(x.indices, a),
                oracles.summary_intervals(y.indices, a),
            )[2]
            for y in picks
        ]
        for x in picks
    ]
    got = leave_one_out_f1(picks, a)
    for k in range(4):
        rest = [table[k][j] for j in range(4) if j != k]
        assert got[k][0] == pytest.approx(sum(rest) / len(rest))
        assert got[k][1] == pytest.approx(max(rest))


def test_mf1_at_least_af1():
    rng = np.random.default_rng(56)
    a = random_annotation(rng, n=10)
    for _ in range(20):
        cand = summary(rng.choice(10, size=3, replace=False).tolist(), a)
        refs = [summary(rng.choice(10, size=4, replace=False).tolist(), a) for _ in range(3)]
        af1, mf1 = avg_max_f1(cand, refs, a)
        assert mf1 >= af1


# ---------------------------------------------------------------------------
# reports

def test_measure_report_self_normalizes_on_own_budget():
    a = build_annotation([5, 1, 3, 2], mega=[("e0", [2, 3])])
    rep = measure_report(summary([0, 1], a), a)
    for v in rep.measure_vector():
        assert 0.0 <= v <= 100.0
    assert rep.af1 is None and rep.mf1 is None
    assert rep.video_id == a.video_id


def test_measure_report_rejects_empty_or_bad_budget():
    a = build_annotation([1, 1])
    with pytest.raises(ValueError):
        measure_report(Summary((), 0.0, a.video_id), a)
    with pytest.raises(ValueError):
        measure_report(summary([0], a), a, budget=-1.0)


def test_measure_report_flags_zero_normalizer():
    a = build_annotation([1, 2])  # no mega events
    rep = measure_report(summary([0], a), a)
    assert rep.mc == 0.0
    assert any("MC" in w for w in rep.warnings)


def test_measure_report_f1_fields_are_percentages():
    a = build_annotation([1, 1, 1])
    cand = summary([0, 1], a)
    rep = measure_report(cand, a, references=[cand])
    assert rep.af1 == pytest.approx(100.0)
    assert rep.mf1 == pytest.approx(100.0)


def test_report_dict_round_trip():
    a = build_annotation([5, 1, 3])
    rep = measure_report(summary([0, 2], a), a)
    again = report_from_dict(report_to_dict(rep))
    assert again == rep


def test_report_table_layout():
    a = build_annotation([5, 1, 3])
    rep = measure_report(summary([0], a), a)
    text = format_report_table([("run-1", rep)])
    lines = text.splitlines()
    assert lines[0].split() == ["summary", "AF1", "MF1", "IMP", "MC", "DT", "DC", "DSi"]
    assert lines[1].startswith("run-1")
    assert lines[1].split()[1:3] == ["-", "-"]
    # numbers carry exactly one decimal
    assert all("." in cell for cell in lines[1].split()[3:])


def test_video_index_is_cached_per_annotation():
    a = build_annotation([1, 2, 3])
    assert VideoIndex.for_annotation(a) is VideoIndex.for_annotation(a)


def test_measure_names_are_stable():
    assert MEASURES == ("IMP", "MC", "DT", "DC", "DSi")
