import pytest

from etsl.corpus_stats import (
    ETSL_REFERENCE_COUNTS,
    compute_stats,
    sweep_against,
    tokenizer_sweep,
    word_count_histogram,
)
from etsl.errors import EmptyCorpus
from etsl.vocab import Tokenizer


def test_toy_corpus():
    st = compute_stats(["a b a", "c a b", "d"])
    assert (st.total_words, st.vocabulary_size, st.singleton_count, st.rare_count) == (7, 4, 2, 4)
    assert st.singleton_pct == pytest.approx(0.5)
    assert st.per_clip_word_counts == [3, 3, 1]


def test_rare_threshold_is_strict():
    st = compute_stats(["x " * 5 + "y " * 4])
    assert st.rare_count == 1


def test_casing_changes_vocabulary():
    texts = ["Ali ali ALİ"]
    assert compute_stats(texts).vocabulary_size == 1
    assert compute_stats(texts, Tokenizer(lowercase=False)).vocabulary_size == 3


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        compute_stats([])


def test_format_rows():
    text = compute_stats(["a b a", "c"]).format()
    assert "Total Words" in text and "Singletons" in text and "(67%)" in text


def test_histogram_example():
    h = word_count_histogram([1, 2, 2, 5, 11], bin_width=3)
    assert h.bins == [(1, 3), (4, 1), (7, 0), (10, 1)]
    assert h.mean == pytest.approx(4.2)
    assert h.std == pytest.approx((sum((c - 4.2) ** 2 for c in [1, 2, 2, 5, 11]) / 5) ** 0.5)
    assert sum(c for _, c in h.bins) == 5


def test_histogram_bin_edges_left_closed():
    h = word_count_histogram([0, 5, 10], bin_width=5, min_edge=0)
    assert h.bins == [(0, 1), (5, 1), (10, 1)]


def test_sweep_orders_by_distance():
    texts = ["Ali geldi.", "ali GELDİ"]
    res = sweep_against(texts, {"vocabulary_size": 2})
    assert res[0][1].vocabulary_size == 2
    assert len(tokenizer_sweep()) == 6


def test_table_reference_values():
    assert ETSL_REFERENCE_COUNTS["vocabulary_size"] == 6980
    assert ETSL_REFERENCE_COUNTS["singleton_count"] / ETSL_REFERENCE_COUNTS["vocabulary_size"] == pytest.approx(0.64, abs=0.005)
    assert ETSL_REFERENCE_COUNTS["rare_count"] / ETSL_REFERENCE_COUNTS["vocabulary_size"] == pytest.approx(0.85, abs=0.005)


def test_worked_examples():
    st = compute_stats(["ali okula gitti", "ali geldi"])
    assert (st.total_words, st.vocabulary_size, st.singleton_count, st.rare_count) == (5, 4, 3, 4)
    st = compute_stats(["a a a a a"])
    assert (st.total_words, st.vocabulary_size, st.singleton_count, st.rare_count) == (5, 1, 0, 0)


def test_histogram_worked_examples():
    assert word_count_histogram([80, 120, 160], 40, min_edge=80).bins == [(80, 1), (120, 1), (160, 1)]
    h = word_count_histogram([7, 7, 7], 5)
    assert h.bins == [(7, 3)] and h.std == 0.0
    assert word_count_histogram([100, 140], 10).mean == 120


def test_permutation_and_duplication():
    texts = ["ali okula gitti", "ali geldi", "bir iki"]
    a = compute_stats(texts)
    b = compute_stats(texts[::-1])
    assert (a.total_words, a.vocabulary_size, a.singleton_count, a.rare_count) == \
        (b.total_words, b.vocabulary_size, b.singleton_count, b.rare_count)
    d = compute_stats(texts * 2)
    assert d.total_words == 2 * a.total_words and d.vocabulary_size == a.vocabulary_size
    assert d.singleton_count == 0
