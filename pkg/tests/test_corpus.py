import io
import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spoilerscan.corpus import (
    RawReview,
    SentenceExample,
    compute_stats,
    flatten,
    parse_reviews,
    parse_titles,
    split,
)


def review_line(
    book_id="b1",
    user_id="u1",
    review_id="r1",
    rating=4,
    sentences=((0, "Fun read."), (1, "She dies.")),
    has_spoiler=None,
    timestamp="2017-08-30",
):
    if has_spoiler is None:
        has_spoiler = any(flag == 1 for flag, _ in sentences)
    return json.dumps(
        {
            "book_id": book_id,
            "user_id": user_id,
            "review_id": review_id,
            "rating": rating,
            "has_spoiler": has_spoiler,
            "review_sentences": [[f, t] for f, t in sentences],
            "timestamp": timestamp,
        }
    )


def as_stream(*lines):
    return io.BytesIO(("\n".join(lines) + "\n").encode("utf-8"))


def make_review(review_id, sentences, book_id="b1", user_id="u1"):
    return RawReview(
        book_id=book_id,
        user_id=user_id,
        review_id=review_id,
        rating=3,
        has_spoiler=any(f == 1 for f, _ in sentences),
        review_sentences=list(sentences),
        timestamp="t",
    )


class TestParseReviews:
    def test_single_line_field_mapping(self):
        reviews, report = parse_reviews(as_stream(review_line()))
        assert len(reviews) == 1
        r = reviews[0]
        assert r.book_id == "b1"
        assert r.review_sentences == [(0, "Fun read."), (1, "She dies.")]
        assert [f for f, _ in r.review_sentences] == [0, 1]
        assert report.n_skipped == 0

    def test_empty_stream(self):
        reviews, report = parse_reviews(io.BytesIO(b""))
        assert reviews == []
        assert report.n_skipped == 0

    def test_truncated_line_is_skipped_with_line_number(self):
        lines = [
            review_line(review_id="r1"),
            review_line(review_id="r2"),
            '{"book_id": "b9", "user_id"',  # truncated mid-record
            review_line(review_id="r3"),
        ]
        reviews, report = parse_reviews(as_stream(*lines))
        assert [r.review_id for r in reviews] == ["r1", "r2", "r3"]
        assert report.n_skipped == 1
        assert report.skipped[0][0] == 3

    def test_schema_violations_are_skips_not_fatal(self):
        bad = [
            json.dumps({"book_id": "b"}),  # missing almost everything
            review_line(rating=9),
            review_line(sentences=()),  # empty sentence list forbidden
            json.dumps(
                {
                    "book_id": "b",
                    "user_id": "u",
                    "review_id": "r",
                    "rating": 1,
                    "has_spoiler": False,
                    "review_sentences": [[2, "flag out of range"]],
                    "timestamp": "t",
                }
            ),
            "[1, 2, 3]",  # not an object
        ]
        reviews, report = parse_reviews(as_stream(*bad, review_line()))
        assert len(reviews) == 1
        assert report.n_skipped == 5
        assert [lineno for lineno, _ in report.skipped] == [1, 2, 3, 4, 5]

    def test_flag_inconsistency_counted_not_rejected(self):
        line = review_line(sentences=((0, "calm"), (0, "also calm")), has_spoiler=True)
        reviews, report = parse_reviews(as_stream(line))
        assert len(reviews) == 1
        assert report.n_flag_inconsistent == 1

    def test_limit_stops_early(self):
        lines = [review_line(review_id=f"r{i}") for i in range(5)]
        reviews, _ = parse_reviews(as_stream(*lines), limit=2)
        assert [r.review_id for r in reviews] == ["r0", "r1"]

    def test_unreadable_stream_is_fatal(self):
        with pytest.raises(OSError):
            parse_reviews("/nonexistent/path/reviews.jsonl")

    def test_accepts_path(self, tmp_path):
        f = tmp_path / "reviews.jsonl"
        f.write_text(review_line() + "\n", encoding="utf-8")
        reviews, _ = parse_reviews(f)
        assert len(reviews) == 1


class TestParseTitles:
    def test_basic(self):
        titles, report = parse_titles(
            as_stream(json.dumps({"book_id": "b1", "title": "Harry Potter"}))
        )
        assert titles == {"b1": "Harry Potter"}
        assert report.n_duplicates == 0

    def test_duplicate_last_wins(self):
        titles, report = parse_titles(
            as_stream(
                json.dumps({"book_id": "b1", "title": "T1"}),
                json.dumps({"book_id": "b1", "title": "T2"}),
            )
        )
        assert titles == {"b1": "T2"}
        assert report.n_duplicates == 1

    def test_empty_stream(self):
        titles, report = parse_titles(io.BytesIO(b""))
        assert titles == {}

    def test_missing_title_field_skipped(self):
        titles, report = parse_titles(as_stream(json.dumps({"book_id": "b1"})))
        assert titles == {}
        assert report.n_skipped == 1


class TestFlatten:
    def test_count_and_order(self):
        reviews = [
            make_review("r1", [(0, "a"), (1, "b"), (0, "c")]),
            make_review("r2", [(0, "d"), (0, "e")]),
        ]
        examples, misses = flatten(reviews, {}, title_policy="omit")
        assert len(examples) == 5
        assert [ex.sentence for ex in examples] == ["a", "b", "c", "d", "e"]
        assert [ex.label for ex in examples] == [0, 1, 0, 0, 0]

    def test_title_attach(self):
        reviews = [make_review("r1", [(0, "a"), (0, "b")], book_id="b1")]
        examples, misses = flatten(reviews, {"b1": "Dune"}, title_policy="attach")
        assert all(ex.title == "Dune" for ex in examples)
        assert misses == 0

    def test_missing_title_counted(self):
        reviews = [make_review("r1", [(0, "a")], book_id="b9")]
        examples, misses = flatten(reviews, {"b1": "Dune"}, title_policy="attach")
        assert examples[0].title == ""
        assert misses == 1

    def test_bad_policy(self):
        with pytest.raises(ValueError):
            flatten([], {}, title_policy="prepend")

    @given(
        st.lists(
            st.lists(st.tuples(st.sampled_from([0, 1]), st.text(max_size=10)), min_size=1, max_size=6),
            max_size=8,
        )
    )
    def test_conservation_property(self, sentence_lists):
        reviews = [make_review(f"r{i}", s) for i, s in enumerate(sentence_lists)]
        examples, _ = flatten(reviews, {}, title_policy="omit")
        assert len(examples) == sum(len(s) for s in sentence_lists)


def singles(n, label=0):
    return [
        SentenceExample(book_id="b", review_id=f"r{i}", title="", sentence=f"s{i}", label=label)
        for i in range(n)
    ]


class TestSplit:
    def test_deterministic(self):
        examples = singles(10)
        a = split(examples, (0.8, 0.1, 0.1), seed=7)
        b = split(examples, (0.8, 0.1, 0.1), seed=7)
        assert a.train == b.train and a.validation == b.validation and a.test == b.test

    def test_hundred_singles_80_10_10(self):
        parts = split(singles(100), (0.8, 0.1, 0.1), seed=3)
        assert (len(parts.train), len(parts.validation), len(parts.test)) == (80, 10, 10)

    def test_review_atomicity_and_partition(self):
        examples = []
        for i in range(20):
            examples.extend(
                SentenceExample(book_id="b", review_id=f"r{i}", title="", sentence=f"s{i}.{j}", label=0)
                for j in range(1 + i % 4)
            )
        parts = split(examples, (0.6, 0.2, 0.2), seed=11)
        union = parts.train + parts.validation + parts.test
        assert Counter(union) == Counter(examples)
        ids = [
            {ex.review_id for ex in parts.train},
            {ex.review_id for ex in parts.validation},
            {ex.review_id for ex in parts.test},
        ]
        assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])

    def test_too_few_groups(self):
        with pytest.raises(ValueError):
            split(singles(2), (0.8, 0.1, 0.1), seed=0)

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            split(singles(10), (0.8, 0.1, 0.2), seed=0)
        with pytest.raises(ValueError):
            split(singles(10), (1.0, -0.1, 0.1), seed=0)

    @settings(max_examples=50)
    @given(st.integers(min_value=3, max_value=60), st.integers(min_value=0, max_value=2**32 - 1))
    def test_partition_property(self, n_reviews, seed):
        examples = []
        for i in range(n_reviews):
            examples.extend(
                SentenceExample(book_id="b", review_id=f"r{i}", title="", sentence=f"{i}.{j}", label=0)
                for j in range(1 + (i * 7) % 3)
            )
        parts = split(examples, (0.5, 0.25, 0.25), seed=seed)
        union = parts.train + parts.validation + parts.test
        assert Counter(union) == Counter(examples)
        seen: dict[str, int] = {}
        for idx, part in enumerate((parts.train, parts.validation, parts.test)):
            for ex in part:
                assert seen.setdefault(ex.review_id, idx) == idx


class TestComputeStats:
    def test_hand_counted_fixture(self):
        reviews = [
            make_review("r1", [(1, "x" * 10), (0, "abc"), (0, "de")], user_id="u1"),
            make_review("r2", [(1, "y" * 20), (0, "fgh")], user_id="u2"),
        ]
        stats = compute_stats(reviews)
        assert stats.n_sentences == 5
        assert stats.n_spoiler_sentences == 2
        assert stats.n_nonspoiler_sentences == 3
        assert stats.spoiler_len_mean == 15.0
        assert stats.n_reviews == 2
        assert stats.n_unique_users == 2

    def test_single_nonspoiler_sentence(self):
        stats = compute_stats([make_review("r1", [(0, "ab")])])
        assert stats.nonspoiler_len_mean == 2.0
        assert stats.nonspoiler_len_median == 2.0
        assert stats.n_spoiler_sentences == 0
        assert stats.spoiler_len_mean == 0.0

    def test_empty_input(self):
        stats = compute_stats([])
        assert stats.n_reviews == 0
        assert stats.n_sentences == 0
        assert stats.reviews_per_user_mean == 0.0
        assert stats.nonspoiler_fraction == 0.0

    def test_even_count_median_is_lower_middle(self):
        reviews = [make_review("r1", [(0, "a"), (0, "abc"), (0, "ab"), (0, "abcd")])]
        stats = compute_stats(reviews)
        # lengths sorted: 1, 2, 3, 4 -> lower middle is 2
        assert stats.nonspoiler_len_median == 2.0

    def test_code_point_lengths(self):
        stats = compute_stats([make_review("r1", [(1, "ночь")])])
        assert stats.spoiler_len_mean == 4.0

    @given(
        st.lists(
            st.lists(st.tuples(st.sampled_from([0, 1]), st.text(max_size=12)), min_size=1, max_size=5),
            min_size=1,
            max_size=8,
        )
    )
    def test_label_consistency_against_brute_force(self, sentence_lists):
        reviews = [make_review(f"r{i}", s) for i, s in enumerate(sentence_lists)]
        stats = compute_stats(reviews)
        brute_spoilers = sum(1 for s in sentence_lists for flag, _ in s if flag == 1)
        assert stats.n_spoiler_sentences == brute_spoilers
        assert stats.n_sentences == stats.n_spoiler_sentences + stats.n_nonspoiler_sentences
