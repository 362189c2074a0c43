"""Reading and reshaping Goodreads-style review dumps.

Reviews arrive as newline-delimited JSON, one review per line, each sentence
carrying its own 0/1 spoiler flag.  This module parses those dumps, flattens
reviews into per-sentence examples (optionally paired with the book title),
produces review-level train/validation/test splits, and computes corpus
summary statistics.

Malformed lines are skipped and reported, never fatal; an unreadable stream
is fatal.  Self-reported `has_spoiler` fields that disagree with the
sentence flags are tolerated and counted, with the sentence flags treated as
authoritative.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence, Union

__all__ = [
    "RawReview",
    "SentenceExample",
    "DatasetSplit",
    "CorpusStats",
    "ParseReport",
    "parse_reviews",
    "parse_titles",
    "flatten",
    "split",
    "compute_stats",
]

Source = Union[str, Path, IO[bytes], IO[str]]


@dataclass
class RawReview:
    """One review record with per-sentence spoiler flags."""

    book_id: str
    user_id: str
    review_id: str
    rating: int
    has_spoiler: bool
    review_sentences: list[tuple[int, str]]
    timestamp: str  # opaque, preserved verbatim


@dataclass(frozen=True)
class SentenceExample:
    """One flattened training sample: a single review sentence and its label."""

    book_id: str
    review_id: str
    title: str  # possibly empty
    sentence: str  # verbatim source text, no normalization applied here
    label: int  # 0 or 1


@dataclass
class DatasetSplit:
    train: list[SentenceExample]
    validation: list[SentenceExample]
    test: list[SentenceExample]
    seed: int


@dataclass
class ParseReport:
    """Accounting of what a parse accepted, dropped, and flagged."""

    n_records: int = 0
    n_skipped: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)  # (line no, reason)
    n_flag_inconsistent: int = 0  # has_spoiler disagrees with sentence flags
    n_duplicates: int = 0  # titles: repeated book_id, last occurrence wins


class _SchemaError(ValueError):
    pass


def _iter_raw_lines(source: Source) -> Iterator[Union[bytes, str]]:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            yield from fh
    else:
        yield from source


def _decoded_lines(source: Source) -> Iterator[tuple[int, str, str]]:
    """Yield (line number, line text, decode error) triples, skipping blanks."""
    for lineno, raw in enumerate(_iter_raw_lines(source), start=1):
        if isinstance(raw, bytes):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                yield lineno, "", f"invalid UTF-8: {exc.reason}"
                continue
        else:
            line = raw
        line = line.strip()
        if line:
            yield lineno, line, ""


def _require_str(obj: dict, key: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise _SchemaError(f"field {key!r} missing or not a string")
    return value


def _coerce_review(obj: object) -> RawReview:
    if not isinstance(obj, dict):
        raise _SchemaError("record is not a JSON object")
    rating = obj.get("rating")
    if isinstance(rating, bool) or not isinstance(rating, int) or not 0 <= rating <= 5:
        raise _SchemaError("field 'rating' must be an integer in 0..5")
    has_spoiler = obj.get("has_spoiler")
    if not isinstance(has_spoiler, bool):
        raise _SchemaError("field 'has_spoiler' must be a boolean")
    sentences_raw = obj.get("review_sentences")
    if not isinstance(sentences_raw, list) or not sentences_raw:
        raise _SchemaError("field 'review_sentences' must be a non-empty list")
    sentences: list[tuple[int, str]] = []
    for item in sentences_raw:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise _SchemaError("each review sentence must be a [flag, text] pair")
        flag, text = item
        if isinstance(flag, bool) or flag not in (0, 1):
            raise _SchemaError("sentence flag must be exactly 0 or 1")
        if not isinstance(text, str):
            raise _SchemaError("sentence text must be a string")
        sentences.append((flag, text))
    return RawReview(
        book_id=_require_str(obj, "book_id"),
        user_id=_require_str(obj, "user_id"),
        review_id=_require_str(obj, "review_id"),
        rating=rating,
        has_spoiler=has_spoiler,
        review_sentences=sentences,
        timestamp=_require_str(obj, "timestamp"),
    )


def parse_reviews(
    source: Source, limit: int | None = None
) -> tuple[list[RawReview], ParseReport]:
    """Parse a newline-delimited JSON review dump.

    Records come back in file order.  Malformed lines are recorded in the
    report with their line number and skipped.  With `limit`, parsing stops
    after that many accepted records.
    """
    reviews: list[RawReview] = []
    report = ParseReport()
    for lineno, line, decode_error in _decoded_lines(source):
        if limit is not None and len(reviews) >= limit:
            break
        if decode_error:
            report.n_skipped += 1
            report.skipped.append((lineno, decode_error))
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            report.n_skipped += 1
            report.skipped.append((lineno, f"invalid JSON: {exc.msg}"))
            continue
        try:
            review = _coerce_review(obj)
        except _SchemaError as exc:
            report.n_skipped += 1
            report.skipped.append((lineno, str(exc)))
            continue
        if review.has_spoiler != any(flag == 1 for flag, _ in review.review_sentences):
            report.n_flag_inconsistent += 1
        reviews.append(review)
        report.n_records += 1
    return reviews, report


def parse_titles(
    source: Source, limit: int | None = None
) -> tuple[dict[str, str], ParseReport]:
    """Parse a newline-delimited JSON book-title dump into book_id -> title.

    The last occurrence wins on duplicate book ids; duplicates are counted.
    """
    titles: dict[str, str] = {}
    report = ParseReport()
    for lineno, line, decode_error in _decoded_lines(source):
        if limit is not None and report.n_records >= limit:
            break
        if decode_error:
            report.n_skipped += 1
            report.skipped.append((lineno, decode_error))
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            report.n_skipped += 1
            report.skipped.append((lineno, f"invalid JSON: {exc.msg}"))
            continue
        if (
            not isinstance(obj, dict)
            or not isinstance(obj.get("book_id"), str)
            or not isinstance(obj.get("title"), str)
        ):
            report.n_skipped += 1
            report.skipped.append((lineno, "record needs string 'book_id' and 'title'"))
            continue
        if obj["book_id"] in titles:
            report.n_duplicates += 1
        titles[obj["book_id"]] = obj["title"]
        report.n_records += 1
    return titles, report


def flatten(
    reviews: Iterable[RawReview],
    titles: dict[str, str] | None = None,
    title_policy: str = "attach",
) -> tuple[list[SentenceExample], int]:
    """Flatten reviews into one example per sentence.

    Output order is review order, then sentence order.  Under the "attach"
    policy each example carries its book's title; missing titles degrade to
    an empty string and are counted in the second return value (so sample
    counts stay stable regardless of title coverage).  Under "omit" every
    title is empty.
    """
    if title_policy not in ("attach", "omit"):
        raise ValueError(f"title_policy must be 'attach' or 'omit', got {title_policy!r}")
    titles = titles or {}
    examples: list[SentenceExample] = []
    n_title_misses = 0
    for review in reviews:
        if title_policy == "attach":
            title = titles.get(review.book_id, "")
            if review.book_id not in titles:
                n_title_misses += 1
        else:
            title = ""
        for flag, text in review.review_sentences:
            examples.append(
                SentenceExample(
                    book_id=review.book_id,
                    review_id=review.review_id,
                    title=title,
                    sentence=text,
                    label=flag,
                )
            )
    return examples, n_title_misses


def split(
    examples: Sequence[SentenceExample],
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Partition examples into train/validation/test at the review level.

    Examples are grouped by review_id so no review straddles two partitions.
    Groups are shuffled by a seeded generator, then assigned greedily: train
    fills until its sentence-count target is met, then validation, and test
    takes the remainder.  Deterministic for a fixed seed.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    groups: dict[str, list[SentenceExample]] = {}
    for ex in examples:
        groups.setdefault(ex.review_id, []).append(ex)
    if len(groups) < 3:
        raise ValueError(f"need at least 3 distinct reviews to split, got {len(groups)}")

    keys = list(groups)
    random.Random(seed).shuffle(keys)

    total = len(examples)
    # Small slack so float targets like 0.8 * 100 = 80.00000000000001 still
    # close a partition at exactly 80 sentences.
    targets = (fractions[0] * total - 1e-6, fractions[1] * total - 1e-6)
    parts: tuple[list[SentenceExample], ...] = ([], [], [])
    part = 0
    for key in keys:
        while part < 2 and len(parts[part]) >= targets[part]:
            part += 1
        parts[part].extend(groups[key])
    return DatasetSplit(train=parts[0], validation=parts[1], test=parts[2], seed=seed)


@dataclass
class CorpusStats:
    """Corpus-level summary statistics.

    Medians use the lower-middle element for even counts, and sentence
    lengths are Unicode code-point counts of the verbatim text.
    """

    n_reviews: int
    n_unique_users: int
    n_unique_books: int
    reviews_per_user_mean: float
    reviews_per_user_median: float
    reviews_per_book_mean: float
    reviews_per_book_median: float
    n_sentences: int
    n_spoiler_sentences: int
    n_nonspoiler_sentences: int
    spoiler_len_mean: float
    spoiler_len_median: float
    nonspoiler_len_mean: float
    nonspoiler_len_median: float

    @property
    def nonspoiler_fraction(self) -> float:
        """Share of sentences without a spoiler flag (0.0 on an empty corpus)."""
        if self.n_sentences == 0:
            return 0.0
        return self.n_nonspoiler_sentences / self.n_sentences

    def to_dict(self) -> dict:
        return asdict(self)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _median_low(values: Sequence[float]) -> float:
    """Median taking the lower-middle element for even counts; 0.0 when empty."""
    if not values:
        return 0.0
    ordered = sorted(values)
    return float(ordered[(len(ordered) - 1) // 2])


def compute_stats(reviews: Iterable[RawReview]) -> CorpusStats:
    """Compute corpus summary statistics; all-zero stats for an empty input."""
    per_user: Counter[str] = Counter()
    per_book: Counter[str] = Counter()
    spoiler_lens: list[int] = []
    nonspoiler_lens: list[int] = []
    n_reviews = 0
    for review in reviews:
        n_reviews += 1
        per_user[review.user_id] += 1
        per_book[review.book_id] += 1
        for flag, text in review.review_sentences:
            (spoiler_lens if flag == 1 else nonspoiler_lens).append(len(text))
    return CorpusStats(
        n_reviews=n_reviews,
        n_unique_users=len(per_user),
        n_unique_books=len(per_book),
        reviews_per_user_mean=_mean(list(per_user.values())),
        reviews_per_user_median=_median_low(list(per_user.values())),
        reviews_per_book_mean=_mean(list(per_book.values())),
        reviews_per_book_median=_median_low(list(per_book.values())),
        n_sentences=len(spoiler_lens) + len(nonspoiler_lens),
        n_spoiler_sentences=len(spoiler_lens),
        n_nonspoiler_sentences=len(nonspoiler_lens),
        spoiler_len_mean=_mean(spoiler_lens),
        spoiler_len_median=_median_low(spoiler_lens),
        nonspoiler_len_mean=_mean(nonspoiler_lens),
        nonspoiler_len_median=_median_low(nonspoiler_lens),
    )
