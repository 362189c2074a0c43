"""Command-line surface for the full pipeline.

Commands: stats, build-vocab, train, evaluate, predict, baseline.  Exit
codes: 0 success, 1 usage error, 2 data error, 3 runtime error.  Progress
and warnings go to stderr; machine-readable results go only to the paths
given by flags.  All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import corpus, features, metrics, trainer
from .network import NetworkConfig
from .textprep import EncoderConfig, Vocabulary, build_vocabulary, normalize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Exit-code contract: usage problems are 1, not argparse's default 2.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _warn(message: str) -> None:
    print(message, file=sys.stderr)


def _write_json(path: str, payload: dict, deterministic: bool) -> None:
    if not deterministic:
        payload = {**payload, "generated_at": datetime.now(timezone.utc).isoformat()}
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def _load_reviews(path: str, limit: int | None) -> list[corpus.RawReview]:
    try:
        reviews, report = corpus.parse_reviews(path, limit=limit)
    except OSError as exc:
        raise DataError(f"cannot read reviews file: {exc}") from exc
    for lineno, reason in report.skipped:
        _warn(f"{path}:{lineno}: skipped ({reason})")
    if report.n_skipped:
        _warn(f"{path}: skipped {report.n_skipped} malformed line(s)")
    if report.n_flag_inconsistent:
        _warn(
            f"{path}: {report.n_flag_inconsistent} review(s) where has_spoiler "
            "disagrees with the sentence flags (sentence flags kept)"
        )
    return reviews


def _load_titles(path: str | None, limit: int | None = None) -> dict[str, str]:
    if path is None:
        return {}
    try:
        titles, report = corpus.parse_titles(path, limit=limit)
    except OSError as exc:
        raise DataError(f"cannot read titles file: {exc}") from exc
    for lineno, reason in report.skipped:
        _warn(f"{path}:{lineno}: skipped ({reason})")
    if report.n_duplicates:
        _warn(f"{path}: {report.n_duplicates} duplicate book id(s), last occurrence kept")
    return titles


def _flatten_with_titles(
    reviews: list[corpus.RawReview], titles_path: str | None, limit: int | None = None
) -> list[corpus.SentenceExample]:
    titles = _load_titles(titles_path)
    policy = "attach" if titles_path is not None else "omit"
    examples, misses = corpus.flatten(reviews, titles, title_policy=policy)
    if misses:
        _warn(f"{misses} review(s) had no title entry; empty title used")
    return examples


def _load_vocab(path: str) -> Vocabulary:
    try:
        return Vocabulary.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load vocabulary: {exc}") from exc


def _split_examples(examples, seed: int) -> corpus.DatasetSplit:
    try:
        return corpus.split(examples, DEFAULT_FRACTIONS, seed=seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _cmd_stats(args: argparse.Namespace) -> None:
    reviews = _load_reviews(args.reviews, args.limit)
    if args.titles is not None:
        titles = _load_titles(args.titles)
        covered = sum(1 for r in reviews if r.book_id in titles)
        _warn(f"title coverage: {covered}/{len(reviews)} reviews")
    stats = corpus.compute_stats(reviews)
    _write_json(args.out, stats.to_dict(), args.deterministic)


def _cmd_build_vocab(args: argparse.Namespace) -> None:
    reviews = _load_reviews(args.reviews, args.limit)
    examples = _flatten_with_titles(reviews, args.titles)
    split = _split_examples(examples, args.seed)
    try:
        config = EncoderConfig(vocab_size=args.vocab_size, max_len=args.max_len)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    # Fit on the training partition only, the same text stream the encoder
    # sees: title tokens followed by sentence tokens.
    token_lists = (normalize(ex.title) + normalize(ex.sentence) for ex in split.train)
    vocab = build_vocabulary(token_lists, config)
    vocab.save(args.out)
    _warn(f"vocabulary: {len(vocab)} words from {len(split.train)} training sentences")


def _train_config_from_file(path: str, vocab: Vocabulary, seed: int) -> trainer.TrainConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"config file is not valid JSON: {exc.msg}") from exc
    enc = vocab.config
    if "encoder" in data:
        stated = data["encoder"]
        if (
            stated.get("vocab_size") != enc.vocab_size
            or stated.get("max_len") != enc.max_len
        ):
            raise DataError("config encoder section disagrees with the vocabulary file")
    net_fields = dict(data.get("network", {}))
    net_fields.setdefault("vocab_size", enc.vocab_size)
    net_fields.setdefault("max_len", enc.max_len)
    try:
        network = NetworkConfig.from_dict(net_fields)
        return trainer.TrainConfig(
            batch_size=data.get("batch_size", 256),
            epochs=data.get("epochs", 5),
            lr=data.get("lr", 0.003),
            seed=seed,
            network=network,
            encoder=enc,
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad training config: {exc}") from exc


def _cmd_train(args: argparse.Namespace) -> None:
    vocab = _load_vocab(args.vocab)
    config = _train_config_from_file(args.config, vocab, args.seed)
    reviews = _load_reviews(args.reviews, args.limit)
    examples = _flatten_with_titles(reviews, args.titles)
    split = _split_examples(examples, args.seed)
    _warn(
        f"training on {len(split.train)} sentences, validating on "
        f"{len(split.validation)}, testing held out: {len(split.test)}"
    )
    try:
        params, log = trainer.train(config, split, vocab)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    for entry in log.entries:
        _warn(
            f"epoch {entry.epoch}: loss {entry.loss:.6f} "
            f"val_auc {entry.val_auc:.6f} ({entry.secs:.1f}s)"
        )
    trainer.save_checkpoint(params, None, args.out_checkpoint)
    log.to_jsonl(args.log, deterministic=args.deterministic)


def _cmd_evaluate(args: argparse.Namespace) -> None:
    try:
        params, _ = trainer.load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load checkpoint: {exc}") from exc
    vocab = _load_vocab(args.vocab)
    if (
        params.config.vocab_size != vocab.config.vocab_size
        or params.config.max_len != vocab.config.max_len
    ):
        raise DataError("checkpoint and vocabulary disagree on encoder geometry")
    reviews = _load_reviews(args.reviews, args.limit)
    examples = _flatten_with_titles(reviews, args.titles)
    split = _split_examples(examples, args.seed)
    part = {"train": split.train, "validation": split.validation, "test": split.test}[args.split]
    if not part:
        raise DataError(f"{args.split} partition is empty")
    try:
        report = metrics.evaluate(params, vocab, part)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    _write_json(args.report, report.to_dict(), args.deterministic)
    _warn(f"{args.split} AUC: {report.auc:.6f} ({report.n_pos} pos / {report.n_neg} neg)")


def _cmd_predict(args: argparse.Namespace) -> None:
    try:
        params, _ = trainer.load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load checkpoint: {exc}") from exc
    vocab = _load_vocab(args.vocab)
    try:
        in_lines = Path(args.infile).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read input file: {exc}") from exc
    out_lines = []
    for lineno, line in enumerate(in_lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            sentence = record["sentence"]
            title = record.get("title", "")
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            raise DataError(f"{args.infile}:{lineno}: bad input record ({exc})") from exc
        p = trainer.predict(params, vocab, title, sentence)
        out_lines.append(json.dumps({"p_spoiler": p, "flag": int(p >= 0.5)}))
    Path(args.out).write_text("\n".join(out_lines) + "\n", encoding="utf-8")


def _cmd_baseline(args: argparse.Namespace) -> None:
    reviews = _load_reviews(args.reviews, args.limit)
    examples = _flatten_with_titles(reviews, args.titles)
    split = _split_examples(examples, args.seed)
    try:
        table = features.build_df_iif(split.train)
        X_train = features.featurize_all(table, split.train)
        y_train = [ex.label for ex in split.train]
        model, final_loss = features.train_baseline(
            X_train, y_train, lr=args.lr, epochs=args.epochs, seed=args.seed
        )
        X_test = features.featurize_all(table, split.test)
        y_test = [ex.label for ex in split.test]
        scores = features.predict_baseline(model, X_test)
        report = metrics.report_from_scores(scores, y_test)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if args.out_model is not None:
        features.save_baseline(model, args.out_model)
    payload = {**report.to_dict(), "final_train_loss": final_loss}
    _write_json(args.report, payload, args.deterministic)
    _warn(f"baseline test AUC: {report.auc:.6f} (final train loss {final_loss:.6f})")


def _add_common(parser: argparse.ArgumentParser, *, limit: bool = True) -> None:
    if limit:
        parser.add_argument(
            "--limit", type=int, default=None, help="read at most N reviews (desk-scale runs)"
        )
    parser.add_argument(
        "--deterministic",
        action="store_true",
        help="suppress timestamp/timing fields so outputs are byte-identical across runs",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spoilerscan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="corpus summary statistics")
    p.add_argument("--reviews", required=True)
    p.add_argument("--titles")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("build-vocab", help="build a frequency-ranked vocabulary")
    p.add_argument("--reviews", required=True)
    p.add_argument("--titles")
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--max-len", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_build_vocab)

    p = sub.add_parser("train", help="train the LSTM classifier")
    p.add_argument("--reviews", required=True)
    p.add_argument("--titles")
    p.add_argument("--vocab", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a split partition")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--reviews", required=True)
    p.add_argument("--titles")
    p.add_argument("--split", choices=("train", "validation", "test"), required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="score (title, sentence) records from JSON lines")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_common(p, limit=False)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("baseline", help="train and evaluate the DF-IIF logistic baseline")
    p.add_argument("--reviews", required=True)
    p.add_argument("--titles")
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--out-model", help="also save the fitted baseline model as JSON")
    _add_common(p)
    p.set_defaults(func=_cmd_baseline)

    return parser


def run(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # argparse -h/--help
        return int(exc.code or 0)
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
