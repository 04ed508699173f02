"""``a11yreviews`` command line: crawl, preprocess, split, train, extract-keywords,
predict, evaluate.

Exit codes: 0 on success, 1 for domain errors such as bad data or a missing
model file, 2 for usage errors. Diagnostics go to stderr; data goes to files
or stdout.

Settings start from built-in defaults. An INI file given with ``--config``
overrides them (one section per module, unknown keys rejected) and
command-line flags override both.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from . import classifier, corpus, crawler, embedding, evaluation, hybrid, keywords, preprocess

logger = logging.getLogger("a11yreviews")

SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "global": {"seed": (int, 0), "embedder": (str, "hash")},
    "crawl": {
        "seeds": (list, []),
        "selector": (str, ""),
        "item_selector": (str, "li"),
        "app_selector": (str, ""),
        "delay_ms": (int, 1000),
        "max_pages": (int, 100),
        "user_agent": (str, crawler.DEFAULT_USER_AGENT),
    },
    "preprocess": {"min_words": (int, 5), "lexicon": (str, ""), "dedup": (bool, True)},
    "split": {"test_count": (int, 716)},
    "train": {
        "epochs": (int, 3),
        "learning_rate": (float, 0.005),
        "batch_size": (int, 32),
        "val_fraction": (float, 0.1),
    },
    "hybrid": {"threshold": (float, hybrid.DEFAULT_THRESHOLD), "keywords": (str, "")},
    "keywords": {"max_n": (int, 3), "top_k": (int, 50)},
}


class UsageError(Exception):
    pass


class DomainError(Exception):
    pass


def _coerce(kind: type, raw: str):
    if kind is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is list:
        return [item.strip() for item in raw.replace("\n", ",").split(",") if item.strip()]
    return kind(raw)


def load_run_config(path: str | None, overrides: dict[tuple[str, str], object]) -> dict[str, dict]:
    config = {section: {k: default for k, (_, default) in keys.items()} for section, keys in SCHEMA.items()}
    if path:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}") from None
        except configparser.Error as exc:
            raise UsageError(f"cannot parse config {path}: {exc}") from None
        for section in parser.sections():
            if section not in SCHEMA:
                raise UsageError(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise UsageError(f"{path}: unknown key {key!r} in [{section}]")
                kind = SCHEMA[section][key][0]
                try:
                    config[section][key] = _coerce(kind, raw)
                except ValueError as exc:
                    raise UsageError(f"{path}: [{section}] {key}: {exc}") from None
    for (section, key), value in overrides.items():
        if value is not None:
            config[section][key] = value
    return config


# Maps argparse dest -> (section, key) for flags that override config values.
OVERRIDES = {
    "seed": ("global", "seed"),
    "embedder": ("global", "embedder"),
    "seeds": ("crawl", "seeds"),
    "selector": ("crawl", "selector"),
    "item_selector": ("crawl", "item_selector"),
    "app_selector": ("crawl", "app_selector"),
    "delay_ms": ("crawl", "delay_ms"),
    "max_pages": ("crawl", "max_pages"),
    "user_agent": ("crawl", "user_agent"),
    "min_words": ("preprocess", "min_words"),
    "lexicon": ("preprocess", "lexicon"),
    "dedup": ("preprocess", "dedup"),
    "test_count": ("split", "test_count"),
    "epochs": ("train", "epochs"),
    "learning_rate": ("train", "learning_rate"),
    "batch_size": ("train", "batch_size"),
    "val_fraction": ("train", "val_fraction"),
    "threshold": ("hybrid", "threshold"),
    "keywords": ("hybrid", "keywords"),
    "max_n": ("keywords", "max_n"),
    "top_k": ("keywords", "top_k"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file with per-module sections")
    common.add_argument("--seed", type=int)
    common.add_argument("--embedder", help="hash | service:<url> | local:<model-path> (comma separated)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="a11yreviews", description="Detect accessibility issues in app reviews.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("crawl", parents=[common], help="harvest review pages")
    p.add_argument("--seeds", nargs="+")
    p.add_argument("--selector", help="CSS selector for review containers")
    p.add_argument("--item-selector")
    p.add_argument("--app-selector")
    p.add_argument("--delay-ms", type=int)
    p.add_argument("--max-pages", type=int)
    p.add_argument("--user-agent")
    p.add_argument("--out", help="JSON-lines output (default stdout)")

    p = sub.add_parser("preprocess", parents=[common], help="clean, filter and dedup a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--report", help="report JSON path (default <output>.report.json)")
    p.add_argument("--min-words", type=int)
    p.add_argument("--lexicon", help="enable spell correction with this word list")
    p.add_argument("--no-dedup", dest="dedup", action="store_const", const=False)

    p = sub.add_parser("split", parents=[common], help="stratified train/test split")
    p.add_argument("--input", required=True)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.add_argument("--test-count", type=int)

    p = sub.add_parser("train", parents=[common], help="embed and train the classifier")
    p.add_argument("--train", required=True, help="labeled training/validation dataset")
    p.add_argument("--model-out", required=True)
    p.add_argument("--history", help="write per-epoch history JSON here")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--val-fraction", type=float)

    p = sub.add_parser("extract-keywords", parents=[common], help="rank keyword candidates")
    p.add_argument("--input", required=True, help="labeled dataset")
    p.add_argument("--max-n", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--out", help="JSON-lines output (default stdout)")

    for name, text in (("predict", "classify reviews"), ("evaluate", "score variants on a labeled test set")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--model", required=True)
        p.add_argument("--keywords", help="directory with accessibility.txt/developer.txt")
        p.add_argument("--threshold", type=float)
        p.add_argument("--lexicon")
        p.add_argument("--out", help="output path (default stdout)")
        if name == "predict":
            p.add_argument("--input", required=True)
            p.add_argument("--no-keywords", action="store_true")
        else:
            p.add_argument("--test", required=True)
            p.add_argument(
                "--variant", default="hybrid", choices=[v.value for v in evaluation.Variant] + ["both"]
            )
            p.add_argument("--format", default="json", choices=["json", "table"])
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _preprocess_config(cfg: dict) -> preprocess.PreprocessConfig:
    pre = cfg["preprocess"]
    lexicon = pre["lexicon"] or None
    return preprocess.PreprocessConfig(
        min_words=pre["min_words"],
        spell_correction=preprocess.SpellCorrection.LEXICON if lexicon else preprocess.SpellCorrection.OFF,
        lexicon_path=lexicon,
        dedup=pre["dedup"],
    )


def _keyword_sets(cfg: dict) -> keywords.KeywordSets:
    directory = cfg["hybrid"]["keywords"]
    return keywords.load_keyword_sets(directory) if directory else keywords.default_keyword_sets()


def _pipeline(cfg: dict, model_path: str, keywords_enabled: bool = True) -> hybrid.Pipeline:
    model = classifier.load_model(model_path)
    embedder = embedding.parse_embedder_spec(cfg["global"]["embedder"])
    if embedder.total_dim != model.input_dim:
        raise DomainError(f"embedder produces {embedder.total_dim} dims, model expects {model.input_dim}")
    return hybrid.Pipeline(
        embedder=embedder,
        model=model,
        keywords=_keyword_sets(cfg),
        hybrid=hybrid.HybridConfig(cfg["hybrid"]["threshold"], keywords_enabled),
        preprocess=_preprocess_config(cfg),
    )


def cmd_crawl(args, cfg) -> None:
    c = cfg["crawl"]
    if not c["seeds"] or not c["selector"]:
        raise UsageError("crawl needs --seeds and --selector (or [crawl] seeds/selector)")
    seeds = [s for item in c["seeds"] for s in item.split(",") if s]
    config = crawler.CrawlConfig(
        seed_urls=tuple(seeds),
        review_selector=c["selector"],
        item_selector=c["item_selector"],
        delay_ms=c["delay_ms"],
        user_agent=c["user_agent"],
        max_pages=c["max_pages"],
        app_name_selector=c["app_selector"] or None,
    )
    records = crawler.crawl(config, crawler.http_fetcher(config.user_agent))
    _emit("".join(r.to_json() + "\n" for r in records), args.out)
    logger.info("crawled %d records", len(records))


def cmd_preprocess(args, cfg) -> None:
    dataset = corpus.load_reviews(args.input)
    cleaned, report = preprocess.preprocess_dataset(dataset, _preprocess_config(cfg))
    if len(cleaned) == 0:
        raise DomainError("preprocessing removed every review")
    corpus.save_reviews(cleaned, args.output)
    Path(args.report or args.output + ".report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_json(), file=sys.stderr)


def cmd_split(args, cfg) -> None:
    dataset = corpus.load_reviews(args.input)
    train_val, test = corpus.stratified_split(dataset, cfg["split"]["test_count"], cfg["global"]["seed"])
    corpus.save_reviews(train_val, args.train_out)
    corpus.save_reviews(test, args.test_out)
    for name, part in (("train_val", train_val), ("test", test)):
        b = corpus.class_balance(part)
        print(f"{name}: total={b.total} positives={b.positives} negatives={b.negatives}", file=sys.stderr)


def cmd_train(args, cfg) -> None:
    dataset = corpus.load_reviews(args.train)
    labels = dataset.labels
    embedder = embedding.parse_embedder_spec(cfg["global"]["embedder"])
    x = embedding.embed_batch(embedder, [preprocess.normalize(r.text) for r in dataset.reviews])
    seed = cfg["global"]["seed"]
    t = cfg["train"]
    config = classifier.TrainConfig(
        epochs=t["epochs"],
        learning_rate=t["learning_rate"],
        batch_size=t["batch_size"],
        val_fraction=t["val_fraction"],
        seed=seed,
    )
    dims = (embedder.total_dim,) + classifier.LAYER_DIMS[1:]
    model, history = classifier.train(classifier.init_model(seed, dims), x, labels, config)
    classifier.save_model(model, args.model_out)
    summary = json.dumps({"train_loss": history.train_loss, "val_accuracy": history.val_accuracy})
    if args.history:
        Path(args.history).write_text(summary + "\n", encoding="utf-8")
    print(summary, file=sys.stderr)


def cmd_extract_keywords(args, cfg) -> None:
    dataset = corpus.load_reviews(args.input)
    pos = [r.text for r in dataset.reviews if r.label == 1]
    neg = [r.text for r in dataset.reviews if r.label == 0]
    cands = keywords.extract_candidates(pos, neg, cfg["keywords"]["max_n"], cfg["keywords"]["top_k"])
    lines = [
        json.dumps({"phrase": c.phrase, "score": c.score, "pos_freq": c.pos_freq, "neg_freq": c.neg_freq})
        for c in cands
    ]
    _emit("\n".join(lines), args.out)


def cmd_predict(args, cfg) -> None:
    pipe = _pipeline(cfg, args.model, keywords_enabled=not args.no_keywords)
    dataset = corpus.load_reviews(args.input)
    preds = hybrid.classify_many([r.text for r in dataset.reviews], pipe)
    lines = [json.dumps(p.to_record(r.id)) for r, p in zip(dataset.reviews, preds)]
    _emit("\n".join(lines), args.out)


def cmd_evaluate(args, cfg) -> None:
    pipe = _pipeline(cfg, args.model)
    test = corpus.load_reviews(args.test)
    corpus.require_labels(test)
    if args.variant == "both":
        hyb = evaluation.evaluate_variant(evaluation.Variant.HYBRID, pipe, test)
        nok = evaluation.evaluate_variant(evaluation.Variant.NO_KEYWORDS, pipe, test)
        if args.format == "json":
            text = evaluation.ablation_json(hyb, nok)
        else:
            text = evaluation.format_table({"Hybrid": hyb, "Hybrid (No Keywords)": nok}, include_reference=True)
            text += "\n\n" + evaluation.format_ablation(evaluation.ablation_report(hyb, nok))
    else:
        report = evaluation.evaluate_variant(args.variant, pipe, test)
        if args.format == "json":
            text = json.dumps({"variant": args.variant, **report.to_dict()}, indent=2, sort_keys=True)
        else:
            text = evaluation.format_table({args.variant: report})
    _emit(text, args.out)


COMMANDS = {
    "crawl": cmd_crawl,
    "preprocess": cmd_preprocess,
    "split": cmd_split,
    "train": cmd_train,
    "extract-keywords": cmd_extract_keywords,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
}

DOMAIN_ERRORS = (
    DomainError,
    corpus.DatasetError,
    classifier.ModelFileError,
    classifier.DimensionError,
    crawler.CrawlError,
    embedding.EmbeddingError,
    keywords.KeywordError,
    hybrid.EmptyReviewError,
    FileNotFoundError,
    OSError,
    ValueError,
)


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"a11yreviews: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    try:
        overrides = {OVERRIDES[k]: v for k, v in vars(args).items() if k in OVERRIDES}
        cfg = load_run_config(args.config, overrides)
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"a11yreviews: error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"a11yreviews: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
