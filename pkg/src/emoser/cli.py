"""Command-line entry point.

One subcommand per pipeline stage: prepare, split, train, eval, compare,
predict, gradcheck, serve. Exit codes: 0 success, 1 domain error (message on
stderr), 2 usage error. EMOSER_THREADS caps worker parallelism, including
the BLAS pool, so it must be read before numpy spins one up.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _cap_threads() -> int:
    raw = os.environ.get("EMOSER_THREADS", "")
    try:
        n = max(1, int(raw)) if raw else 0
    except ValueError:
        n = 0
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(n))
    return n or (os.cpu_count() or 1)


_WORKERS = _cap_threads()

from . import audio_io, models, ravdess, train_eval  # noqa: E402
from .config import AppConfig, ConfigParseError, load_app_config  # noqa: E402
from .features import featurize  # noqa: E402
from .nn import SeededRng  # noqa: E402


class CliError(Exception):
    """Domain failure worth exit code 1."""


def _load_examples(path: Path) -> tuple[list, object]:
    if not path.is_file():
        raise CliError(f"feature cache not found: {path}")
    return ravdess.read_feature_cache(path)


def _featurize_corpus(files, cfg: AppConfig, out_stream) -> list[ravdess.LabeledExample]:
    from concurrent.futures import ThreadPoolExecutor

    def one(item):
        path, meta = item
        clip = audio_io.read_wav(path.read_bytes(), source_name=path.name)
        return ravdess.LabeledExample(features=featurize(clip, cfg.pipeline),
                                      label=meta.label, meta=meta, path=str(path))

    # canonical path order is preserved: map() yields results in input order
    with ThreadPoolExecutor(max_workers=_WORKERS) as pool:
        examples = list(pool.map(one, files))
    print(f"featurized {len(examples)} files", file=out_stream)
    return examples


def _print_census(census: ravdess.Census, out_stream) -> None:
    print(f"files: {census.total}", file=out_stream)
    print("emotion histogram:", file=out_stream)
    for name, count in census.by_emotion.items():
        print(f"  {name:<10} {count}", file=out_stream)
    print(f"intensity: normal {census.by_intensity['normal']}"
          f" strong {census.by_intensity['strong']}", file=out_stream)
    for warning in census.warnings:
        print(f"warning: {warning}", file=sys.stderr)


def cmd_prepare(args, cfg: AppConfig) -> int:
    corpus = Path(args.corpus) if args.corpus else Path(cfg.paths.corpus_root)
    if args.archive:
        report = ravdess.stage_archive(args.archive, corpus)
        print(f"staged {report.count} files into {corpus}", file=sys.stdout)
    files, census = ravdess.scan_corpus(corpus)
    _print_census(census, sys.stdout)
    if not files:
        raise CliError(f"no parseable speech files under {corpus}")
    examples = _featurize_corpus(files, cfg, sys.stdout)
    ravdess.write_feature_cache(examples, args.out, cfg.pipeline)
    print(f"wrote feature cache {args.out} ({len(examples)} examples)", file=sys.stdout)
    return 0


def cmd_split(args, cfg: AppConfig) -> int:
    examples, _ = _load_examples(Path(args.cache))
    split = ravdess.split_dataset(examples, args.ratio, args.seed, args.strategy)
    payload = {
        "seed": args.seed, "ratio": args.ratio, "strategy": args.strategy,
        "train": [ex.path for ex in split.train],
        "test": [ex.path for ex in split.test],
        "train_size": len(split.train), "test_size": len(split.test),
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    print(f"split {len(examples)} -> {len(split.train)} train / {len(split.test)} test",
          file=sys.stdout)
    return 0


def _split_from_cache(cache_path: Path, split_path: Path | None, cfg: AppConfig):
    examples, _ = _load_examples(cache_path)
    if split_path is not None:
        if not split_path.is_file():
            raise CliError(f"split file not found: {split_path}")
        saved = json.loads(split_path.read_text())
        by_path = {ex.path: ex for ex in examples}
        try:
            train = [by_path[p] for p in saved["train"]]
            test = [by_path[p] for p in saved["test"]]
        except KeyError as exc:
            raise CliError(f"split references unknown example {exc}") from exc
        return ravdess.DatasetSplit(train=train, test=test,
                                    seed=saved.get("seed", 0),
                                    ratio=saved.get("ratio", 0.75))
    return ravdess.split_dataset(examples, cfg.split.ratio, cfg.split.seed,
                                 cfg.split.strategy)


def cmd_train(args, cfg: AppConfig) -> int:
    split = _split_from_cache(Path(args.cache), Path(args.split) if args.split else None, cfg)
    _, pipeline = _load_examples(Path(args.cache))
    shape = split.train[0].features.shape
    model = models.build_model(args.model, shape, ravdess.NUM_CLASSES,
                               SeededRng(cfg.train.seed), pipeline)
    model, history = train_eval.train(model, split.train, split.test, cfg.train,
                                      log=lambda s: print(s, file=sys.stdout))
    models.save_checkpoint(model, args.checkpoint_out)
    print(f"wrote checkpoint {args.checkpoint_out}", file=sys.stdout)
    if args.history_out:
        out = Path(args.history_out)
        train_eval.export_history(history, out, "json" if out.suffix == ".json" else "csv")
        train_eval.render_curves(history, out.with_suffix(".svg"))
        print(f"wrote history {out} and curves {out.with_suffix('.svg')}", file=sys.stdout)
    return 0


def cmd_eval(args, cfg: AppConfig) -> int:
    model = models.load_checkpoint(args.checkpoint)
    split = _split_from_cache(Path(args.cache), Path(args.split) if args.split else None, cfg)
    report = train_eval.evaluate(model, split.test)
    text = json.dumps(report.to_dict(), indent=2)
    if args.report_out:
        Path(args.report_out).write_text(text + "\n")
        print(f"wrote report {args.report_out}", file=sys.stdout)
    print(f"accuracy {report.accuracy:.4f}  micro-f1 {report.micro_f1:.4f}"
          f"  macro-f1 {report.macro_f1:.4f}  kappa {report.cohens_kappa:.4f}",
          file=sys.stdout)
    return 0


def cmd_compare(args, cfg: AppConfig) -> int:
    split = _split_from_cache(Path(args.cache), Path(args.split) if args.split else None, cfg)
    shape = split.train[0].features.shape
    report = train_eval.compare_models(split, cfg.train, shape, ravdess.NUM_CLASSES,
                                       log=lambda s: print(s, file=sys.stdout))
    print(report.to_text(), file=sys.stdout)
    if args.report_out:
        Path(args.report_out).write_text(report.to_json() + "\n")
        print(f"wrote report {args.report_out}", file=sys.stdout)
    return 0


def cmd_predict(args, cfg: AppConfig) -> int:
    wav = Path(args.wav)
    if not wav.is_file():
        raise CliError(f"wav file not found: {wav}")
    model = models.load_checkpoint(args.checkpoint)
    clip = audio_io.read_wav(wav.read_bytes(), source_name=wav.name)
    scores = models.predict(model, clip, model.pipeline)
    for label, prob in zip(scores.labels, scores.probabilities):
        print(f"{label:<10} {prob:.4f}", file=sys.stdout)
    print(f"top: {scores.top}", file=sys.stdout)
    return 0


def cmd_gradcheck(args, cfg: AppConfig) -> int:
    from . import gradcheck_suite

    results = gradcheck_suite.run_suite(seed=args.seed)
    ok = True
    for name, err, threshold in results:
        passed = err < threshold
        ok = ok and passed
        print(f"{name:<18} max rel error {err:.3e}  (threshold {threshold:.0e})"
              f"  {'ok' if passed else 'FAIL'}", file=sys.stdout)
    return 0 if ok else 1


def cmd_serve(args, cfg: AppConfig) -> int:
    from . import serve

    host, _, port = args.addr.rpartition(":")
    serve.run(args.checkpoint, host or "127.0.0.1", int(port), args.static_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emoser",
        description="Speech emotion recognition: features, training, evaluation, serving.")
    parser.add_argument("--config", help="JSON config file", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="scan a corpus (or stage an archive) and write the feature cache")
    p.add_argument("--corpus", help="corpus root directory")
    p.add_argument("--archive", help="ZIP archive to extract into the corpus root first")
    p.add_argument("--out", required=True, help="feature cache output path")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("split", help="write a deterministic train/test split")
    p.add_argument("--cache", required=True)
    p.add_argument("--ratio", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", choices=["stratified", "speaker"], default="stratified")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model on cached features")
    p.add_argument("--cache", required=True)
    p.add_argument("--split", help="split JSON from the split command")
    p.add_argument("--model", choices=["cnn", "dnn"], default="cnn")
    p.add_argument("--checkpoint-out", required=True)
    p.add_argument("--history-out", help="learning-curve CSV/JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test half")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--split")
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="train and compare the model family")
    p.add_argument("--cache", required=True)
    p.add_argument("--split")
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("predict", help="classify one WAV file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--wav", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--static-dir", help="directory with the web UI bundle")
    p.set_defaults(func=cmd_serve)
    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        cfg = load_app_config(args.config)
        return args.func(args, cfg)
    except (CliError, ConfigParseError, ravdess.RavdessError, audio_io.AudioError,
            models.ModelError, train_eval.EmptySet, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
