"""Command-line entry point wiring the pipeline.

Subcommands: preprocess, simulate, fit, fit-psi, report, stats. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure. Results go to
files (never stdout, unless --stdout pipes a CSV); logs are key=value lines
on stderr. A flat key=value config file can preload any subcommand's flags;
explicit flags override it. --seed falls back to the DLTM_SEED environment
variable, then 0.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ._util import atomic_write_text, canonical_json, sha256_file
from .corpus import load_corpus, read_corpus, save_corpus
from .errors import DataError, NumericalError
from .label_probs import fit_label_probs
from .model import Hyperparameters
from .preprocess import PreprocessConfig, load_stoplist
from .reporting import corpus_stats, export_report, psi_csv_text, stats_csv_text
from .simulate import SimDims, SimInit, save_truth, simulate_corpus
from .variational import fit_dltm, load_model, save_model

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _env_seed() -> int:
    raw = os.environ.get("DLTM_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise _UsageError(f"DLTM_SEED must be an integer, got {raw!r}") from exc


def _add_common(parser: argparse.ArgumentParser, seed: bool = True):
    parser.add_argument("--config", metavar="FILE", help="key=value file preloading these flags")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    if seed:
        parser.add_argument("--seed", type=int, default=None, help="RNG seed (default: $DLTM_SEED or 0)")


def build_parser() -> _Parser:
    parser = _Parser(prog="dltm", description="Dynamic labeled topic model pipeline")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("preprocess", help="raw line-JSON corpus -> processed corpus file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--stoplist", help="stopword file, one term per line")
    p.add_argument("--extra-stoplist", help="post-stemming stoplist file")
    p.add_argument("--min-df", type=int, default=1)
    p.add_argument("--min-token-length", type=int, default=3)
    p.add_argument("--stemmer", choices=["porter", "none"], default="porter")
    _add_common(p, seed=False)

    p = sub.add_parser("simulate", help="generate a synthetic corpus plus latent truth")
    for flag in ("--T", "--L", "--Z", "--V", "--docs", "--words"):
        p.add_argument(flag, type=int, required=True)
    p.add_argument("--labels-per-doc", type=int, default=1)
    p.add_argument("--sigma2", type=float, default=0.05)
    p.add_argument("--delta2", type=float, default=0.05)
    p.add_argument("--a2", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=100.0)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("fit", help="fit all model parameters to a processed corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--topics", type=int, required=True)
    p.add_argument("--sigma2", type=float, default=0.05)
    p.add_argument("--delta2", type=float, default=0.05)
    p.add_argument("--a2", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=100.0)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--chains", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("fit-psi", help="label-probability posterior only")
    p.add_argument("--corpus", required=True)
    p.add_argument("--kappa", type=float, default=100.0)
    p.add_argument("--chains", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.add_argument("--stdout", action="store_true", help="also pipe psi.csv to stdout")
    _add_common(p)

    p = sub.add_parser("report", help="export CSV tables from a fitted model bundle")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--names", help="JSON file mapping topic id to display name")
    _add_common(p, seed=False)

    p = sub.add_parser("stats", help="per-slot summaries of document meta fields")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stdout", action="store_true", help="also pipe stats.csv to stdout")
    _add_common(p, seed=False)
    return parser


def _load_config_tokens(path: str) -> list[str]:
    tokens = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise _UsageError(f"{path}:{line_no}: expected key=value, got {line!r}")
                key, value = (s.strip() for s in line.split("=", 1))
                flag = "--" + key.replace("_", "-")
                if value.lower() == "true":
                    tokens.append(flag)
                elif value.lower() == "false":
                    continue
                else:
                    tokens.extend([flag, value])
    except OSError as exc:
        raise _UsageError(f"cannot read config file {path}: {exc}") from exc
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    """Splice config-file tokens in right after the subcommand so explicit flags win."""
    if not argv or argv[0].startswith("-"):
        return argv
    rest = list(argv[1:])
    config_path = None
    cleaned = []
    i = 0
    while i < len(rest):
        arg = rest[i]
        if arg == "--config":
            if i + 1 >= len(rest):
                raise _UsageError("--config requires a file argument")
            config_path = rest[i + 1]
            i += 2
        elif arg.startswith("--config="):
            config_path = arg.split("=", 1)[1]
            i += 1
        else:
            cleaned.append(arg)
            i += 1
    if config_path is None:
        return argv
    return [argv[0]] + _load_config_tokens(config_path) + cleaned


def _resolve_seed(args) -> int:
    seed = getattr(args, "seed", None)
    return _env_seed() if seed is None else seed


def _require_readable(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{what} {path} does not exist or is not a file")
    return p


def _prepare_out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out_dir: Path, command: str, config: dict, input_hashes: dict) -> None:
    payload = {
        "format": "dltm-run",
        "command": command,
        "config": config,
        "input_hashes": input_hashes,
    }
    atomic_write_text(out_dir / "manifest.json", canonical_json(payload) + "\n")


def _cmd_preprocess(args) -> int:
    input_path = _require_readable(args.input, "input corpus")
    stop = load_stoplist(_require_readable(args.stoplist, "stoplist")) if args.stoplist else frozenset()
    extra = (
        load_stoplist(_require_readable(args.extra_stoplist, "extra stoplist"))
        if args.extra_stoplist
        else frozenset()
    )
    config = PreprocessConfig(
        stopwords=stop, extra_stoplist=extra,
        min_token_length=args.min_token_length, stemmer=args.stemmer,
    )
    corpus = load_corpus(input_path, config, min_doc_freq=args.min_df)
    out = Path(args.output)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "dltm-run",
        "command": "preprocess",
        "config": {
            "input": str(input_path), "output": str(out), "min_df": args.min_df,
            "min_token_length": args.min_token_length, "stemmer": args.stemmer,
        },
        "input_hashes": {"input": sha256_file(input_path)},
    }
    atomic_write_text(out.with_name(out.name + ".manifest.json"), canonical_json(manifest) + "\n")
    save_corpus(corpus, out)
    logger.info("event=preprocess docs=%d T=%d V=%d labels=%d",
                corpus.n_docs, corpus.T, len(corpus.vocabulary), corpus.n_labels)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    hyper = Hyperparameters(Z=args.Z, sigma2=args.sigma2, delta2=args.delta2,
                            a2=args.a2, kappa=args.kappa, seed=seed)
    dims = SimDims(T=args.T, L=args.L, V=args.V, docs_per_slot=args.docs,
                   words_per_doc=args.words, labels_per_doc=args.labels_per_doc)
    out = _prepare_out_dir(args.out)
    config = {
        "T": args.T, "L": args.L, "Z": args.Z, "V": args.V, "docs": args.docs,
        "words": args.words, "labels_per_doc": args.labels_per_doc,
        "sigma2": args.sigma2, "delta2": args.delta2, "a2": args.a2,
        "kappa": args.kappa, "seed": seed, "out": str(out),
    }
    _write_manifest(out, "simulate", config, {})
    corpus, truth = simulate_corpus(hyper, dims, SimInit())
    save_corpus(corpus, out / "corpus.jsonl")
    save_truth(truth, hyper, out / "truth.json")
    logger.info("event=simulate docs=%d tokens=%d out=%s",
                corpus.n_docs, sum(d.token_total for d in corpus.documents()), out)
    return EXIT_OK


def _cmd_fit(args) -> int:
    seed = _resolve_seed(args)
    corpus_path = _require_readable(args.corpus, "corpus")
    corpus_hash = sha256_file(corpus_path)
    corpus = read_corpus(corpus_path)
    hyper = Hyperparameters(Z=args.topics, sigma2=args.sigma2, delta2=args.delta2,
                            a2=args.a2, kappa=args.kappa, seed=seed)
    out = _prepare_out_dir(args.out)
    config = {
        "corpus": str(corpus_path), "topics": args.topics, "sigma2": args.sigma2,
        "delta2": args.delta2, "a2": args.a2, "kappa": args.kappa,
        "max_iter": args.max_iter, "tol": args.tol, "chains": args.chains,
        "level": args.level, "threads": args.threads, "seed": seed, "out": str(out),
    }
    _write_manifest(out, "fit", config, {"corpus": corpus_hash})
    model = fit_dltm(
        corpus, hyper, max_iter=args.max_iter, rel_tol=args.tol,
        chains=args.chains, level=args.level, threads=args.threads,
        corpus_hash=corpus_hash,
    )
    save_model(model, out / "model.json")
    logger.info(
        "event=fit iterations=%d converged=%s elbo=%.6g out=%s",
        model.diagnostics.iterations, model.diagnostics.converged,
        model.diagnostics.final_elbo, out,
    )
    return EXIT_OK


def _cmd_fit_psi(args) -> int:
    seed = _resolve_seed(args)
    corpus_path = _require_readable(args.corpus, "corpus")
    corpus_hash = sha256_file(corpus_path)
    corpus = read_corpus(corpus_path)
    out = _prepare_out_dir(args.out)
    config = {
        "corpus": str(corpus_path), "kappa": args.kappa, "chains": args.chains,
        "level": args.level, "seed": seed, "out": str(out),
    }
    _write_manifest(out, "fit-psi", config, {"corpus": corpus_hash})
    psi = fit_label_probs(corpus, args.kappa, chains=args.chains, level=args.level, seed=seed)
    csv_text = _psi_only_csv(psi, corpus.label_set)
    atomic_write_text(out / "psi.csv", csv_text)
    payload = {
        "labels": list(corpus.label_set),
        "level": psi.level,
        "mean": psi.mean.tolist(),
        "ci_low": psi.ci_low.tolist(),
        "ci_high": psi.ci_high.tolist(),
        "seed": seed,
    }
    atomic_write_text(out / "psi.json", canonical_json(payload) + "\n")
    if args.stdout:
        sys.stdout.write(csv_text)
    logger.info("event=fit-psi T=%d labels=%d chains=%d out=%s", psi.T, psi.L, args.chains, out)
    return EXIT_OK


def _psi_only_csv(psi, labels) -> str:
    from ._util import format_sig

    lines = ["t,label,mean,ci_low,ci_high"]
    for t in range(psi.T):
        for l, label in enumerate(labels):
            lines.append(
                f"{t + 1},{label},{format_sig(psi.mean[t, l])},"
                f"{format_sig(psi.ci_low[t, l])},{format_sig(psi.ci_high[t, l])}"
            )
    return "\n".join(lines) + "\n"


def _cmd_report(args) -> int:
    model_path = _require_readable(args.model, "model bundle")
    model_hash = sha256_file(model_path)
    model = load_model(model_path)
    names = None
    if args.names:
        with open(_require_readable(args.names, "names file"), encoding="utf-8") as fh:
            raw = json.load(fh)
        names = {int(k): str(v) for k, v in raw.items()}
    export_report(
        model, args.out, top_k=args.top_k, names=names,
        input_hashes={"model": model_hash},
    )
    logger.info("event=report out=%s topics=%d", args.out, model.Z)
    return EXIT_OK


def _cmd_stats(args) -> int:
    corpus_path = _require_readable(args.corpus, "corpus")
    corpus_hash = sha256_file(corpus_path)
    corpus = read_corpus(corpus_path)
    out = _prepare_out_dir(args.out)
    _write_manifest(out, "stats", {"corpus": str(corpus_path), "out": str(out)},
                    {"corpus": corpus_hash})
    text = stats_csv_text(corpus_stats(corpus))
    atomic_write_text(out / "stats.csv", text)
    if args.stdout:
        sys.stdout.write(text)
    logger.info("event=stats T=%d out=%s", corpus.T, out)
    return EXIT_OK


_COMMANDS = {
    "preprocess": _cmd_preprocess,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "fit-psi": _cmd_fit_psi,
    "report": _cmd_report,
    "stats": _cmd_stats,
}


def run(argv: list[str]) -> int:
    """Parse argv (without the program name) and execute; returns the exit code."""
    parser = build_parser()
    try:
        argv = _expand_config(list(argv))
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help exits 0 through here
        return int(exc.code or 0)

    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level),
        format="level=%(levelname)s module=%(name)s %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        logger.error("event=data-error detail=%r", str(exc))
        return EXIT_DATA
    except NumericalError as exc:
        logger.error("event=numerical-error detail=%r", str(exc))
        return EXIT_NUMERICAL
    except ValueError as exc:
        logger.error("event=invalid-parameter detail=%r", str(exc))
        return EXIT_USAGE
    except np.linalg.LinAlgError as exc:
        logger.error("event=numerical-error detail=%r", str(exc))
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
