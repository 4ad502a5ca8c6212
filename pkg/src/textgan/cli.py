"""Command-line entry point: train / generate / eval / diag.

Exit status mapping: 0 success, 1 usage error (bad flags, missing files,
malformed config), 2 runtime error, 3 divergence abort. ``diag gradcheck``
exits 0 only when every parameter group passes the audit.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from .config import TrainConfig, parse_config, validate_config
from .corpus import load_corpus
from .diagnostics import (
    AuditConfig,
    SeparabilityConfig,
    grad_audit,
    identical_distribution_control,
    two_word_experiment,
)
from .errors import ConfigError, DivergenceError, TextGanError
from .evaluation import evaluate_checkpoint, generate_samples
from .training import load_state, train

RUN_DIR_ENV = "TEXTGAN_RUN_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_DIVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; we document 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.exit_with(message))

    def exit_with(self, message: str) -> int:
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return EXIT_USAGE


def _add_config_flags(parser: argparse.ArgumentParser):
    """One override flag per config key; unset flags leave the config alone."""
    for f in dataclasses.fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            parser.add_argument(flag, dest=f.name, default=None,
                                action=argparse.BooleanOptionalAction)
        else:
            kind = {"int": int, "float": float, "str": str}[f.type]
            parser.add_argument(flag, dest=f.name, type=kind, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="textgan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the adversarial training loop")
    p_train.add_argument("--config", help="key=value config file")
    p_train.add_argument("--data", required=True, help="UTF-8 corpus, one sentence per line")
    p_train.add_argument("--out", help=f"run directory (default: ${RUN_DIR_ENV}/run-<mode>-s<seed>)")
    _add_config_flags(p_train)

    p_gen = sub.add_parser("generate", help="sample sentences from a checkpoint")
    p_gen.add_argument("--checkpoint", required=True)
    p_gen.add_argument("--num-batches", type=int, default=10)
    p_gen.add_argument("--batch-size", type=int, default=64)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--out", help="write samples here instead of stdout")

    p_eval = sub.add_parser("eval", help="BLEU/JSD evaluation of a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--reference", required=True, help="reference corpus file")
    p_eval.add_argument("--num-batches", type=int, default=10)
    p_eval.add_argument("--batch-size", type=int, default=64)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--report", help="write the JSON report here")
    p_eval.add_argument("--candidates-out", help="dump decoded candidates, one per line")

    p_diag = sub.add_parser("diag", help="validation instruments")
    diag_sub = p_diag.add_subparsers(dest="diag_command", required=True)
    p_grad = diag_sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p_grad.add_argument("--eps", type=float, default=1e-5)
    p_grad.add_argument("--tol", type=float, default=1e-4)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--corrupt", help="parameter group to fault-inject", default=None)
    p_grad.add_argument("--out", help="write the report here")
    p_two = diag_sub.add_parser("twoword", help="two-word-language separability experiment")
    p_two.add_argument("--radius", type=float, default=0.2)
    p_two.add_argument("--seed", type=int, default=0)
    p_two.add_argument("--control", action="store_true",
                       help="also run the identical-distribution control")
    p_two.add_argument("--out", help="write the reports here")
    return parser


def _require_file(path: str) -> str | None:
    if not os.path.exists(path):
        return f"textgan: error: no such file or directory: {path}"
    return None


def _cmd_train(args) -> int:
    if args.config:
        message = _require_file(args.config)
        if message:
            print(message, file=sys.stderr)
            return EXIT_USAGE
        config = parse_config(args.config)
    else:
        config = TrainConfig()
    for f in dataclasses.fields(TrainConfig):
        override = getattr(args, f.name, None)
        if override is not None:
            setattr(config, f.name, override)
    validate_config(config)

    message = _require_file(args.data)
    if message:
        print(message, file=sys.stderr)
        return EXIT_USAGE
    out_dir = args.out
    if not out_dir:
        base = os.environ.get(RUN_DIR_ENV)
        if not base:
            print(f"textgan: error: give --out or set ${RUN_DIR_ENV}", file=sys.stderr)
            return EXIT_USAGE
        out_dir = os.path.join(base, f"run-{config.mode}-s{config.seed}")
    if config.resume:
        message = _require_file(config.resume)
        if message:
            print(message, file=sys.stderr)
            return EXIT_USAGE

    lines = load_corpus(args.data, lowercase=config.lowercase)
    state = train(config, lines, out_dir)
    print(f"trained {state.iteration} iterations; final checkpoint "
          f"{os.path.join(out_dir, f'ckpt-{state.iteration}')}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    message = _require_file(args.checkpoint)
    if message:
        print(message, file=sys.stderr)
        return EXIT_USAGE
    state = load_state(args.checkpoint)
    seed = state.config.eval_seed if args.seed is None else args.seed
    texts = generate_samples(state.generator, state.vocab, args.num_batches,
                             args.batch_size, seed)
    payload = "\n".join(texts) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return EXIT_OK


def _cmd_eval(args) -> int:
    for path in (args.checkpoint, args.reference):
        message = _require_file(path)
        if message:
            print(message, file=sys.stderr)
            return EXIT_USAGE
    references = load_corpus(args.reference)
    report = evaluate_checkpoint(
        args.checkpoint, references,
        num_batches=args.num_batches, batch_size=args.batch_size,
        eval_seed=args.seed, candidates_out=args.candidates_out,
    )
    print(report.to_json())
    if args.report:
        report.write(args.report)
    return EXIT_OK


def _cmd_diag(args) -> int:
    if args.diag_command == "gradcheck":
        report = grad_audit(AuditConfig(eps=args.eps, tol=args.tol, seed=args.seed,
                                        corrupt=args.corrupt))
        text = report.to_text()
        print(text, end="")
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        if not report.passed:
            print(f"gradcheck failed: {', '.join(report.failing_groups())}",
                  file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK
    cfg = SeparabilityConfig(softening_radius=args.radius, seed=args.seed)
    reports = list(two_word_experiment(cfg))
    if args.control:
        reports.append(identical_distribution_control(cfg))
    text = "\n".join(r.to_text() for r in reports)
    print(text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "eval":
            return _cmd_eval(args)
        return _cmd_diag(args)
    except ConfigError as exc:
        print(f"textgan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"textgan: error: no such file or directory: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"textgan: aborted: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except TextGanError as exc:
        print(f"textgan: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
