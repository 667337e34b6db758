import argparse
import logging
import sys
from typing import Sequence

from avfuse.commands import COMMANDS
from avfuse.exceptions import AvFuseError, DatasetIOError, FormatError, InvalidArgumentError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL_ERROR = 2


class UsageError(AvFuseError):
    """Unknown flag, missing subcommand or malformed flag value."""

    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# Centralized logging configuration; stdout stays reserved for JSON lines
def setup_logging(level=logging.INFO):
    log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    logging.basicConfig(level=level, format=log_format, handlers=[logging.StreamHandler(sys.stderr)])
    logging.getLogger().setLevel(level)
    # Quiet mode for noisy libraries
    logging.getLogger("numba").setLevel(logging.WARNING)


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits: {text}")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="Warnings and errors only")

    parser = _Parser(prog="avfuse", description="Event-type-aware audio-visual fusion")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_text: str, *flags: str) -> None:
        p = sub.add_parser(name, help=help_text, parents=[common])
        for flag in flags:
            if flag == "--seed":
                p.add_argument("--seed", type=_u64)
            elif flag in ("--k", "--window"):
                p.add_argument(flag, type=_positive)
            elif flag == "--multilabel":
                p.add_argument("--multilabel", action="store_true")
            else:
                p.add_argument(flag)

    add("synth", "Generate a synthetic dataset", "--config", "--out", "--seed")
    add("onset", "Re-detect onsets from PCM files of a manifest", "--data", "--out")
    add("train", "Train encoders and the five heads", "--data", "--out", "--config", "--seed", "--k")
    add("predict", "Per-sample predictions as JSON lines", "--ckpt", "--data", "--out", "--k", "--multilabel")
    add("eval", "Accuracy, F1 and set-size summary", "--ckpt", "--data", "--out", "--k", "--multilabel")
    add("bias", "Modality bias per category", "--ckpt", "--data", "--out", "--k")
    add("layerdiff", "Layer uniqueness counts", "--ckpt", "--data", "--out", "--k")
    add("localize", "Sound-source localization maps", "--data", "--ckpt", "--out", "--window")
    add("gradcheck", "Compare analytic and numeric gradients", "--config", "--seed", "--k")
    return parser


def run_command(argv: Sequence[str]) -> int:
    """Run one subcommand; 0 on success, 1 on user error, 2 on internal error."""
    try:
        args = build_parser().parse_args(list(argv))
    except UsageError as e:
        print(f"avfuse: error: {e}", file=sys.stderr)
        return EXIT_USER_ERROR
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    setup_logging(logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO)
    try:
        COMMANDS[args.command](args)
    except (InvalidArgumentError, FormatError, DatasetIOError) as e:
        logger.error(f"❌ {e}")
        return EXIT_USER_ERROR
    except Exception as e:
        logger.exception(f"💥 Internal error in {args.command}: {e}")
        return EXIT_INTERNAL_ERROR
    return EXIT_OK


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
