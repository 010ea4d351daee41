#!/usr/bin/env python3
"""RFL codec: entry point"""

import faulthandler
import logging
import os
import sys
import traceback
from logging.handlers import RotatingFileHandler
from pathlib import Path

LOG_DIR_ENV = "RFL_LOG_DIR"


def setup_logging(verbose: bool = False) -> tuple[logging.Logger, Path]:
    log_dir = Path(os.environ.get(LOG_DIR_ENV) or Path.home() / ".rflcodec")
    log_dir.mkdir(parents=True, exist_ok=True)
    log_file = log_dir / "rflcodec.log"

    handler = RotatingFileHandler(
        log_file,
        maxBytes=1 * 1024 * 1024,  # 1 MB
        backupCount=2,
        encoding="utf-8",
    )
    handler.setFormatter(logging.Formatter("%(asctime)s  %(levelname)-8s  %(message)s"))

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.DEBUG if verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))

    # module loggers are named after their modules, so attach to the root
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    root.addHandler(handler)
    root.addHandler(console)
    return logging.getLogger("rflcodec"), log_dir


def install_crash_handler(logger: logging.Logger, log_dir: Path):
    # Python-level unhandled exceptions
    def handle_exception(exc_type, exc_value, exc_tb):
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_tb)
            return
        logger.critical(
            "Unhandled exception:\n%s",
            "".join(traceback.format_exception(exc_type, exc_value, exc_tb)),
        )
        print(f"error: unexpected {exc_type.__name__}: {exc_value} (details in {log_dir})", file=sys.stderr)

    sys.excepthook = handle_exception

    # C-level crashes (segfault, abort): faulthandler cannot use logging,
    # so it writes to its own file
    crash_file = log_dir / "crash.log"
    faulthandler.enable(open(crash_file, "w"), all_threads=True)


if __name__ == "__main__":
    from cli import build_parser, run

    args = build_parser().parse_args()
    logger, log_dir = setup_logging(verbose=args.verbose)
    install_crash_handler(logger, log_dir)
    logger.info("Starting rflcodec %s", " ".join(sys.argv[1:]))
    raise SystemExit(run(args))
