import argparse
import json
import logging
import logging.config
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from src.conf.config import TOOL_VERSION, settings
from src.exceptions import ConfigError, SdssError
from src.routes import commands

logger = logging.getLogger("sdss")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def configure_logging(level: Optional[str] = None) -> None:
    """
    The configure_logging function loads logging.ini when it exists and falls back to a
    plain stderr handler otherwise.

    :param level: Optional[str]: Level overriding SDSS_LOG_LEVEL
    """
    path = Path(settings.logging_config)
    if path.is_file():
        logging.config.fileConfig(path, disable_existing_loggers=False)
    else:
        logging.basicConfig(format="%(levelname)-5.5s [%(name)s] %(message)s")
    logging.getLogger().setLevel((level or settings.log_level).upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdss-synth",
                                     description="Digital controller synthesis for sampled-data stochastic systems")
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    subparsers = parser.add_subparsers(dest="command", required=True)
    commands.register(subparsers)
    return parser


def execute_command(argv: Optional[List[str]] = None) -> int:
    """
    The execute_command function parses argv, runs the selected subcommand and prints its
    JSON result to stdout.

    :param argv: Optional[List[str]]: Arguments without the program name
    :return: Exit code: 0 on success, 2 for configuration or usage errors, 3 for runtime failures
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code == 0 else EXIT_CONFIG
    configure_logging(args.log_level)
    try:
        result = commands.handlers[args.command](args)
    except (ConfigError, ValidationError) as err:
        logger.error("configuration error: %s", err)
        return EXIT_CONFIG
    except SdssError as err:
        logger.error("%s", err)
        return err.exit_code
    except Exception as err:
        logger.exception("unexpected failure: %s", err)
        return EXIT_RUNTIME
    print(json.dumps(result, indent=2))
    return EXIT_OK


def run() -> None:
    sys.exit(execute_command(sys.argv[1:]))


if __name__ == "__main__":
    run()
