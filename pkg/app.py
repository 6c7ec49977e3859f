"""
QIS HDR Toolkit - Command Line Entry Point
Simulate quanta image sensor frame stacks, analyse their SNR and fuse them into HDR images.
"""

import argparse
import logging
import sys
from typing import List, Optional

from config import __version__
from config.logging_config import configure_logging
from utils.errors import QisError

logger = logging.getLogger(__name__)

# Exit status for unreadable or unwritable files
IO_EXIT_CODE = 3


def build_parser() -> argparse.ArgumentParser:
    """Main parser with every subcommand registered."""
    parser = argparse.ArgumentParser(
        prog='qis-hdr',
        description="Quanta image sensor simulation, SNR analysis and HDR fusion",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('-v', '--verbose', action='count', default=0, help="more logging (repeatable)")
    parser.add_argument('-q', '--quiet', action='count', default=0, help="warnings and errors only")
    subparsers = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')

    # Register commands
    from commands import dr, evaluate, fuse, histfit, replay, simulate, snr

    for module in (simulate, fuse, snr, dr, histfit, evaluate, replay):
        module.register_command(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse argv, run the selected subcommand and map failures to exit codes.

    Args:
        argv: Command line without the program name (defaults to sys.argv[1:])

    Returns:
        Process exit status: 0 success, 2 usage error, 3 data/format error, 4 numerical failure
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose - args.quiet)
    args.argv = argv

    try:
        return args.handler(args)
    except QisError as exc:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_EXIT_CODE


if __name__ == '__main__':
    sys.exit(main())
