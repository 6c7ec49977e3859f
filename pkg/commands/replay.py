"""
replay: re-run the command line recorded in a run manifest.
"""

import logging

from commands.manifest import RunManifest

logger = logging.getLogger(__name__)


def register_command(subparsers):
    parser = subparsers.add_parser('replay', help="re-run a recorded manifest")
    parser.add_argument('--manifest', required=True, help="a <output>.manifest.json file")
    parser.set_defaults(handler=run)


def run(args) -> int:
    # Deferred: app imports this module while building its parser
    from app import main

    manifest = RunManifest.load(args.manifest)
    logger.info(f"Replaying '{manifest.subcommand}': {' '.join(manifest.argv)}")
    return main(manifest.argv)
