"""
Logging setup for the command line.
"""

import logging

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(verbosity: int = 0) -> int:
    """
    Configure the root logger once per process.

    Args:
        verbosity: int - 1 or more selects DEBUG, negative selects WARNING, 0 is INFO

    Returns:
        int - The level that was set
    """
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    else:
        level = logging.INFO

    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    return level
