"""
Ginzburg-Landau LOD

This is the main entry point for the Ginzburg-Landau LOD application.
It computes discrete minimizers of the Ginzburg-Landau energy in finite
element and LOD spaces and runs the convergence, localization-decay,
spectrum and best-approximation studies built on them.
"""
import logging
import sys
from typing import Optional, Sequence

from ginzburg_lod.experiments.commands import COMMANDS
from ginzburg_lod.utils.config import parse_args, setup_logging, validate_config
from ginzburg_lod.utils.errors import ConfigError

logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main entry point for the application.

    Args:
        argv (Sequence[str], optional): Arguments without the program name; sys.argv otherwise

    Returns:
        int: Exit code (0 for success, 1 for failures, 2 for invalid configuration)
    """
    try:
        # Parse command-line arguments
        config = parse_args(argv)

        # Set up logging
        setup_logging(config["log_level"])

        command = config["command"]
        validate_config(config)
        COMMANDS[command](config)

        logger.info(f"Command {command} completed successfully")
        return 0

    except ConfigError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        print(f"error: {str(e)}", file=sys.stderr)
        return 2

    except Exception as e:
        logger.error(f"Error: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
