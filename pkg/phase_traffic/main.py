"""
Main entry point.
This is where the phase-traffic command starts.
"""

import logging
import sys
from typing import List, Optional

from phase_traffic.api.commands import build_parser, dispatch
from phase_traffic.core.config import settings
from phase_traffic.core.errors import PhaseTrafficError, exit_code_for

logger = logging.getLogger(__name__)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run the subcommand and return its exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    # Setup logging
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True,
    )

    logger.info(f"🚀 phase-traffic {args.command}")
    try:
        status = dispatch(args)
    except PhaseTrafficError as e:
        code = exit_code_for(e)
        logger.error(f"❌ {type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return code
    logger.info(f"✅ {args.command} finished with status {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
