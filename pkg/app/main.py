import logging
import sys
from typing import Optional, Sequence

import typer

from app.core.config import settings
from app.modules.cli.commands import PROG_NAME, app

logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the balanced-embed command line and return its exit code."""
    command = typer.main.get_command(app)
    logger.debug(f"Environment: {settings.ENVIRONMENT}")
    try:
        command.main(args=None if argv is None else list(argv), prog_name=PROG_NAME, standalone_mode=True)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
