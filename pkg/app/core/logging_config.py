import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

from app.core.config import settings


def configure_logging(verbose: bool = False, level: Optional[str] = None) -> None:
    """Root logger with a RichHandler on stderr; DEBUG when verbose."""
    name = "DEBUG" if verbose else (level or settings.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(name)s - %(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=verbose, rich_tracebacks=verbose)],
        force=True,
    )
