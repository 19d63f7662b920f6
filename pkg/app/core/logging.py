import logging
import sys
from typing import Optional

from app.core.config import get_settings

LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once; later calls only adjust the level."""
    level_name = (level or get_settings().LOG_LEVEL).upper()
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(
            level=level_name,
            format=LOG_FORMAT,
            handlers=[logging.StreamHandler(sys.stderr)],
        )
    root.setLevel(level_name)
