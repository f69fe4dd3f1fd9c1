"""
Logging setup for command-line runs.

Replicate loops draw tqdm progress bars on stderr; plain StreamHandler output
would tear them apart, so records are routed through tqdm.write instead.
"""

import logging
import os
from typing import Optional

from tqdm import tqdm

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class TqdmLoggingHandler(logging.Handler):
    """
    Logging handler that writes formatted records above active progress bars.

    Example:
        >>> handler = TqdmLoggingHandler()
        >>> logging.getLogger('riskbias').addHandler(handler)
        >>> for r in tqdm(range(1000)):
        ...     logging.getLogger('riskbias.simulation').info("replicate done")
    """

    def __init__(self, level: int = logging.NOTSET):
        super().__init__(level)
        self.formatter = logging.Formatter(LOG_FORMAT)

    def emit(self, record: logging.LogRecord):
        try:
            tqdm.write(self.format(record))
            self.flush()
        except Exception:
            self.handleError(record)


def configure_logging(level: Optional[str] = None) -> None:
    """
    Install a TqdmLoggingHandler on the root logger.

    Args:
        level: Level name; falls back to the LOG_LEVEL environment variable, then INFO.
    """
    level_name = (level or os.getenv('LOG_LEVEL', 'INFO')).upper()
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, TqdmLoggingHandler):
            root.removeHandler(handler)
    root.addHandler(TqdmLoggingHandler())
    root.setLevel(getattr(logging, level_name, logging.INFO))
