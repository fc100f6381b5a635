import logging
from pathlib import Path

from modules.utils.config import settings

LOG_FORMAT = '[%(asctime)s] [%(levelname)-8s] %(name)s: %(message)s'


def setup_logging(name, filename, log_dir=None):
    """Configure root logging once: a file under the log dir plus stderr."""
    log_dir = Path(log_dir or settings['log_dir'])
    log_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, settings['log_level'], logging.INFO),
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(log_dir / filename),
            logging.StreamHandler()
        ]
    )
    return logging.getLogger(name)
