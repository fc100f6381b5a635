import os
from dotenv import load_dotenv
from pathlib import Path

load_dotenv()

ROOT_DIR = Path(__file__).parent.parent.parent


def _int_env(name, default):
    raw = os.getenv(name, str(default)).strip()
    try:
        return int(raw)
    except ValueError:
        return default


# Runtime settings
settings = {
    'threads': _int_env('NOISECALC_THREADS', 0),
    'log_dir': Path(os.getenv('NOISECALC_LOG_DIR', str(ROOT_DIR / "logs"))),
    'log_level': os.getenv('NOISECALC_LOG_LEVEL', 'INFO').upper(),
    'out_dir': Path(os.getenv('NOISECALC_OUT_DIR', str(ROOT_DIR / "data"))),
}


def worker_count(requested=None):
    """
    Number of ensemble worker threads.

    Args:
        requested (int, optional): explicit request, overrides NOISECALC_THREADS

    Returns:
        int: at least 1; 0 in the environment means one per CPU
    """
    threads = settings['threads'] if requested is None else int(requested)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return max(1, threads)
