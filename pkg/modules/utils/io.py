import os
import csv
import json
import logging
import tempfile
from pathlib import Path

logger = logging.getLogger("noisecalc.io")


def _atomic_write(target, write):
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            write(handle)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info(f"Wrote {target}")
    return target


def fmt(value):
    """Shortest round-trip decimal for a float."""
    return repr(float(value))


def write_csv(target, header, rows, trailer=None):
    """
    Write a CSV file atomically.

    Args:
        target: output file
        header (list): column names
        rows (iterable): rows of numbers or strings; floats are written round-trip exact
        trailer (list, optional): comment lines appended after the rows, without the '#'
    """
    def write(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])
        for line in trailer or []:
            handle.write(f"# {line}\n")
    return _atomic_write(target, write)


def write_json(target, payload):
    def write(handle):
        json.dump(payload, handle, indent=2, sort_keys=True, allow_nan=False)
        handle.write("\n")
    return _atomic_write(target, write)


def json_number(value):
    """Floats that JSON cannot carry (nan, inf) become null."""
    if value is None:
        return None
    value = float(value)
    return value if value == value and abs(value) != float("inf") else None
