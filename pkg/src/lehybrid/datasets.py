"""Reading lifetime data files and the bundled guinea-pig survival times."""
from __future__ import annotations

import hashlib
import re
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = ["parse_values", "read_values", "guinea_pigs", "GUINEA_PIGS_SHA256"]

GUINEA_PIGS_SHA256 = "8c8ad642d7742f0ea2b7a19f18c85f7d3837bf8d9c665a76a50f504a7f8fd65d"
_SPLIT = re.compile(r"[,\s;]+")


def parse_values(text: str, source: str = "<text>") -> np.ndarray:
    """Numbers separated by commas, semicolons or whitespace; ``#`` starts a comment."""
    values = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        for tok in _SPLIT.split(body):
            if not tok:
                continue
            try:
                values.append(float(tok))
            except ValueError:
                raise DataError(f"{source}:{lineno}: not a number: {tok!r}") from None
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise DataError(f"{source}: no values found")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DataError(f"{source}: lifetimes must be positive and finite")
    return x


def read_values(path) -> np.ndarray:
    """Read a data file; I/O problems surface as :class:`DataError` naming the path."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read data file {str(p)!r}: {exc.strerror or exc}") from exc
    return parse_values(text, str(p))


def guinea_pigs() -> np.ndarray:
    """Survival times in days of 72 guinea pigs, sorted, checksum-verified."""
    raw = resources.files("lehybrid").joinpath("data", "guinea_pigs.txt").read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != GUINEA_PIGS_SHA256:
        raise DataError(f"bundled guinea-pig data is corrupt (sha256 {digest})")
    x = np.sort(parse_values(raw.decode("utf-8"), "guinea_pigs.txt"))
    if x.size != 72 or x[0] != 12 or x[-1] != 376:
        raise DataError("bundled guinea-pig data failed its count/range check")
    return x
