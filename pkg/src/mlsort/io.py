"""Key file formats.

``text``: one decimal double per line (shortest round-trip repr).
``raw``: little-endian IEEE-754 float64 stream, 8 bytes per key.
"""
from pathlib import Path

import numpy as np

FORMATS = ("text", "raw")


def _check_format(fmt):
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")


def write_keys(path, keys, fmt="text"):
    _check_format(fmt)
    keys = np.asarray(keys, dtype=np.float64)
    if fmt == "raw":
        keys.astype("<f8").tofile(path)
        return
    with open(path, "w") as fh:
        if keys.size:
            fh.write("\n".join(map(repr, keys.tolist())))
            fh.write("\n")


def _parse_text(text, path):
    tokens = text.split()
    try:
        return np.array(tokens, dtype=np.float64)
    except ValueError:
        for i, tok in enumerate(tokens):
            try:
                float(tok)
            except ValueError:
                raise ValueError(f"{path}: record {i} is not a number: {tok!r}") from None
        raise


def read_keys(path, fmt="text"):
    """Keys from ``path`` as float64.  Does not check finiteness."""
    _check_format(fmt)
    path = Path(path)
    if fmt == "raw":
        size = path.stat().st_size
        if size % 8:
            raise ValueError(f"{path}: raw key file size {size} is not a multiple of 8")
        return np.fromfile(path, dtype="<f8").astype(np.float64)
    return _parse_text(path.read_text(), path)


def read_estimates(path, fmt="text"):
    """Rank estimates as ``(keys, ranks)``.

    Text lines are either ``key rank`` or a bare ``key`` whose rank is its
    line number; raw files hold bare keys.
    """
    _check_format(fmt)
    path = Path(path)
    if fmt == "raw":
        keys = read_keys(path, "raw")
        return keys, np.arange(keys.size, dtype=np.int64)
    lines = [ln.split() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        return np.empty(0), np.empty(0, dtype=np.int64)
    width = len(lines[0])
    if width not in (1, 2) or any(len(ln) != width for ln in lines):
        raise ValueError(f"{path}: expected 1 or 2 columns on every line")
    keys = _parse_text(" ".join(ln[0] for ln in lines), path)
    if width == 1:
        return keys, np.arange(keys.size, dtype=np.int64)
    try:
        ranks = np.array([int(ln[1]) for ln in lines], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: bad rank column ({exc})") from None
    return keys, ranks


def write_estimates(path, keys, ranks):
    with open(path, "w") as fh:
        for k, r in zip(np.asarray(keys).tolist(), np.asarray(ranks).tolist()):
            fh.write(f"{k!r} {r}\n")
