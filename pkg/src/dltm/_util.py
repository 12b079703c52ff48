"""Shared helpers: deterministic serialization, atomic writes, hashing, RNG streams."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

# Sub-stream tags for deriving independent generators from one master seed.
# fit_dltm uses INIT for the initialization jitter and PSI for the label
# probability sampler; simulate_corpus uses the master seed directly.
STREAM_INIT = 0
STREAM_PSI = 1


def rng_from(seed: int, *tags: int) -> np.random.Generator:
    """Create a generator from a master seed plus integer sub-stream tags.

    The entropy is the tuple (seed, *tags) fed to numpy's SeedSequence, so
    the derivation is deterministic and documented: same (seed, tags) pair,
    same stream, on every platform.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=(int(seed),) + tuple(int(t) for t in tags)))


def derived_seed(seed: int, *tags: int) -> int:
    """Collapse (seed, tags) into a single 64-bit seed for APIs taking one int."""
    state = np.random.SeedSequence(entropy=(int(seed),) + tuple(int(t) for t in tags)).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


def canonical_json(obj) -> str:
    """Serialize to a canonical JSON string: sorted keys, no whitespace.

    Floats go through repr (shortest round-trip form), so identical values
    always produce identical bytes. NaN/inf are rejected.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to `path` via a temp file + rename so readers never see a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def format_sig(x: float, digits: int = 9) -> str:
    """Format a float with a fixed number of significant digits for CSV export."""
    return f"{x:.{digits}g}"
