"""Content-addressed on-disk cache for expensive arrays (DN matrices, solitary waves).

Entries are ``.npz`` files named by a SHA-256 key over the inputs, so a key
can only ever refer to one payload. Writes go through a temporary file and an
atomic rename, so concurrent readers never see partial entries.
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
import time
import zipfile
from pathlib import Path

import numpy as np

from ._version import __version__
from .dno import DnoRealization, dno_matrix

log = logging.getLogger(__name__)


def make_key(kind: str, **parts) -> str:
    """SHA-256 over the kind, the code version and the sorted parts.

    Arrays enter through their dtype, shape and raw bytes; floats through repr.
    """
    h = hashlib.sha256()
    h.update(f"{kind}|{__version__}".encode())
    for name in sorted(parts):
        val = parts[name]
        h.update(f"|{name}=".encode())
        if isinstance(val, np.ndarray):
            arr = np.ascontiguousarray(val)
            h.update(f"{arr.dtype.str}{arr.shape}".encode())
            h.update(arr.tobytes())
        else:
            h.update(repr(val).encode())
    return h.hexdigest()


class Cache:
    """Directory of npz payloads keyed by content hash."""

    def __init__(self, root):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.npz"

    def get(self, key: str):
        p = self.path(key)
        if not p.exists():
            return None
        try:
            with np.load(p, allow_pickle=False) as data:
                return {name: data[name] for name in data.files}
        except (OSError, ValueError, zipfile.BadZipFile, EOFError) as exc:
            log.warning("corrupted cache entry %s (%s); rebuilding", p.name, exc)
            return None

    def put(self, key: str, payload: dict) -> None:
        p = self.path(key)
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.savez(fh, **payload)
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def get_or_build(self, key: str, builder):
        """Cached payload for ``key``; on a miss ``builder()`` makes, stores and returns it."""
        payload = self.get(key)
        if payload is not None:
            self.hits += 1
            return payload
        self.misses += 1
        payload = {name: np.asarray(v) for name, v in builder().items()}
        self.put(key, payload)
        return payload


def cache_get_or_build(cache: Cache, key: str, builder):
    return cache.get_or_build(key, builder)


class CachedDnoBuilder:
    """Drop-in replacement for ``dno_matrix`` that stores realizations in a cache.

    ``seconds`` accumulates the wall time spent in the DN stage (builds and loads).
    """

    def __init__(self, cache: Cache, tol: float = 1e-13):
        self.cache = cache
        self.tol = tol
        self.seconds = 0.0

    def key(self, eta, k, strip) -> str:
        g = strip.base
        return make_key(
            "dno",
            eta=np.asarray(eta, dtype=float),
            k=float(k),
            Lx=float(g.half_length),
            Nx=int(g.n),
            Nz=int(strip.nz),
            tol=self.tol,
        )

    def __call__(self, eta, k, strip) -> DnoRealization:
        t0 = time.perf_counter()

        def build():
            r = dno_matrix(eta, k, strip, tol=self.tol)
            return {"matrix": r.matrix, "asymmetry": r.asymmetry, "iterations": r.iterations}

        data = self.cache.get_or_build(self.key(eta, k, strip), build)
        self.seconds += time.perf_counter() - t0
        return DnoRealization(
            np.asarray(eta, dtype=float),
            float(k),
            data["matrix"],
            float(data["asymmetry"]),
            int(data["iterations"]),
        )
