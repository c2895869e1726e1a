"""Content-addressed ground-state cache in the BECG binary format.

Layout (little endian):

    b"BECG" | version u32 | d u32 | N u32 | n u32 | L f64 | beta f64
    | potential hash (32 bytes) | n^(d N) f64 values | CRC-32 of the payload (u32)
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .core import Grid, GridFunction

MAGIC = b"BECG"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIdd32s")
_CRC = struct.Struct("<I")


class CacheError(IOError):
    pass


class CorruptCacheError(CacheError):
    pass


class IncompatibleVersionError(CacheError):
    pass


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def potential_hash(description: dict) -> bytes:
    return hashlib.sha256(canonical_json(description)).digest()


def cache_key(grid: Grid, N: int, beta: float, potentials: dict, solver: dict) -> str:
    blob = {"d": grid.d, "L": grid.L, "n": grid.n, "N": N, "beta": beta,
            "potentials": potentials, "solver": solver, "version": VERSION}
    return hashlib.sha256(canonical_json(blob)).hexdigest()


def cache_dir(override: str | os.PathLike | None = None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get("BECLAB_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "beclab"


def encode(f: GridFunction, beta: float, phash: bytes) -> bytes:
    payload = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    header = _HEADER.pack(MAGIC, VERSION, f.grid.d, f.particles, f.grid.n, f.grid.L,
                          float(beta), phash)
    return header + payload + _CRC.pack(zlib.crc32(payload))


def decode(blob: bytes) -> tuple[GridFunction, float, bytes]:
    if len(blob) < _HEADER.size + _CRC.size:
        raise CorruptCacheError("cache file is truncated")
    magic, version, d, N, n, L, beta, phash = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptCacheError("bad magic bytes")
    if version != VERSION:
        raise IncompatibleVersionError(f"cache format version {version}, expected {VERSION}")
    count = n ** (d * N)
    size = _HEADER.size + 8 * count + _CRC.size
    if len(blob) != size:
        raise CorruptCacheError(f"cache file has {len(blob)} bytes, expected {size}")
    payload = blob[_HEADER.size:_HEADER.size + 8 * count]
    (crc,) = _CRC.unpack_from(blob, _HEADER.size + 8 * count)
    if zlib.crc32(payload) != crc:
        raise CorruptCacheError("payload checksum mismatch")
    grid = Grid(d, L, n)
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(grid.shape(N))
    return GridFunction(grid, values, N, normalized=True), beta, phash


def cache_store(key: str, f: GridFunction, beta: float, phash: bytes,
                directory: str | os.PathLike | None = None) -> Path:
    root = cache_dir(directory)
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"{key}.becg"
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    tmp.write_bytes(encode(f, beta, phash))
    os.replace(tmp, path)
    return path


def cache_load(key: str, directory: str | os.PathLike | None = None) -> GridFunction | None:
    """Stored function, or None on a miss. Corrupt entries are deleted, then re-raised."""
    path = cache_dir(directory) / f"{key}.becg"
    if not path.is_file():
        return None
    try:
        f, _, _ = decode(path.read_bytes())
    except CorruptCacheError:
        path.unlink(missing_ok=True)
        raise
    return f
