"""Checkpoint binary format and the metrics.csv schema.

Checkpoint layout (all integers little-endian u32):
    magic "GOCM" | version | per parameter: name_len, name bytes, rank,
    dims..., values as little-endian float64 | crc32 of all preceding bytes.
The file is self-describing; loading needs no configuration and is
bit-exact.  metrics.csv uses a fixed column order with RFC-4180 quoting;
floats are written with repr so reruns are byte-identical.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

CHECKPOINT_MAGIC = b"GOCM"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: dict[str, np.ndarray]) -> None:
    """Write named float64 arrays; iteration order is preserved on load."""
    body = bytearray()
    body += CHECKPOINT_MAGIC
    body += struct.pack("<I", CHECKPOINT_VERSION)
    for name, arr in params.items():
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        nb = name.encode("utf-8")
        body += struct.pack("<I", len(nb))
        body += nb
        body += struct.pack("<I", arr.ndim)
        for d in arr.shape:
            body += struct.pack("<I", d)
        body += arr.astype("<f8").tobytes()
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    with open(path, "wb") as f:
        f.write(bytes(body))
        f.write(struct.pack("<I", crc))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12:
        raise CheckpointError(f"{path}: file too short")
    body, tail = blob[:-4], blob[-4:]
    (crc_stored,) = struct.unpack("<I", tail)
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise CheckpointError(f"{path}: CRC mismatch, file corrupted")
    if body[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {body[:4]!r}")
    (version,) = struct.unpack("<I", body[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    out: dict[str, np.ndarray] = {}
    off = 8
    n = len(body)
    try:
        while off < n:
            (name_len,) = struct.unpack_from("<I", body, off)
            off += 4
            name = body[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<I", body, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", body, off)
            off += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            vals = np.frombuffer(body, dtype="<f8", count=count, offset=off)
            off += 8 * count
            out[name] = vals.reshape(dims).astype(np.float64)
    except (struct.error, ValueError) as e:
        raise CheckpointError(f"{path}: truncated or malformed body: {e}") from e
    if off != n:
        raise CheckpointError(f"{path}: {n - off} trailing bytes")
    return out


# -- metrics rows ---------------------------------------------------------------

METRIC_KINDS = ("accuracy", "psnr_db", "reward_mean", "reward_std")
CSV_COLUMNS = ("run_id", "task", "system", "channel", "alpha", "train_snr",
               "test_snr_db", "metric", "value", "std", "repeats")


@dataclass
class MetricsRow:
    run_id: str
    task: str
    system: str
    channel: str
    alpha: float
    train_snr: str
    test_snr_db: Optional[float]     # None for channel-free rows
    metric: str
    value: float
    std: float
    repeats: int

    def __post_init__(self):
        if self.metric not in METRIC_KINDS:
            raise ValueError(f"unknown metric: {self.metric}")
        if self.std < 0.0:
            raise ValueError("std must be >= 0")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _quote(s: str) -> str:
    if any(ch in s for ch in ',"\n\r'):
        return '"' + s.replace('"', '""') + '"'
    return s


def write_metrics_csv(path, rows: list[MetricsRow]) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        vals = [_quote(_fmt(getattr(r, f.name))) for f in fields(MetricsRow)]
        lines.append(",".join(vals))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def read_metrics_csv(path) -> list[dict]:
    import csv

    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def sort_rows(rows: list[MetricsRow]) -> list[MetricsRow]:
    """Merge order for sweeps: by (system, alpha, test_snr_db)."""
    return sorted(rows, key=lambda r: (r.system, r.alpha,
                                       r.test_snr_db if r.test_snr_db is not None else float("inf"),
                                       r.metric))
