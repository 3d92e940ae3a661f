"""Binary time-tag files.

Layout (little-endian): magic ``QTT1``, uint32 record count, uint64 run
duration in ps, then 12-byte records of int64 time (ps), uint8 channel,
uint8 flags and uint16 reserved (zero).
"""

import numpy as np

from ._validation import ValidationError
from .optics import TAG_DTYPE

MAGIC = b"QTT1"
HEADER_DTYPE = np.dtype([("magic", "S4"), ("count", "<u4"), ("duration", "<u8")])
RECORD_DTYPE = np.dtype([("t", "<i8"), ("channel", "u1"), ("flags", "u1"), ("reserved", "<u2")])
assert RECORD_DTYPE.itemsize == 12


def write_tags(path, tags, duration):
    if len(tags) >= 2 ** 32:
        raise ValidationError("too many records for a QTT1 file")
    header = np.array([(MAGIC, len(tags), int(duration))], dtype=HEADER_DTYPE)
    rec = np.zeros(len(tags), dtype=RECORD_DTYPE)
    rec["t"], rec["channel"], rec["flags"] = tags["t"], tags["channel"], tags["flags"]
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(rec.tobytes())


def read_tags(path):
    """Return ``(tags, duration_ps)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_DTYPE.itemsize or raw[:4] != MAGIC:
        raise ValidationError(f"{path}: not a QTT1 tag file")
    header = np.frombuffer(raw[:HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    count = int(header["count"])
    body = raw[HEADER_DTYPE.itemsize:]
    if len(body) != count * RECORD_DTYPE.itemsize:
        raise ValidationError(f"{path}: record count {count} does not match file size")
    rec = np.frombuffer(body, dtype=RECORD_DTYPE)
    if np.any(rec["reserved"] != 0):
        raise ValidationError(f"{path}: reserved field must be zero")
    tags = np.empty(count, dtype=TAG_DTYPE)
    tags["t"], tags["channel"], tags["flags"] = rec["t"], rec["channel"], rec["flags"]
    return tags, int(header["duration"])


def channel_times(tags, channel):
    """Sorted int64 times of one channel."""
    return np.ascontiguousarray(tags["t"][tags["channel"] == channel])
