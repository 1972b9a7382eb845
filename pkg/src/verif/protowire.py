"""Minimal protobuf wire-format codec.

Only what the model-file schema needs: varint, 32/64-bit, and
length-delimited fields, with unknown fields skipped on decode. Field
semantics (numbers, nesting) live in the caller; this module is purely
the wire layer. Encoding writes fields in call order, so emitted files
are byte-deterministic.
"""

from __future__ import annotations

import struct
from typing import Iterator

__all__ = [
    "encode_varint",
    "field_varint",
    "field_bytes",
    "field_string",
    "field_float32",
    "iter_fields",
    "to_int64",
    "WireError",
]


class WireError(ValueError):
    """Buffer is not valid wire-format data."""


def encode_varint(n: int) -> bytes:
    if n < 0:
        n += 1 << 64  # two's complement, 10-byte form
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _tag(field: int, wire: int) -> bytes:
    return encode_varint((field << 3) | wire)


def field_varint(field: int, value: int) -> bytes:
    return _tag(field, 0) + encode_varint(value)


def field_bytes(field: int, payload: bytes) -> bytes:
    return _tag(field, 2) + encode_varint(len(payload)) + bytes(payload)


def field_string(field: int, text: str) -> bytes:
    return field_bytes(field, text.encode("utf-8"))


def field_float32(field: int, value: float) -> bytes:
    return _tag(field, 5) + struct.pack("<f", value)


def _decode_varint(buf, pos: int):
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise WireError("truncated varint")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise WireError("varint too long")


def iter_fields(buf) -> Iterator[tuple]:
    """Yield (field number, wire type, value) triples from a message buffer.

    Values are ints for wire type 0, raw byte slices for types 1 (8 bytes),
    5 (4 bytes), and 2 (length-delimited).
    """
    buf = memoryview(buf)
    pos = 0
    n = len(buf)
    while pos < n:
        key, pos = _decode_varint(buf, pos)
        field, wire = key >> 3, key & 0x7
        if wire == 0:
            value, pos = _decode_varint(buf, pos)
        elif wire == 1:
            if pos + 8 > n:
                raise WireError("truncated 64-bit field")
            value = bytes(buf[pos : pos + 8])
            pos += 8
        elif wire == 5:
            if pos + 4 > n:
                raise WireError("truncated 32-bit field")
            value = bytes(buf[pos : pos + 4])
            pos += 4
        elif wire == 2:
            ln, pos = _decode_varint(buf, pos)
            if pos + ln > n:
                raise WireError("truncated length-delimited field")
            value = buf[pos : pos + ln]
            pos += ln
        else:
            raise WireError(f"unsupported wire type {wire}")
        yield field, wire, value


def to_int64(u: int) -> int:
    return u - (1 << 64) if u >= (1 << 63) else u
