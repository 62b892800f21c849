"""Length-prefixed binary frames exchanged between coordinator and workers.

All integers are little-endian. A frame is ``u32 length`` followed by a payload
of ``b"SDMM" | u8 version | u8 msg_type | body``.

COMPUTE (0x01): u64 q, u32 rows_a, u32 cols_a, u32 cols_b, share_a, share_b
RESULT  (0x02): u32 rows, u32 cols, entries
ERROR   (0xFF): u32 code
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"SDMM"
VERSION = 1

COMPUTE = 0x01
RESULT = 0x02
ERROR = 0xFF

ERR_BAD_MAGIC = 1
ERR_MALFORMED = 2
ERR_DIMENSION = 3
ERR_ELEMENT_RANGE = 4

MAX_FRAME = 1 << 28

_LEN = struct.Struct("<I")
_HEAD = struct.Struct("<4sBB")
_COMPUTE_HEAD = struct.Struct("<QIII")
_RESULT_HEAD = struct.Struct("<II")
_ERROR_BODY = struct.Struct("<I")


class ProtocolError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class ConnectionClosed(Exception):
    """Peer closed the stream; ``partial`` tells whether it did so mid-frame."""

    def __init__(self, partial: bool):
        super().__init__("connection closed mid-frame" if partial else "connection closed")
        self.partial = partial


@dataclass
class Compute:
    q: int
    share_a: np.ndarray
    share_b: np.ndarray


@dataclass
class Result:
    values: np.ndarray


@dataclass
class Error:
    code: int


def _pack_u64s(arr: np.ndarray) -> bytes:
    return np.asarray(arr, dtype=object).astype(np.uint64).astype("<u8").tobytes()


def _unpack_u64s(buf: bytes, count: int, shape) -> np.ndarray:
    flat = np.frombuffer(buf, dtype="<u8", count=count)
    return flat.reshape(shape)


def _payload(msg_type: int, body: bytes) -> bytes:
    return _HEAD.pack(MAGIC, VERSION, msg_type) + body


def encode_message(msg) -> bytes:
    """Serialize a message into a complete frame (length prefix included)."""
    if isinstance(msg, Compute):
        ra, ca = msg.share_a.shape
        cb_rows, cb = msg.share_b.shape
        if cb_rows != ca:
            raise ValueError(f"share shapes {msg.share_a.shape} and {msg.share_b.shape} do not chain")
        body = _COMPUTE_HEAD.pack(msg.q, ra, ca, cb) + _pack_u64s(msg.share_a) + _pack_u64s(msg.share_b)
        payload = _payload(COMPUTE, body)
    elif isinstance(msg, Result):
        rows, cols = msg.values.shape
        payload = _payload(RESULT, _RESULT_HEAD.pack(rows, cols) + _pack_u64s(msg.values))
    elif isinstance(msg, Error):
        payload = _payload(ERROR, _ERROR_BODY.pack(msg.code))
    else:
        raise TypeError(f"cannot encode {type(msg).__name__}")
    return _LEN.pack(len(payload)) + payload


def decode_payload(payload: bytes):
    """Parse one payload; raises ProtocolError with the wire error code."""
    if len(payload) < 4 or payload[:4] != MAGIC:
        raise ProtocolError(ERR_BAD_MAGIC, "bad magic")
    if len(payload) < _HEAD.size:
        raise ProtocolError(ERR_MALFORMED, "payload shorter than header")
    _, version, msg_type = _HEAD.unpack_from(payload)
    if version != VERSION:
        raise ProtocolError(ERR_BAD_MAGIC, f"unsupported version {version}")
    body = payload[_HEAD.size:]
    if msg_type == COMPUTE:
        return _decode_compute(body)
    if msg_type == RESULT:
        if len(body) < _RESULT_HEAD.size:
            raise ProtocolError(ERR_MALFORMED, "truncated RESULT header")
        rows, cols = _RESULT_HEAD.unpack_from(body)
        if len(body) != _RESULT_HEAD.size + 8 * rows * cols:
            raise ProtocolError(ERR_MALFORMED, "RESULT body length does not match its dimensions")
        return Result(_unpack_u64s(body[_RESULT_HEAD.size:], rows * cols, (rows, cols)))
    if msg_type == ERROR:
        if len(body) != _ERROR_BODY.size:
            raise ProtocolError(ERR_MALFORMED, "ERROR body must be one u32")
        return Error(_ERROR_BODY.unpack(body)[0])
    raise ProtocolError(ERR_MALFORMED, f"unknown message type 0x{msg_type:02x}")


def _decode_compute(body: bytes) -> Compute:
    if len(body) < _COMPUTE_HEAD.size:
        raise ProtocolError(ERR_MALFORMED, "truncated COMPUTE header")
    q, ra, ca, cb = _COMPUTE_HEAD.unpack_from(body)
    if q < 2:
        raise ProtocolError(ERR_MALFORMED, f"modulus {q} is not a field size")
    if 0 in (ra, ca, cb):
        raise ProtocolError(ERR_MALFORMED, "zero matrix dimension")
    data = body[_COMPUTE_HEAD.size:]
    if len(data) % 8:
        raise ProtocolError(ERR_MALFORMED, "element section is not a whole number of u64s")
    count = len(data) // 8
    n_a, n_b = ra * ca, ca * cb
    if count != n_a + n_b:
        rest = count - n_a
        # share_b sent with a row count other than cols_a: the shares do not chain.
        if rest > 0 and rest % cb == 0:
            raise ProtocolError(ERR_DIMENSION, f"share_b has {rest // cb} rows, share_a has {ca} cols")
        raise ProtocolError(ERR_MALFORMED, f"expected {n_a + n_b} elements, got {count}")
    elems = _unpack_u64s(data, count, (count,))
    if count and int(elems.max()) >= q:
        raise ProtocolError(ERR_ELEMENT_RANGE, f"element >= q={q}")
    return Compute(q, elems[:n_a].reshape(ra, ca), elems[n_a:].reshape(ca, cb))


def _recv_exact(sock: socket.socket, n: int, started: bool) -> bytes:
    chunks, got = [], 0
    while got < n:
        chunk = sock.recv(min(n - got, 1 << 20))
        if not chunk:
            raise ConnectionClosed(partial=started or got > 0)
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> bytes:
    """Read one payload. Oversized frames raise ProtocolError(ERR_MALFORMED)."""
    (length,) = _LEN.unpack(_recv_exact(sock, _LEN.size, started=False))
    if length > MAX_FRAME:
        raise ProtocolError(ERR_MALFORMED, f"frame of {length} bytes exceeds limit")
    return _recv_exact(sock, length, started=True)


def send_message(sock: socket.socket, msg):
    sock.sendall(encode_message(msg))


def recv_message(sock: socket.socket):
    return decode_payload(read_frame(sock))
