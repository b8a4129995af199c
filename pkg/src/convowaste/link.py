"""Bit-exact serial frame protocol between controller and MCU.

Wire layout (big-endian for multi-byte fields)::

    +------+----------+--------+-----------------+----------+
    | 0xAA | msg_type | length | payload (0..16) | checksum |
    +------+----------+--------+-----------------+----------+

``checksum`` is the XOR of msg_type, length and every payload byte.  A
serialized frame is therefore ``4 + length`` bytes.  Decoding is total
over arbitrary input: anything that is not a valid frame produces a
:class:`FrameError` and the stream decoder resynchronizes by scanning
for the next 0xAA.

Message vocabulary (msg_type, payload):

====  ============  ==========================================
0x01  DETECTED      class_code (1 byte, 0x01..0x06)
0x02  ACK           ref_type (1 byte, a known msg_type)
0x03  SERVO_DONE    servo_id, direction (CW=0x00, CCW=0x01)
0x04  BIN_COUNT     bin_index, count (u16 big-endian)
0x05  LEVEL         bin_index, distance_mm (u16 big-endian)
0x06  STOP_ALL      (empty)
0x07  DUMP          bin_index
0x08  BELT          run (0x00 stop, 0x01 run)
====  ============  ==========================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from .domain import Direction, WasteClass

SOF = 0xAA
MAX_PAYLOAD = 16

_DIR_CODE = {Direction.CW: 0x00, Direction.CCW: 0x01}
_DIR_FROM = {0x00: Direction.CW, 0x01: Direction.CCW}


class FrameError(ValueError):
    """Decode failure; `kind` is one of bad-sof, truncated, bad-length,
    unknown-type, bad-checksum, bad-payload."""

    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: {detail}" if detail else kind)


@dataclass(frozen=True)
class Detected:
    waste_class: WasteClass


@dataclass(frozen=True)
class Ack:
    ref_type: int


@dataclass(frozen=True)
class ServoDone:
    servo_id: int
    direction: Direction


@dataclass(frozen=True)
class BinCount:
    bin_index: int
    count: int


@dataclass(frozen=True)
class Level:
    bin_index: int
    distance_mm: int


@dataclass(frozen=True)
class StopAll:
    pass


@dataclass(frozen=True)
class Dump:
    bin_index: int


@dataclass(frozen=True)
class Belt:
    run: bool


LinkMessage = Union[Detected, Ack, ServoDone, BinCount, Level, StopAll, Dump, Belt]

MSG_TYPES = {
    Detected: 0x01,
    Ack: 0x02,
    ServoDone: 0x03,
    BinCount: 0x04,
    Level: 0x05,
    StopAll: 0x06,
    Dump: 0x07,
    Belt: 0x08,
}

# msg_type -> payload byte count; every variant has a unique
# (msg_type, length) signature.
PAYLOAD_LEN = {0x01: 1, 0x02: 1, 0x03: 2, 0x04: 3, 0x05: 3, 0x06: 0, 0x07: 1, 0x08: 1}


def _check_bin(value: int) -> int:
    if not 1 <= value <= 6:
        raise FrameError("bad-payload", f"bin index {value} out of range 1..6")
    return value


def _check_u16(value: int, what: str) -> int:
    if not 0 <= value <= 0xFFFF:
        raise FrameError("bad-payload", f"{what} {value} out of range 0..65535")
    return value


def _payload_of(msg: LinkMessage) -> bytes:
    if isinstance(msg, Detected):
        return bytes([msg.waste_class.code])
    if isinstance(msg, Ack):
        if msg.ref_type not in PAYLOAD_LEN:
            raise FrameError("bad-payload", f"ack references unknown type {msg.ref_type:#04x}")
        return bytes([msg.ref_type])
    if isinstance(msg, ServoDone):
        if msg.servo_id not in (1, 2, 3):
            raise FrameError("bad-payload", f"servo id {msg.servo_id} out of range 1..3")
        return bytes([msg.servo_id, _DIR_CODE[msg.direction]])
    if isinstance(msg, BinCount):
        count = _check_u16(msg.count, "count")
        return bytes([_check_bin(msg.bin_index), count >> 8, count & 0xFF])
    if isinstance(msg, Level):
        dist = _check_u16(msg.distance_mm, "distance")
        return bytes([_check_bin(msg.bin_index), dist >> 8, dist & 0xFF])
    if isinstance(msg, StopAll):
        return b""
    if isinstance(msg, Dump):
        return bytes([_check_bin(msg.bin_index)])
    if isinstance(msg, Belt):
        return bytes([0x01 if msg.run else 0x00])
    raise FrameError("unknown-type", repr(msg))


def _parse_payload(msg_type: int, payload: bytes) -> LinkMessage:
    if msg_type == 0x01:
        code = payload[0]
        if not 1 <= code <= 6:
            raise FrameError("bad-payload", f"class code {code:#04x} out of range")
        return Detected(WasteClass.from_code(code))
    if msg_type == 0x02:
        if payload[0] not in PAYLOAD_LEN:
            raise FrameError("bad-payload", f"ack references unknown type {payload[0]:#04x}")
        return Ack(payload[0])
    if msg_type == 0x03:
        servo, direction = payload[0], payload[1]
        if servo not in (1, 2, 3) or direction not in _DIR_FROM:
            raise FrameError("bad-payload", f"servo done {servo}/{direction}")
        return ServoDone(servo, _DIR_FROM[direction])
    if msg_type == 0x04:
        return BinCount(_check_bin(payload[0]), (payload[1] << 8) | payload[2])
    if msg_type == 0x05:
        return Level(_check_bin(payload[0]), (payload[1] << 8) | payload[2])
    if msg_type == 0x06:
        return StopAll()
    if msg_type == 0x07:
        return Dump(_check_bin(payload[0]))
    if msg_type == 0x08:
        if payload[0] not in (0, 1):
            raise FrameError("bad-payload", f"belt flag {payload[0]:#04x}")
        return Belt(payload[0] == 1)
    raise FrameError("unknown-type", f"{msg_type:#04x}")


def encode_frame(msg: LinkMessage) -> bytes:
    """Serialize one message to its wire frame."""
    msg_type = MSG_TYPES[type(msg)]
    payload = _payload_of(msg)
    checksum = msg_type ^ len(payload)
    for b in payload:
        checksum ^= b
    return bytes([SOF, msg_type, len(payload), *payload, checksum])


def decode_frame_at(data: bytes, pos: int = 0) -> tuple[LinkMessage, int]:
    """Decode the frame starting at `pos`; returns (message, end offset).

    Raises FrameError without consuming anything; the caller decides where
    to resume scanning.
    """
    n = len(data)
    if pos >= n:
        raise FrameError("truncated", "empty buffer")
    if data[pos] != SOF:
        raise FrameError("bad-sof", f"expected 0xAA at offset {pos}, got {data[pos]:#04x}")
    if pos + 3 > n:
        raise FrameError("truncated", "header cut short")
    msg_type, length = data[pos + 1], data[pos + 2]
    if msg_type not in PAYLOAD_LEN:
        raise FrameError("unknown-type", f"{msg_type:#04x}")
    if length > MAX_PAYLOAD or length != PAYLOAD_LEN[msg_type]:
        raise FrameError(
            "bad-length",
            f"type {msg_type:#04x} expects {PAYLOAD_LEN[msg_type]} payload bytes, got {length}",
        )
    end = pos + 4 + length
    if end > n:
        raise FrameError("truncated", f"need {end - n} more bytes")
    payload = data[pos + 3 : pos + 3 + length]
    checksum = msg_type ^ length
    for b in payload:
        checksum ^= b
    if checksum != data[end - 1]:
        raise FrameError(
            "bad-checksum", f"computed {checksum:#04x}, frame carries {data[end - 1]:#04x}"
        )
    return _parse_payload(msg_type, payload), end


def decode_frame(data: bytes) -> LinkMessage:
    """Decode exactly one frame at the start of `data`."""
    msg, _ = decode_frame_at(data, 0)
    return msg


def scan_frames(data: bytes) -> Iterator[tuple[int, LinkMessage | FrameError]]:
    """Walk a complete buffer, yielding (offset, message-or-error) and
    resynchronizing on the next 0xAA after every error."""
    pos = 0
    n = len(data)
    while pos < n:
        idx = data.find(SOF, pos)
        if idx < 0:
            if pos < n:
                yield pos, FrameError("bad-sof", "no frame start in remaining bytes")
            return
        if idx > pos:
            yield pos, FrameError("bad-sof", f"{idx - pos} garbage bytes before 0xAA")
        try:
            msg, end = decode_frame_at(data, idx)
        except FrameError as err:
            yield idx, err
            pos = idx + 1
            continue
        yield idx, msg
        pos = end


def decode_buffer(data: bytes) -> tuple[list[LinkMessage], list[tuple[int, FrameError]]]:
    """Decode every recoverable frame in a complete buffer."""
    messages: list[LinkMessage] = []
    errors: list[tuple[int, FrameError]] = []
    for offset, result in scan_frames(data):
        if isinstance(result, FrameError):
            errors.append((offset, result))
        else:
            messages.append(result)
    return messages, errors


class FrameDecoder:
    """Incremental stream decoder with automatic resynchronization.

    Feed arbitrary byte chunks; complete valid frames come back in order.
    Garbage and corrupt frames are skipped (recorded in `diagnostics`),
    and a frame truncated at the end of the buffer is kept until more
    bytes arrive.
    """

    def __init__(self) -> None:
        self._buf = bytearray()
        self.diagnostics: list[str] = []

    def feed(self, data: bytes) -> list[LinkMessage]:
        self._buf.extend(data)
        messages: list[LinkMessage] = []
        pos = 0
        while True:
            idx = self._buf.find(SOF, pos)
            if idx < 0:
                if len(self._buf) > pos:
                    skipped = len(self._buf) - pos
                    self.diagnostics.append(f"skipped {skipped} non-frame byte(s)")
                pos = len(self._buf)
                break
            if idx > pos:
                self.diagnostics.append(f"skipped {idx - pos} non-frame byte(s)")
            try:
                msg, end = decode_frame_at(self._buf, idx)
            except FrameError as err:
                if err.kind == "truncated":
                    pos = idx
                    break
                self.diagnostics.append(f"offset {idx}: {err}")
                pos = idx + 1
                continue
            messages.append(msg)
            pos = end
        del self._buf[:pos]
        return messages


def describe(msg: LinkMessage) -> str:
    """One-line human-readable form used by the frame-dump tool."""
    if isinstance(msg, Detected):
        return f"DETECTED class={msg.waste_class.key}({msg.waste_class.code:#04x})"
    if isinstance(msg, Ack):
        return f"ACK ref_type={msg.ref_type:#04x}"
    if isinstance(msg, ServoDone):
        return f"SERVO_DONE servo={msg.servo_id} dir={msg.direction.value}"
    if isinstance(msg, BinCount):
        return f"BIN_COUNT bin={msg.bin_index} count={msg.count}"
    if isinstance(msg, Level):
        return f"LEVEL bin={msg.bin_index} distance_mm={msg.distance_mm}"
    if isinstance(msg, StopAll):
        return "STOP_ALL"
    if isinstance(msg, Dump):
        return f"DUMP bin={msg.bin_index}"
    if isinstance(msg, Belt):
        return f"BELT run={1 if msg.run else 0}"
    return repr(msg)


def format_frame_dump(data: bytes) -> str:
    """Annotated hex dump of a byte buffer, one line per frame or error."""
    lines = []
    for offset, result in scan_frames(data):
        if isinstance(result, FrameError):
            span = data[offset : offset + 8]
            lines.append(f"{offset:06x}  {span.hex(' '):<23s}  ! {result}")
        else:
            raw = encode_frame(result)
            lines.append(f"{offset:06x}  {raw.hex(' '):<23s}  {describe(result)}")
    return "\n".join(lines)
