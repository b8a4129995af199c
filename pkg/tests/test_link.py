"""Frame codec: bit-exact vectors, totality, corruption rejection, resync."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from convowaste.domain import Direction, WasteClass
from convowaste.link import (
    Ack,
    Belt,
    BinCount,
    Detected,
    Dump,
    FrameDecoder,
    FrameError,
    Level,
    StopAll,
    ServoDone,
    decode_buffer,
    decode_frame,
    encode_frame,
    format_frame_dump,
    scan_frames,
)

# Strategy over every valid message.
MESSAGES = st.one_of(
    st.builds(Detected, st.sampled_from(WasteClass)),
    st.builds(Ack, st.integers(min_value=1, max_value=8)),
    st.builds(
        ServoDone, st.integers(min_value=1, max_value=3), st.sampled_from(Direction)
    ),
    st.builds(
        BinCount,
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=0, max_value=0xFFFF),
    ),
    st.builds(
        Level,
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=0, max_value=0xFFFF),
    ),
    st.builds(StopAll),
    st.builds(Dump, st.integers(min_value=1, max_value=6)),
    st.builds(Belt, st.booleans()),
)


class TestWireVectors:
    """Frames checked byte for byte against the protocol definition."""

    def test_stop_all(self):
        assert encode_frame(StopAll()) == bytes.fromhex("aa060006")

    def test_detected_plastic(self):
        assert encode_frame(Detected(WasteClass.PLASTIC)) == bytes.fromhex("aa01010101")

    def test_bin_count(self):
        assert encode_frame(BinCount(3, 0)) == bytes.fromhex("aa040303000004")

    def test_level_big_endian(self):
        frame = encode_frame(Level(2, 0x01F4))  # 500 mm
        assert frame == bytes.fromhex("aa05030201f4f1")
        decoded = decode_frame(frame)
        assert decoded == Level(2, 500)

    def test_servo_done_directions(self):
        assert encode_frame(ServoDone(1, Direction.CW))[3:5] == bytes([1, 0])
        assert encode_frame(ServoDone(1, Direction.CCW))[3:5] == bytes([1, 1])

    def test_belt_flag(self):
        assert encode_frame(Belt(True)) == bytes.fromhex("aa08010108")
        assert encode_frame(Belt(False)) == bytes.fromhex("aa08010009")


class TestRoundTrip:
    @given(msg=MESSAGES)
    def test_encode_decode_identity(self, msg):
        assert decode_frame(encode_frame(msg)) == msg

    def test_bulk_round_trips(self):
        # 10_000 random frames without hypothesis overhead.
        rng = random.Random(6)
        for _ in range(10_000):
            msg = _random_message(rng)
            assert decode_frame(encode_frame(msg)) == msg


def _random_message(rng: random.Random):
    choice = rng.randrange(8)
    if choice == 0:
        return Detected(WasteClass.from_code(rng.randint(1, 6)))
    if choice == 1:
        return Ack(rng.randint(1, 8))
    if choice == 2:
        return ServoDone(rng.randint(1, 3), rng.choice(list(Direction)))
    if choice == 3:
        return BinCount(rng.randint(1, 6), rng.randint(0, 0xFFFF))
    if choice == 4:
        return Level(rng.randint(1, 6), rng.randint(0, 0xFFFF))
    if choice == 5:
        return StopAll()
    if choice == 6:
        return Dump(rng.randint(1, 6))
    return Belt(rng.random() < 0.5)


class TestErrors:
    def test_bad_sof(self):
        with pytest.raises(FrameError) as err:
            decode_frame(bytes.fromhex("ab060006"))
        assert err.value.kind == "bad-sof"

    def test_truncated(self):
        # Header is consistent (BIN_COUNT wants 3 payload bytes), tail missing.
        with pytest.raises(FrameError) as err:
            decode_frame(bytes.fromhex("aa040303"))
        assert err.value.kind == "truncated"

    def test_declared_length_checked_before_tail(self):
        # Length byte contradicts the type's fixed size: caught immediately.
        with pytest.raises(FrameError) as err:
            decode_frame(bytes.fromhex("aa0401"))
        assert err.value.kind == "bad-length"

    def test_unknown_type(self):
        with pytest.raises(FrameError) as err:
            decode_frame(bytes.fromhex("aa090009"))
        assert err.value.kind == "unknown-type"

    def test_bad_length(self):
        with pytest.raises(FrameError) as err:
            decode_frame(bytes.fromhex("aa06010107"))
        assert err.value.kind == "bad-length"

    def test_bad_checksum(self):
        with pytest.raises(FrameError) as err:
            decode_frame(bytes.fromhex("aa060007"))
        assert err.value.kind == "bad-checksum"

    def test_bad_payload_class_code(self):
        # DETECTED with class 7: checksum valid, field out of range.
        frame = bytes([0xAA, 0x01, 0x01, 0x07, 0x01 ^ 0x01 ^ 0x07])
        with pytest.raises(FrameError) as err:
            decode_frame(frame)
        assert err.value.kind == "bad-payload"

    def test_bad_payload_bin_zero(self):
        frame = bytes([0xAA, 0x07, 0x01, 0x00, 0x07 ^ 0x01 ^ 0x00])
        with pytest.raises(FrameError) as err:
            decode_frame(frame)
        assert err.value.kind == "bad-payload"

    @given(data=st.binary(max_size=64))
    def test_decode_total_over_garbage(self, data):
        try:
            decode_frame(data)
        except FrameError:
            pass  # the only permitted failure mode

    @given(data=st.binary(max_size=200))
    def test_scan_terminates_and_covers_buffer(self, data):
        results = list(scan_frames(data))
        # Every scan result is a message or a FrameError; offsets ascend.
        offsets = [off for off, _ in results]
        assert offsets == sorted(offsets)


class TestCorruption:
    """No single corrupted byte may yield a valid decode of that frame."""

    def test_every_single_byte_corruption_rejected(self):
        rng = random.Random(1234)
        for _ in range(1000):
            msg = _random_message(rng)
            frame = bytearray(encode_frame(msg))
            pos = rng.randrange(len(frame))
            delta = rng.randint(1, 255)
            frame[pos] ^= delta
            with pytest.raises(FrameError):
                decode_frame(bytes(frame))

    @given(msg=MESSAGES, pos_seed=st.integers(0, 2**32), delta=st.integers(1, 255))
    @settings(max_examples=300)
    def test_corruption_property(self, msg, pos_seed, delta):
        frame = bytearray(encode_frame(msg))
        frame[pos_seed % len(frame)] ^= delta
        with pytest.raises(FrameError):
            decode_frame(bytes(frame))

    def test_exhaustive_corruption_of_one_frame_per_type(self):
        samples = [
            Detected(WasteClass.EWASTE),
            Ack(0x06),
            ServoDone(2, Direction.CCW),
            BinCount(6, 0x0600),
            Level(6, 0x0600),
            StopAll(),
            Dump(4),
            Belt(True),
        ]
        for msg in samples:
            frame = encode_frame(msg)
            for pos in range(len(frame)):
                for value in range(256):
                    if value == frame[pos]:
                        continue
                    corrupted = bytearray(frame)
                    corrupted[pos] = value
                    with pytest.raises(FrameError):
                        decode_frame(bytes(corrupted))


class TestResync:
    def test_recovers_after_garbage(self):
        rng = random.Random(77)
        frame = encode_frame(Dump(3))
        for garbage_len in (1, 7, 63, 64):
            garbage = bytes(
                rng.choice([b for b in range(256) if b != 0xAA]) for _ in range(garbage_len)
            )
            messages, errors = decode_buffer(garbage + frame)
            assert messages == [Dump(3)]
            assert errors  # the garbage is reported, not silently eaten

    def test_recovers_between_frames(self):
        a, b = encode_frame(Belt(True)), encode_frame(BinCount(1, 9))
        blob = a + b"\x00\x13\x37" + b
        messages, _ = decode_buffer(blob)
        assert messages == [Belt(True), BinCount(1, 9)]

    def test_streaming_decoder_handles_split_feeds(self):
        decoder = FrameDecoder()
        frames = b"".join(
            encode_frame(m) for m in [StopAll(), Dump(2), Level(1, 500), Belt(False)]
        )
        blob = b"\xde\xad" + frames
        out = []
        for i in range(0, len(blob), 3):
            out.extend(decoder.feed(blob[i : i + 3]))
        assert out == [StopAll(), Dump(2), Level(1, 500), Belt(False)]
        assert decoder.diagnostics  # garbage prefix recorded

    def test_streaming_decoder_waits_for_tail(self):
        decoder = FrameDecoder()
        frame = encode_frame(BinCount(2, 300))
        assert decoder.feed(frame[:4]) == []
        assert decoder.feed(frame[4:]) == [BinCount(2, 300)]


class TestFrameDump:
    def test_annotates_valid_and_garbage(self):
        blob = encode_frame(StopAll()) + b"\xff" + encode_frame(Detected(WasteClass.METAL))
        dump = format_frame_dump(blob)
        assert "STOP_ALL" in dump
        assert "DETECTED class=metal" in dump
        assert "!" in dump  # the garbage byte line
