"""Pluggable waste classifiers behind a single interface.

Every classifier implements ``classify(item_id, true_class, image_ref)``
and returns a :class:`Prediction`, or ``None`` when classification is
unavailable (the external adapter timed out or answered garbage).  The
simulator treats ``None`` as "unknown waste": servos stop and the item
rides to the reject tray.

The stochastic classifier reproduces the measured per-class accuracy of
the production model; its random stream is a Mersenne Twister
(:data:`RNG_ALGORITHM`) seeded with a 64-bit integer, so replays are
portable across implementations of the same generator.
"""

from __future__ import annotations

import random
import socket
from dataclasses import dataclass
from typing import Mapping, Sequence

from .domain import (
    ALL_CLASSES,
    ClassProfile,
    WasteClass,
    profiles_by_class,
)

# Algorithm identifier recorded in trace headers so a replay knows which
# generator to reproduce.
RNG_ALGORITHM = "mt19937"

_CONFIDENCE_SUM_TOL = 1e-9


class ScriptExhausted(Exception):
    """A scripted classifier ran past the end of its script."""


@dataclass(frozen=True)
class Prediction:
    """Classifier output: the winning class, a 6-way confidence vector
    (wire-code order) and the detection latency in seconds."""

    predicted: WasteClass
    confidence: tuple[float, ...]
    latency_s: float

    def __post_init__(self) -> None:
        if len(self.confidence) != len(ALL_CLASSES):
            raise ValueError("confidence vector must have 6 entries")
        if any(p < 0 for p in self.confidence):
            raise ValueError("confidence entries must be non-negative")
        if abs(sum(self.confidence) - 1.0) > _CONFIDENCE_SUM_TOL:
            raise ValueError(f"confidence must sum to 1, got {sum(self.confidence)}")
        peak = max(self.confidence)
        winners = [i for i, p in enumerate(self.confidence) if p == peak]
        if winners != [self.predicted.code - 1]:
            raise ValueError("confidence argmax must be unique and equal predicted")


def make_confidence(predicted: WasteClass, peak: float) -> tuple[float, ...]:
    """A 6-way vector with `peak` mass on the predicted class and the
    remainder split equally over the other five.

    `peak` must exceed 1/6, otherwise the predicted class would not be the
    unique argmax.
    """
    if not 1.0 / 6.0 < peak <= 1.0:
        raise ValueError(f"invalid-peak: peak must be in (1/6, 1], got {peak}")
    rest = (1.0 - peak) / 5.0
    return tuple(peak if c is predicted else rest for c in ALL_CLASSES)


class PerfectClassifier:
    """Oracle: always right, one-hot confidence, deterministic latency."""

    kind = "perfect"

    def __init__(self, profiles: Sequence[ClassProfile] | None = None):
        self._profiles = profiles_by_class(profiles)

    def classify(self, item_id: int, true_class: WasteClass, image_ref: str) -> Prediction:
        profile = self._profiles[true_class]
        return Prediction(
            predicted=true_class,
            confidence=make_confidence(true_class, 1.0),
            latency_s=profile.detection_latency_s,
        )


class ScriptedClassifier:
    """Replays a fixed list of outcomes, one per call, in order.

    Script entries are `WasteClass` values or ``None`` for a
    classification-unavailable outcome.  Calling past the end raises
    :class:`ScriptExhausted`.
    """

    kind = "scripted"

    def __init__(
        self,
        script: Sequence[WasteClass | None],
        profiles: Sequence[ClassProfile] | None = None,
        confidence_peak: float = 0.9,
    ):
        if not script:
            raise ValueError("script must be non-empty")
        self._script = list(script)
        self._cursor = 0
        self._profiles = profiles_by_class(profiles)
        self._peak = confidence_peak

    @property
    def remaining(self) -> int:
        return len(self._script) - self._cursor

    def classify(self, item_id: int, true_class: WasteClass, image_ref: str) -> Prediction | None:
        if self._cursor >= len(self._script):
            raise ScriptExhausted(
                f"script exhausted after {len(self._script)} classifications"
            )
        entry = self._script[self._cursor]
        self._cursor += 1
        if entry is None:
            return None
        return Prediction(
            predicted=entry,
            confidence=make_confidence(entry, self._peak),
            latency_s=self._profiles[true_class].detection_latency_s,
        )


def uniform_error_distribution() -> dict[WasteClass, dict[WasteClass, float]]:
    """Maximum-entropy default: misclassifications spread evenly over the
    five wrong classes."""
    return {
        c: {other: 0.2 for other in ALL_CLASSES if other is not c}
        for c in ALL_CLASSES
    }


def error_distribution_from_confusion(
    confusion: Mapping[str, Mapping[str, float]],
) -> tuple[dict[WasteClass, float], dict[WasteClass, dict[WasteClass, float]]]:
    """Split a full confusion matrix (rows = true class, values = predicted
    probabilities summing to 1) into per-class accuracy and a normalized
    error distribution."""
    accuracy: dict[WasteClass, float] = {}
    errors: dict[WasteClass, dict[WasteClass, float]] = {}
    for true_key, row in confusion.items():
        true = WasteClass.from_key(true_key)
        probs = {WasteClass.from_key(k): float(v) for k, v in row.items()}
        total = sum(probs.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"confusion row {true_key!r} sums to {total}, expected 1")
        acc = probs.get(true, 0.0)
        accuracy[true] = acc
        off = {c: p for c, p in probs.items() if c is not true}
        off_total = sum(off.values())
        if off_total > 0:
            errors[true] = {c: p / off_total for c, p in off.items()}
        else:
            errors[true] = {c: 0.2 for c in ALL_CLASSES if c is not true}
    missing = [c.key for c in ALL_CLASSES if c not in accuracy]
    if missing:
        raise ValueError(f"confusion matrix missing rows: {missing}")
    return accuracy, errors


class StochasticClassifier:
    """Draws the predicted class from the measured per-class accuracy.

    With probability ``accuracy(true_class)`` the prediction is correct;
    otherwise a wrong class is drawn from the error distribution (uniform
    over the other five unless a confusion matrix is supplied).  Latency is
    deterministic: always the true class's profile latency.

    One uniform draw decides correctness; a second is consumed only on a
    miss.  Two instances with the same seed therefore produce identical
    prediction sequences for identical call sequences.
    """

    kind = "stochastic"

    def __init__(
        self,
        seed: int,
        profiles: Sequence[ClassProfile] | None = None,
        confusion: Mapping[str, Mapping[str, float]] | None = None,
        confidence_peak: float = 0.9,
    ):
        self._profiles = profiles_by_class(profiles)
        self._peak = confidence_peak
        self._rng = random.Random(seed)
        self.seed = seed
        if confusion is not None:
            accuracy, errors = error_distribution_from_confusion(confusion)
            self._accuracy = accuracy
            self._errors = errors
        else:
            self._accuracy = {
                c: self._profiles[c].accuracy for c in ALL_CLASSES
            }
            self._errors = uniform_error_distribution()

    def classify(self, item_id: int, true_class: WasteClass, image_ref: str) -> Prediction:
        if self._rng.random() < self._accuracy[true_class]:
            predicted = true_class
        else:
            predicted = self._draw_error(true_class)
        return Prediction(
            predicted=predicted,
            confidence=make_confidence(predicted, self._peak),
            latency_s=self._profiles[true_class].detection_latency_s,
        )

    def _draw_error(self, true_class: WasteClass) -> WasteClass:
        r = self._rng.random()
        acc = 0.0
        dist = self._errors[true_class]
        candidates = [c for c in ALL_CLASSES if c is not true_class]
        for c in candidates:
            acc += dist.get(c, 0.0)
            if r < acc:
                return c
        return candidates[-1]


class ExternalAdapterClassifier:
    """Adapter for a real model served over a local TCP socket.

    Speaks a newline-delimited request/response protocol::

        -> CLASSIFY <item_id> <image_ref>
        <- RESULT <item_id> <class_code> <p1> <p2> <p3> <p4> <p5> <p6>

    A timeout or malformed reply yields ``None`` (classification
    unavailable); the simulator then takes the unknown-waste path.
    """

    kind = "external"

    def __init__(self, host: str, port: int, timeout_s: float = 2.0):
        self._address = (host, port)
        self._timeout = timeout_s
        self._sock: socket.socket | None = None
        self._buffer = b""
        self.last_error: str | None = None

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            self._sock = socket.create_connection(self._address, timeout=self._timeout)
            self._buffer = b""
        self._sock.settimeout(self._timeout)
        return self._sock

    def _read_line(self, sock: socket.socket) -> bytes:
        while b"\n" not in self._buffer:
            chunk = sock.recv(4096)
            if not chunk:
                raise ConnectionError("adapter closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def classify(self, item_id: int, true_class: WasteClass, image_ref: str) -> Prediction | None:
        try:
            sock = self._connect()
            sock.sendall(f"CLASSIFY {item_id} {image_ref}\n".encode())
            line = self._read_line(sock)
        except (OSError, ConnectionError) as exc:
            self.last_error = f"adapter unavailable: {exc}"
            self.close()
            return None
        prediction = self._parse_result(line, item_id, true_class)
        if prediction is None:
            self.close()
        return prediction

    def _parse_result(
        self, line: bytes, item_id: int, true_class: WasteClass
    ) -> Prediction | None:
        parts = line.decode(errors="replace").split()
        if len(parts) != 9 or parts[0] != "RESULT" or parts[1] != str(item_id):
            self.last_error = f"malformed adapter reply: {line!r}"
            return None
        try:
            code = int(parts[2])
            probs = tuple(float(p) for p in parts[3:9])
            predicted = WasteClass.from_code(code)
            prediction = Prediction(
                predicted=predicted,
                confidence=probs,
                latency_s=profiles_by_class()[true_class].detection_latency_s,
            )
        except (ValueError, KeyError) as exc:
            self.last_error = f"invalid adapter reply {line!r}: {exc}"
            return None
        self.last_error = None
        return prediction
