"""Deterministic network model: lossy delaying links and adversarial nodes.

Each link owns a seeded PRNG, so identical seeds and event order reproduce
identical delivery traces.  The event queue orders strictly by (time,
insertion order), which removes nondeterminism from simultaneous events.
Adversaries exercise the tunnel's anomaly detection: bit tampering, lag-one
replay, and fingerprint impersonation.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import random
from dataclasses import dataclass, field

from .errors import InvalidPayload
from .tunnel import Envelope


@dataclass(frozen=True)
class TransmitResult:
    delivered: bool
    arrival: float | None = None


class Link:
    """Point-to-point link with capacity, fixed delay, and Bernoulli loss."""

    def __init__(self, src, dst, capacity, base_delay=0.0, loss_prob=0.0, seed=0):
        if capacity <= 0:
            raise ValueError("capacity must be > 0")
        if base_delay < 0:
            raise ValueError("base_delay must be >= 0")
        if not 0.0 <= loss_prob <= 1.0:
            raise ValueError("loss_prob must lie in [0, 1]")
        self.src = src
        self.dst = dst
        self.capacity = capacity
        self.base_delay = base_delay
        self.loss_prob = loss_prob
        self.seed = seed
        self.rng = random.Random(seed)


def transmit(link: Link, payload_bits: float, now: float = 0.0) -> TransmitResult:
    """Attempt a delivery; loss is drawn from the link's seeded PRNG."""
    if payload_bits < 0:
        raise InvalidPayload(f"payload_bits must be >= 0, got {payload_bits}")
    u = link.rng.random()  # always draw, keeping traces aligned across configs
    if u < link.loss_prob:
        return TransmitResult(delivered=False)
    arrival = now + link.base_delay + payload_bits / link.capacity
    return TransmitResult(delivered=True, arrival=arrival)


class AdversaryMode(enum.Enum):
    TAMPER = "tamper"
    REPLAY = "replay"
    IMPERSONATE = "impersonate"


@dataclass
class Adversary:
    """An anomalous node interposed on a link."""

    node_id: str
    mode: AdversaryMode
    seed: int = 0
    rng: random.Random = field(init=False, repr=False)
    last_seen: Envelope | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.rng = random.Random(self.seed)

    @property
    def fingerprint(self) -> bytes:
        # self-made identity; never present in any trusted registry
        return hashlib.sha256(b"adversary:" + self.node_id.encode("utf-8")).digest()


def interpose(adversary: Adversary, envelope: Envelope) -> Envelope:
    """Pass an envelope through the adversary, applying its mode."""
    if adversary.mode is AdversaryMode.TAMPER:
        ct = envelope.ciphertext
        if not ct:
            return envelope
        bit = adversary.rng.randrange(len(ct) * 8)
        tampered = bytearray(ct)
        tampered[bit // 8] ^= 1 << (bit % 8)
        return Envelope(
            sender_fingerprint=envelope.sender_fingerprint,
            seq=envelope.seq,
            ciphertext=bytes(tampered),
            digest=envelope.digest,
        )
    if adversary.mode is AdversaryMode.REPLAY:
        out = adversary.last_seen if adversary.last_seen is not None else envelope
        adversary.last_seen = envelope
        return out
    if adversary.mode is AdversaryMode.IMPERSONATE:
        return Envelope(
            sender_fingerprint=adversary.fingerprint,
            seq=envelope.seq,
            ciphertext=envelope.ciphertext,
            digest=envelope.digest,
        )
    raise ValueError(f"unknown adversary mode {adversary.mode!r}")


class EventQueue:
    """Single-threaded event list ordered by (time, insertion order)."""

    def __init__(self):
        self._heap = []
        self._counter = 0

    def push(self, time: float, item) -> None:
        heapq.heappush(self._heap, (time, self._counter, item))
        self._counter += 1

    def pop(self):
        """Next (time, item) in deterministic order."""
        time, _, item = heapq.heappop(self._heap)
        return time, item

    def __len__(self) -> int:
        return len(self._heap)
