"""Event records shared by the protocol runners."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator

MESSAGE_KINDS = ("bsm_result", "hadamard_report", "cnot_instruction", "measure_instruction")
EVENT_KINDS = ("quantum_op", "measurement", "message_sent", "message_delivered", "correction_applied")


def fmt_float(x: float) -> float:
    """Round to 12 significant digits so serialized reports are stable."""
    return float(f"{x:.12g}")


@dataclass(frozen=True)
class ClassicalMessage:
    msg_id: int
    sender: str
    receiver: str
    kind: str
    bits: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in MESSAGE_KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("message payload must be bits")

    def as_dict(self) -> dict[str, Any]:
        return {
            "msg_id": self.msg_id,
            "from": self.sender,
            "to": self.receiver,
            "kind": self.kind,
            "bits": "".join(map(str, self.bits)),
        }


@dataclass
class Event:
    seq: int
    kind: str
    actor: str
    detail: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"seq": self.seq, "kind": self.kind, "actor": self.actor}
        for key, value in self.detail.items():
            out[key] = fmt_float(value) if isinstance(value, float) else value
        return out


@dataclass
class Transcript:
    """Time-ordered log of quantum operations, measurements and messages."""

    events: list[Event] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def record(self, kind: str, actor: str, **detail) -> Event:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        ev = Event(len(self.events), kind, actor, detail)
        self.events.append(ev)
        return ev

    def quantum_op(self, actor: str, op: str, targets, **extra) -> Event:
        return self.record("quantum_op", actor, op=op, targets=list(targets), **extra)

    def measurement(self, actor: str, name: str, targets, outcome: int, probability: float, **extra) -> Event:
        return self.record("measurement", actor, name=name, targets=list(targets),
                           outcome=int(outcome), probability=float(probability), **extra)

    def sent(self, msg: ClassicalMessage) -> Event:
        return self.record("message_sent", msg.sender, message=msg.as_dict())

    def delivered(self, msg: ClassicalMessage) -> Event:
        return self.record("message_delivered", msg.receiver, message=msg.as_dict())

    def correction(self, actor: str, code: str, targets, msg_id: int | None) -> Event:
        return self.record("correction_applied", actor, code=code, targets=list(targets), msg_id=msg_id)

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def messages(self, kind: str | None = None, delivered: bool = False) -> list[dict[str, Any]]:
        ev_kind = "message_delivered" if delivered else "message_sent"
        msgs = [e.detail["message"] for e in self.events if e.kind == ev_kind]
        return [m for m in msgs if kind is None or m["kind"] == kind]

    def to_jsonl(self) -> str:
        lines = [json.dumps(e.as_dict(), separators=(",", ":")) for e in self.events]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        t = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            seq, kind, actor = d.pop("seq"), d.pop("kind"), d.pop("actor")
            t.events.append(Event(seq, kind, actor, d))
        return t


class Channel:
    """Reliable in-order classical channel with an optional delay schedule.

    Each send is one logical step. A message with delay ``d`` becomes
    deliverable ``d`` steps after it was sent; deliveries happen only when a
    receiver waits for a message, or on `flush`.
    """

    def __init__(self, transcript: Transcript, delays: dict[int, int] | None = None):
        self.transcript = transcript
        self.delays = dict(delays or {})
        self.clock = 0
        self._messages: dict[int, ClassicalMessage] = {}
        self._pending: list[tuple[int, int]] = []  # (due step, msg id)
        self._delivered: set[int] = set()

    def send(self, sender: str, receiver: str, kind: str, bits=()) -> int:
        msg = ClassicalMessage(len(self._messages), sender, receiver, kind, tuple(int(b) for b in bits))
        self._messages[msg.msg_id] = msg
        self.transcript.sent(msg)
        self.clock += 1
        self._pending.append((self.clock + self.delays.get(msg.msg_id, 0), msg.msg_id))
        return msg.msg_id

    def _deliver_next(self) -> None:
        self._pending.sort()
        due, msg_id = self._pending.pop(0)
        self.clock = max(self.clock, due)
        self._delivered.add(msg_id)
        self.transcript.delivered(self._messages[msg_id])

    def wait_for(self, msg_ids) -> None:
        """Advance the clock until every listed message has been delivered."""
        while any(mid not in self._delivered for mid in msg_ids):
            if not self._pending:
                raise RuntimeError(f"waiting on messages {list(msg_ids)} that were never sent")
            self._deliver_next()

    def flush(self) -> None:
        while self._pending:
            self._deliver_next()

    def payload(self, msg_id: int) -> tuple[int, ...]:
        if msg_id not in self._delivered:
            raise RuntimeError(f"message {msg_id} read before delivery")
        return self._messages[msg_id].bits
