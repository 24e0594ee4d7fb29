"""Classical side of a teleportation session: roles, messages and causality checks."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

from .qstate import ForcedOutcomes, OutcomeSource, SeededSampler
from .teleport import InfoState, NetworkConfig, TeleportResult, run_teleport
from .transcript import Channel, ClassicalMessage, Event, Transcript

__all__ = [
    "Channel", "ClassicalMessage", "Event", "Transcript", "TranscriptCheck", "SessionResult",
    "run_session", "verify_transcript", "move_event",
]


@dataclass
class TranscriptCheck:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(self.violations)


@dataclass
class SessionResult:
    fidelity: float
    transcript: Transcript
    check: TranscriptCheck
    teleport: TeleportResult = field(repr=False)


def run_session(scheme: str, cfg: NetworkConfig, info: InfoState, seed=None,
                forced: Sequence[int] | None = None, delays: dict[int, int] | None = None) -> SessionResult:
    """Run one session with either a seeded sampler or a forced outcome list."""
    source: OutcomeSource = ForcedOutcomes(forced) if forced is not None else SeededSampler(seed)
    res = run_teleport(scheme, cfg, info, source, delays=delays)
    res.transcript.meta["seed"] = seed
    return SessionResult(res.fidelity, res.transcript, verify_transcript(res.transcript), res)


def verify_transcript(t: Transcript) -> TranscriptCheck:
    """Check causal ordering and role legality of a session transcript."""
    check = TranscriptCheck()
    bad = check.violations
    meta = t.meta
    m = meta.get("m")
    target = f"bob{meta['i']}" if "i" in meta else None

    sent_at: dict[int, int] = {}
    delivered_at: dict[int, int] = {}
    messages: dict[int, dict] = {}
    for pos, ev in enumerate(t.events):
        if ev.kind == "message_sent":
            msg = ev.detail["message"]
            messages[msg["msg_id"]] = msg
            sent_at[msg["msg_id"]] = pos
            if ev.actor != msg["from"]:
                bad.append(f"event {ev.seq}: {ev.actor} sent a message on behalf of {msg['from']}")
        elif ev.kind == "message_delivered":
            msg = ev.detail["message"]
            mid = msg["msg_id"]
            if mid not in sent_at:
                bad.append(f"event {ev.seq}: message {mid} delivered before it was sent")
            delivered_at.setdefault(mid, pos)
            if ev.actor != msg["to"]:
                bad.append(f"event {ev.seq}: message {mid} delivered to {ev.actor}, addressed to {msg['to']}")

    for mid, msg in messages.items():
        if m is not None:
            want = {"bsm_result": 2 * m, "hadamard_report": m}.get(msg["kind"])
            if want is not None and len(msg["bits"]) != want:
                bad.append(f"message {mid}: {msg['kind']} carries {len(msg['bits'])} bits, expected {want}")
        if msg["kind"] == "bsm_result" and msg["from"] != "alice":
            bad.append(f"message {mid}: bsm_result sent by {msg['from']}")

    reports = [mid for mid, msg in messages.items() if msg["kind"] == "hadamard_report"]
    instructions = [mid for mid, msg in messages.items() if msg["kind"] == "measure_instruction"]
    scheme_b = meta.get("scheme") == "B" or bool(instructions) or bool(reports)
    for mid, msg in messages.items():
        if msg["kind"] != "bsm_result" or not scheme_b:
            continue
        emitted = sent_at[mid]
        early = [r for r in reports if delivered_at.get(r, len(t.events)) > emitted]
        if early:
            bad.append(f"bsm_result {mid} emitted before delivery of hadamard_report(s) {early}")
        if len(reports) < len(instructions):
            bad.append(f"bsm_result {mid}: only {len(reports)} of {len(instructions)} receivers reported")

    for pos, ev in enumerate(t.events):
        if ev.kind == "measurement" and ev.detail.get("name") == "bsm" and ev.actor != "alice":
            bad.append(f"event {ev.seq}: Bell measurement performed by {ev.actor}")
        if ev.kind != "correction_applied":
            continue
        if target is not None and ev.actor != target:
            bad.append(f"event {ev.seq}: correction applied by {ev.actor}, not the target {target}")
        mid = ev.detail.get("msg_id")
        msg = messages.get(mid)
        if msg is None or msg["kind"] != "bsm_result":
            bad.append(f"event {ev.seq}: correction does not reference a bsm_result")
            continue
        if msg["to"] != ev.actor:
            bad.append(f"event {ev.seq}: correction by {ev.actor} decodes a message addressed to {msg['to']}")
        if delivered_at.get(mid, len(t.events)) > pos:
            bad.append(f"event {ev.seq}: correction applied before bsm_result {mid} was delivered")
    if not any(ev.kind == "correction_applied" for ev in t.events) and "scheme" in meta:
        bad.append("session ended without a correction")
    return check


def move_event(t: Transcript, index: int, new_index: int) -> Transcript:
    """Copy of `t` with one event moved to another position (sequence numbers rewritten)."""
    out = copy.deepcopy(t)
    ev = out.events.pop(index)
    out.events.insert(new_index, ev)
    for k, e in enumerate(out.events):
        e.seq = k
    return out
