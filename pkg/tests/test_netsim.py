import numpy as np
import pytest

from ghznet.netsim import Channel, Transcript, move_event, run_session, verify_transcript
from ghznet.teleport import InfoState, NetworkConfig

INFO = InfoState(np.array([0.6, 0.8]))


def first(t, event_kind, **match):
    for pos, ev in enumerate(t.events):
        if ev.kind == event_kind and all(ev.detail.get(k) == v or ev.detail.get("message", {}).get(k) == v
                                   for k, v in match.items()):
            return pos
    raise LookupError(event_kind)


class TestSessions:
    def test_scheme_a_single_message(self):
        res = run_session("A", NetworkConfig(2, 1), INFO, seed=7)
        assert res.fidelity == pytest.approx(1, abs=1e-10)
        bsm = res.transcript.messages("bsm_result")
        assert len(bsm) == 1 and len(bsm[0]["bits"]) == 2
        assert res.check.ok

    def test_scheme_b_reports_precede_result(self):
        res = run_session("B", NetworkConfig(3, 2), INFO, seed=3)
        t = res.transcript
        assert len(t.messages("hadamard_report")) == 2
        emitted = first(t, "message_sent", kind="bsm_result")
        delivered = [pos for pos, ev in enumerate(t.events)
                     if ev.kind == "message_delivered" and ev.detail["message"]["kind"] == "hadamard_report"]
        assert len(delivered) == 2 and max(delivered) < emitted
        assert res.check.ok

    def test_m2_uses_four_bits(self, rng):
        res = run_session("A", NetworkConfig(2, 2, m=2), InfoState.random(2, rng), seed=1)
        assert len(res.transcript.messages("bsm_result")[0]["bits"]) == 4

    def test_forced_outcomes(self):
        res = run_session("B", NetworkConfig(2, 1), INFO, forced=[1, 2])
        assert res.teleport.parity.r == (1,)
        assert res.teleport.outcome.p == 2
        assert str(res.teleport.correction) == "ZX"

    @pytest.mark.parametrize("scheme, n, m", [("A", 4, 1), ("B", 4, 1), ("B", 3, 2)])
    def test_message_economy(self, rng, scheme, n, m):
        res = run_session(scheme, NetworkConfig(n, 1, m), InfoState.random(m, rng), seed=0)
        msgs = res.transcript.messages()
        kinds = [msg["kind"] for msg in msgs]
        assert kinds.count("bsm_result") == 1
        assert kinds.count("cnot_instruction" if scheme == "A" else "measure_instruction") == n - 1
        report_bits = sum(len(msg["bits"]) for msg in msgs if msg["kind"] == "hadamard_report")
        assert report_bits == (m * (n - 1) if scheme == "B" else 0)

    def test_deterministic(self):
        a = run_session("B", NetworkConfig(3, 1), INFO, seed=42).transcript.to_jsonl()
        b = run_session("B", NetworkConfig(3, 1), INFO, seed=42).transcript.to_jsonl()
        assert a == b

    def test_jsonl_roundtrip(self):
        t = run_session("B", NetworkConfig(3, 3), INFO, seed=5).transcript
        back = Transcript.from_jsonl(t.to_jsonl())
        assert back.to_jsonl() == t.to_jsonl()
        assert verify_transcript(back).ok

    def test_jsonl_field_order(self):
        line = run_session("A", NetworkConfig(1, 1), INFO, seed=0).transcript.to_jsonl().splitlines()[0]
        assert line.startswith('{"seq":0,"kind":')


class TestMutations:
    def test_correction_before_delivery(self):
        t = run_session("A", NetworkConfig(2, 1), INFO, seed=7).transcript
        corr = first(t, "correction_applied")
        delivered = first(t, "message_delivered", kind="bsm_result")
        bad = move_event(t, corr, delivered)
        check = verify_transcript(bad)
        assert not check and "before bsm_result" in str(check)

    def test_report_after_bsm(self):
        t = run_session("B", NetworkConfig(3, 1), INFO, seed=2).transcript
        emitted = first(t, "message_sent", kind="bsm_result")
        report = max(pos for pos, ev in enumerate(t.events)
                     if ev.kind == "message_delivered" and ev.detail["message"]["kind"] == "hadamard_report")
        bad = move_event(t, report, emitted)
        assert not verify_transcript(bad)

    def test_bsm_by_receiver(self):
        t = run_session("A", NetworkConfig(2, 1), INFO, seed=7).transcript
        t.events[first(t, "measurement", name="bsm")].actor = "bob2"
        assert "Bell measurement performed by bob2" in str(verify_transcript(t))

    def test_correction_by_wrong_receiver(self):
        t = run_session("A", NetworkConfig(2, 1), INFO, seed=7).transcript
        t.events[first(t, "correction_applied")].actor = "bob2"
        assert not verify_transcript(t)

    def test_missing_correction(self):
        t = run_session("A", NetworkConfig(2, 1), INFO, seed=7).transcript
        t.events = [ev for ev in t.events if ev.kind != "correction_applied"]
        assert "without a correction" in str(verify_transcript(t))

    def test_wrong_bit_count(self):
        t = run_session("A", NetworkConfig(2, 1), INFO, seed=7).transcript
        t.events[first(t, "message_sent", kind="bsm_result")].detail["message"]["bits"] = "101"
        assert "carries 3 bits" in str(verify_transcript(t))


class TestChannel:
    def test_delay_schedule_keeps_causality(self):
        cfg = NetworkConfig(3, 2)
        res = run_session("B", cfg, INFO, seed=4, delays={0: 3, 2: 5, 3: 2})
        assert res.check.ok
        assert res.fidelity == pytest.approx(1, abs=1e-10)

    def test_delivery_waits_for_delay(self):
        t = Transcript()
        ch = Channel(t, delays={0: 2})
        a = ch.send("alice", "bob1", "cnot_instruction")
        b = ch.send("alice", "bob2", "cnot_instruction")
        ch.wait_for([b])
        assert [msg["msg_id"] for msg in t.messages(delivered=True)] == [b]
        ch.flush()
        assert [msg["msg_id"] for msg in t.messages(delivered=True)] == [b, a]

    def test_payload(self):
        ch = Channel(Transcript())
        mid = ch.send("alice", "bob1", "bsm_result", (1, 0))
        with pytest.raises(RuntimeError, match="before delivery"):
            ch.payload(mid)
        ch.wait_for([mid])
        assert ch.payload(mid) == (1, 0)

    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError):
            Channel(Transcript()).send("alice", "bob1", "gossip")
