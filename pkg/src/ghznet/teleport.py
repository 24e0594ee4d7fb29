"""Teleportation from Alice to a chosen receiver over a shared GHZ channel.

Two ways of isolating the target receiver are supported:

* scheme ``"A"``: every other receiver applies C-NOTs controlled by Alice's
  channel qubits, which disentangles them into ``|0...0>``;
* scheme ``"B"``: every other receiver measures in the Hadamard basis and
  reports back; an odd number of ``|A->`` results on payload qubit ``k``
  leaves a ``Z`` on that qubit of the target's share, which Alice folds into
  the correction message.

Register layout is party-major: ``I1..Im, A1..Am, B1_1..B1_m, ..., Bn_1..Bn_m``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np

from . import qstate
from .qstate import (
    CNOT,
    HADAMARD,
    EngineError,
    ModeDescriptor,
    OutcomeSource,
    SizeGuardError,
    StateVector,
    X,
    Z,
    apply,
    measure,
    overlap_with_reduced,
    tensor,
)
from .transcript import Channel, Transcript

MAX_QUBITS = 22

PAULI_CODES = ("I", "Z", "X", "ZX")
_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
}
# operators rotating Alice's half of the maximally entangled reference state
_BASIS_OPS = (
    _PAULI_MATS["I"],
    _PAULI_MATS["Z"],
    _PAULI_MATS["X"],
    _PAULI_MATS["X"] @ _PAULI_MATS["Z"],
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    n: int
    i: int
    m: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"need at least one receiver, got n={self.n}")
        if not 1 <= self.i <= self.n:
            raise ConfigError(f"target receiver i={self.i} outside 1..{self.n}")
        if self.m < 1:
            raise ConfigError(f"payload size m must be >= 1, got {self.m}")
        if self.total_qubits > MAX_QUBITS:
            raise SizeGuardError(f"{self.total_qubits} qubits exceeds the {MAX_QUBITS}-qubit guard")

    @property
    def total_qubits(self) -> int:
        return self.m * (self.n + 2)

    @property
    def others(self) -> list[int]:
        return [j for j in range(1, self.n + 1) if j != self.i]

    def info_labels(self) -> list[str]:
        return [f"I{k}" for k in range(1, self.m + 1)]

    def alice_labels(self) -> list[str]:
        return [f"A{k}" for k in range(1, self.m + 1)]

    def bob_labels(self, j: int) -> list[str]:
        return [f"B{j}_{k}" for k in range(1, self.m + 1)]

    def channel_labels(self) -> list[str]:
        labels = self.alice_labels()
        for j in range(1, self.n + 1):
            labels += self.bob_labels(j)
        return labels

    def labels(self) -> list[str]:
        return self.info_labels() + self.channel_labels()


@dataclass(frozen=True)
class InfoState:
    """m-qubit payload a_0|0..0> + ... + a_M|1..1>."""

    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        m = int(round(math.log2(amps.size))) if amps.size else 0
        if m < 1 or 2**m != amps.size:
            raise ConfigError(f"payload length {amps.size} is not 2^m with m >= 1")
        if abs(np.linalg.norm(amps) - 1) > 1e-12:
            raise ConfigError("payload amplitudes are not normalized")
        object.__setattr__(self, "amps", amps)

    @property
    def m(self) -> int:
        return int(round(math.log2(self.amps.size)))

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "InfoState":
        v = rng.normal(size=2**m) + 1j * rng.normal(size=2**m)
        return cls(v / np.linalg.norm(v))

    def as_state(self, labels: Sequence[str]) -> StateVector:
        return StateVector(qstate.qubits(*labels), self.amps)


@dataclass(frozen=True)
class GenBellIndex:
    m: int
    p: int

    def __post_init__(self):
        if not 0 <= self.p < 4**self.m:
            raise ConfigError(f"Bell index {self.p} outside [0, {4 ** self.m})")

    @property
    def digits(self) -> tuple[int, ...]:
        return tuple((self.p >> (2 * (self.m - k))) & 3 for k in range(1, self.m + 1))

    @classmethod
    def from_digits(cls, digits: Sequence[int]) -> "GenBellIndex":
        p = 0
        for d in digits:
            if d not in (0, 1, 2, 3):
                raise ConfigError(f"quaternary digit {d} out of range")
            p = 4 * p + d
        return cls(len(digits), p)


@dataclass(frozen=True)
class ParityRecord:
    r: tuple[int, ...]

    @property
    def odd(self) -> tuple[bool, ...]:
        return tuple(bool(rk % 2) for rk in self.r)


@dataclass(frozen=True)
class CorrectionOp:
    """Per-qubit Pauli codes; Bob applies Z (if flagged) and then X (if flagged)."""

    codes: tuple[str, ...]

    def __post_init__(self):
        for c in self.codes:
            if c not in PAULI_CODES:
                raise ConfigError(f"unknown Pauli code {c!r}")

    def bits(self) -> tuple[int, ...]:
        out: list[int] = []
        for c in self.codes:
            d = PAULI_CODES.index(c)
            out += [d >> 1, d & 1]
        return tuple(out)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "CorrectionOp":
        if len(bits) % 2:
            raise ConfigError("correction message must carry an even number of bits")
        return cls(tuple(PAULI_CODES[2 * bits[k] + bits[k + 1]] for k in range(0, len(bits), 2)))

    def __str__(self) -> str:
        return ",".join(self.codes)


def build_ghz(parties: int, labels: Sequence[str] | None = None) -> StateVector:
    if parties < 2:
        raise ConfigError(f"a GHZ state needs at least 2 parties, got {parties}")
    return build_channel_multi(1, parties, labels)


def build_channel_multi(m: int, parties: int, labels: Sequence[str] | None = None) -> StateVector:
    """Equal superposition of every m-bit string held identically by all parties.

    Storage is party-major: party ``q`` owns qubits ``q*m .. q*m+m-1``.
    """
    if m < 1 or parties < 2:
        raise ConfigError("need m >= 1 and at least 2 parties")
    if m * parties > MAX_QUBITS:
        raise SizeGuardError(f"{m * parties} qubits exceeds the {MAX_QUBITS}-qubit guard")
    if labels is None:
        labels = [f"P{q}_{k}" for q in range(parties) for k in range(1, m + 1)]
    amps = np.zeros(2 ** (m * parties), dtype=complex)
    stride = sum(2 ** (m * q) for q in range(parties))
    amps[np.arange(2**m) * stride] = 2 ** (-m / 2)
    return StateVector(qstate.qubits(*labels), amps)


def channel_permutation(m: int, parties: int) -> list[int]:
    """Qubit order turning party-major storage into m consecutive GHZ blocks.

    Entry ``t`` of the result is the party-major position of the t-th qubit in
    the interleaved view (GHZ block k holds qubit k of every party).
    """
    return [q * m + k for k in range(m) for q in range(parties)]


def bell_basis() -> list[np.ndarray]:
    s = 1 / math.sqrt(2)
    return [
        np.array([s, 0, 0, s], dtype=complex),
        np.array([s, 0, 0, -s], dtype=complex),
        np.array([0, s, s, 0], dtype=complex),
        np.array([0, s, -s, 0], dtype=complex),
    ]


@lru_cache(maxsize=8)
def _gen_bell_matrix(m: int) -> np.ndarray:
    if m < 1:
        raise ConfigError("m must be >= 1")
    if 4 * m > MAX_QUBITS:
        raise SizeGuardError(f"generalized Bell basis for m={m} is too large")
    d = 2**m
    ref = np.zeros(d * d, dtype=complex)
    ref[np.arange(d) * (d + 1)] = 2 ** (-m / 2)
    rows = []
    for p in range(4**m):
        digits = GenBellIndex(m, p).digits
        op = reduce(np.kron, [_BASIS_OPS[q] for q in digits], np.eye(1))
        rows.append(np.kron(np.eye(d), op) @ ref)
    out = np.array(rows)
    out.setflags(write=False)
    return out


def generalized_bell_basis(m: int) -> list[np.ndarray]:
    """4^m states over (I1..Im, A1..Am), indexed by the quaternary digits of p."""
    return list(_gen_bell_matrix(m))


def pauli_operator(codes: Sequence[str]) -> np.ndarray:
    """Tensor product of X^x Z^z over the qubits (Z acts first, as in the basis operators)."""
    mats = []
    for c in codes:
        mat = np.eye(2, dtype=complex)
        if "Z" in c:
            mat = _PAULI_MATS["Z"] @ mat
        if "X" in c:
            mat = _PAULI_MATS["X"] @ mat
        mats.append(mat)
    return reduce(np.kron, mats, np.eye(1))


def bob_operator(p: GenBellIndex, parity: ParityRecord | None = None) -> np.ndarray:
    """U_p (or U'_p with the parity phases) such that Bob holds U|I> after outcome p."""
    u = pauli_operator([PAULI_CODES[d] for d in p.digits])
    if parity is not None:
        zs = reduce(np.kron, [_PAULI_MATS["Z"] if odd else _PAULI_MATS["I"] for odd in parity.odd], np.eye(1))
        u = zs @ u
    return u


def initial_state(cfg: NetworkConfig, info: InfoState, channel: StateVector | None = None) -> StateVector:
    if info.m != cfg.m:
        raise ConfigError(f"payload has m={info.m} but config has m={cfg.m}")
    if channel is None:
        channel = build_channel_multi(cfg.m, cfg.n + 1)
    if channel.dims != (2,) * (cfg.m * (cfg.n + 1)):
        raise ConfigError("channel does not match the network configuration")
    channel = channel.relabel(cfg.channel_labels())
    return tensor(info.as_state(cfg.info_labels()), channel)


def scheme_a_disentangle(state: StateVector, cfg: NetworkConfig, transcript: Transcript | None = None,
                         receivers: Sequence[int] | None = None) -> StateVector:
    """C-NOT from A_k onto B^j_k for every non-target receiver j and qubit k."""
    for j in _receivers(cfg, receivers):
        for a, b in zip(cfg.alice_labels(), cfg.bob_labels(j)):
            state = apply(state, CNOT, [a, b])
            if transcript is not None:
                transcript.quantum_op(f"bob{j}", "CNOT", [a, b])
    return state


def scheme_b_measure(state: StateVector, cfg: NetworkConfig, source: OutcomeSource,
                     transcript: Transcript | None = None,
                     receivers: Sequence[int] | None = None) -> tuple[ParityRecord, StateVector, dict[int, list[int]]]:
    """Hadamard-basis measurement of every non-target receiver qubit.

    Returns the parity counts, the collapsed state and each receiver's outcome
    bits (1 for |A->), in receiver order.
    """
    r = [0] * cfg.m
    reports: dict[int, list[int]] = {}
    for j in _receivers(cfg, receivers):
        bits = []
        for k, label in enumerate(cfg.bob_labels(j)):
            res = measure(state, [label], HADAMARD, source, tag=f"hadamard:{label}")
            state = res.state
            bits.append(res.outcome)
            r[k] += res.outcome
            if transcript is not None:
                transcript.measurement(f"bob{j}", "hadamard", [label], res.outcome, res.probability)
        reports[j] = bits
    return ParityRecord(tuple(r)), state, reports


def _receivers(cfg: NetworkConfig, receivers: Sequence[int] | None) -> list[int]:
    if receivers is None:
        return cfg.others
    bad = [j for j in receivers if j not in cfg.others]
    if bad:
        raise ConfigError(f"receivers {bad} are not non-target receivers")
    return list(receivers)


def alice_bsm(state: StateVector, cfg: NetworkConfig, source: OutcomeSource,
              transcript: Transcript | None = None) -> tuple[GenBellIndex, StateVector, float]:
    targets = cfg.info_labels() + cfg.alice_labels()
    res = measure(state, targets, _gen_bell_matrix(cfg.m), source, tag="bsm")
    if transcript is not None:
        transcript.measurement("alice", "bsm", targets, res.outcome, res.probability)
    return GenBellIndex(cfg.m, res.outcome), res.state, res.probability


def correction_for(scheme: str, p: GenBellIndex, parity: ParityRecord | None = None) -> CorrectionOp:
    scheme = scheme.upper()
    digits = list(p.digits)
    if scheme == "A":
        pass
    elif scheme == "B":
        if parity is None:
            raise ConfigError("scheme B correction needs the receivers' parity record")
        if len(parity.r) != p.m:
            raise ConfigError("parity record length does not match payload size")
        digits = [d ^ 1 if odd else d for d, odd in zip(digits, parity.odd)]
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    return CorrectionOp(tuple(PAULI_CODES[d] for d in digits))


def apply_correction(state: StateVector, labels: Sequence[str], corr: CorrectionOp) -> StateVector:
    for label, code in zip(labels, corr.codes):
        if "Z" in code:
            state = apply(state, Z, [label])
        if "X" in code:
            state = apply(state, X, [label])
    return state


def correction_table(m: int = 1) -> list[dict]:
    """Every (scheme, outcome, parity) -> code/bits row, JSON-serializable."""
    rows = []
    for p in range(4**m):
        idx = GenBellIndex(m, p)
        corr = correction_for("A", idx)
        rows.append({"scheme": "A", "p": p, "parity": None, "code": str(corr),
                     "bits": "".join(map(str, corr.bits()))})
    for pattern in itertools.product((0, 1), repeat=m):
        for p in range(4**m):
            corr = correction_for("B", GenBellIndex(m, p), ParityRecord(pattern))
            rows.append({"scheme": "B", "p": p, "parity": "".join("odd" if b else "even" for b in pattern)
                         if m == 1 else ["odd" if b else "even" for b in pattern],
                         "code": str(corr), "bits": "".join(map(str, corr.bits()))})
    return rows


@dataclass
class TeleportResult:
    fidelity: float
    transcript: Transcript
    outcome: GenBellIndex
    parity: ParityRecord | None
    correction: CorrectionOp
    state: StateVector = field(repr=False)


def run_teleport(scheme: str, cfg: NetworkConfig, info: InfoState, source: OutcomeSource,
                 channel: StateVector | None = None, delays: dict[int, int] | None = None) -> TeleportResult:
    """Full session: channel, isolation step, BSM, classical message, correction.

    `delays` maps message ids to extra delivery steps on the classical channel.
    """
    scheme = scheme.upper()
    if scheme not in ("A", "B"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    t = Transcript(meta={"scheme": scheme, "n": cfg.n, "i": cfg.i, "m": cfg.m})
    net = Channel(t, delays)
    state = initial_state(cfg, info, channel)
    target = f"bob{cfg.i}"

    kind = "cnot_instruction" if scheme == "A" else "measure_instruction"
    instructions = {j: net.send("alice", f"bob{j}", kind) for j in cfg.others}

    parity = None
    if scheme == "A":
        for j in cfg.others:
            net.wait_for([instructions[j]])
            state = scheme_a_disentangle(state, cfg, t, receivers=[j])
    else:
        reports = []
        r = [0] * cfg.m
        for j in cfg.others:
            net.wait_for([instructions[j]])
            rec, state, bits = scheme_b_measure(state, cfg, source, t, receivers=[j])
            r = [a + b for a, b in zip(r, rec.r)]
            reports.append(net.send(f"bob{j}", "alice", "hadamard_report", bits[j]))
        net.wait_for(reports)
        parity = ParityRecord(tuple(r))

    outcome, state, _ = alice_bsm(state, cfg, source, t)
    # Alice folds the parity into the message; Bob decodes it as a plain result
    corr_sent = correction_for(scheme, outcome, parity)
    msg = net.send("alice", target, "bsm_result", corr_sent.bits())
    net.wait_for([msg])
    received = CorrectionOp.from_bits(net.payload(msg))
    state = apply_correction(state, cfg.bob_labels(cfg.i), received)
    t.correction(target, str(received), cfg.bob_labels(cfg.i), msg)
    net.flush()

    fid = overlap_with_reduced(state, cfg.bob_labels(cfg.i), info.as_state(cfg.bob_labels(cfg.i)))
    t.meta["fidelity"] = fid
    return TeleportResult(fid, t, outcome, parity, received, state)


def expected_bob_state(info: InfoState, p: GenBellIndex, parity: ParityRecord | None = None) -> np.ndarray:
    """Bob's conditional payload before correction, as predicted by the decomposition."""
    return bob_operator(p, parity) @ info.amps


def decomposition(cfg: NetworkConfig, info: InfoState, parity: ParityRecord | None = None,
                  hadamard_bits: dict[int, Sequence[int]] | None = None) -> StateVector:
    """Independent construction of the post-isolation state as a sum over Bell outcomes.

    Scheme A (``parity is None``): 2^-m sum_p |E_p> (x) U_p|I> (x) |0...0>.
    Scheme B: U'_p carries Z on every odd-parity qubit, and the measured
    receivers sit in the |A+->/|A-> states listed in `hadamard_bits`.
    """
    m = cfg.m
    basis = _gen_bell_matrix(m)
    d = 2**m
    alice_part = np.zeros(4**m * d, dtype=complex)
    for p in range(4**m):
        idx = GenBellIndex(m, p)
        alice_part += np.kron(basis[p], bob_operator(idx, parity) @ info.amps)
    alice_part /= 2**m
    # order: I, A, B_i, then the other receivers
    pieces = [alice_part]
    labels = cfg.info_labels() + cfg.alice_labels() + cfg.bob_labels(cfg.i)
    for j in cfg.others:
        for k, label in enumerate(cfg.bob_labels(j)):
            if parity is None:
                pieces.append(np.array([1, 0], dtype=complex))
            else:
                pieces.append(HADAMARD[hadamard_bits[j][k]])
            labels.append(label)
    amps = reduce(np.kron, pieces)
    return StateVector(qstate.qubits(*labels), amps).permute(cfg.labels())


__all__ = [
    "ConfigError", "NetworkConfig", "InfoState", "GenBellIndex", "ParityRecord", "CorrectionOp",
    "build_ghz", "build_channel_multi", "channel_permutation", "bell_basis", "generalized_bell_basis",
    "scheme_a_disentangle", "scheme_b_measure", "alice_bsm", "correction_for", "apply_correction",
    "correction_table", "run_teleport", "TeleportResult", "expected_bob_state", "decomposition",
    "bob_operator", "pauli_operator", "initial_state", "EngineError", "ModeDescriptor",
]
