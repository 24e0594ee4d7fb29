"""GHZ generation with dispersive atom-cavity interactions and coherent fields.

Atoms are qubits (ground levels |0>, |1>); each cavity is a truncated Fock
mode. The effective interaction is ``H = -lam * a^dag a * 2 P+`` where ``P+``
projects the atom onto (|0>+|1>)/sqrt(2), so its propagator is diagonal in
photon number and is applied exactly rather than by integration.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

from . import qstate
from .qstate import (
    COMPUTATIONAL,
    EngineError,
    ForcedOutcomes,
    ModeDescriptor,
    OutcomeSource,
    StateVector,
    X,
    Z,
    apply,
    discard,
    measure,
    measure_projectors,
    principal_component,
    tensor,
)
from .transcript import Transcript

HALF_PI = math.pi / 2
COHERENT_TAIL_TOL = 1e-12
DISPLACE_LOSS_TOL = 1e-9

_P_PLUS = np.full((2, 2), 0.5, dtype=complex)
_P_MINUS = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)


class TruncationError(EngineError):
    """The Fock cutoff is too small for the requested field amplitude."""


def poisson_tail(beta: float, cutoff: int) -> float:
    """Probability weight of |beta> above photon number `cutoff`."""
    return float(poisson.sf(cutoff, beta * beta))


def cutoff_for(beta: float, tol: float = COHERENT_TAIL_TOL, minimum: int = 8) -> int:
    """Smallest cutoff whose coherent-state tail for `beta` is below `tol`."""
    c = minimum
    while poisson_tail(beta, c) >= tol:
        c += 1
    return c


@dataclass(frozen=True)
class CavityParams:
    alpha: float = 2.0
    cutoff: int = 56
    g: float | None = None
    delta: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be real and non-negative")
        if self.cutoff < 1:
            raise ValueError("cutoff must be positive")
        if self.lam is None and self.g is not None and self.delta is not None:
            object.__setattr__(self, "lam", self.g**2 / self.delta)
        if self.lam is not None and self.lam <= 0:
            raise ValueError("coupling lam = g^2/delta must be positive")

    @property
    def coupling(self) -> float:
        return 1.0 if self.lam is None else self.lam

    @property
    def interaction_time(self) -> float:
        """Time giving the quarter-period phase lam*t = pi/2."""
        return HALF_PI / self.coupling

    @property
    def truncation_error(self) -> float:
        return poisson_tail(2 * self.alpha, self.cutoff)

    def check(self) -> None:
        if self.truncation_error > DISPLACE_LOSS_TOL:
            raise TruncationError(
                f"cutoff {self.cutoff} loses {self.truncation_error:.3g} of |2*alpha> "
                f"(alpha={self.alpha}); need cutoff >= {cutoff_for(2 * self.alpha, DISPLACE_LOSS_TOL)}"
            )


@dataclass(frozen=True)
class TimingParams:
    t: float = 1e-4
    T: float = 1e-3
    T_D: float = 1.0
    budget: float = 0.1

    def __post_init__(self):
        if min(self.t, self.T, self.T_D, self.budget) <= 0:
            raise ValueError("timing parameters must be positive")
        if self.budget > self.T_D:
            raise ValueError(f"flight-time budget {self.budget} exceeds damping time {self.T_D}")


def coherent_state(beta: float, cutoff: int) -> np.ndarray:
    """Fock amplitudes of |beta> (real beta), renormalized after truncation."""
    if poisson_tail(beta, cutoff) >= COHERENT_TAIL_TOL:
        raise TruncationError(f"cutoff {cutoff} too small for coherent amplitude {beta}")
    n = np.arange(cutoff + 1)
    if beta == 0:
        amps = (n == 0).astype(complex)
    else:
        logs = n * math.log(abs(beta)) - 0.5 * gammaln(n + 1) - 0.5 * beta * beta
        amps = np.exp(logs) * np.sign(beta) ** n
    amps = amps.astype(complex)
    return amps / np.linalg.norm(amps)


def coherent_mode(label: str, beta: float, cutoff: int) -> StateVector:
    return StateVector((ModeDescriptor.oscillator(label, cutoff),), coherent_state(beta, cutoff))


@dataclass(frozen=True)
class CatPair:
    """Unnormalized even/odd cats |+> = |a> + |-a>, |-> = |a> - |-a>."""

    plus: np.ndarray = field(repr=False)
    minus: np.ndarray = field(repr=False)

    @property
    def norm_plus(self) -> float:
        return float(np.linalg.norm(self.plus))

    @property
    def norm_minus(self) -> float:
        return float(np.linalg.norm(self.minus))


def cat_pair(alpha: float, cutoff: int) -> CatPair:
    a, b = coherent_state(alpha, cutoff), coherent_state(-alpha, cutoff)
    return CatPair(a + b, a - b)


def _check_pair(state: StateVector, atom: str, cavity: str) -> None:
    if state.mode(atom).kind != "qubit":
        raise EngineError(f"mode {atom!r} is not an atom (qubit)")
    if state.mode(cavity).kind != "oscillator":
        raise EngineError(f"mode {cavity!r} is not a cavity (oscillator)")


def effective_evolution(state: StateVector, atom: str, cavity: str, phase: float = HALF_PI) -> StateVector:
    """Propagator exp(2i*phase * a^dag a * P+) for one atom in one cavity, phase = lam*t."""
    _check_pair(state, atom, cavity)
    axes = [state.axis(atom), state.axis(cavity)]
    d = state.dims[axes[1]]
    psi = qstate.split_targets(state, axes).reshape(2, d, -1)
    kick = np.exp(2j * phase * np.arange(d))[None, :, None]
    out = np.einsum("ab,bnr->anr", _P_MINUS, psi) + np.einsum("ab,bnr->anr", _P_PLUS, psi * kick)
    return StateVector(state.modes, qstate.join_targets(state, axes, out.reshape(2 * d, -1)))


def hamiltonian_matrix(cutoff: int, lam: float = 1.0) -> np.ndarray:
    """Dense H on (atom, cavity) with the atom as the most significant index."""
    bracket = np.ones((2, 2), dtype=complex)
    return -lam * np.kron(bracket, np.diag(np.arange(cutoff + 1)).astype(complex))


@lru_cache(maxsize=32)
def _displacement_matrix(beta: float, dim: int) -> np.ndarray:
    pad = dim + int(4 * beta * beta + 12 * abs(beta)) + 16
    a = np.diag(np.sqrt(np.arange(1, pad)), 1)
    full = expm(beta * a.T - beta * a)
    out = full[:dim, :dim].astype(complex)
    out.setflags(write=False)
    return out


def displace(state: StateVector, cavity: str, beta: float) -> StateVector:
    """Apply D(beta) = exp(beta a^dag - beta a) to one cavity (real beta)."""
    mode = state.mode(cavity)
    if mode.kind != "oscillator":
        raise EngineError(f"mode {cavity!r} is not a cavity")
    axes = [state.axis(cavity)]
    out = _displacement_matrix(float(beta), mode.dim) @ qstate.split_targets(state, axes)
    loss = 1.0 - float(np.vdot(out, out).real)
    if loss > DISPLACE_LOSS_TOL:
        raise TruncationError(f"displacement by {beta} leaks {loss:.3g} of the norm past cutoff {mode.dim - 1}")
    return StateVector.from_amplitudes(state.modes, qstate.join_targets(state, axes, out), normalize=True)


def pcm_projectors(dim: int) -> list[np.ndarray]:
    p0 = np.zeros((dim, dim), dtype=complex)
    p0[0, 0] = 1
    return [p0, np.eye(dim, dtype=complex) - p0]


PCM_OUTCOMES = ("zero", "nonzero")


def pcm_probabilities(state: StateVector, cavity: str) -> tuple[float, float]:
    psi = qstate.split_targets(state, [state.axis(cavity)])
    p0 = float(np.vdot(psi[0], psi[0]).real)
    return p0, 1.0 - p0


def pcm(state: StateVector, cavity: str, source: OutcomeSource) -> tuple[str, float, StateVector]:
    """Photon counting coarse-grained to zero / nonzero photons."""
    mode = state.mode(cavity)
    if mode.kind != "oscillator":
        raise EngineError(f"mode {cavity!r} is not a cavity")
    res = measure_projectors(state, [cavity], pcm_projectors(mode.dim), source, tag=f"pcm:{cavity}")
    return PCM_OUTCOMES[res.outcome], res.probability, res.state


def ghz_target(N: int, sign: int = 1, labels: Sequence[str] | None = None) -> StateVector:
    labels = labels or [f"A{k}" for k in range(1, N + 1)]
    amps = np.zeros(2**N, dtype=complex)
    amps[0], amps[-1] = 1 / math.sqrt(2), sign / math.sqrt(2)
    return StateVector(qstate.qubits(*labels), amps)


class FixupError(EngineError):
    pass


def local_fixup(state: StateVector, N: int, branch_sign: int, flip_mask: Sequence[int] | None = None,
                tol: float | None = 1e-6) -> StateVector:
    """Turn a generated GHZ-type state into (|0..0> + |1..1>)/sqrt(2) with local Paulis.

    `branch_sign` times (-1)^N is the expected relative sign of |1..1>. A
    `flip_mask` first applies X to the flagged qubits, mapping |b> + s|~b> onto
    the standard form. With ``tol=None`` the input is not validated.
    """
    if len(state.modes) != N:
        raise FixupError(f"expected {N} atoms, got {len(state.modes)} modes")
    labels = list(state.labels)
    if flip_mask is not None:
        for label, bit in zip(labels, flip_mask):
            if bit:
                state = apply(state, X, [label])
    rel = branch_sign * (-1) ** N
    if tol is not None:
        f_expected = qstate.fidelity(state, ghz_target(N, rel, labels))
        if f_expected < 1 - tol:
            f_other = qstate.fidelity(state, ghz_target(N, -rel, labels))
            hint = " (matches the opposite sign)" if f_other >= 1 - tol else ""
            raise FixupError(f"state is not the expected GHZ form: fidelity {f_expected:.3g}{hint}")
    if rel < 0:
        state = apply(state, Z, [labels[0]])
    return state


@dataclass
class GHZResult:
    state: StateVector = field(repr=False)
    raw_state: StateVector = field(repr=False)
    branch: str
    branch_sign: int
    fidelity: float
    probability: float
    transcript: Transcript
    zero_count: int | None = None
    atom_outcomes: tuple[int, ...] = ()
    flip_mask: tuple[int, ...] = ()
    predicted_fidelity: float = 1.0
    purity: float = 1.0

    @property
    def parity(self) -> str | None:
        if self.zero_count is None:
            return None
        return "even" if self.zero_count % 2 == 0 else "odd"


def _atom_labels(N: int, prefix: str = "A") -> list[str]:
    return [f"{prefix}{k}" for k in range(1, N + 1)]


def generate_ghz_single_cavity(N: int, params: CavityParams | None = None,
                               source: OutcomeSource | None = None) -> GHZResult:
    """Sequential scheme: N atoms cross one cavity, then displacement and photon counting."""
    params = params or CavityParams()
    if N < 2:
        raise ValueError("need at least 2 atoms")
    params.check()
    source = source or qstate.SeededSampler(0)
    atoms = _atom_labels(N)
    t = Transcript(meta={"method": "single", "N": N, "alpha": params.alpha, "cutoff": params.cutoff})
    state = tensor(StateVector.basis(qstate.qubits(*atoms), [0] * N), coherent_mode("C", params.alpha, params.cutoff))
    for a in atoms:
        state = effective_evolution(state, a, "C", HALF_PI)
        t.quantum_op("lab", "dispersive_pi/2", [a, "C"], duration=params.interaction_time)
    state = displace(state, "C", params.alpha)
    t.quantum_op("lab", "displace", ["C"], beta=float(params.alpha))
    branch, prob, state = pcm(state, "C", source)
    t.measurement("lab", "pcm", ["C"], PCM_OUTCOMES.index(branch), prob)

    raw, weight = principal_component(state, atoms)
    branch_sign = 1 if branch == "nonzero" else -1
    predicted = qstate.fidelity(raw, ghz_target(N, branch_sign * (-1) ** N, atoms))
    fixed = local_fixup(raw, N, branch_sign, tol=None)
    fid = qstate.fidelity(fixed, ghz_target(N, 1, atoms))
    return GHZResult(fixed, raw, branch, branch_sign, fid, prob, t,
                     predicted_fidelity=predicted, purity=weight)


def multi_cavity_size(N: int, cutoff: int) -> int:
    return (2 * (cutoff + 1)) ** N


def generate_ghz_multi_cavity(N: int, params: CavityParams | None = None,
                              source: OutcomeSource | None = None) -> GHZResult:
    """Parallel scheme with N cavities: two interaction rounds, atom readout,
    fresh atoms, displacement and photon counting in every cavity."""
    params = params or CavityParams()
    if N < 2:
        raise ValueError("need at least 2 atoms")
    params.check()
    if multi_cavity_size(N, params.cutoff) > qstate.MAX_AMPLITUDES:
        raise qstate.SizeGuardError(
            f"N={N} cavities at cutoff {params.cutoff} need {multi_cavity_size(N, params.cutoff)} amplitudes"
        )
    source = source or qstate.SeededSampler(0)
    atoms = _atom_labels(N)
    fresh = _atom_labels(N, "F")
    cavities = [f"C{k}" for k in range(1, N + 1)]
    t = Transcript(meta={"method": "multi", "N": N, "alpha": params.alpha, "cutoff": params.cutoff})

    field_state = coherent_mode(cavities[0], params.alpha, params.cutoff)
    for c in cavities[1:]:
        field_state = tensor(field_state, coherent_mode(c, params.alpha, params.cutoff))
    state = tensor(StateVector.basis(qstate.qubits(*atoms), [0] * N), field_state)

    for a, c in zip(atoms, cavities):
        state = effective_evolution(state, a, c, HALF_PI)
        t.quantum_op("lab", "dispersive_pi/2", [a, c], round=1)
    for k, a in enumerate(atoms):
        c = cavities[(k + 1) % N]
        state = effective_evolution(state, a, c, HALF_PI)
        t.quantum_op("lab", "dispersive_pi/2", [a, c], round=2)

    outcomes = []
    for a in atoms:
        res = measure(state, [a], COMPUTATIONAL, source, tag=f"atom:{a}")
        state = res.state
        outcomes.append(res.outcome)
        t.measurement("lab", "atom_z", [a], res.outcome, res.probability)
    state = discard(state, atoms)

    state = tensor(StateVector.basis(qstate.qubits(*fresh), [0] * N), state)
    for a, c in zip(fresh, cavities):
        state = effective_evolution(state, a, c, HALF_PI)
        t.quantum_op("lab", "dispersive_pi/2", [a, c], round=3)
    for c in cavities:
        state = displace(state, c, params.alpha)
        t.quantum_op("lab", "displace", [c], beta=float(params.alpha))

    zero_count, prob = 0, 1.0
    for c in cavities:
        branch, p, state = pcm(state, c, source)
        prob *= p
        zero_count += branch == "zero"
        t.measurement("lab", "pcm", [c], PCM_OUTCOMES.index(branch), p)

    raw, weight = principal_component(state, fresh)
    mask = flip_mask_from_outcomes(outcomes)
    branch_sign = -1 if zero_count % 2 else 1
    predicted = qstate.fidelity(_flipped_ghz(raw.labels, mask, branch_sign * (-1) ** N), raw)
    fixed = local_fixup(raw, N, branch_sign, flip_mask=mask, tol=None)
    fid = qstate.fidelity(fixed, ghz_target(N, 1, fresh))
    return GHZResult(fixed, raw, "even" if zero_count % 2 == 0 else "odd", branch_sign, fid, prob, t,
                     zero_count=zero_count, atom_outcomes=tuple(outcomes), flip_mask=tuple(mask),
                     predicted_fidelity=predicted, purity=weight)


def flip_mask_from_outcomes(outcomes: Sequence[int]) -> list[int]:
    """Cat pattern (1 = odd cat) implied by the atom readout, fixed by the first cavity being even.

    Atom j ends in c_j XOR c_{j+1} after the two rounds, so the pattern follows
    by accumulating the readout bits.
    """
    mask = [0]
    for bit in outcomes[:-1]:
        mask.append(mask[-1] ^ bit)
    if (mask[-1] ^ outcomes[-1]) != mask[0]:
        raise EngineError(f"atom readout {list(outcomes)} has odd parity and cannot occur")
    return mask


def _flipped_ghz(labels: Sequence[str], mask: Sequence[int], sign: int) -> StateVector:
    N = len(labels)
    b = int("".join(map(str, mask)), 2)
    amps = np.zeros(2**N, dtype=complex)
    amps[b] = 1 / math.sqrt(2)
    amps[(2**N - 1) ^ b] = sign / math.sqrt(2)
    return StateVector(qstate.qubits(*labels), amps)


@dataclass(frozen=True)
class FeasibilityReport:
    n_max: int
    budget_too_small: bool
    flight_time: float
    timing: TimingParams


def flight_time(N: int, timing: TimingParams) -> float:
    """Total flight time of N atoms, with the oven 10 mm from the cavity."""
    return 7 * timing.T / 5 + (N - 1) * timing.t


def feasibility_max_atoms(timing: TimingParams | None = None) -> FeasibilityReport:
    timing = timing or TimingParams()
    slack = (timing.budget - 7 * timing.T / 5) / timing.t
    # guard against 985.9999999 style rounding in the quotient
    n_max = math.floor(slack + 1e-9) + 1 if slack >= -1e-9 else 1
    n_max = max(n_max, 1)
    return FeasibilityReport(n_max, n_max < 2, flight_time(n_max, timing), timing)


def multi_cavity_interaction_time(timing: TimingParams | None = None) -> float:
    """Three interaction passes, each lasting one cavity transit."""
    timing = timing or TimingParams()
    return 3 * timing.T


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    p_error: float
    p_error_sim: float
    infidelity: float
    cutoff: int


def pcm_error_sweep(alphas: Iterable[float], N: int = 3) -> list[SweepRow]:
    """Zero-photon probability of |2 alpha> and the resulting zero-branch GHZ infidelity."""
    rows = []
    for alpha in alphas:
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        cutoff = cutoff_for(2 * alpha)
        params = CavityParams(alpha=alpha, cutoff=cutoff)
        big = StateVector((ModeDescriptor.oscillator("C", cutoff),), coherent_state(2 * alpha, cutoff))
        p_sim = pcm_probabilities(big, "C")[0]
        res = generate_ghz_single_cavity(N, params, ForcedOutcomes([0]))
        target = ghz_target(N, -(-1) ** N, res.raw_state.labels)
        rows.append(SweepRow(alpha, math.exp(-4 * alpha * alpha), p_sim,
                             1 - qstate.fidelity(res.raw_state, target), cutoff))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "p_error", "p_error_sim", "infidelity", "cutoff"])
    for r in rows:
        w.writerow([f"{r.alpha:.12g}", f"{r.p_error:.12g}", f"{r.p_error_sim:.12g}", f"{r.infidelity:.12g}", r.cutoff])
    return buf.getvalue()
