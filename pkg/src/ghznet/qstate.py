"""Dense state-vector engine for mixed qubit / truncated-oscillator registers.

Amplitudes are stored as a flat complex vector whose index is the big-endian
(C-order) reading of the per-mode basis indices, so the first mode is the most
significant digit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
ORTHO_TOL = 1e-10
IMPOSSIBLE_TOL = 1e-12
MAX_AMPLITUDES = 2**22


class EngineError(ValueError):
    """Raised for malformed states, operators or measurements."""


class ImpossibleOutcomeError(EngineError):
    """A forced measurement outcome has (numerically) zero probability."""


class SizeGuardError(EngineError):
    """A register would exceed the engine's amplitude budget."""


@dataclass(frozen=True)
class ModeDescriptor:
    label: str
    dim: int = 2
    kind: str = "qubit"

    def __post_init__(self):
        if self.kind not in ("qubit", "oscillator"):
            raise EngineError(f"unknown mode kind {self.kind!r}")
        if self.dim < 2:
            raise EngineError(f"mode {self.label!r}: dim must be >= 2, got {self.dim}")
        if self.kind == "qubit" and self.dim != 2:
            raise EngineError(f"qubit mode {self.label!r} must have dim 2")

    @classmethod
    def qubit(cls, label: str) -> "ModeDescriptor":
        return cls(label, 2, "qubit")

    @classmethod
    def oscillator(cls, label: str, cutoff: int) -> "ModeDescriptor":
        return cls(label, cutoff + 1, "oscillator")


def _check_size(dims: Sequence[int]) -> int:
    size = math.prod(dims)
    if size > MAX_AMPLITUDES:
        raise SizeGuardError(f"register of {size} amplitudes exceeds limit {MAX_AMPLITUDES}")
    return size


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state over an ordered tuple of modes."""

    modes: tuple[ModeDescriptor, ...]
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        labels = [m.label for m in modes]
        if len(set(labels)) != len(labels):
            raise EngineError(f"duplicate mode labels in {labels}")
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.size != _check_size(self.dims):
            raise EngineError(f"amplitude length {amps.size} != product of dims {self.dims}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise EngineError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amps", amps / norm)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.dim for m in self.modes)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise EngineError(f"no mode labelled {label!r}") from None

    def mode(self, label: str) -> ModeDescriptor:
        return self.modes[self.axis(label)]

    def tensor_view(self) -> np.ndarray:
        return self.amps.reshape(self.dims)

    def relabel(self, labels: Sequence[str]) -> "StateVector":
        if len(labels) != len(self.modes):
            raise EngineError("relabel needs one label per mode")
        modes = tuple(ModeDescriptor(lab, m.dim, m.kind) for lab, m in zip(labels, self.modes))
        return StateVector(modes, self.amps)

    def permute(self, labels: Sequence[str]) -> "StateVector":
        """Reorder modes so that they appear in the order given by `labels`."""
        if sorted(labels) != sorted(self.labels):
            raise EngineError("permute needs every label exactly once")
        order = [self.axis(lab) for lab in labels]
        amps = np.transpose(self.tensor_view(), order).reshape(-1)
        return StateVector(tuple(self.modes[k] for k in order), amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @classmethod
    def basis(cls, modes: Sequence[ModeDescriptor], values: Sequence[int]) -> "StateVector":
        dims = [m.dim for m in modes]
        amps = np.zeros(_check_size(dims), dtype=complex)
        amps[np.ravel_multi_index(tuple(values), dims)] = 1.0
        return cls(tuple(modes), amps)

    @classmethod
    def from_amplitudes(cls, modes: Sequence[ModeDescriptor], amps, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise EngineError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(tuple(modes), amps)


def qubits(*labels: str) -> tuple[ModeDescriptor, ...]:
    return tuple(ModeDescriptor.qubit(lab) for lab in labels)


@dataclass(frozen=True)
class Operator:
    matrix: np.ndarray = field(repr=False)
    dims: tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        dims = tuple(int(d) for d in self.dims)
        size = math.prod(dims)
        if matrix.shape != (size, size):
            raise EngineError(f"operator {self.name!r}: shape {matrix.shape} does not match dims {dims}")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "dims", dims)

    @property
    def arity(self) -> int:
        return len(self.dims)

    @classmethod
    def gate(cls, matrix, dims: Sequence[int], name: str = "") -> "Operator":
        """Build an operator and verify it is unitary."""
        op = cls(matrix, tuple(dims), name)
        err = np.abs(op.matrix.conj().T @ op.matrix - np.eye(op.matrix.shape[0])).max()
        if err > UNITARY_TOL:
            raise EngineError(f"gate {name!r} is not unitary (deviation {err:.3g})")
        return op

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        m = self.matrix
        return bool(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max() <= tol)

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.dims, self.name + "^dag")

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.dims != other.dims:
            raise EngineError("cannot compose operators on different dims")
        return Operator(self.matrix @ other.matrix, self.dims, f"{self.name}{other.name}")


_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

I = Operator.gate(_I2, (2,), "I")
X = Operator.gate(_X, (2,), "X")
Z = Operator.gate(_Z, (2,), "Z")
H = Operator.gate(_H, (2,), "H")
CNOT = Operator.gate(_CNOT, (2, 2), "CNOT")

# Hadamard basis |A+>, |A->
PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / math.sqrt(2)
COMPUTATIONAL = [np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)]
HADAMARD = [PLUS, MINUS]


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Product state with the modes of `a` followed by those of `b`."""
    clash = set(a.labels) & set(b.labels)
    if clash:
        raise EngineError(f"tensor of states sharing labels {sorted(clash)}")
    _check_size(a.dims + b.dims)
    return StateVector(a.modes + b.modes, np.kron(a.amps, b.amps))


def tensor_all(states: Iterable[StateVector]) -> StateVector:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def _target_axes(state: StateVector, targets: Sequence[str]) -> list[int]:
    if isinstance(targets, str):
        raise EngineError("targets must be a sequence of labels, not a single string")
    axes = [state.axis(t) for t in targets]
    if len(set(axes)) != len(axes):
        raise EngineError(f"repeated target in {list(targets)}")
    return axes


def split_targets(state: StateVector, axes: Sequence[int]) -> np.ndarray:
    """Reshape amplitudes to (target subspace, rest)."""
    t = np.moveaxis(state.tensor_view(), axes, list(range(len(axes))))
    dt = math.prod(state.dims[a] for a in axes)
    return t.reshape(dt, -1)


def join_targets(state: StateVector, axes: Sequence[int], mat: np.ndarray) -> np.ndarray:
    """Inverse of `_split` for a matrix with the same shape."""
    tdims = [state.dims[a] for a in axes]
    rest = [d for k, d in enumerate(state.dims) if k not in axes]
    t = mat.reshape(tdims + rest)
    return np.moveaxis(t, list(range(len(axes))), axes).reshape(-1)


def apply(state: StateVector, op: Operator, targets: Sequence[str]) -> StateVector:
    """Apply `op` to the listed modes (in that order), identity elsewhere."""
    axes = _target_axes(state, targets)
    if len(axes) != op.arity:
        raise EngineError(f"operator {op.name!r} acts on {op.arity} modes, got {len(axes)} targets")
    if tuple(state.dims[a] for a in axes) != op.dims:
        raise EngineError(f"operator {op.name!r} dims {op.dims} do not match targets")
    out = op.matrix @ split_targets(state, axes)
    return StateVector(state.modes, join_targets(state, axes, out))


class OutcomeSource(Protocol):
    forced: bool

    def choose(self, probs: np.ndarray, tag: str = "") -> int: ...


class SeededSampler:
    """Inverse-CDF sampling over ascending outcome indices from one seeded generator."""

    forced = False

    def __init__(self, seed=None):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def choose(self, probs: np.ndarray, tag: str = "") -> int:
        cdf = np.cumsum(probs)
        u = self.rng.random() * cdf[-1]
        idx = int(np.searchsorted(cdf, u, side="right"))
        return min(idx, len(probs) - 1)


class ForcedOutcomes:
    """Replays a fixed sequence of outcome indices, one per measurement."""

    forced = True

    def __init__(self, outcomes: Iterable[int]):
        self.outcomes = [int(o) for o in outcomes]
        self.position = 0

    def choose(self, probs: np.ndarray, tag: str = "") -> int:
        if self.position >= len(self.outcomes):
            raise EngineError(f"forced outcome sequence exhausted at measurement {tag!r}")
        idx = self.outcomes[self.position]
        self.position += 1
        if not 0 <= idx < len(probs):
            raise EngineError(f"forced outcome {idx} out of range for {tag!r}")
        return idx

    @property
    def remaining(self) -> int:
        return len(self.outcomes) - self.position


@dataclass(frozen=True)
class MeasurementResult:
    outcome: int
    probability: float
    state: StateVector
    probabilities: np.ndarray = field(repr=False)


def check_orthonormal(basis: Sequence[np.ndarray], dim: int | None = None) -> np.ndarray:
    b = np.array([np.asarray(v, dtype=complex).reshape(-1) for v in basis])
    if dim is not None and b.shape != (dim, dim):
        raise EngineError(f"basis of {b.shape[0]} vectors of length {b.shape[1]} is not complete on dim {dim}")
    gram = b.conj() @ b.T
    if np.abs(gram - np.eye(len(b))).max() > ORTHO_TOL:
        raise EngineError("measurement basis is not orthonormal")
    return b


def _collapse(state, axes, probs, branches, source, tag) -> MeasurementResult:
    idx = source.choose(probs, tag)
    p = float(probs[idx])
    if p < IMPOSSIBLE_TOL:
        raise ImpossibleOutcomeError(f"outcome {idx} of {tag!r} has probability {p:.3g}")
    collapsed = branches(idx) / math.sqrt(p)
    return MeasurementResult(idx, p, StateVector(state.modes, join_targets(state, axes, collapsed)), probs)


def measure(state: StateVector, targets: Sequence[str], basis: Sequence[np.ndarray],
            source: OutcomeSource, tag: str = "") -> MeasurementResult:
    """Projective measurement of `targets` in a complete orthonormal basis."""
    axes = _target_axes(state, targets)
    dt = math.prod(state.dims[a] for a in axes)
    b = check_orthonormal(basis, dt)
    psi = split_targets(state, axes)
    coeffs = b.conj() @ psi
    probs = np.sum(np.abs(coeffs) ** 2, axis=1)
    return _collapse(state, axes, probs, lambda k: np.outer(b[k], coeffs[k]), source, tag)


def measure_projectors(state: StateVector, targets: Sequence[str], projectors: Sequence[np.ndarray],
                       source: OutcomeSource, tag: str = "") -> MeasurementResult:
    """Coarse-grained projective measurement given complete orthogonal projectors."""
    axes = _target_axes(state, targets)
    dt = math.prod(state.dims[a] for a in axes)
    ps = [np.asarray(p, dtype=complex) for p in projectors]
    if any(p.shape != (dt, dt) for p in ps):
        raise EngineError("projector shape does not match target subspace")
    if np.abs(sum(ps) - np.eye(dt)).max() > ORTHO_TOL:
        raise EngineError("projectors do not resolve the identity")
    psi = split_targets(state, axes)
    parts = [p @ psi for p in ps]
    probs = np.array([np.vdot(q, q).real for q in parts])
    return _collapse(state, axes, probs, lambda k: parts[k], source, tag)


def inner(a: StateVector, b: StateVector) -> complex:
    if a.dims != b.dims:
        raise EngineError(f"layout mismatch: {a.dims} vs {b.dims}")
    return complex(np.vdot(a.amps, b.amps))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 for two states with the same mode dims."""
    return min(1.0, abs(inner(a, b)) ** 2)


def equal_up_to_phase(a: StateVector, b: StateVector, tol: float = 1e-12) -> bool:
    """Elementwise equality after removing the best single global phase."""
    ov = inner(a, b)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return bool(np.abs(a.amps * phase - b.amps).max() <= tol)


def reduced_density(state: StateVector, targets: Sequence[str]) -> np.ndarray:
    axes = _target_axes(state, targets)
    if not axes:
        raise EngineError("reduced state needs at least one target")
    psi = split_targets(state, axes)
    return psi @ psi.conj().T


def reduced_purity(state: StateVector, targets: Sequence[str]) -> float:
    """Tr(rho^2) of the reduced state on a nonempty proper subset of modes."""
    axes = _target_axes(state, targets)
    if not axes or len(axes) == len(state.modes):
        raise EngineError("targets must be a nonempty proper subset of the modes")
    psi = split_targets(state, axes)
    # Tr(rho^2) through the smaller Gram matrix
    g = psi @ psi.conj().T if psi.shape[0] <= psi.shape[1] else psi.conj().T @ psi
    return float(np.sum(np.abs(g) ** 2))


def overlap_with_reduced(state: StateVector, targets: Sequence[str], ref: StateVector) -> float:
    """<ref| rho_targets |ref>, the fidelity of a subsystem with a pure reference."""
    axes = _target_axes(state, targets)
    if tuple(state.dims[a] for a in axes) != ref.dims:
        raise EngineError("reference layout does not match targets")
    psi = split_targets(state, axes)
    v = ref.amps.conj() @ psi
    return min(1.0, float(np.vdot(v, v).real))


def discard(state: StateVector, targets: Sequence[str], tol: float = 1e-10) -> StateVector:
    """Remove modes that are in a product (unentangled) state with the rest."""
    axes = _target_axes(state, targets)
    psi = split_targets(state, axes)
    purity = reduced_purity(state, targets)
    if abs(purity - 1.0) > tol:
        raise EngineError(f"cannot discard entangled modes (purity {purity:.12g})")
    row = psi[int(np.argmax(np.linalg.norm(psi, axis=1)))]
    rest = tuple(m for k, m in enumerate(state.modes) if k not in axes)
    return StateVector.from_amplitudes(rest, row, normalize=True)


def extract(state: StateVector, targets: Sequence[str], tol: float = 1e-10) -> StateVector:
    """Pure state of `targets` when they factor out of the register."""
    rest = [lab for lab in state.labels if lab not in set(targets)]
    if not rest:
        return state.permute(targets)
    return discard(state.permute(list(targets) + rest), rest, tol)


def principal_component(state: StateVector, targets: Sequence[str]) -> tuple[StateVector, float]:
    """Dominant eigenvector of the reduced state on `targets` and its weight.

    The phase is fixed so that the largest-magnitude amplitude is real positive.
    """
    rho = reduced_density(state, targets)
    w, v = np.linalg.eigh(rho)
    vec = v[:, -1]
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[k]) / vec[k])
    modes = tuple(state.mode(t) for t in targets)
    return StateVector.from_amplitudes(modes, vec, normalize=True), float(w[-1])
