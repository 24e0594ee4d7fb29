import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from conftest import ket, random_state
from ghznet.qstate import (
    CNOT,
    COMPUTATIONAL,
    HADAMARD,
    MINUS,
    EngineError,
    ForcedOutcomes,
    ImpossibleOutcomeError,
    ModeDescriptor,
    Operator,
    SeededSampler,
    StateVector,
    X,
    Z,
    apply,
    discard,
    extract,
    fidelity,
    measure,
    measure_projectors,
    qubits,
    reduced_purity,
    tensor,
)
from ghznet.teleport import bell_basis, build_ghz

S2 = 1 / math.sqrt(2)


def plus(label="q"):
    return StateVector(qubits(label), [S2, S2])


class TestModes:
    def test_qubit_must_have_dim_two(self):
        with pytest.raises(EngineError):
            ModeDescriptor("q", 3, "qubit")

    def test_oscillator_dim_is_cutoff_plus_one(self):
        assert ModeDescriptor.oscillator("C", 10).dim == 11

    def test_duplicate_labels_rejected(self):
        with pytest.raises(EngineError, match="duplicate"):
            StateVector(qubits("a", "a"), [1, 0, 0, 0])

    def test_unnormalized_rejected(self):
        with pytest.raises(EngineError, match="norm"):
            StateVector(qubits("a"), [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(EngineError):
            StateVector(qubits("a", "b"), [1, 0])


class TestTensor:
    def test_basis_product(self):
        s = tensor(ket("0", ["a"]), ket("1", ["b"]))
        assert s.labels == ("a", "b")
        np.testing.assert_array_equal(s.amps, [0, 1, 0, 0])

    def test_linearity(self):
        s = tensor(plus("a"), ket("0", ["b"]))
        np.testing.assert_allclose(s.amps, [S2, 0, S2, 0], atol=1e-15)

    def test_info_times_ghz3(self):
        # |I> (x) (|000>+|111>)/sqrt2 expanded by hand
        info = StateVector(qubits("I"), [0.6, 0.8])
        s = tensor(info, build_ghz(3, ["A", "B1", "B2"]))
        expected = np.zeros(16)
        expected[0b0000] = expected[0b0111] = 0.6 * S2
        expected[0b1000] = expected[0b1111] = 0.8 * S2
        np.testing.assert_allclose(s.amps, expected, atol=1e-15)

    def test_duplicate_label_rejected(self):
        with pytest.raises(EngineError):
            tensor(ket("0", ["a"]), ket("1", ["a"]))


class TestApply:
    def test_x_flips(self):
        np.testing.assert_array_equal(apply(ket("0", ["a"]), X, ["a"]).amps, [0, 1])

    def test_cnot_makes_bell(self):
        s = apply(tensor(plus("A"), ket("0", ["B"])), CNOT, ["A", "B"])
        np.testing.assert_allclose(s.amps, [S2, 0, 0, S2], atol=1e-15)

    def test_target_order_matters(self):
        s = apply(ket("01", ["a", "b"]), CNOT, ["b", "a"])
        np.testing.assert_array_equal(s.amps, [0, 0, 0, 1])

    def test_zx_restores_payload(self):
        a0, a1 = 0.6, 0.8
        s = StateVector(qubits("B"), [a1, -a0])
        out = apply(apply(s, X, ["B"]), Z, ["B"])
        assert fidelity(out, StateVector(qubits("B"), [a0, a1])) == pytest.approx(1, abs=1e-15)

    def test_arity_mismatch(self):
        with pytest.raises(EngineError):
            apply(ket("00", ["a", "b"]), CNOT, ["a"])

    def test_dim_mismatch(self):
        s = StateVector((ModeDescriptor.oscillator("C", 2),), [1, 0, 0])
        with pytest.raises(EngineError):
            apply(s, X, ["C"])

    def test_gate_rejects_non_unitary(self):
        with pytest.raises(EngineError, match="unitary"):
            Operator.gate(np.array([[1, 1], [0, 1]]), (2,))


class TestMeasure:
    def test_plus_in_z_basis(self):
        res = measure(plus("q"), ["q"], COMPUTATIONAL, ForcedOutcomes([1]))
        np.testing.assert_allclose(res.probabilities, [0.5, 0.5])
        assert res.probability == pytest.approx(0.5)
        np.testing.assert_allclose(res.state.amps, [0, 1])

    def test_bell_measurement_of_teleport_state_is_uniform(self):
        info = StateVector(qubits("I"), [0.6, 0.8])
        s = tensor(info, build_ghz(2, ["A", "B"]))
        res = measure(s, ["I", "A"], bell_basis(), ForcedOutcomes([0]))
        np.testing.assert_allclose(res.probabilities, [0.25] * 4, atol=1e-14)

    def test_minus_in_hadamard_basis(self):
        s = StateVector(qubits("q"), MINUS)
        res = measure(s, ["q"], HADAMARD, SeededSampler(3))
        assert res.outcome == 1
        assert res.probability == pytest.approx(1)

    def test_forced_impossible_rejected(self):
        with pytest.raises(ImpossibleOutcomeError):
            measure(ket("0", ["q"]), ["q"], COMPUTATIONAL, ForcedOutcomes([1]))

    def test_non_orthonormal_basis_rejected(self):
        with pytest.raises(EngineError, match="orthonormal"):
            measure(plus(), ["q"], [np.array([1, 0]), np.array([S2, S2])], ForcedOutcomes([0]))

    def test_incomplete_basis_rejected(self):
        with pytest.raises(EngineError, match="complete"):
            measure(plus(), ["q"], [np.array([1, 0])], ForcedOutcomes([0]))

    def test_projectors(self):
        p0 = np.diag([1, 0]).astype(complex)
        res = measure_projectors(plus(), ["q"], [p0, np.eye(2) - p0], ForcedOutcomes([0]))
        assert res.probability == pytest.approx(0.5)

    def test_seeded_sampler_reproducible(self):
        a, b = SeededSampler(11), SeededSampler(11)
        probs = np.array([0.25] * 4)
        assert [a.choose(probs) for _ in range(50)] == [b.choose(probs) for _ in range(50)]

    def test_inverse_cdf_order(self):
        class StubRng:
            def __init__(self, u):
                self.u = u

            def random(self):
                return self.u

        def pick(u):
            sampler = SeededSampler(0)
            sampler.rng = StubRng(u)
            return sampler.choose(np.array([0.1, 0.0, 0.6, 0.3]))

        assert [pick(u) for u in (0.05, 0.1, 0.69, 0.71)] == [0, 2, 2, 3]

    def test_sampled_frequencies(self):
        s = SeededSampler(5)
        counts = np.bincount([s.choose(np.array([0.2, 0.8])) for _ in range(20000)], minlength=2)
        assert counts[0] / 20000 == pytest.approx(0.2, abs=0.01)


class TestFidelityAndPurity:
    def test_identical(self):
        assert fidelity(ket("0"), ket("0")) == 1

    def test_orthogonal(self):
        assert fidelity(ket("0"), ket("1")) == 0

    def test_coherent_overlap(self):
        from ghznet.cavity import coherent_mode

        a, b = coherent_mode("C", 2, 40), coherent_mode("C", -2, 40)
        assert fidelity(a, b) == pytest.approx(math.exp(-16), rel=1e-9)

    def test_layout_mismatch(self):
        with pytest.raises(EngineError):
            fidelity(ket("0"), ket("00"))

    def test_product_purity(self):
        assert reduced_purity(ket("01"), ["q0"]) == pytest.approx(1)

    def test_bell_purity(self):
        assert reduced_purity(build_ghz(2, ["a", "b"]), ["a"]) == pytest.approx(0.5)

    def test_purity_rejects_full_or_empty(self):
        with pytest.raises(EngineError):
            reduced_purity(ket("01"), [])
        with pytest.raises(EngineError):
            reduced_purity(ket("01"), ["q0", "q1"])

    def test_discard_and_extract(self, rng):
        a = random_state(["a"], rng)
        b = random_state(["b", "c"], rng)
        s = tensor(a, b)
        assert fidelity(discard(s, ["a"]), b) == pytest.approx(1, abs=1e-12)
        assert fidelity(extract(s, ["a"]), a) == pytest.approx(1, abs=1e-12)
        with pytest.raises(EngineError):
            discard(build_ghz(2, ["a", "b"]), ["a"])


unitaries = st.integers(0, 2**31 - 1)


@settings(max_examples=40, deadline=None)
@given(seed=unitaries, n=st.integers(1, 4))
def test_norm_preserved_under_unitaries(seed, n):
    rng = np.random.default_rng(seed)
    labels = [f"q{k}" for k in range(n)]
    s = random_state(labels, rng)
    k = int(rng.integers(1, n + 1))
    targets = list(rng.permutation(labels)[:k])
    u = Operator.gate(unitary_group.rvs(2**k, random_state=seed), (2,) * k)
    assert abs(apply(s, u, targets).norm() - 1) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=unitaries, n=st.integers(1, 4))
def test_measurement_complete_and_idempotent(seed, n):
    rng = np.random.default_rng(seed)
    labels = [f"q{k}" for k in range(n)]
    s = random_state(labels, rng)
    k = int(rng.integers(1, n + 1))
    targets = labels[:k]
    basis = list(unitary_group.rvs(2**k, random_state=seed + 1).T) if k > 0 else None
    res = measure(s, targets, basis, SeededSampler(seed))
    assert abs(res.probabilities.sum() - 1) <= 1e-10
    again = measure(res.state, targets, basis, SeededSampler(seed + 7))
    assert again.outcome == res.outcome
    assert abs(again.probability - 1) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=unitaries)
def test_tensor_apply_commute(seed):
    rng = np.random.default_rng(seed)
    a = random_state(["a0", "a1"], rng)
    b = random_state(["b0"], rng, dims=[3])
    u = Operator.gate(unitary_group.rvs(4, random_state=seed), (2, 2))
    lhs = apply(tensor(a, b), u, ["a0", "a1"])
    rhs = tensor(apply(a, u, ["a0", "a1"]), b)
    assert np.abs(lhs.amps - rhs.amps).max() <= 1e-12
