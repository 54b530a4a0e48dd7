import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgen.core import QuantumGenerator, basis_state, exact_distribution, unitarity_residual
from qgen.errors import BadWires, EnumerationTooLarge, QGenError
from qgen.gates import (
    K_MATRIX,
    S_MATRIX,
    DiscretizedState,
    Gate,
    GateCircuit,
    NetEntry,
    all_partitions,
    circuit_unitary,
    distinct_unitaries,
    enumerate_net,
    gate_unitary,
    max_exponent,
    read_manifest,
    state_distance_bound,
    state_grid,
    write_manifest,
)

E1 = DiscretizedState((0, None), 0.1)


def permutation_oracle(kind, wires, width):
    """Classical action on basis states, written from the gate definitions."""
    dim = 1 << width
    u = np.zeros((dim, dim))
    for col in range(dim):
        bits = [(col >> (width - 1 - w)) & 1 for w in range(width)]
        if kind == "CNOT":
            a, b = wires
            bits[b] ^= bits[a]
        else:
            a, b, c = wires
            bits[c] ^= bits[a] & bits[b]
        row = int("".join(map(str, bits)), 2)
        u[row, col] = 1
    return u


class TestGateUnitary:
    def test_identity(self):
        np.testing.assert_array_equal(gate_unitary(Gate("I", (0,)), 1), np.eye(2))

    def test_s_gate(self):
        np.testing.assert_allclose(
            gate_unitary(Gate("S", (0,)), 1), (1 + 1j) / 2 * np.array([[1, 1], [1, -1]])
        )

    def test_k_gate(self):
        np.testing.assert_allclose(gate_unitary(Gate("K", (0,)), 1), np.diag([1, 1j]))

    def test_cnot_swaps_10_and_11(self):
        expected = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        np.testing.assert_array_equal(gate_unitary(Gate("CNOT", (0, 1)), 2), expected)

    @pytest.mark.parametrize("wires", list(itertools.permutations(range(3), 2)))
    def test_cnot_embeddings(self, wires):
        np.testing.assert_array_equal(gate_unitary(Gate("CNOT", wires), 3), permutation_oracle("CNOT", wires, 3))

    @pytest.mark.parametrize("wires", list(itertools.permutations(range(3), 3)))
    def test_toffoli(self, wires):
        np.testing.assert_array_equal(
            gate_unitary(Gate("TOFFOLI", wires), 3), permutation_oracle("TOFFOLI", wires, 3)
        )

    def test_single_qubit_embedding_on_second_wire(self):
        np.testing.assert_allclose(gate_unitary(Gate("K", (1,)), 2), np.kron(np.eye(2), K_MATRIX))

    @pytest.mark.parametrize(
        "kind, wires, width",
        [("S", (1,), 1), ("CNOT", (0, 0), 2), ("CNOT", (0,), 2), ("TOFFOLI", (0, 1, 2), 2), ("H", (0,), 1)],
    )
    def test_bad_wires(self, kind, wires, width):
        with pytest.raises(BadWires):
            gate_unitary(Gate(kind, wires), width)


class TestCircuit:
    def test_empty(self):
        np.testing.assert_array_equal(circuit_unitary(GateCircuit(2)), np.eye(4))

    def test_s_squared(self):
        u = circuit_unitary(GateCircuit(1, (Gate("S", (0,)),) * 2))
        np.testing.assert_allclose(u, 1j * np.eye(2), atol=1e-15)

    def test_k_squared(self):
        u = circuit_unitary(GateCircuit(1, (Gate("K", (0,)),) * 2))
        np.testing.assert_allclose(u, np.diag([1, -1]), atol=1e-15)

    def test_k_fourth_power(self):
        u = circuit_unitary(GateCircuit(1, (Gate("K", (0,)),) * 4))
        np.testing.assert_allclose(u, np.eye(2), atol=1e-15)

    def test_order_is_left_to_right(self):
        c = GateCircuit(1, (Gate("S", (0,)), Gate("K", (0,))))
        np.testing.assert_allclose(circuit_unitary(c), K_MATRIX @ S_MATRIX)

    def test_round_trip_text(self):
        c = GateCircuit(3, (Gate("S", (2,)), Gate("CNOT", (0, 1)), Gate("TOFFOLI", (2, 0, 1))))
        assert GateCircuit.parse(str(c), 3) == c
        assert GateCircuit.parse("-", 2) == GateCircuit(2)


@settings(max_examples=100, deadline=None)
@given(
    width=st.integers(1, 3),
    picks=st.lists(st.tuples(st.sampled_from(["I", "S", "K", "CNOT", "TOFFOLI"]), st.randoms()), max_size=8),
)
def test_compiled_circuits_are_unitary(width, picks):
    gates = []
    for kind, rnd in picks:
        arity = {"I": 1, "S": 1, "K": 1, "CNOT": 2, "TOFFOLI": 3}[kind]
        if arity <= width:
            gates.append(Gate(kind, tuple(rnd.sample(range(width), arity))))
    assert unitarity_residual(circuit_unitary(GateCircuit(width, tuple(gates)))) <= 1e-12


class TestDiscretizedState:
    def test_vector(self):
        st_ = DiscretizedState((0, 2), 0.1)
        r = 1 - 0.1 / 2
        np.testing.assert_allclose(st_.vector(), np.array([1, r * r]) / np.hypot(1, r * r))

    def test_negligible_coordinate(self):
        np.testing.assert_allclose(E1.vector(), [1, 0])

    def test_max_exponent(self):
        # (k/eps0) ln(k/eps0) = 20 ln 20 = 59.9...
        assert max_exponent(2, 0.1) == 60
        r = 1 - 0.1 / 2
        assert r ** max_exponent(2, 0.1) <= 0.1 / 2

    def test_exponent_cap(self):
        with pytest.raises(QGenError):
            DiscretizedState((0, 61), 0.1)
        with pytest.raises(QGenError):
            DiscretizedState((None, None), 0.1)

    def test_grid_is_shift_canonical(self):
        grid = state_grid(2, 2, 0.1)
        # (x,0) (0,x) and (0,b), (b,0) for b in 0..2 with (0,0) once
        assert len(grid) == 2 + 5
        assert len({tuple(np.round(s.vector(), 12)) for s in grid}) == len(grid)

    def test_l2_error_of_grid_rounding(self):
        # rounding each amplitude to the multiplicative grid moves the state by <= 2 eps0
        eps0, k = 0.1, 4
        rng = np.random.default_rng(0)
        r = 1 - eps0 / k
        for _ in range(50):
            psi = np.abs(rng.normal(size=k))
            psi /= np.linalg.norm(psi)
            cap = max_exponent(k, eps0)
            exps = [
                None if a < eps0 / k else min(cap, int(round(np.log(a / psi.max()) / np.log(r))))
                for a in psi
            ]
            approx = DiscretizedState(tuple(exps), eps0).vector().real
            assert np.linalg.norm(approx - psi) <= 2 * eps0


class TestNet:
    def test_depth_zero_identity(self):
        net = enumerate_net(1, 0, [E1], [(0, 1)], n=2)
        assert len(net) == 1
        np.testing.assert_array_equal(net[0].generator().unitary, np.eye(2))

    def test_depth_one_has_three_unitaries(self):
        assert len(distinct_unitaries(1, 1)) == 3

    def test_contains_s_gate_law(self):
        target = exact_distribution(QuantumGenerator(basis_state(2, 0), S_MATRIX, [0, 1]), 2).probs
        net = enumerate_net(1, 3, [E1], [(0, 1)], n=2)
        gaps = [np.max(np.abs(exact_distribution(e.generator(), 2).probs - target)) for e in net]
        assert min(gaps) <= 0.1
        assert min(gaps) == pytest.approx(0.0, abs=1e-15)

    def test_deduplicated_entries_are_separated(self):
        net = enumerate_net(1, 4, 3, all_partitions(2), n=3)
        tables = np.array([exact_distribution(e.generator(), 3).probs for e in net])
        for i, j in itertools.combinations(range(len(net)), 2):
            assert np.max(np.abs(tables[i] - tables[j])) > 1e-12

    def test_exact_containment_of_planted_generator(self):
        # random circuit of <= 3 gates on 2 wires, grid state, fixed partition
        rng = np.random.default_rng(4)
        alphabet = [Gate("S", (0,)), Gate("K", (1,)), Gate("CNOT", (0, 1)), Gate("CNOT", (1, 0)), Gate("S", (1,))]
        states = state_grid(4, 1, 0.1)
        meas = [(0, 1, 0, 1), (0, 0, 1, 1)]
        net = enumerate_net(2, 3, states, meas, n=3)
        tables = np.array([exact_distribution(e.generator(), 3).probs for e in net])
        for _ in range(10):
            circ = GateCircuit(2, tuple(alphabet[i] for i in rng.integers(0, len(alphabet), size=3)))
            planted = NetEntry(circ, states[rng.integers(len(states))], meas[rng.integers(2)])
            p = exact_distribution(planted.generator(), 3).probs
            assert np.min(np.max(np.abs(tables - p), axis=1)) <= 1e-12

    def test_deterministic_order(self):
        a = [e.manifest_line() for e in enumerate_net(1, 3, 2, all_partitions(2), n=2)]
        b = [e.manifest_line() for e in enumerate_net(1, 3, 2, all_partitions(2), n=2)]
        assert a == b
        assert a[0].startswith("circuit=- ")

    def test_too_large(self):
        with pytest.raises(EnumerationTooLarge):
            enumerate_net(2, 6, 4, all_partitions(4), n=2, max_entries=1000)

    def test_manifest_round_trip(self):
        net = enumerate_net(2, 2, 1, [(0, 1, 1, 0)], n=2)
        again = read_manifest(write_manifest(net, 0.1))
        assert [e.manifest_line() for e in again] == [e.manifest_line() for e in net]
        for a, b in zip(net, again):
            np.testing.assert_allclose(a.generator().unitary, b.generator().unitary, atol=1e-15)
            np.testing.assert_allclose(a.generator().initial, b.generator().initial, atol=1e-15)


class TestStateDistanceBound:
    def test_values(self):
        assert state_distance_bound(0.0, 5) == 0.0
        assert state_distance_bound(0.01, 8) == pytest.approx(0.10)

    def test_exact_entry_has_zero_gap(self):
        target = exact_distribution(QuantumGenerator(basis_state(2, 0), S_MATRIX, [0, 1]), 4).probs
        entry = NetEntry(GateCircuit(1, (Gate("S", (0,)),)), E1, (0, 1))
        gap = np.max(np.abs(exact_distribution(entry.generator(), 4).probs - target))
        assert gap <= state_distance_bound(0.0, 4) + 1e-15

    @pytest.mark.parametrize("seed", range(5))
    def test_bound_holds_for_perturbed_generators(self, seed):
        # unitary and state each within eps0 in l2 -> output law within (n+2) eps0
        from scipy.stats import unitary_group
        from scipy.linalg import expm

        rng = np.random.default_rng(seed)
        k, n, eps0 = 4, 5, 1e-3
        u = unitary_group.rvs(k, random_state=seed)
        h = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        h = (h + h.conj().T) / 2
        du = expm(1j * eps0 * h / np.linalg.norm(h, 2))
        psi = rng.normal(size=k) + 1j * rng.normal(size=k)
        psi /= np.linalg.norm(psi)
        dpsi = psi + eps0 / 2 * rng.normal(size=k)
        dpsi /= np.linalg.norm(dpsi)
        meas = [0, 1, 0, 1]
        a = exact_distribution(QuantumGenerator(psi, u, meas), n).probs
        b = exact_distribution(QuantumGenerator(dpsi, du @ u, meas), n).probs
        assert np.max(np.abs(a - b)) <= state_distance_bound(eps0, n)
