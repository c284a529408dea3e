import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracle import embed
from qsensim.gates import CNOT, CSWAP, RX, Gate, H, P, X, controlled, phase, rx
from qsensim.state import (
    MeasurementSpec,
    OutcomeCounts,
    QuantumState,
    apply_channel,
    apply_gate,
    apply_matrix_dm,
    apply_matrix_pure,
    classically_controlled,
    marginal,
    measure,
    parity,
    postselect,
    probabilities,
    sample_bits,
)
from qsensim.channels import depolarizing


def haar(d, rng):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(n, rng):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def random_density(n, rng, rank=None):
    d = 2**n
    rank = rank or d
    a = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@st.composite
def targets_case(draw):
    n = draw(st.integers(1, 4))
    k = draw(st.integers(1, min(3, n)))
    ts = draw(st.permutations(range(n)))[:k]
    seed = draw(st.integers(0, 2**31))
    return n, tuple(ts), seed


class TestGates:
    def test_matrices_unitary(self):
        for g in (H(0), X(0), P(0.3, 0), RX(1.1, 0), CNOT(0, 1), CSWAP(0, 1, 2)):
            u = g.matrix
            assert np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=1e-12)

    def test_cnot_flips_target_when_control_set(self):
        # |10> -> |11> with qubit 0 as MSB
        psi = np.zeros(4, complex)
        psi[0b10] = 1
        out = CNOT(0, 1).matrix @ psi
        assert out[0b11] == 1

    def test_cswap_swaps_only_when_control_set(self):
        u = CSWAP(0, 1, 2).matrix
        e = np.eye(8)
        assert np.allclose(u @ e[0b101], e[0b110])
        assert np.allclose(u @ e[0b001], e[0b001])

    def test_rx_and_phase(self):
        assert np.allclose(rx(np.pi), -1j * X(0).matrix)
        assert np.allclose(phase(np.pi / 2), np.diag([1, 1j]))

    def test_controlled_block(self):
        u = controlled(X(0).matrix)
        assert np.allclose(u, CNOT(0, 1).matrix)

    @pytest.mark.parametrize("bad", [dict(kind="Q", targets=(0,)), dict(kind="CNOT", targets=(0,)),
                                     dict(kind="CNOT", targets=(1, 1)), dict(kind="P", targets=(0,))])
    def test_rejects_malformed(self, bad):
        with pytest.raises(ValueError):
            Gate(**bad)

    def test_on_retargets(self):
        g = P(0.2, 0).on(3)
        assert g.targets == (3,) and g.param == 0.2


class TestKernels:
    @given(targets_case())
    def test_pure_kernel_matches_full_matrix(self, case):
        n, ts, seed = case
        rng = np.random.default_rng(seed)
        u = haar(2 ** len(ts), rng)
        psi = random_state(n, rng)
        got = apply_matrix_pure(psi.reshape((2,) * n), u, ts).reshape(-1)
        assert np.allclose(got, embed(u, ts, n) @ psi, atol=1e-12)

    @given(targets_case())
    def test_density_kernel_matches_full_matrix(self, case):
        n, ts, seed = case
        rng = np.random.default_rng(seed)
        u = haar(2 ** len(ts), rng)
        rho = random_density(n, rng)
        got = apply_matrix_dm(rho.reshape((2,) * (2 * n)), u, ts).reshape(2**n, 2**n)
        full = embed(u, ts, n)
        assert np.allclose(got, full @ rho @ full.conj().T, atol=1e-12)

    @given(st.integers(1, 5), st.integers(0, 2**31))
    def test_probabilities_and_marginals(self, n, seed):
        rng = np.random.default_rng(seed)
        psi = random_state(n, rng)
        p = probabilities(psi.reshape((2,) * n), False)
        assert abs(p.sum() - 1) < 1e-12 and p.min() >= 0
        q = int(rng.integers(n))
        m = marginal(p, n, [q])
        ones = sum(p[i] for i in range(2**n) if (i >> (n - 1 - q)) & 1)
        assert np.isclose(m[1], ones)

    def test_marginal_respects_order(self):
        # |01> on two qubits: marginal over (1, 0) puts the 1 first
        p = np.array([0, 1, 0, 0.0])
        assert np.allclose(marginal(p, 2, [1, 0]), [0, 0, 1, 0])


class TestQuantumState:
    def test_constructors_and_views(self):
        s = QuantumState.zeros(2)
        assert s.vector()[0] == 1 and not s.is_dm
        d = s.to_density()
        assert d.is_dm and np.isclose(d.density()[0, 0], 1)
        with pytest.raises(ValueError):
            d.vector()

    @pytest.mark.parametrize("kw", [dict(n_qubits=0, data=[1]), dict(n_qubits=2, data=[1, 0]),
                                    dict(n_qubits=1, data=[1, 0], roles=("bogus",))])
    def test_rejects_bad_shape_or_role(self, kw):
        with pytest.raises(ValueError):
            QuantumState(**kw)

    def test_check_detects_broken_states(self):
        with pytest.raises(ValueError):
            QuantumState(1, [1, 1]).check()
        with pytest.raises(ValueError):
            QuantumState.from_density(np.diag([0.7, 0.7])).check()
        with pytest.raises(ValueError):
            QuantumState.from_density(np.diag([1.5, -0.5])).check()

    def test_reduced_of_product_state(self):
        rng = np.random.default_rng(1)
        a, b, c = (random_state(1, rng) for _ in range(3))
        s = QuantumState.from_vector(np.kron(np.kron(a, b), c))
        assert np.allclose(s.reduced([2, 0]), np.kron(np.outer(c, c.conj()), np.outer(a, a.conj())))

    @given(st.integers(2, 4), st.integers(0, 2**31))
    def test_reduced_is_a_state(self, n, seed):
        rng = np.random.default_rng(seed)
        s = QuantumState.from_density(random_density(n, rng, rank=2))
        r = s.reduced([0])
        assert np.isclose(np.trace(r), 1) and np.linalg.eigvalsh(r).min() > -1e-12

    def test_gate_and_channel_application(self):
        s = apply_gate(QuantumState.zeros(2), H(0))
        s = apply_gate(s, CNOT(0, 1))
        assert np.allclose(s.vector(), [2**-0.5, 0, 0, 2**-0.5])
        m = apply_channel(s, depolarizing(1.0, 2), (0, 1))
        assert m.is_dm and np.allclose(m.density(), np.eye(4) / 4, atol=1e-12)
        with pytest.raises(ValueError):
            apply_gate(s, CNOT(0, 5))

    @given(st.integers(1, 4), st.integers(0, 2**31))
    def test_unitaries_preserve_validity(self, n, seed):
        rng = np.random.default_rng(seed)
        s = QuantumState.from_density(random_density(n, rng))
        for _ in range(5):
            q = int(rng.integers(n))
            s = apply_gate(s, RX(float(rng.uniform(0, 6)), q))
        s.check()


class TestMeasurement:
    def test_x_basis_of_plus_is_deterministic(self):
        s = apply_gate(QuantumState.zeros(1), H(0))
        c = measure(s, MeasurementSpec((0,), ("X",), shots=500), rng_seed=0)
        assert c.counts == {"0": 500}

    def test_readout_flip_rate(self):
        s = QuantumState.zeros(1)
        c = measure(s, MeasurementSpec((0,), readout_error=((0.2, 0.0),), shots=100_000), rng_seed=3)
        p = c.probability(0, 1)
        assert abs(p - 0.2) < 4 * np.sqrt(0.2 * 0.8 / 100_000)

    def test_measurement_settings_validated(self):
        with pytest.raises(ValueError):
            MeasurementSpec((0,), ("Y",))
        with pytest.raises(ValueError):
            MeasurementSpec((0,), readout_error=((1.2, 0),))
        with pytest.raises(ValueError):
            MeasurementSpec((0, 1), ("Z",))

    def test_sample_bits_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="corrupted"):
            sample_bits(np.array([0.5, 0.4]), 1, 10, np.random.default_rng(0))

    def test_measure_bit_order_is_msb_first(self):
        s = QuantumState.from_vector(np.eye(4)[0b01])
        c = measure(s, MeasurementSpec((1, 0), shots=10), rng_seed=0)
        assert c.counts == {"10": 10}


class TestCounts:
    def test_bookkeeping(self):
        c = OutcomeCounts({"00": 3, "11": 1}, 4)
        assert c.qubits == (0, 1) and c.kept_fraction == 1
        assert c.count_where(1, 1) == 1
        assert np.array_equal(c.as_array(), [3, 0, 0, 1])
        with pytest.raises(ValueError):
            OutcomeCounts({"0": 5}, 4)

    def test_postselect(self):
        c = OutcomeCounts({"00": 6, "01": 2, "10": 2}, 10)
        kept = postselect(c, {1: 0})
        assert kept.kept_shots == 8 and kept.total_shots == 10 and kept.discarded == 2
        assert kept.kept_fraction == 0.8
        with pytest.raises(ValueError, match="every shot"):
            postselect(OutcomeCounts({"11": 3}, 3), {0: 0})
        with pytest.raises(ValueError, match="unmeasured"):
            postselect(c, {4: 0})

    @given(st.dictionaries(st.sampled_from(["00", "01", "10", "11"]), st.integers(1, 50), min_size=1),
           st.sampled_from([0, 1]), st.sampled_from([0, 1]))
    def test_postselect_never_grows(self, counts, q, v):
        c = OutcomeCounts(counts, sum(counts.values()))
        try:
            k = postselect(c, {q: v})
        except ValueError:
            assert c.count_where(q, v) == 0
            return
        assert k.kept_shots <= c.kept_shots and k.total_shots == c.total_shots
        assert all(key[q] == str(v) for key in k.counts)

    def test_classical_control_and_parity(self):
        s = QuantumState.zeros(2)
        with pytest.raises(ValueError, match="not been measured"):
            classically_controlled(s, {}, 0, X(1))
        out = classically_controlled(s, {0: 1}, 0, X(1))
        assert np.isclose(out.vector()[0b01], 1)
        assert classically_controlled(s, {0: 0}, 0, X(1)) is s
        assert parity({0: 1, 1: 1, 2: 1}, [0, 1, 2]) == 1
        with pytest.raises(ValueError):
            parity({0: 1}, [0, 1])
