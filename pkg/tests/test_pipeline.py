import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsensim.analysis import fidelity_exact
from qsensim.circuit import Circuit, Measure
from qsensim.experiments import estimate_phase, radar_plan
from qsensim.gates import H
from qsensim.noise import default_profile
from qsensim.pipeline import (
    PipelineSpec,
    StageSpec,
    assemble,
    build_delay,
    build_probe_prep,
    build_retrieval,
    build_sensing,
    build_storage,
    memory_phase,
    plan,
)
from qsensim.simulate import simulate_dense


def state_of(n, ins):
    return simulate_dense(Circuit(n, ("sensing",) * n, tuple(ins))).state.vector()


def ghz(n):
    v = np.zeros(2**n, complex)
    v[0] = v[-1] = 2**-0.5
    return v


class TestBuilders:
    def test_single_qubit_probe(self):
        assert np.allclose(state_of(1, build_probe_prep(1)), [2**-0.5, 2**-0.5])

    @pytest.mark.parametrize("n", range(2, 11))
    def test_ghz_fidelity(self, n):
        assert abs(fidelity_exact(state_of(n, build_probe_prep(n)), ghz(n)) - 1) < 1e-10

    def test_empty_probe_rejected(self):
        with pytest.raises(ValueError):
            build_probe_prep(0)

    @given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
    def test_phase_sum_on_excited_branch(self, angles):
        v = state_of(3, build_probe_prep(3) + build_sensing(3, "phase", angles))
        assert np.isclose(v[-1] / v[0], np.exp(1j * sum(angles)))

    def test_zero_angles_identity(self):
        assert build_sensing(2, "phase", 0.0) and np.allclose(
            state_of(2, build_probe_prep(2) + build_sensing(2, "rx", 0.0)), ghz(2))

    def test_angle_mismatch(self):
        with pytest.raises(ValueError):
            build_sensing(3, "phase", [0.1, 0.2])
        with pytest.raises(ValueError):
            build_sensing(3, "squeeze", 0.1)

    def test_storage_needs_memory(self):
        with pytest.raises(ValueError):
            build_storage([0, 1], None)

    def test_delay(self):
        assert build_delay(0, 0.0) == []
        with pytest.raises(ValueError):
            build_delay(0, -1.0)
        v = state_of(1, [H(0)] + build_delay(0, np.pi))
        assert np.allclose(v, [2**-0.5, -(2**-0.5)])

    def test_retrieval_fanout(self):
        v = state_of(3, [H(2)] + build_retrieval(2, [0, 1]))
        assert np.allclose(v, ghz(3))


class TestPlanning:
    @pytest.mark.parametrize("steps", [
        (),
        (StageSpec("sensing"),),
        (StageSpec("probe_prep"), StageSpec("retrieval")),
        (StageSpec("probe_prep"), StageSpec("delay", tau=0.1)),
        (StageSpec("probe_prep"), StageSpec("storage"), StageSpec("probe_prep")),
        (StageSpec("probe_prep"), StageSpec("storage"), StageSpec("processing"), StageSpec("delay", tau=1)),
    ])
    def test_ill_ordered(self, steps):
        with pytest.raises(ValueError):
            plan(PipelineSpec(2, steps))

    def test_memory_required(self):
        with pytest.raises(ValueError):
            PipelineSpec(2, (StageSpec("probe_prep"), StageSpec("storage")), memory_enabled=False)

    def test_unknown_stage(self):
        with pytest.raises(ValueError):
            StageSpec("teleport")

    def test_storage_zero_phase_gives_plus(self):
        pl = radar_plan(2, 2, 0.3, 0.3, "physical")
        r = simulate_dense(pl.circuit)
        assert np.isclose(r.probability(pl.memory, 0), 1)

    def test_radar_memory_phase(self):
        pl = radar_plan(3, 3, 0.9, 0.1, "physical")
        body = pl.circuit.instructions[:-2]
        rho = simulate_dense(pl.circuit.with_instructions(body)).state.reduced([pl.memory])
        assert np.isclose(abs(memory_phase(rho)), 2.4, atol=1e-12)
        assert np.isclose(abs(rho[0, 1]), 0.5, atol=1e-12)

    def test_correction_modes_agree(self):
        a = radar_plan(3, 3, 0.9, 0.1, "post_processing")
        b = radar_plan(3, 3, 0.9, 0.1, "physical")
        pa = simulate_dense(a.circuit).sample(20_000, 1)
        pb = simulate_dense(b.circuit).sample(20_000, 1)
        ea = estimate_phase(pa, "radar", 3, a.memory, a.parity_qubits)
        eb = estimate_phase(pb, "radar", 3, b.memory, b.parity_qubits)
        exact = np.cos(1.2) ** 2
        assert abs(ea.p_hat - exact) < 0.02 and abs(eb.p_hat - exact) < 0.02

    def test_assemble_with_noise(self):
        spec = PipelineSpec(2, (StageSpec("probe_prep"), StageSpec("sensing", angles=0.2),
                                StageSpec("storage"), StageSpec("processing")))
        ideal = assemble(spec)
        noisy = assemble(spec, default_profile("rydberg"))
        assert not ideal.noisy and noisy.noisy and noisy.channels()
        assert any(isinstance(i, Measure) and i.readout != (0, 0) for i in noisy.instructions)

    def test_retrieval_identity_composition(self):
        # store zero phase, no delay, retrieve: memory + fresh group are a GHZ state
        spec = PipelineSpec(2, (StageSpec("probe_prep"), StageSpec("storage"), StageSpec("retrieval")),
                            correction_mode="physical")
        pl = plan(spec)
        rho = simulate_dense(pl.circuit).state.reduced(pl.groups[1] + [pl.memory])
        assert abs(fidelity_exact(rho, ghz(3)) - 1) < 1e-10


def two_step(d1, d2, tau, n=3):
    steps = (
        StageSpec("probe_prep"),
        StageSpec("sensing", angles=d1 / n),
        StageSpec("storage"),
        StageSpec("delay", tau=tau),
        StageSpec("retrieval"),
        StageSpec("sensing", angles=d2 / n),
        StageSpec("storage"),
    )
    return plan(PipelineSpec(n, steps, correction_mode="physical"))


@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.floats(0.0, 0.5))
def test_phase_additivity(d1, d2, tau):
    pl = two_step(d1, d2, tau)
    rho = simulate_dense(pl.circuit).state.reduced([pl.memory])
    assert abs(memory_phase(rho) - (d1 + d2 + tau)) < 1e-9
