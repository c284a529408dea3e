import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsensim.channels import depolarizing
from qsensim.circuit import ChannelOp, Circuit, Measure, random_circuit, roles_for
from qsensim.gates import CNOT, H, Delay
from qsensim.noise import (
    ERROR_CLASSES,
    PLATFORMS,
    PRESETS,
    NoiseProfile,
    NoiseScope,
    attach_noise,
    default_profile,
    noiseless_profile,
    preset_scope,
    scale_profile,
)
from qsensim.simulate import simulate_dense

US = 1e-6

# published hardware ranges per platform: (T1, T2, SGE, TGE, SPE, ME, readout time)
RANGES = {
    "trapped_ion": dict(t1=(1, 3600), t2=(1e-3, 10), sge=(1e-4, 1e-2), tge=(1e-3, 3e-2),
                        spe=(1e-3, 1e-2), me=(1e-3, 3e-2), readout=(10 * US, 1e-3)),
    "rydberg": dict(t1=(10 * US, 1e-3), t2=(10 * US, 100 * US), sge=(1e-3, 1e-2), tge=(1e-2, 5e-2),
                    spe=(1e-2, 5e-2), me=(1e-2, 0.1), readout=(1 * US, 10 * US)),
    "superconducting": dict(t1=(10 * US, 200 * US), t2=(10 * US, 300 * US), sge=(1e-4, 1e-3),
                            tge=(1e-2, 2e-2), spe=(1e-3, 2e-2), me=(1e-2, 5e-2), readout=(100e-9, 1 * US)),
    "nv_center": dict(t1=(1e-3, 10e-3), t2=(10 * US, 100 * US), sge=(1e-3, 1e-2), tge=(1e-2, 5e-2),
                      spe=(1e-3, 1e-2), me=(1e-2, 0.1), readout=(1 * US, 10 * US)),
}


@pytest.mark.parametrize("name", list(RANGES))
def test_defaults_inside_hardware_ranges(name):
    p = default_profile(name)
    r = RANGES[name]
    vals = dict(t1=p.t1, t2=p.t2, sge=p.sge, tge=p.tge, spe=p.spe, me=p.me[0], readout=p.durations["readout"])
    for k, (lo, hi) in r.items():
        assert lo <= vals[k] <= hi, (name, k, vals[k])
    assert p.me[0] == p.me[1]


def test_shipped_point_values():
    sc = default_profile("superconducting")
    assert (sc.t1, sc.t2, sc.sge, sc.tge, sc.spe, sc.me) == (100e-6, 100e-6, 5e-4, 0.015, 0.01, (0.03, 0.03))
    assert sc.durations == {"single_gate": 35e-9, "two_gate": 300e-9, "readout": 300e-9}
    ry = default_profile("rydberg")
    assert (ry.t1, ry.t2, ry.tge, ry.spe, ry.me[0]) == (100e-6, 50e-6, 0.03, 0.03, 0.05)


def test_custom_is_noiseless_and_aliases():
    assert noiseless_profile().is_noiseless
    assert default_profile("NV").platform == "nv_center"
    with pytest.raises(ValueError, match="unknown platform"):
        default_profile("photonic")


@pytest.mark.parametrize("kw", [dict(sge=1.5), dict(me=(0.1, -0.1)), dict(t1=0.0),
                                dict(t2=1.0, t1=0.1), dict(durations={"readout": 0.0})])
def test_profile_invariants(kw):
    with pytest.raises(ValueError):
        default_profile("superconducting").with_overrides(**kw)


def test_overrides_merge_durations():
    p = default_profile("superconducting").with_overrides(durations={"readout": 1e-6}, tge=0.02)
    assert p.durations["readout"] == 1e-6 and p.durations["two_gate"] == 300e-9 and p.tge == 0.02
    with pytest.raises(ValueError, match="unknown profile field"):
        p.with_overrides(gate_error=0.1)


class TestScaling:
    def test_eps_zero_unchanged(self):
        p = default_profile("rydberg")
        assert scale_profile(p, NoiseScope(0.0)) == p

    def test_eps_one_all_classes_noiseless(self):
        for name in PLATFORMS:
            assert scale_profile(default_profile(name), NoiseScope(1.0)).is_noiseless

    def test_half_readout_only(self):
        p = default_profile("superconducting")
        s = scale_profile(p, NoiseScope(0.5, frozenset({"readout"})))
        assert s.me == (0.015, 0.015) and s.tge == p.tge and s.sge == p.sge and s.t1 == p.t1

    def test_coherence_times_stretch(self):
        p = default_profile("superconducting")
        s = scale_profile(p, NoiseScope(0.75, frozenset({"t1"})))
        assert math.isclose(s.t1, 4 * p.t1) and s.t2 == p.t2

    def test_exclusive_isolates_one_class(self):
        p = default_profile("rydberg")
        s = scale_profile(p, NoiseScope(0.0, frozenset({"two_gate"}), exclusive=True))
        assert s.tge == p.tge and s.sge == 0 and s.me == (0, 0) and math.isinf(s.t1)

    @given(st.floats(0, 1), st.floats(0, 1), st.sets(st.sampled_from(ERROR_CLASSES)))
    def test_monotone_in_epsilon(self, e1, e2, classes):
        e1, e2 = sorted((e1, e2))
        p = default_profile("nv_center")
        a = scale_profile(p, NoiseScope(e1, frozenset(classes)))
        b = scale_profile(p, NoiseScope(e2, frozenset(classes)))
        for k in ("sge", "tge", "spe"):
            assert getattr(a, k) >= getattr(b, k)
        assert a.me[0] >= b.me[0] and a.t1 <= b.t1 and a.t2 <= b.t2

    @pytest.mark.parametrize("kw", [dict(epsilon=1.3), dict(epsilon=-0.1),
                                    dict(enabled_classes={"crosstalk"}), dict(role_filter={"ancilla"})])
    def test_scope_validation(self, kw):
        with pytest.raises(ValueError):
            NoiseScope(**kw)

    def test_presets(self):
        s = preset_scope("readout-off")
        assert s.epsilon == 1 and s.enabled_classes == {"readout"}
        assert set(PRESETS) >= {"noiseless", "default", "readout-off", "sge-off", "tge-off"}
        with pytest.raises(ValueError):
            preset_scope("quiet")


class TestAttach:
    def test_noiseless_is_identity(self):
        c = random_circuit(3, 10, np.random.default_rng(0))
        assert attach_noise(c, noiseless_profile()) == c

    def test_single_h_policy(self):
        p = NoiseProfile("custom", 1e-4, 1e-4, 0.01, 0.0, 0.0, (0.0, 0.0))
        c = attach_noise(Circuit(1, ("sensing",), (H(0),)), p)
        ops = c.instructions
        assert ops[0] == H(0)
        assert isinstance(ops[1], ChannelOp) and ops[1].channel.label.startswith("depolarizing")
        assert np.allclose(ops[1].channel.superoperator(), depolarizing(0.01).superoperator())
        assert isinstance(ops[2], ChannelOp) and ops[2].channel.label == f"thermal(t={35e-9:g})"
        assert len(ops) == 3

    def test_two_qubit_depolarizing_is_joint(self):
        p = default_profile("superconducting")
        c = attach_noise(Circuit(2, ("sensing",) * 2, (CNOT(0, 1),)), p)
        joint = [op for op in c.channels() if op.channel.label.startswith("depolarizing")]
        assert len(joint) == 1 and joint[0].targets == (0, 1)

    def test_idle_qubit_relaxes(self):
        p = default_profile("superconducting")
        c = attach_noise(Circuit(2, ("sensing",) * 2, (H(0), H(0), H(1))), p)
        idle = [op for op in c.channels() if op.kind == "idle"]
        assert [op.targets for op in idle] == [(1,)]

    def test_role_filter_memory_only(self):
        c = Circuit(3, roles_for(2), (H(0), CNOT(0, 1), CNOT(1, 2), Measure(0), Measure(1), Measure(2)))
        noisy = attach_noise(c, default_profile("rydberg"), NoiseScope(role_filter=frozenset({"memory"})))
        touched = {t for op in noisy.channels() for t in op.targets}
        assert touched == {2}
        assert [m.readout for m in noisy.instructions if isinstance(m, Measure)][:2] == [(0, 0), (0, 0)]

    def test_rejects_double_insertion(self):
        c = attach_noise(Circuit(1, ("sensing",), (H(0),)), default_profile("rydberg"))
        with pytest.raises(ValueError, match="already"):
            attach_noise(c, default_profile("rydberg"))

    def test_delay_relaxation_flag(self):
        c = Circuit(1, ("memory",), (H(0), Delay(5.0, 0), H(0), Measure(0)))
        p = default_profile("superconducting")
        with_relax = simulate_dense(attach_noise(c, p, delay_relaxation=True)).probability(0, 1)
        without = simulate_dense(attach_noise(c, p, delay_relaxation=False)).probability(0, 1)
        ideal = simulate_dense(c).probability(0, 1)
        assert abs(without - ideal) < abs(with_relax - ideal)

    @given(st.integers(0, 2**31), st.sampled_from(PLATFORMS[:-1]))
    def test_eps_one_reproduces_ideal(self, seed, platform):
        c = random_circuit(3, 8, np.random.default_rng(seed))
        noisy = attach_noise(c, default_profile(platform), NoiseScope(1.0))
        assert np.array_equal(simulate_dense(noisy).probs, simulate_dense(c).probs)

    @given(st.integers(0, 2**31), st.sampled_from(PLATFORMS[:-1]), st.floats(0, 1))
    def test_inserted_channels_trace_preserving(self, seed, platform, eps):
        c = random_circuit(4, 10, np.random.default_rng(seed))
        noisy = attach_noise(c, default_profile(platform), NoiseScope(eps))
        for op in noisy.channels():
            acc = sum(k.conj().T @ k for k in op.channel.kraus)
            assert np.max(np.abs(acc - np.eye(acc.shape[0]))) < 1e-10
