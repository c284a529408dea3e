"""Platform noise profiles, epsilon scaling and channel insertion.

Insertion policy used by :func:`attach_noise`:

* bit flip with probability ``spe`` on every prepared qubit at t=0;
* after each gate, depolarizing noise on its qubits (``sge`` for one-qubit
  gates, ``tge`` for anything larger) and thermal relaxation over the gate
  duration;
* gates are scheduled as soon as their qubits are free; a qubit waiting for
  its next operation relaxes over the gap (consecutive gaps are merged);
* delay gates relax over their wait time (optional) and get no gate error;
* measurements carry ``me`` as a classical readout flip and take the
  readout duration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping

from .channels import bit_flip, depolarizing, thermal_relaxation
from .circuit import ChannelOp, Circuit, Conditional, Instruction, Measure
from .gates import Gate

ERROR_CLASSES = ("readout", "single_gate", "two_gate", "state_prep", "t1", "t2")
PLATFORMS = ("trapped_ion", "rydberg", "superconducting", "nv_center", "custom")
INF = math.inf



@dataclass(frozen=True)
class NoiseProfile:
    """Error parameters of one hardware platform. Times are in seconds."""

    platform: str
    t1: float
    t2: float
    sge: float
    tge: float
    spe: float
    me: tuple[float, float]
    durations: Mapping[str, float] = field(
        default_factory=lambda: {"single_gate": 35e-9, "two_gate": 300e-9, "readout": 300e-9}
    )
    delay_unit: float = 1e-6  # seconds of idling per unit of delay

    def __post_init__(self):
        me = self.me if isinstance(self.me, (tuple, list)) else (self.me, self.me)
        object.__setattr__(self, "me", (float(me[0]), float(me[1])))
        object.__setattr__(self, "durations", dict(self.durations))
        self._check(strict=True)

    def _check(self, strict: bool):
        for name in ("sge", "tge", "spe"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name}={v} is not a probability")
        if not all(0 <= p <= 1 for p in self.me):
            raise ValueError(f"me={self.me} is not a probability pair")
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("T1 and T2 must be positive")
        if strict and math.isfinite(self.t2) and self.t2 > 2 * self.t1:
            raise ValueError(f"T2={self.t2} exceeds 2*T1={2 * self.t1}")
        missing = {"single_gate", "two_gate", "readout"} - set(self.durations)
        if missing:
            raise ValueError(f"missing durations {sorted(missing)}")
        if any(v <= 0 for v in self.durations.values()) or self.delay_unit <= 0:
            raise ValueError("durations must be positive")

    def with_overrides(self, **kw) -> "NoiseProfile":
        if "durations" in kw:
            kw["durations"] = {**self.durations, **kw["durations"]}
        known = {f.name for f in fields(self)}
        bad = set(kw) - known
        if bad:
            raise ValueError(f"unknown profile field(s) {sorted(bad)}")
        return replace(self, **kw)

    @property
    def is_noiseless(self) -> bool:
        return (
            self.sge == self.tge == self.spe == 0
            and self.me == (0.0, 0.0)
            and math.isinf(self.t1)
            and math.isinf(self.t2)
        )

    def as_dict(self) -> dict:
        return {
            "platform": self.platform,
            "t1": self.t1,
            "t2": self.t2,
            "sge": self.sge,
            "tge": self.tge,
            "spe": self.spe,
            "me": list(self.me),
            "durations": dict(self.durations),
            "delay_unit": self.delay_unit,
        }


_DEFAULTS = {
    "trapped_ion": dict(
        t1=600.0, t2=1.0, sge=0.005, tge=0.015, spe=0.005, me=0.015,
        durations={"single_gate": 10e-6, "two_gate": 200e-6, "readout": 50e-6},
    ),
    "rydberg": dict(
        t1=100e-6, t2=50e-6, sge=0.005, tge=0.03, spe=0.03, me=0.05,
        durations={"single_gate": 1e-6, "two_gate": 1e-6, "readout": 5e-6},
    ),
    "superconducting": dict(
        t1=100e-6, t2=100e-6, sge=0.0005, tge=0.015, spe=0.01, me=0.03,
        durations={"single_gate": 35e-9, "two_gate": 300e-9, "readout": 300e-9},
    ),
    "nv_center": dict(
        t1=5e-3, t2=50e-6, sge=0.005, tge=0.03, spe=0.005, me=0.05,
        durations={"single_gate": 50e-9, "two_gate": 1e-6, "readout": 5e-6},
    ),
    "custom": dict(
        t1=INF, t2=INF, sge=0.0, tge=0.0, spe=0.0, me=0.0,
        durations={"single_gate": 35e-9, "two_gate": 300e-9, "readout": 300e-9},
    ),
}


def default_profile(platform: str) -> NoiseProfile:
    key = platform.lower().replace("-", "_").replace(" ", "_")
    aliases = {"ion": "trapped_ion", "nv": "nv_center", "sc": "superconducting", "noiseless": "custom"}
    key = aliases.get(key, key)
    if key not in _DEFAULTS:
        raise ValueError(f"unknown platform {platform!r}; choose from {PLATFORMS}")
    d = _DEFAULTS[key]
    return NoiseProfile(key, d["t1"], d["t2"], d["sge"], d["tge"], d["spe"], (d["me"], d["me"]), dict(d["durations"]))


def noiseless_profile() -> NoiseProfile:
    return default_profile("custom")


@dataclass(frozen=True)
class NoiseScope:
    """Which error classes to scale by ``epsilon`` and which roles get noise.

    ``epsilon=0`` keeps defaults, ``epsilon=1`` removes the class. An empty
    ``role_filter`` means every role. With ``exclusive`` the classes that are
    not enabled are switched off instead of left at their defaults, which
    isolates a single class.
    """

    epsilon: float = 0.0
    enabled_classes: frozenset = frozenset(ERROR_CLASSES)
    role_filter: frozenset = frozenset()
    exclusive: bool = False

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon={self.epsilon} outside [0, 1]")
        ec = frozenset(self.enabled_classes)
        bad = ec - set(ERROR_CLASSES)
        if bad:
            raise ValueError(f"unknown error class(es) {sorted(bad)}")
        rf = frozenset(self.role_filter)
        bad = rf - {"sensing", "memory", "computing"}
        if bad:
            raise ValueError(f"unknown role(s) {sorted(bad)}")
        object.__setattr__(self, "enabled_classes", ec)
        object.__setattr__(self, "role_filter", rf)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    def includes_role(self, role: str) -> bool:
        return not self.role_filter or role in self.role_filter


def _scale_p(p, eps):
    return p * (1 - eps)


def _scale_t(t, eps):
    if eps >= 1 or math.isinf(t):
        return INF
    return t / (1 - eps)


def scale_profile(profile: NoiseProfile, scope: NoiseScope) -> NoiseProfile:
    """Apply ``scope.epsilon`` to the enabled classes of ``profile``."""
    eps = scope.epsilon
    on = scope.enabled_classes
    off = scope.exclusive

    def prob(cls, v):
        if cls in on:
            return _scale_p(v, eps)
        return 0.0 if off else v

    def time(cls, v):
        if cls in on:
            return _scale_t(v, eps)
        return INF if off else v

    vals = dict(
        platform=profile.platform,
        t1=time("t1", profile.t1),
        t2=time("t2", profile.t2),
        sge=prob("single_gate", profile.sge),
        tge=prob("two_gate", profile.tge),
        spe=prob("state_prep", profile.spe),
        me=tuple(prob("readout", p) for p in profile.me),
        durations=dict(profile.durations),
        delay_unit=profile.delay_unit,
    )
    # stretching T2 alone may leave T2 > 2*T1; relaxation caps it physically
    out = object.__new__(NoiseProfile)
    for k, v in vals.items():
        object.__setattr__(out, k, v)
    out._check(strict=False)
    return out


@dataclass(frozen=True)
class QubitNoise:
    sge: float = 0.0
    tge: float = 0.0
    spe: float = 0.0
    me: tuple[float, float] = (0.0, 0.0)
    t1: float = INF
    t2: float = INF

    @property
    def relaxes(self) -> bool:
        return math.isfinite(self.t1) or math.isfinite(self.t2)


def qubit_noise(profile: NoiseProfile, scope: NoiseScope, roles: Iterable[str]) -> list[QubitNoise]:
    """Effective parameters per qubit; qubits outside the role filter are clean."""
    p = scale_profile(profile, scope)
    on = QubitNoise(p.sge, p.tge, p.spe, p.me, p.t1, p.t2)
    return [on if scope.includes_role(r) else QubitNoise() for r in roles]


def _relax(q: int, dt: float, qn: QubitNoise, kind: str) -> list[ChannelOp]:
    if dt <= 0 or not qn.relaxes:
        return []
    return [ChannelOp(thermal_relaxation(dt, qn.t1, qn.t2), (q,), kind=kind)]


def _depolarize(targets, qns, two: bool, condition=None) -> list[ChannelOp]:
    ps = [qns[t].tge if two else qns[t].sge for t in targets]
    if all(p == ps[0] for p in ps):
        if ps[0] <= 0:
            return []
        return [ChannelOp(depolarizing(ps[0], len(targets)), tuple(targets), condition, "gate")]
    # unequal rates across a mixed-scope gate: act on each qubit separately
    return [
        ChannelOp(depolarizing(p, 1), (t,), condition, "gate")
        for t, p in zip(targets, ps)
        if p > 0
    ]


def gate_duration(gate: Gate, profile: NoiseProfile) -> float:
    if gate.kind == "DELAY":
        return float(gate.wait) * profile.delay_unit
    return profile.durations["single_gate" if gate.arity == 1 else "two_gate"]


def attach_noise(
    circuit: Circuit,
    profile: NoiseProfile,
    scope: NoiseScope | None = None,
    delay_relaxation: bool = True,
) -> Circuit:
    """Return a copy of ``circuit`` with noise channels inserted."""
    if circuit.noisy or circuit.channels():
        raise ValueError("circuit already carries noise channels")
    scope = scope or NoiseScope()
    n = circuit.n_qubits
    qns = qubit_noise(profile, scope, circuit.roles)
    clock = [0.0] * n  # when each qubit becomes free
    relaxed = [0.0] * n  # time up to which idle relaxation was emitted
    measured: set[int] = set()
    out: list[Instruction] = []

    prepared = range(n) if circuit.prepared is None else circuit.prepared
    for q in prepared:
        if qns[q].spe > 0:
            out.append(ChannelOp(bit_flip(qns[q].spe), (q,), kind="state_prep"))

    def wait_until(q, t):
        out.extend(_relax(q, t - relaxed[q], qns[q], "idle"))
        relaxed[q] = max(relaxed[q], t)

    def finish(qs, t):
        for q in qs:
            clock[q] = relaxed[q] = t

    for ins in circuit.instructions:
        if isinstance(ins, Gate):
            ts = ins.targets
            start = max(clock[t] for t in ts)
            for t in ts:
                wait_until(t, start)
            dur = gate_duration(ins, profile)
            out.append(ins)
            if ins.kind != "DELAY":
                out.extend(_depolarize(ts, qns, ins.arity > 1))
            if ins.kind != "DELAY" or delay_relaxation:
                for t in ts:
                    out.extend(_relax(t, dur, qns[t], "gate"))
            finish(ts, start + dur)
        elif isinstance(ins, Conditional):
            ts = ins.gate.targets
            start = max([clock[t] for t in ts] + [clock[ins.control]])
            for t in ts:
                wait_until(t, start)
            dur = gate_duration(ins.gate, profile)
            out.append(ins)
            out.extend(_depolarize(ts, qns, ins.gate.arity > 1, condition=ins.control))
            for t in ts:
                out.extend(_relax(t, dur, qns[t], "gate"))
            finish(ts, start + dur)
        elif isinstance(ins, Measure):
            q = ins.qubit
            wait_until(q, clock[q])
            out.append(Measure(q, qns[q].me))
            finish((q,), clock[q] + profile.durations["readout"])
            measured.add(q)
        else:
            raise TypeError(f"unexpected instruction {ins!r} in an ideal circuit")

    t_end = max(clock) if n else 0.0
    for q in range(n):
        if q not in measured:
            wait_until(q, t_end)
    return circuit.with_instructions(out, noisy=True)


# named settings used by sweeps: (epsilon, enabled classes, exclusive)
PRESETS = {
    "noiseless": (1.0, ERROR_CLASSES),
    "default": (0.0, ERROR_CLASSES),
    "readout-off": (1.0, ("readout",)),
    "sge-off": (1.0, ("single_gate",)),
    "tge-off": (1.0, ("two_gate",)),
    "gates-off": (1.0, ("single_gate", "two_gate")),
    "spe-off": (1.0, ("state_prep",)),
    "t1-inf": (1.0, ("t1",)),
    "t2-inf": (1.0, ("t2",)),
    "t12-inf": (1.0, ("t1", "t2")),
}


def preset_scope(name: str, role_filter: Iterable[str] = ()) -> NoiseScope:
    if name not in PRESETS:
        raise ValueError(f"unknown noise preset {name!r}; choose from {sorted(PRESETS)}")
    eps, classes = PRESETS[name]
    return NoiseScope(eps, frozenset(classes), frozenset(role_filter))
