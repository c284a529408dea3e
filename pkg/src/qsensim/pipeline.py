"""Builders for the sensing pipeline stages and their assembly into circuits.

A pipeline is an ordered list of stages: prepare an entangled probe, let it
pick up a signal, store the signal on a memory qubit, idle, retrieve the
stored phase onto fresh sensors, and finally read the memory out.

Qubit layout: each sensing group occupies ``n_sensing`` consecutive indices
(the first group starts at 0, every retrieval allocates the next group) and
the memory qubit is always the last index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit, Conditional, Instruction, Measure
from .gates import CNOT, RX, H, P, X, Z, Delay
from .noise import NoiseProfile, NoiseScope, attach_noise

STAGES = ("probe_prep", "sensing", "storage", "delay", "retrieval", "processing")
CORRECTION_MODES = ("post_processing", "physical")


def _as_qubits(qubits) -> list[int]:
    if isinstance(qubits, (int, np.integer)):
        return list(range(int(qubits)))
    return [int(q) for q in qubits]


def build_probe_prep(qubits, flip: Sequence[int] = (), style: str = "ghz") -> list[Instruction]:
    """Entangle ``qubits`` (or ``range(n)`` for an int).

    ``ghz``: H on the first qubit and a CNOT chain, giving
    ``(|0..0> + |1..1>)/sqrt(2)``. Qubits in ``flip`` get an X before the
    chain, which flips them and every later qubit in both branches.

    ``parity``: H on all but the first qubit, then CNOTs from each qubit onto
    its predecessor, so the first qubit holds the parity of the others. Used by
    the rotation-sensing probe, where a mirrored undo maps a common X rotation
    on all n qubits onto an n-fold rotation of the first.
    """
    qs = _as_qubits(qubits)
    if not qs:
        raise ValueError("probe preparation needs at least one qubit")
    if style == "ghz":
        out: list[Instruction] = [X(qs[i]) for i in flip]
        out.append(H(qs[0]))
        out.extend(CNOT(a, b) for a, b in zip(qs, qs[1:]))
        return out
    if style == "parity":
        out = [H(q) for q in qs[1:]]
        out.extend(CNOT(qs[i], qs[i - 1]) for i in range(1, len(qs)))
        return out
    raise ValueError(f"unknown probe style {style!r}")


def build_probe_unprep(qubits, style: str = "parity") -> list[Instruction]:
    """Inverse of :func:`build_probe_prep` (gate order reversed)."""
    if style != "parity":
        raise ValueError("only the parity probe has an undo stage")
    qs = _as_qubits(qubits)
    out: list[Instruction] = [CNOT(qs[i], qs[i - 1]) for i in range(len(qs) - 1, 0, -1)]
    out.extend(H(q) for q in qs[1:])
    return out


def build_sensing(qubits, encoding: str, angles) -> list[Instruction]:
    """One signal gate per qubit: ``P(phi_i)`` or ``Rx(phi_i)``."""
    qs = _as_qubits(qubits)
    if np.ndim(angles) == 0:
        ang = np.full(len(qs), float(angles))
    else:
        ang = np.asarray(angles, dtype=float)
    if len(ang) != len(qs):
        raise ValueError(f"{len(qs)} qubits but {len(ang)} angles")
    if encoding == "phase":
        return [P(float(a), q) for q, a in zip(qs, ang)]
    if encoding == "rx":
        return [RX(float(a), q) for q, a in zip(qs, ang)]
    raise ValueError(f"unknown encoding {encoding!r}")


def build_storage(
    sensing,
    memory: int | None,
    correction_mode: str = "post_processing",
    entangle: bool = True,
    transfer: str = "phase",
) -> list[Instruction]:
    """Move the sensed signal onto the memory qubit.

    ``phase`` transfer: CNOT from the first sensor into memory (skipped when
    memory is already part of the entangled branch), then every sensor is
    read in the X basis. Each ``|->`` result flips the sign of the memory's
    excited branch; with ``physical`` correction a classically controlled Z
    per sensor undoes it, otherwise the parity of the records is applied when
    the data are interpreted.

    ``population`` transfer: undo the parity probe, copy the first sensor onto
    memory with a CNOT, and read the remaining sensors in Z for
    post-selection.
    """
    if memory is None:
        raise ValueError("storage needs a memory qubit")
    qs = _as_qubits(sensing)
    if correction_mode not in CORRECTION_MODES:
        raise ValueError(f"unknown correction mode {correction_mode!r}")
    out: list[Instruction] = []
    if transfer == "phase":
        if entangle:
            out.append(CNOT(qs[0], memory))
        for q in qs:
            out.extend([H(q), Measure(q)])
        if correction_mode == "physical":
            out.extend(Conditional(Z(memory), q) for q in qs)
        return out
    if transfer == "population":
        out.extend(build_probe_unprep(qs))
        out.append(CNOT(qs[0], memory))
        out.extend(Measure(q) for q in qs)
        return out
    raise ValueError(f"unknown transfer {transfer!r}")


def build_delay(memory: int, tau: float, rate: float = 1.0) -> list[Instruction]:
    """Idle the memory for ``tau``, accruing phase ``rate * tau``."""
    if tau < 0:
        raise ValueError("delay must be non-negative")
    if tau == 0:
        return []
    return [Delay(tau, memory, rate)]


def build_retrieval(memory: int, fresh: Sequence[int]) -> list[Instruction]:
    """Fan the memory out onto fresh sensors with CNOTs."""
    return [CNOT(memory, f) for f in fresh]


def build_processing(memory: int, basis: str = "X") -> list[Instruction]:
    basis = basis.upper()
    if basis == "X":
        return [H(memory), Measure(memory)]
    if basis == "Z":
        return [Measure(memory)]
    raise ValueError(f"unknown basis {basis!r}")


@dataclass(frozen=True)
class StageSpec:
    """One pipeline stage.

    ``qubits`` and ``flip`` index into the currently active sensing group; an
    empty ``qubits`` means the whole group.
    """

    kind: str
    qubits: tuple[int, ...] = ()
    encoding: str = "phase"
    angles: tuple[float, ...] | float = 0.0
    tau: float = 0.0
    rate: float = 1.0
    basis: str = "X"
    flip: tuple[int, ...] = ()
    style: str = "ghz"
    transfer: str = "phase"

    def __post_init__(self):
        if self.kind not in STAGES:
            raise ValueError(f"unknown stage {self.kind!r}")


@dataclass(frozen=True)
class PipelineSpec:
    n_sensing: int
    steps: tuple[StageSpec, ...]
    memory_enabled: bool = True
    correction_mode: str = "post_processing"

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.n_sensing < 1:
            raise ValueError("need at least one sensing qubit")
        if not self.memory_enabled and any(s.kind in ("storage", "retrieval", "delay") for s in self.steps):
            raise ValueError("storage, delay and retrieval need a memory qubit")


@dataclass
class PipelinePlan:
    """Ideal circuit plus the bookkeeping needed to interpret its output."""

    circuit: Circuit
    memory: int | None
    groups: list[list[int]]
    parity_qubits: list[int] = field(default_factory=list)
    postselect_qubits: list[int] = field(default_factory=list)
    memory_basis: str | None = None


def plan(spec: PipelineSpec) -> PipelinePlan:
    if not spec.steps:
        raise ValueError("pipeline has no stages")
    n = spec.n_sensing
    n_groups = 1 + sum(s.kind == "retrieval" for s in spec.steps)
    n_qubits = n * n_groups + (1 if spec.memory_enabled else 0)
    memory = n_qubits - 1 if spec.memory_enabled else None
    roles = ("sensing",) * (n * n_groups) + (("memory",) if spec.memory_enabled else ())
    groups = [list(range(g * n, (g + 1) * n)) for g in range(n_groups)]

    ins: list[Instruction] = []
    out = PipelinePlan(None, memory, groups)  # circuit filled in below
    g = 0
    entangled = stored = finished = False
    for i, st in enumerate(spec.steps):
        if finished:
            raise ValueError("no stage may follow processing")
        grp = groups[g]
        sel = [grp[j] for j in st.qubits] if st.qubits else grp
        if st.kind == "probe_prep":
            if stored:
                raise ValueError("probe preparation after storage; use retrieval to continue")
            if entangled:
                raise ValueError("sensing group prepared twice")
            ins += build_probe_prep(sel, st.flip, st.style)
            entangled = True
        elif st.kind == "sensing":
            if not entangled:
                raise ValueError(f"stage {i}: sensing before probe preparation or retrieval")
            ins += build_sensing(sel, st.encoding, st.angles)
        elif st.kind == "storage":
            if not entangled:
                raise ValueError(f"stage {i}: storage without an active probe")
            ins += build_storage(grp, memory, spec.correction_mode, entangle=not stored, transfer=st.transfer)
            if st.transfer == "phase" and spec.correction_mode == "post_processing":
                out.parity_qubits += grp
            if st.transfer == "population":
                out.postselect_qubits += grp[1:]
            entangled, stored = False, True
        elif st.kind == "delay":
            if not stored:
                raise ValueError(f"stage {i}: delay before anything was stored")
            ins += build_delay(memory, st.tau, st.rate)
        elif st.kind == "retrieval":
            if not stored or entangled:
                raise ValueError(f"stage {i}: retrieval needs a stored phase and no active probe")
            g += 1
            ins += build_retrieval(memory, groups[g])
            entangled = True
        elif st.kind == "processing":
            if not stored:
                raise ValueError(f"stage {i}: processing before storage")
            ins += build_processing(memory, st.basis)
            out.memory_basis = st.basis.upper()
            finished = True
    out.circuit = Circuit(n_qubits, roles, tuple(ins))
    return out


def assemble(
    spec: PipelineSpec,
    profile: NoiseProfile | None = None,
    scope: NoiseScope | None = None,
    delay_relaxation: bool = True,
) -> Circuit:
    """Concatenate the stages of ``spec`` and attach noise."""
    circ = plan(spec).circuit
    if profile is None:
        return circ
    return attach_noise(circ, profile, scope, delay_relaxation)


def memory_phase(rho: np.ndarray) -> float:
    """Relative phase of ``|1>`` vs ``|0>`` in a one-qubit density matrix."""
    return float(np.angle(rho[1, 0]))
