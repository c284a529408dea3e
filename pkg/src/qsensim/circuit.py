"""Ordered instruction lists with role labels."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .channels import QuantumChannel
from .gates import ARITY, Gate
from .state import ROLES, QuantumState


@dataclass(frozen=True)
class ChannelOp:
    """Noise channel on ``targets``; if ``condition`` is set it fires only
    when that (already measured) qubit's recorded bit is 1."""

    channel: QuantumChannel
    targets: tuple[int, ...]
    condition: int | None = None
    kind: str = "noise"

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != self.channel.arity:
            raise ValueError(
                f"channel acts on {self.channel.arity} qubit(s), got targets {self.targets}"
            )


@dataclass(frozen=True)
class Measure:
    """Z-basis readout of one qubit; ``readout`` is (p01, p10)."""

    qubit: int
    readout: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        p01, p10 = (float(x) for x in self.readout)
        if not (0 <= p01 <= 1 and 0 <= p10 <= 1):
            raise ValueError(f"readout error {self.readout} outside [0, 1]")
        object.__setattr__(self, "readout", (p01, p10))


@dataclass(frozen=True)
class Conditional:
    """``gate`` applied iff the recorded bit of ``control`` equals 1."""

    gate: Gate
    control: int


Instruction = Union[Gate, ChannelOp, Measure, Conditional]


def quantum_targets(ins: Instruction) -> tuple[int, ...]:
    if isinstance(ins, Gate):
        return ins.targets
    if isinstance(ins, ChannelOp):
        return ins.targets
    if isinstance(ins, Measure):
        return (ins.qubit,)
    return ins.gate.targets


def classical_controls(ins: Instruction) -> tuple[int, ...]:
    if isinstance(ins, Conditional):
        return (ins.control,)
    if isinstance(ins, ChannelOp) and ins.condition is not None:
        return (ins.condition,)
    return ()


@dataclass(frozen=True)
class Circuit:
    """A circuit over ``n_qubits`` qubits starting from ``|0...0>``.

    ``prepared`` lists the qubits initialized by the device and thus subject to
    state-preparation error (``None`` means all). ``initial`` optionally
    replaces the all-zeros start state.
    """

    n_qubits: int
    roles: tuple[str, ...]
    instructions: tuple[Instruction, ...] = ()
    prepared: tuple[int, ...] | None = None
    initial: QuantumState | None = field(default=None, compare=False)
    noisy: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "roles", tuple(self.roles))
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if len(self.roles) != self.n_qubits:
            raise ValueError("one role per qubit required")
        if set(self.roles) - set(ROLES):
            raise ValueError(f"unknown roles in {self.roles}")
        if self.initial is not None and self.initial.n_qubits != self.n_qubits:
            raise ValueError("initial state has the wrong width")
        self._validate()

    def _validate(self):
        measured: set[int] = set()
        for ins in self.instructions:
            for q in quantum_targets(ins) + classical_controls(ins):
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"qubit {q} out of range in {ins}")
            for c in classical_controls(ins):
                if c not in measured:
                    raise ValueError(f"qubit {c} used as a classical control before measurement")
            touched = quantum_targets(ins)
            again = measured.intersection(touched)
            if again:
                raise ValueError(f"qubit(s) {sorted(again)} acted on after measurement")
            if isinstance(ins, Measure):
                measured.add(ins.qubit)

    @property
    def measured(self) -> tuple[int, ...]:
        """Measured qubits in ascending index order."""
        return tuple(sorted(i.qubit for i in self.instructions if isinstance(i, Measure)))

    @property
    def classical_controls(self) -> set[int]:
        out: set[int] = set()
        for ins in self.instructions:
            out.update(classical_controls(ins))
        return out

    def qubits_with_role(self, role: str) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r == role)

    def gates(self) -> list[Gate]:
        return [i for i in self.instructions if isinstance(i, Gate)]

    def channels(self) -> list[ChannelOp]:
        return [i for i in self.instructions if isinstance(i, ChannelOp)]

    def with_instructions(self, instructions: Iterable[Instruction], noisy: bool | None = None) -> "Circuit":
        return Circuit(
            self.n_qubits,
            self.roles,
            tuple(instructions),
            self.prepared,
            self.initial,
            self.noisy if noisy is None else noisy,
        )

    def append(self, *instructions: Instruction) -> "Circuit":
        return self.with_instructions(self.instructions + tuple(instructions))

    def __len__(self):
        return len(self.instructions)

    def summary(self) -> str:
        lines = []
        for ins in self.instructions:
            if isinstance(ins, Gate):
                p = "" if ins.param is None else f"({ins.param:.4g})"
                lines.append(f"{ins.kind}{p} {list(ins.targets)}")
            elif isinstance(ins, ChannelOp):
                c = "" if ins.condition is None else f" if c{ins.condition}"
                lines.append(f"~{ins.channel.label} {list(ins.targets)}{c}")
            elif isinstance(ins, Measure):
                lines.append(f"M {ins.qubit}")
            else:
                lines.append(f"{ins.gate.kind} {list(ins.gate.targets)} if c{ins.control}")
        return "\n".join(lines)


def random_circuit(
    n_qubits: int,
    depth: int,
    rng: np.random.Generator,
    mid_circuit: bool = True,
) -> Circuit:
    """Random gate sequence ending in full readout.

    With ``mid_circuit`` one qubit may be measured early and then steer a
    classically controlled gate, exercising the feed-forward path.
    """
    kinds = [k for k in ARITY if k != "DELAY" and ARITY[k] <= n_qubits]
    ins: list[Instruction] = []
    live = list(range(n_qubits))
    early = None
    if mid_circuit and n_qubits >= 2 and rng.random() < 0.5:
        early = int(rng.integers(n_qubits))
    for step in range(depth):
        if early is not None and step == depth // 2 and early in live:
            ins.append(Measure(early))
            live.remove(early)
            others = [q for q in live]
            ins.append(Conditional(Gate(str(rng.choice(["X", "Z"])), (int(rng.choice(others)),)), early))
            continue
        pool = [k for k in kinds if ARITY[k] <= len(live)]
        kind = str(rng.choice(pool))
        targets = tuple(int(t) for t in rng.choice(live, ARITY[kind], replace=False))
        param = float(rng.uniform(-np.pi, np.pi)) if kind in ("P", "RX") else None
        ins.append(Gate(kind, targets, param))
    ins.extend(Measure(q) for q in live)
    return Circuit(n_qubits, ("sensing",) * n_qubits, tuple(ins))


def roles_for(n_sensing: int, memory: bool = True, computing: int = 0) -> tuple[str, ...]:
    return ("sensing",) * n_sensing + ("computing",) * computing + (("memory",) if memory else ())


__all__ = [
    "Circuit",
    "ChannelOp",
    "Measure",
    "Conditional",
    "Instruction",
    "random_circuit",
    "roles_for",
    "quantum_targets",
    "classical_controls",
]
