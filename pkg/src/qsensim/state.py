"""Dense pure-state / density-matrix representation and the basic operations.

States are stored as tensors with one axis of length two per qubit (two per
qubit for density matrices, rows first). Qubit 0 is the most significant bit,
so flattening the tensor gives the usual computational-basis ordering.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .channels import QuantumChannel
from .gates import Gate

ROLES = ("sensing", "memory", "computing")
NORM_TOL = 1e-10
PROB_TOL = 1e-8


# ---------------------------------------------------------------- kernels

def apply_matrix_pure(psi: np.ndarray, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply ``u`` to ``targets`` of a state tensor of shape ``(2,)*n``."""
    k = len(targets)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, psi, axes=(list(range(k, 2 * k)), list(targets)))
    return np.moveaxis(out, list(range(k)), list(targets))


def apply_matrix_dm(rho: np.ndarray, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """``U rho U^dagger`` on a tensor of shape ``(2,)*2n``."""
    n = rho.ndim // 2
    rho = apply_matrix_pure(rho, u, targets)
    return apply_matrix_pure(rho, u.conj(), [t + n for t in targets])


def apply_superop_dm(rho: np.ndarray, sop: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply a superoperator built as ``sum K (x) conj(K)`` to ``targets``."""
    n = rho.ndim // 2
    k = len(targets)
    axes = list(targets) + [t + n for t in targets]
    moved = np.moveaxis(rho, axes, list(range(2 * k)))
    shape = moved.shape
    out = (sop @ moved.reshape(4**k, -1)).reshape(shape)
    return np.moveaxis(out, list(range(2 * k)), axes)


def probabilities(data: np.ndarray, is_dm: bool) -> np.ndarray:
    """Computational-basis probabilities as a flat array of length ``2^n``."""
    if is_dm:
        n = data.ndim // 2
        d = 2**n
        return np.real(np.diagonal(data.reshape(d, d))).copy()
    return np.abs(data.reshape(-1)) ** 2


def marginal(probs: np.ndarray, n: int, qubits: Sequence[int]) -> np.ndarray:
    """Marginal over ``qubits`` (in the given order) from a full distribution."""
    t = probs.reshape((2,) * n)
    others = tuple(q for q in range(n) if q not in qubits)
    m = t.sum(axis=others) if others else t
    kept = sorted(qubits)
    # summed tensor has axes in ascending qubit order; reorder to request
    m = np.transpose(m, [kept.index(q) for q in qubits]) if len(qubits) > 1 else m
    return m.reshape(-1)


# ---------------------------------------------------------------- state type

@dataclass
class QuantumState:
    """A pure state vector or density matrix on ``n_qubits`` with role labels."""

    n_qubits: int
    data: np.ndarray
    roles: tuple[str, ...] = ()
    is_dm: bool = False

    def __post_init__(self):
        n = self.n_qubits
        if n < 1:
            raise ValueError("need at least one qubit")
        self.data = np.asarray(self.data, dtype=complex)
        size = self.data.size
        if self.is_dm:
            if size != 4**n:
                raise ValueError(f"density matrix needs 4^{n} entries, got {size}")
            self.data = self.data.reshape((2,) * (2 * n))
        else:
            if size != 2**n:
                raise ValueError(f"state vector needs 2^{n} entries, got {size}")
            self.data = self.data.reshape((2,) * n)
        if not self.roles:
            self.roles = ("sensing",) * n
        self.roles = tuple(self.roles)
        if len(self.roles) != n:
            raise ValueError("one role per qubit required")
        bad = set(self.roles) - set(ROLES)
        if bad:
            raise ValueError(f"unknown role(s) {sorted(bad)}")

    @classmethod
    def zeros(cls, n: int, roles: Sequence[str] = (), density: bool = False) -> "QuantumState":
        psi = np.zeros(2**n, dtype=complex)
        psi[0] = 1.0
        st = cls(n, psi, tuple(roles))
        return st.to_density() if density else st

    @classmethod
    def from_vector(cls, vec, roles: Sequence[str] = ()) -> "QuantumState":
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        n = int(round(np.log2(vec.size)))
        return cls(n, vec, tuple(roles))

    @classmethod
    def from_density(cls, rho, roles: Sequence[str] = ()) -> "QuantumState":
        rho = np.asarray(rho, dtype=complex)
        d = int(round(np.sqrt(rho.size)))
        n = int(round(np.log2(d)))
        return cls(n, rho, tuple(roles), is_dm=True)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def vector(self) -> np.ndarray:
        if self.is_dm:
            raise ValueError("mixed state has no state vector")
        return self.data.reshape(-1)

    def density(self) -> np.ndarray:
        if self.is_dm:
            return self.data.reshape(self.dim, self.dim)
        v = self.data.reshape(-1)
        return np.outer(v, v.conj())

    def to_density(self) -> "QuantumState":
        if self.is_dm:
            return self
        return QuantumState(self.n_qubits, self.density(), self.roles, is_dm=True)

    def copy(self) -> "QuantumState":
        return QuantumState(self.n_qubits, self.data.copy(), self.roles, self.is_dm)

    def probabilities(self) -> np.ndarray:
        return probabilities(self.data, self.is_dm)

    def reduced(self, keep: Sequence[int]) -> np.ndarray:
        """Reduced density matrix on ``keep`` (ordered as given)."""
        keep = list(keep)
        n = self.n_qubits
        rho = self.density().reshape((2,) * (2 * n))
        trace_out = [q for q in range(n) if q not in keep]
        for q in sorted(trace_out, reverse=True):
            m = rho.ndim // 2
            rho = np.trace(rho, axis1=q, axis2=q + m)
        remaining = [q for q in range(n) if q in keep]
        perm = [remaining.index(q) for q in keep]
        k = len(keep)
        rho = np.transpose(rho, perm + [p + k for p in perm])
        return rho.reshape(2**k, 2**k)

    def check(self, tol: float = NORM_TOL) -> None:
        """Raise if the state violates normalization, hermiticity or positivity."""
        if self.is_dm:
            rho = self.density()
            if abs(np.trace(rho) - 1) > tol:
                raise ValueError(f"trace {np.trace(rho).real:.12f} != 1")
            if np.max(np.abs(rho - rho.conj().T)) > tol:
                raise ValueError("density matrix is not Hermitian")
            if self.n_qubits <= 8 and np.linalg.eigvalsh(rho).min() < -1e-9:
                raise ValueError("density matrix is not positive semidefinite")
        else:
            norm = np.sum(np.abs(self.data) ** 2)
            if abs(norm - 1) > tol:
                raise ValueError(f"state norm {norm:.12f} != 1")


def _check_targets(n: int, targets: Sequence[int], arity: int) -> None:
    if len(targets) != arity:
        raise ValueError(f"expected {arity} target(s), got {len(targets)}")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"target {t} out of range for {n} qubits")
    if len(set(targets)) != len(targets):
        raise ValueError(f"repeated target in {tuple(targets)}")


def apply_gate(state: QuantumState, gate: Gate) -> QuantumState:
    _check_targets(state.n_qubits, gate.targets, gate.arity)
    u = gate.matrix
    if state.is_dm:
        data = apply_matrix_dm(state.data, u, gate.targets)
    else:
        data = apply_matrix_pure(state.data, u, gate.targets)
    return QuantumState(state.n_qubits, data, state.roles, state.is_dm)


def apply_channel(state: QuantumState, channel: QuantumChannel, targets: Sequence[int]) -> QuantumState:
    """``rho -> sum_k K rho K^dagger``; pure inputs are promoted first."""
    targets = tuple(targets)
    _check_targets(state.n_qubits, targets, channel.arity)
    st = state.to_density()
    data = apply_superop_dm(st.data, channel.superoperator(), targets)
    return QuantumState(st.n_qubits, data, st.roles, is_dm=True)


# ---------------------------------------------------------------- measurement

@dataclass(frozen=True)
class MeasurementSpec:
    """Which qubits to read, in which basis, with what readout flip rates."""

    qubits: tuple[int, ...]
    basis: tuple[str, ...] = ()
    readout_error: tuple[tuple[float, float], ...] = ()
    shots: int = 1000

    def __post_init__(self):
        k = len(self.qubits)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        basis = tuple(b.upper() for b in self.basis) or ("Z",) * k
        ro = tuple(tuple(float(x) for x in e) for e in self.readout_error) or ((0.0, 0.0),) * k
        if len(basis) != k or len(ro) != k:
            raise ValueError("basis and readout_error need one entry per qubit")
        if set(basis) - {"Z", "X"}:
            raise ValueError(f"unsupported basis in {basis}")
        for p01, p10 in ro:
            if not (0 <= p01 <= 1 and 0 <= p10 <= 1):
                raise ValueError(f"readout error ({p01}, {p10}) outside [0, 1]")
        if self.shots < 1:
            raise ValueError("shots must be positive")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "readout_error", ro)


@dataclass
class OutcomeCounts:
    """Bitstring histogram. Bit ``i`` of a key is ``qubits[i]``."""

    counts: dict[str, int]
    total_shots: int
    qubits: tuple[int, ...] = ()
    kept_shots: int = field(default=-1)

    def __post_init__(self):
        self.counts = {k: int(v) for k, v in self.counts.items() if v}
        s = sum(self.counts.values())
        if self.kept_shots < 0:
            self.kept_shots = s
        if s != self.kept_shots or self.kept_shots > self.total_shots:
            raise ValueError("counts do not add up to kept_shots <= total_shots")
        if self.counts and not self.qubits:
            self.qubits = tuple(range(len(next(iter(self.counts)))))

    @property
    def discarded(self) -> int:
        return self.total_shots - self.kept_shots

    @property
    def kept_fraction(self) -> float:
        return self.kept_shots / self.total_shots

    def frequencies(self) -> dict[str, float]:
        return {k: v / self.kept_shots for k, v in self.counts.items()}

    def count_where(self, qubit: int, value: int) -> int:
        i = self.qubits.index(qubit)
        c = str(value)
        return sum(v for k, v in self.counts.items() if k[i] == c)

    def probability(self, qubit: int, value: int = 1) -> float:
        if self.kept_shots == 0:
            raise ValueError("no shots")
        return self.count_where(qubit, value) / self.kept_shots

    def as_array(self) -> np.ndarray:
        """Counts indexed by the integer value of the bitstring."""
        out = np.zeros(2 ** len(self.qubits), dtype=np.int64)
        for k, v in self.counts.items():
            out[int(k, 2)] = v
        return out

    @classmethod
    def from_array(cls, arr: np.ndarray, qubits: Sequence[int], total: int | None = None) -> "OutcomeCounts":
        k = len(qubits)
        counts = {format(i, f"0{k}b"): int(c) for i, c in enumerate(arr) if c}
        kept = int(np.sum(arr))
        return cls(counts, kept if total is None else total, tuple(qubits), kept)


def bits_to_counts(bits: np.ndarray, qubits: Sequence[int], total: int | None = None) -> OutcomeCounts:
    """Histogram an array of shape ``(shots, k)`` holding 0/1 values."""
    k = bits.shape[1]
    weights = 1 << np.arange(k - 1, -1, -1)
    idx = bits.astype(np.int64) @ weights
    return OutcomeCounts.from_array(np.bincount(idx, minlength=2**k), qubits, total)


def sample_bits(probs: np.ndarray, k: int, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``shots`` outcomes from a length-``2^k`` distribution as a bit array."""
    total = probs.sum()
    if abs(total - 1) > PROB_TOL:
        raise ValueError(f"probabilities sum to {total:.10f}; state is corrupted")
    p = np.clip(probs, 0, None)
    freq = rng.multinomial(shots, p / p.sum())
    idx = np.repeat(np.arange(p.size), freq)
    rng.shuffle(idx)
    return ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)


def flip_bits(bits: np.ndarray, readout: Sequence[tuple[float, float]], rng) -> np.ndarray:
    """Independent classical flips: 0->1 with p01 and 1->0 with p10 per column."""
    p01 = np.array([r[0] for r in readout])
    p10 = np.array([r[1] for r in readout])
    u = rng.random(bits.shape)
    flip = np.where(bits == 0, u < p01, u < p10)
    return bits ^ flip.astype(np.int8)


def measure(state: QuantumState, spec: MeasurementSpec, rng_seed=None) -> OutcomeCounts:
    """Sample ``spec.shots`` readouts, then apply per-bit readout flips."""
    rng = np.random.default_rng(rng_seed)
    n = state.n_qubits
    _check_targets(n, spec.qubits, len(spec.qubits))
    st = state
    for q, b in zip(spec.qubits, spec.basis):
        if b == "X":
            st = apply_gate(st, Gate("H", (q,)))
    probs = marginal(st.probabilities(), n, spec.qubits)
    bits = sample_bits(probs, len(spec.qubits), spec.shots, rng)
    bits = flip_bits(bits, spec.readout_error, rng)
    return bits_to_counts(bits, spec.qubits)


def classically_controlled(
    state: QuantumState, record: Mapping[int, int], control: int, gate: Gate, when: int = 1
) -> QuantumState:
    """Apply ``gate`` iff the recorded outcome of ``control`` equals ``when``.

    ``record`` maps measured qubit index to its (post-readout) bit for the
    current shot. With X-basis readout a recorded 1 means ``|->``.
    """
    if control not in record:
        raise ValueError(f"qubit {control} has not been measured in this shot")
    if int(record[control]) == when:
        return apply_gate(state, gate)
    return state


def parity(record: Mapping[int, int], qubits: Sequence[int]) -> int:
    """XOR of the recorded bits, i.e. whether an odd number of ones was seen."""
    missing = [q for q in qubits if q not in record]
    if missing:
        raise ValueError(f"qubits {missing} have not been measured")
    return int(sum(int(record[q]) for q in qubits) % 2)


def postselect(counts: OutcomeCounts, pattern: Mapping[int, int]) -> OutcomeCounts:
    """Keep shots whose bits on ``pattern``'s qubits match the required values."""
    if not pattern:
        return OutcomeCounts(dict(counts.counts), counts.total_shots, counts.qubits, counts.kept_shots)
    missing = [q for q in pattern if q not in counts.qubits]
    if missing:
        raise ValueError(f"post-selection on unmeasured qubits {missing}")
    idx = [(counts.qubits.index(q), str(int(v))) for q, v in pattern.items()]
    kept = {k: v for k, v in counts.counts.items() if all(k[i] == c for i, c in idx)}
    n_kept = sum(kept.values())
    if n_kept == 0:
        raise ValueError("post-selection discarded every shot")
    return OutcomeCounts(kept, counts.total_shots, counts.qubits, n_kept)


def hadamard_all(state: QuantumState, qubits: Sequence[int]) -> QuantumState:
    for q in qubits:
        state = apply_gate(state, Gate("H", (q,)))
    return state


__all__ = [
    "QuantumState",
    "MeasurementSpec",
    "OutcomeCounts",
    "apply_gate",
    "apply_channel",
    "measure",
    "classically_controlled",
    "postselect",
    "parity",
    "bits_to_counts",
]
