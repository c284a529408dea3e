"""Kraus channels used by the noise models."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULIS = (_I, _X, _Y, _Z)

TP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """CPTP map given by a Kraus set, acting on ``arity`` qubits."""

    kraus: tuple[np.ndarray, ...]
    label: str = "kraus"
    mixed_unitary: bool = field(default=False)

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ValueError("empty Kraus set")
        d = ks[0].shape[0]
        if d & (d - 1) or any(k.shape != (d, d) for k in ks):
            raise ValueError("Kraus operators must be square with power-of-two size")
        acc = sum(k.conj().T @ k for k in ks)
        err = np.max(np.abs(acc - np.eye(d)))
        if err > TP_TOL:
            raise ValueError(f"Kraus set is not trace preserving (deviation {err:.2e})")
        object.__setattr__(self, "kraus", ks)

    @property
    def arity(self) -> int:
        return int(np.log2(self.kraus[0].shape[0]))

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def superoperator(self) -> np.ndarray:
        """Matrix acting on row-major vec(rho): ``sum_k K (x) conj(K)``."""
        sop = self.__dict__.get("_sop")
        if sop is None:
            sop = sum(np.kron(k, k.conj()) for k in self.kraus)
            object.__setattr__(self, "_sop", sop)
        return sop

    def unitary_mixture(self) -> tuple[np.ndarray, list[np.ndarray]] | None:
        """``(weights, unitaries)`` if every Kraus operator is a scaled unitary."""
        if not self.mixed_unitary:
            return None
        d = self.dim
        weights, us = [], []
        for k in self.kraus:
            w = float(np.real(np.trace(k.conj().T @ k))) / d
            if w <= 0:
                continue
            weights.append(w)
            us.append(k / np.sqrt(w))
        return np.array(weights) / sum(weights), us


def _check_prob(p, name="p"):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


def depolarizing(p: float, n_qubits: int = 1) -> QuantumChannel:
    """``(1-p) rho + p I/2^n`` on ``n_qubits`` jointly, as a Pauli mixture."""
    _check_prob(p)
    d2 = 4**n_qubits
    ks = []
    for idx, paulis in enumerate(itertools.product(_PAULIS, repeat=n_qubits)):
        w = (1 - p + p / d2) if idx == 0 else p / d2
        ks.append(np.sqrt(w) * reduce(np.kron, paulis))
    return QuantumChannel(tuple(ks), f"depolarizing({p:g})", mixed_unitary=True)


def dephasing(p: float) -> QuantumChannel:
    """``(1-p) rho + p Z rho Z``."""
    _check_prob(p)
    return QuantumChannel(
        (np.sqrt(1 - p) * _I, np.sqrt(p) * _Z), f"dephasing({p:g})", mixed_unitary=True
    )


def bit_flip(p: float) -> QuantumChannel:
    _check_prob(p)
    return QuantumChannel(
        (np.sqrt(1 - p) * _I, np.sqrt(p) * _X), f"bit_flip({p:g})", mixed_unitary=True
    )


def thermal_relaxation(t: float, t1: float, t2: float) -> QuantumChannel:
    """Relaxation over duration ``t``.

    Populations relax as ``rho11 -> exp(-t/T1) rho11`` and coherences decay
    by ``exp(-t/(2 T2))``. That map is completely positive only while the
    coherence factor stays below ``sqrt(exp(-t/T1))`` (``T2 <= T1``); larger
    T2 values are capped at that amplitude-damping limit.
    """
    if t < 0:
        raise ValueError("duration must be non-negative")
    if t1 <= 0 or t2 <= 0:
        raise ValueError("T1 and T2 must be positive")
    decay = np.exp(-t / t1) if np.isfinite(t1) else 1.0
    gamma = 1.0 - decay
    coh = np.exp(-t / (2 * t2)) if np.isfinite(t2) else 1.0
    coh = min(coh, np.sqrt(decay))
    # amplitude damping leaves sqrt(decay) coherence; pure dephasing supplies the rest
    lam = coh / np.sqrt(decay) if decay > 0 else 0.0
    a0 = np.array([[1, 0], [0, np.sqrt(decay)]], dtype=complex)
    a1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    ks = []
    for w, op in ((np.sqrt((1 + lam) / 2), _I), (np.sqrt((1 - lam) / 2), _Z)):
        if w == 0:
            continue
        ks.extend([w * op @ a0, w * op @ a1])
    ks = [k for k in ks if np.any(np.abs(k) > 0)]
    return QuantumChannel(tuple(ks), f"thermal(t={t:g})")


def readout_flip(p01: float, p10: float) -> QuantumChannel:
    """Classical bit flip on a measured qubit: 0->1 with ``p01``, 1->0 with ``p10``."""
    _check_prob(p01, "p01")
    _check_prob(p10, "p10")
    ks = (
        np.array([[np.sqrt(1 - p01), 0], [0, 0]], dtype=complex),
        np.array([[0, 0], [np.sqrt(p01), 0]], dtype=complex),
        np.array([[0, 0], [0, np.sqrt(1 - p10)]], dtype=complex),
        np.array([[0, np.sqrt(p10)], [0, 0]], dtype=complex),
    )
    return QuantumChannel(ks, f"readout({p01:g},{p10:g})")


def conditioned(channel: QuantumChannel) -> QuantumChannel:
    """Apply ``channel`` only when an extra leading control qubit is ``|1>``."""
    d = channel.dim
    p0 = np.diag([1, 0]).astype(complex)
    p1 = np.diag([0, 1]).astype(complex)
    ks = [np.kron(p0, np.eye(d))] + [np.kron(p1, k) for k in channel.kraus]
    return QuantumChannel(tuple(ks), f"if({channel.label})")


def confusion_matrix(p01: float, p10: float) -> np.ndarray:
    """``A[observed, true]`` for a single readout bit."""
    return np.array([[1 - p01, p10], [p01, 1 - p10]])
