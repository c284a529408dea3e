"""Circuit execution: exact dense evolution and Monte Carlo trajectories.

The dense backend never collapses. Measurements are deferred to the end, and
classically controlled operations become quantum-controlled ones. This is
exact because a measured qubit is never touched again. It yields the exact
outcome distribution, which is then sampled.

The trajectory backend follows one pure state per shot. Every channel picks
a Kraus branch with its Born weight and measurements collapse the state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import QuantumChannel, conditioned, confusion_matrix, readout_flip
from .circuit import ChannelOp, Circuit, Conditional, Measure
from .gates import Gate, controlled
from .state import (
    PROB_TOL,
    OutcomeCounts,
    QuantumState,
    apply_matrix_dm,
    apply_matrix_pure,
    apply_superop_dm,
    marginal,
    probabilities,
)

DENSE_MAX_QUBITS = 12
_TRAJ_BUDGET = 2**20  # amplitudes per trajectory chunk


def auto_backend(n_qubits: int) -> str:
    return "dense" if n_qubits <= DENSE_MAX_QUBITS else "trajectory"


@dataclass
class DenseResult:
    """Exact readout distribution over ``qubits`` (ascending) plus the final
    state before readout error."""

    probs: np.ndarray
    qubits: tuple[int, ...]
    state: QuantumState

    def sample(self, shots: int, seed=None) -> OutcomeCounts:
        if shots < 1:
            raise ValueError("shots must be positive")
        rng = np.random.default_rng(seed)
        p = np.clip(self.probs, 0, None)
        return OutcomeCounts.from_array(rng.multinomial(shots, p / p.sum()), self.qubits)

    def probability(self, qubit: int, value: int = 1) -> float:
        k = len(self.qubits)
        t = self.probs.reshape((2,) * k)
        i = self.qubits.index(qubit)
        return float(np.take(t, value, axis=i).sum())


def _apply_confusion(probs: np.ndarray, k: int, axis: int, a: np.ndarray) -> np.ndarray:
    t = probs.reshape((2,) * k)
    t = np.moveaxis(np.tensordot(a, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def simulate_dense(circuit: Circuit, fuse: bool = True) -> DenseResult:
    """Evolve ``circuit`` exactly.

    Pure states stay pure until the first channel. Consecutive single-qubit
    channels on a qubit are composed and applied lazily, which is exact since
    they commute with everything that does not touch that qubit.
    """
    n = circuit.n_qubits
    init = circuit.initial or QuantumState.zeros(n, circuit.roles)
    data, is_dm = init.data.copy(), init.is_dm
    controls = circuit.classical_controls
    pending: dict[int, np.ndarray] = {}
    final_readout: dict[int, tuple[float, float]] = {}
    cond_cache: dict[int, QuantumChannel] = {}

    def promote():
        nonlocal data, is_dm
        if not is_dm:
            v = data.reshape(-1)
            data = np.outer(v, v.conj()).reshape((2,) * (2 * n))
            is_dm = True

    def flush(qs):
        nonlocal data
        for q in qs:
            sop = pending.pop(q, None)
            if sop is not None:
                data = apply_superop_dm(data, sop, (q,))

    def unitary(u, targets):
        nonlocal data
        flush(targets)
        if is_dm:
            data = apply_matrix_dm(data, u, targets)
        else:
            data = apply_matrix_pure(data, u, targets)

    for ins in circuit.instructions:
        if isinstance(ins, Gate):
            unitary(ins.matrix, ins.targets)
        elif isinstance(ins, Conditional):
            unitary(controlled(ins.gate.matrix), (ins.control,) + ins.gate.targets)
        elif isinstance(ins, ChannelOp):
            promote()
            if ins.condition is None and len(ins.targets) == 1 and fuse:
                q = ins.targets[0]
                sop = ins.channel.superoperator()
                prev = pending.get(q)
                pending[q] = sop if prev is None else sop @ prev
                continue
            ch, targets = ins.channel, ins.targets
            if ins.condition is not None:
                key = id(ch)
                if key not in cond_cache:
                    cond_cache[key] = conditioned(ch)
                ch, targets = cond_cache[key], (ins.condition,) + targets
            flush(targets)
            data = apply_superop_dm(data, ch.superoperator(), targets)
        elif isinstance(ins, Measure):
            flush((ins.qubit,))
            if ins.readout == (0.0, 0.0):
                continue
            if ins.qubit in controls:
                # the flipped bit steers later operations, so flip the qubit itself
                promote()
                data = apply_superop_dm(data, readout_flip(*ins.readout).superoperator(), (ins.qubit,))
            else:
                final_readout[ins.qubit] = ins.readout
        else:
            raise TypeError(f"unknown instruction {ins!r}")
    flush(list(pending))

    state = QuantumState(n, data, circuit.roles, is_dm)
    measured = circuit.measured
    probs = probabilities(data, is_dm)
    total = probs.sum()
    if abs(total - 1) > PROB_TOL:
        raise ValueError(f"probabilities sum to {total:.10f}; state is corrupted")
    if not measured:
        return DenseResult(np.array([1.0]), (), state)
    probs = marginal(probs, n, measured)
    k = len(measured)
    for q, (p01, p10) in final_readout.items():
        probs = _apply_confusion(probs, k, measured.index(q), confusion_matrix(p01, p10))
    return DenseResult(probs, measured, state)


# ---------------------------------------------------------------- trajectories

def _apply_batch(psi: np.ndarray, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply ``u`` to every state in a batch of shape ``(B,) + (2,)*n``."""
    k = len(targets)
    axes = [t + 1 for t in targets]
    out = np.tensordot(u.reshape((2,) * (2 * k)), psi, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _norms(psi: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(psi.reshape(psi.shape[0], -1)) ** 2, axis=1)


def _sample_channel(psi, channel: QuantumChannel, targets, rng) -> np.ndarray:
    b = psi.shape[0]
    mix = channel.unitary_mixture()
    if mix is not None:
        w, us = mix
        choice = rng.choice(len(w), size=b, p=w)
        for j in np.unique(choice):
            u = us[j]
            if np.allclose(u, np.eye(u.shape[0]) * u[0, 0]):
                continue
            sel = choice == j
            psi[sel] = _apply_batch(psi[sel], u, targets)
        return psi
    # Born weights from the reduced state on the targets: w_k = tr(K rho K^dag)
    d = channel.dim
    axes = [t + 1 for t in targets]
    a = np.moveaxis(psi, axes, list(range(1, len(axes) + 1))).reshape(b, d, -1)
    rho = np.einsum("bir,bjr->bij", a, a.conj())
    kk = np.stack([k.conj().T @ k for k in channel.kraus])
    weights = np.real(np.einsum("kji,bij->bk", kk, rho))
    weights = np.clip(weights, 0, None)
    tot = weights.sum(axis=1)
    if np.any(tot < 1e-300):
        raise FloatingPointError(f"channel {channel.label} has no valid branch")
    u = rng.random(b) * tot
    choice = np.minimum((np.cumsum(weights, axis=1) < u[:, None]).sum(axis=1), len(channel.kraus) - 1)
    for j in np.unique(choice):
        sel = choice == j
        out = _apply_batch(psi[sel], channel.kraus[j], targets)
        psi[sel] = out / np.sqrt(weights[sel, j]).reshape((-1,) + (1,) * (out.ndim - 1))
    return psi


def _initial_batch(circuit: Circuit, b: int, rng) -> np.ndarray:
    n = circuit.n_qubits
    init = circuit.initial
    if init is None:
        psi = np.zeros((b, 2**n), dtype=complex)
        psi[:, 0] = 1.0
    elif not init.is_dm:
        psi = np.tile(init.vector(), (b, 1))
    else:
        # unravel a mixed start state into its eigen-ensemble
        vals, vecs = np.linalg.eigh(init.density())
        vals = np.clip(vals, 0, None)
        idx = rng.choice(len(vals), size=b, p=vals / vals.sum())
        psi = vecs[:, idx].T.copy()
    return psi.reshape((b,) + (2,) * n)


def _run_batch(circuit: Circuit, b: int, rng) -> np.ndarray:
    n = circuit.n_qubits
    psi = _initial_batch(circuit, b, rng)
    rec = np.zeros((b, n), dtype=np.int8)
    for ins in circuit.instructions:
        if isinstance(ins, Gate):
            psi = _apply_batch(psi, ins.matrix, ins.targets)
        elif isinstance(ins, Conditional):
            sel = rec[:, ins.control] == 1
            if sel.any():
                psi[sel] = _apply_batch(psi[sel], ins.gate.matrix, ins.gate.targets)
        elif isinstance(ins, ChannelOp):
            if ins.condition is None:
                psi = _sample_channel(psi, ins.channel, ins.targets, rng)
            else:
                sel = rec[:, ins.condition] == 1
                if sel.any():
                    psi[sel] = _sample_channel(psi[sel], ins.channel, ins.targets, rng)
        elif isinstance(ins, Measure):
            q = ins.qubit
            one = np.take(psi, 1, axis=q + 1)
            p1 = np.clip(_norms(one), 0.0, 1.0)
            out = (rng.random(b) < p1).astype(np.int8)
            keep = np.where(out[:, None] == 1, 1.0, 0.0)
            mask = np.stack([1.0 - keep, keep], axis=1).reshape((b, 2) + (1,) * (n - 1))
            psi = np.moveaxis(np.moveaxis(psi, q + 1, 1) * mask, 1, q + 1)
            psi = psi / np.sqrt(_norms(psi)).reshape((b,) + (1,) * n)
            p01, p10 = ins.readout
            flip = np.where(out == 0, rng.random(b) < p01, rng.random(b) < p10)
            if flip.any():
                psi[flip] = _apply_batch(psi[flip], Gate("X", (q,)).matrix, (q,))
            rec[:, q] = out ^ flip.astype(np.int8)
        else:
            raise TypeError(f"unknown instruction {ins!r}")
    return rec


def simulate_trajectories(circuit: Circuit, shots: int, seed=None) -> OutcomeCounts:
    """Sample ``shots`` independent trajectories.

    Shots are processed in fixed-size chunks, each with its own generator
    derived from ``(seed, chunk index)``, so results do not depend on how the
    work is scheduled.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    measured = circuit.measured
    k = len(measured)
    chunk = max(1, _TRAJ_BUDGET >> circuit.n_qubits)
    base = np.random.SeedSequence().entropy if seed is None else int(seed)
    totals = np.zeros(2**k, dtype=np.int64)
    weights = 1 << np.arange(k - 1, -1, -1)
    for ci, start in enumerate(range(0, shots, chunk)):
        b = min(chunk, shots - start)
        rng = np.random.default_rng([base, ci])
        rec = _run_batch(circuit, b, rng)
        idx = rec[:, list(measured)].astype(np.int64) @ weights if k else np.zeros(b, dtype=np.int64)
        totals += np.bincount(idx, minlength=2**k)
    return OutcomeCounts.from_array(totals, measured)


def qtrajectory(circuit: Circuit, shots: int, rng_seed=None) -> OutcomeCounts:
    return simulate_trajectories(circuit, shots, rng_seed)


def sample_counts(circuit: Circuit, shots: int, seed=None, backend: str = "auto") -> OutcomeCounts:
    if backend == "auto":
        backend = auto_backend(circuit.n_qubits)
    if backend == "dense":
        return simulate_dense(circuit).sample(shots, seed)
    if backend == "trajectory":
        return simulate_trajectories(circuit, shots, seed)
    raise ValueError(f"unknown backend {backend!r}")


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
