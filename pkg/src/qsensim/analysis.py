"""State comparison and metrology: swap test, fidelities, Fisher information
and a finite-difference gradient step."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .circuit import Circuit, Measure
from .gates import CNOT, CSWAP, H, P
from .noise import NoiseProfile, NoiseScope, attach_noise
from .simulate import simulate_dense
from .state import OutcomeCounts, QuantumState

PSD_TOL = 1e-9


def _as_density(x) -> np.ndarray:
    if isinstance(x, QuantumState):
        return x.density()
    a = np.asarray(x, dtype=complex)
    if a.ndim == 1:
        return np.outer(a, a.conj())
    return a


def _check_psd(rho: np.ndarray, name: str):
    if rho.shape[0] != rho.shape[1]:
        raise ValueError(f"{name} is not square")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError(f"{name} is not Hermitian")
    vals, vecs = np.linalg.eigh(rho)
    if vals.min() < -PSD_TOL:
        raise ValueError(f"{name} has eigenvalue {vals.min():.3e} < 0")
    return vals, vecs


def overlap_exact(rho, sigma) -> float:
    """``tr(rho sigma)``, which the swap test estimates."""
    r, s = _as_density(rho), _as_density(sigma)
    if r.shape != s.shape:
        raise ValueError("dimension mismatch")
    return float(np.real(np.trace(r @ s)))


def fidelity_exact(rho, sigma) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    For pure inputs this is ``|<psi|phi>|^2``.
    """
    r, s = _as_density(rho), _as_density(sigma)
    if r.shape != s.shape:
        raise ValueError("dimension mismatch")
    vals, vecs = _check_psd(r, "rho")
    svals, svecs = _check_psd(s, "sigma")
    # a rank-one argument gives <psi|other|psi> exactly; the square-root route
    # would pick up sqrt(rounding noise) from its zero eigenvalues
    if vals[-1] > 1 - 1e-12:
        psi = vecs[:, -1]
        return float(min(1.0, np.real(psi.conj() @ s @ psi)))
    if svals[-1] > 1 - 1e-12:
        psi = svecs[:, -1]
        return float(min(1.0, np.real(psi.conj() @ r @ psi)))
    sq = (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.conj().T
    m = sq @ s @ sq
    mu = np.clip(np.linalg.eigvalsh((m + m.conj().T) / 2), 0, None)
    return float(min(1.0, np.sum(np.sqrt(mu)) ** 2))


# ---------------------------------------------------------------- swap test

@dataclass
class OverlapEstimate:
    overlap: float
    shots: int
    std_err: float
    p0: float
    counts: OutcomeCounts | None = None


def swap_test_circuit(width: int) -> Circuit:
    """Ancilla 0, register A on ``1..w``, register B on ``w+1..2w``."""
    n = 1 + 2 * width
    ins = [H(0)] + [CSWAP(0, 1 + i, 1 + width + i) for i in range(width)] + [H(0), Measure(0)]
    roles = ("computing",) + ("memory",) * width + ("computing",) * width
    return Circuit(n, roles, tuple(ins), prepared=(0,))


def swap_test(
    state_sens,
    state_ref,
    shots: int,
    profile: NoiseProfile | None = None,
    scope: NoiseScope | None = None,
    seed=None,
) -> OverlapEstimate:
    """Estimate ``tr(rho sigma)`` as ``2 P(ancilla = 0) - 1``.

    The two registers are loaded as given; only the ancilla is freshly
    prepared, so state-preparation error applies to it alone. Noise from
    ``profile``/``scope`` is attached to the test circuit itself.
    """
    rho, sigma = _as_density(state_sens), _as_density(state_ref)
    if rho.shape != sigma.shape:
        raise ValueError(f"register widths differ: {rho.shape} vs {sigma.shape}")
    width = int(round(math.log2(rho.shape[0])))
    if 2**width != rho.shape[0]:
        raise ValueError("register dimension is not a power of two")
    if shots < 1:
        raise ValueError("shots must be positive")
    anc = np.zeros((2, 2), dtype=complex)
    anc[0, 0] = 1
    circ = swap_test_circuit(width)
    init = QuantumState.from_density(np.kron(anc, np.kron(rho, sigma)), circ.roles)
    circ = Circuit(circ.n_qubits, circ.roles, circ.instructions, circ.prepared, init)
    if profile is not None:
        circ = attach_noise(circ, profile, scope)
    counts = simulate_dense(circ).sample(shots, seed)
    p0 = counts.count_where(0, 0) / shots
    return OverlapEstimate(2 * p0 - 1, shots, 2 * math.sqrt(p0 * (1 - p0) / shots), p0, counts)


# ---------------------------------------------------------------- Fisher information

@dataclass(frozen=True)
class ProbeFamily:
    """A phase probe: ``state(theta, n)`` gives the pure probe state and
    ``readout(theta, n)`` the full circuit including its measurement.
    ``multiplier(n)`` is how many times faster than ``theta`` the readout
    signal winds, which fixes the unambiguous range ``(0, pi/multiplier)``."""

    name: str
    state: Callable[[float, int], np.ndarray]
    readout: Callable[[float, int], Circuit]
    multiplier: Callable[[int], int] = lambda n: 1

    def branch(self, n: int) -> tuple[float, float]:
        return 0.0, math.pi / self.multiplier(n)


def _ghz_body(theta, n):
    return [H(0)] + [CNOT(i, i + 1) for i in range(n - 1)] + [P(theta, q) for q in range(n)]


def _ghz_state(theta, n):
    c = Circuit(n, ("sensing",) * n, tuple(_ghz_body(theta, n)))
    return simulate_dense(c).state.vector()


def _ghz_readout(theta, n):
    ins = _ghz_body(theta, n) + [CNOT(i, i + 1) for i in range(n - 2, -1, -1)] + [H(0), Measure(0)]
    return Circuit(n, ("sensing",) * n, tuple(ins))


def _product_body(theta, n):
    return [H(q) for q in range(n)] + [P(theta, q) for q in range(n)]


def _product_state(theta, n):
    c = Circuit(n, ("sensing",) * n, tuple(_product_body(theta, n)))
    return simulate_dense(c).state.vector()


def _product_readout(theta, n):
    ins = _product_body(theta, n) + [H(q) for q in range(n)] + [Measure(q) for q in range(n)]
    return Circuit(n, ("sensing",) * n, tuple(ins))


GHZ_PROBE = ProbeFamily("ghz", _ghz_state, _ghz_readout, lambda n: n)
PRODUCT_PROBE = ProbeFamily("product", _product_state, _product_readout)


def qfi_pure(state: Callable[[float], np.ndarray], theta: float, delta: float = 1e-4) -> float:
    """Quantum Fisher information of a pure-state family by finite differences.

    Uses ``8 (1 - |<psi(theta - d/2)|psi(theta + d/2)>|) / d^2`` at steps
    ``d`` and ``d/2`` combined by Richardson extrapolation.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")

    def q(d):
        a, b = state(theta - d / 2), state(theta + d / 2)
        gap = 1 - abs(np.vdot(a, b))
        if gap < 1e3 * np.finfo(float).eps:
            raise ValueError(f"step {d:g} too small: overlap deficit {gap:.2e} is at rounding level")
        return 8 * gap / d**2

    return (4 * q(delta / 2) - q(delta)) / 3


def cfi(readout: Callable[[float], Circuit], theta: float, delta: float = 1e-4) -> float:
    """Classical Fisher information of the readout distribution."""
    p = simulate_dense(readout(theta)).probs
    dp = (simulate_dense(readout(theta + delta)).probs - simulate_dense(readout(theta - delta)).probs) / (2 * delta)
    mask = p > 1e-14
    return float(np.sum(dp[mask] ** 2 / p[mask]))


def mle_estimates(readout: Callable[[float], Circuit], theta: float, branch: tuple[float, float],
                  shots: int, repetitions: int, rng, grid_points: int = 801) -> np.ndarray:
    """Maximum-likelihood phase estimates from simulated repetitions.

    The likelihood is searched on a grid over ``branch``, the range on which
    it is one-to-one, and refined by a parabola through the best grid point
    and its neighbours.
    """
    lo, hi = branch
    if not lo < theta < hi:
        raise ValueError(f"theta={theta} outside the unambiguous range ({lo:.4g}, {hi:.4g})")
    pad = 1e-3 * (hi - lo)
    grid = np.linspace(lo + pad, hi - pad, grid_points)
    table = np.array([simulate_dense(readout(float(t))).probs for t in grid])
    logt = np.log(np.clip(table, 1e-300, None))
    p_true = simulate_dense(readout(theta)).probs
    p_true = np.clip(p_true, 0, None)
    counts = rng.multinomial(shots, p_true / p_true.sum(), size=repetitions)
    ll = counts @ logt.T  # (repetitions, grid)
    out = np.empty(repetitions)
    step = grid[1] - grid[0]
    for r in range(repetitions):
        i = int(np.argmax(ll[r]))
        if 0 < i < grid_points - 1:
            y0, y1, y2 = ll[r, i - 1], ll[r, i], ll[r, i + 1]
            den = y0 - 2 * y1 + y2
            off = 0.5 * (y0 - y2) / den if den < 0 else 0.0
            out[r] = grid[i] + off * step
        else:
            out[r] = grid[i]
    return out


@dataclass
class FisherReport:
    qfi: float
    cfi: float
    crb_variance_bound: float
    empirical_variance: float
    variance_std_err: float
    shots: int
    repetitions: int

    @property
    def cfi_within_qfi(self) -> bool:
        return self.cfi <= self.qfi * (1 + 1e-6) + 1e-9

    @property
    def crb_satisfied(self) -> bool:
        """Empirical variance not below the bound by more than 3 standard errors."""
        return self.empirical_variance >= self.crb_variance_bound - 3 * self.variance_std_err


def fisher_report(
    probe: ProbeFamily,
    theta: float,
    n_qubits: int,
    shots: int,
    repetitions: int = 200,
    delta: float = 1e-4,
    seed=None,
) -> FisherReport:
    rng = np.random.default_rng(seed)
    q = qfi_pure(lambda t: probe.state(t, n_qubits), theta, delta)
    c = cfi(lambda t: probe.readout(t, n_qubits), theta, delta)
    est = mle_estimates(lambda t: probe.readout(t, n_qubits), theta, probe.branch(n_qubits), shots, repetitions, rng)
    var = float(np.var(est, ddof=1))
    return FisherReport(q, c, 1 / (shots * q), var, var * math.sqrt(2 / (repetitions - 1)), shots, repetitions)


# ---------------------------------------------------------------- variational update

def finite_difference_gradient(cost: Callable[[np.ndarray], float], params, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(params, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        hi, lo = cost(x + e), cost(x - e)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FloatingPointError(f"cost is not finite near parameter {i}")
        g.flat[i] = (hi - lo) / (2 * h)
    return g


def variational_step(params: Sequence[float], cost: Callable[[np.ndarray], float], eta: float,
                     h: float = 1e-6) -> np.ndarray:
    """One gradient-descent update ``r_i <- r_i - eta * dC/dr_i``."""
    if eta <= 0:
        raise ValueError("learning rate must be positive")
    x = np.asarray(params, dtype=float)
    c0 = cost(x)
    if not np.isfinite(c0):
        raise FloatingPointError("cost is not finite")
    return x - eta * finite_difference_gradient(cost, x, h)
