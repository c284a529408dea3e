"""Gate definitions and their unitary matrices.

Multi-qubit matrices use the first listed target as the most significant
bit, matching the global convention that qubit 0 is the leftmost bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ARITY = {
    "H": 1,
    "X": 1,
    "Z": 1,
    "P": 1,
    "RX": 1,
    "DELAY": 1,
    "CNOT": 2,
    "CSWAP": 3,
}
PARAMETRIC = {"P", "RX", "DELAY"}

_SQ2 = 1.0 / np.sqrt(2.0)
_H = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_CSWAP = np.eye(8, dtype=complex)
_CSWAP[[5, 6]] = _CSWAP[[6, 5]]


def phase(phi: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * phi)]).astype(complex)


def rx(phi: float) -> np.ndarray:
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def controlled(u: np.ndarray) -> np.ndarray:
    """Block-diagonal ``|0><0| (x) I + |1><1| (x) U`` with the control first."""
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = u
    return out


@dataclass(frozen=True)
class Gate:
    """A named gate on specific qubits.

    ``param`` is the rotation/phase angle in radians. For ``DELAY`` the angle is
    the accrued phase and ``wait`` is the idle time in delay units, which the
    noise policy turns into wall-clock relaxation.
    """

    kind: str
    targets: tuple[int, ...]
    param: float | None = None
    wait: float | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if kind not in ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != ARITY[kind]:
            raise ValueError(
                f"{kind} acts on {ARITY[kind]} qubit(s), got targets {self.targets}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"repeated target in {self.targets}")
        if kind in PARAMETRIC and self.param is None:
            raise ValueError(f"{kind} needs an angle")
        if kind == "DELAY" and self.wait is None:
            object.__setattr__(self, "wait", float(self.param))

    @property
    def arity(self) -> int:
        return ARITY[self.kind]

    @property
    def matrix(self) -> np.ndarray:
        k = self.kind
        if k == "H":
            return _H
        if k == "X":
            return _X
        if k == "Z":
            return _Z
        if k in ("P", "DELAY"):
            return phase(self.param)
        if k == "RX":
            return rx(self.param)
        if k == "CNOT":
            return _CNOT
        return _CSWAP

    def on(self, *targets: int) -> "Gate":
        return Gate(self.kind, targets, self.param, self.wait)


def H(q): return Gate("H", (q,))
def X(q): return Gate("X", (q,))
def Z(q): return Gate("Z", (q,))
def P(phi, q): return Gate("P", (q,), phi)
def RX(phi, q): return Gate("RX", (q,), phi)
def CNOT(c, t): return Gate("CNOT", (c, t))
def CSWAP(c, a, b): return Gate("CSWAP", (c, a, b))


def Delay(tau, q, rate=1.0):
    """Phase ``rate * tau`` on ``|1>``; the idle time itself is ``tau``."""
    return Gate("DELAY", (q,), rate * tau, wait=tau)
