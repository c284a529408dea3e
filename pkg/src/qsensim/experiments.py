"""End-to-end sensing experiments, estimators and the accuracy metric."""
from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuit import Circuit, Conditional, Measure
from .gates import CNOT, H, P, Z
from .noise import ERROR_CLASSES, NoiseProfile, NoiseScope, attach_noise, default_profile
from .pipeline import PipelinePlan, PipelineSpec, StageSpec, plan
from .simulate import DenseResult, auto_backend, simulate_dense, simulate_trajectories
from .state import OutcomeCounts, postselect

KINDS = ("radar", "dark_matter", "scaling", "swap_test")
BACKENDS = ("auto", "dense", "trajectory")

# Topp et al. (1980) empirical soil calibration: volumetric water content vs
# relative permittivity.
TOPP_COEFFS = (-5.3e-2, 2.92e-2, -5.5e-4, 4.3e-6)
TOPP_FIT_ERROR = 0.013
TOPP_AT_VACUUM = sum(TOPP_COEFFS)  # -0.0243457, the cubic at permittivity 1


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one run.

    ``phi_soil``/``phi_free`` drive the radar, ``phi`` the rotation-sensing and
    scaling experiments. ``n_dm`` is the sensor count for everything that is
    not the radar. For ``swap_test`` the sensing circuit is chosen by
    ``swap_of``.
    """

    kind: str = "dark_matter"
    n_s: int = 3
    n_f: int = 3
    n_dm: int = 4
    phi_soil: float = 0.9
    phi_free: float = 0.1
    phi: float = 0.1
    shots: int = 10**6
    platform: str = "superconducting"
    epsilon: float = 0.0
    error_classes: tuple[str, ...] = ERROR_CLASSES
    role_scope: tuple[str, ...] = ()
    exclusive: bool = False
    profile_overrides: Mapping = field(default_factory=dict)
    backend: str = "auto"
    post_select: bool = False
    delay_tau: float = 0.0
    delay_relaxation: bool = True
    correction_mode: str = "post_processing"
    accuracy_basis: str = "per_qubit"
    swap_of: str = "radar"
    mode: str = "ghz"
    seed: int = 0

    def __post_init__(self):
        bad = set(self.error_classes) - set(ERROR_CLASSES)
        if bad:
            raise ValueError(f"unknown error class(es) {sorted(bad)}; choose from {ERROR_CLASSES}")
        object.__setattr__(self, "error_classes", tuple(c for c in ERROR_CLASSES if c in set(self.error_classes)))
        object.__setattr__(self, "role_scope", tuple(sorted(set(self.role_scope))))
        object.__setattr__(self, "profile_overrides", dict(self.profile_overrides))

    def replace(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def validate(self, domain: bool = True) -> "ExperimentConfig":
        """Raise ``ValueError`` on an invalid config; ``domain=False`` skips
        the check that the signal lies in the estimator's invertible range."""
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.correction_mode not in ("post_processing", "physical"):
            raise ValueError(f"unknown correction mode {self.correction_mode!r}")
        if self.accuracy_basis not in ("per_qubit", "total"):
            raise ValueError(f"unknown accuracy basis {self.accuracy_basis!r}")
        if self.delay_tau < 0:
            raise ValueError("delay_tau must be non-negative")
        self.scope()  # range checks on epsilon, classes, roles
        self.profile()
        src = self.kind if self.kind != "swap_test" else self.swap_of
        if self.kind == "swap_test" and src not in ("radar", "dark_matter"):
            raise ValueError(f"swap test needs swap_of in (radar, dark_matter), got {src!r}")
        if src == "radar":
            if self.n_s < 1 or self.n_f < 1:
                raise ValueError("radar needs n_s, n_f >= 1")
            if self.post_select:
                raise ValueError("post-selection is only defined for the dark-matter circuit")
            if self.accuracy_basis == "per_qubit" and self.n_s != self.n_f and self.kind == "radar":
                raise ValueError("per-qubit accuracy needs n_s == n_f; use accuracy_basis='total'")
            total = abs(self.n_s * self.phi_soil - self.n_f * self.phi_free)
            if domain and self.kind == "radar" and not 0 < total < math.pi:
                raise ValueError(f"relative phase {total:.4g} outside the invertible range (0, pi)")
        elif src == "dark_matter":
            if self.n_dm < 1:
                raise ValueError("dark-matter run needs n_dm >= 1")
            if domain and self.kind == "dark_matter" and not 0 < self.n_dm * self.phi < math.pi:
                raise ValueError(f"n_dm*phi = {self.n_dm * self.phi:.4g} outside (0, pi)")
        elif src == "scaling":
            if self.mode not in ("ghz", "unentangled"):
                raise ValueError(f"unknown scaling mode {self.mode!r}")
            if self.n_dm < 1:
                raise ValueError("scaling needs n_dm >= 1")
            n_eff = self.n_dm if self.mode == "ghz" else 1
            if domain and not 0 < n_eff * self.phi < math.pi:
                raise ValueError(f"N*phi = {n_eff * self.phi:.4g} outside (0, pi)")
        return self

    def profile(self) -> NoiseProfile:
        p = default_profile(self.platform)
        return p.with_overrides(**self.profile_overrides) if self.profile_overrides else p

    def scope(self) -> NoiseScope:
        return NoiseScope(self.epsilon, frozenset(self.error_classes), frozenset(self.role_scope), self.exclusive)

    @property
    def n_sensors(self) -> int:
        src = self.swap_of if self.kind == "swap_test" else self.kind
        return self.n_s + self.n_f if src == "radar" else self.n_dm

    def n_qubits(self) -> int:
        if self.kind == "radar":
            return self.n_s + self.n_f + 1
        if self.kind == "dark_matter":
            return self.n_dm + 1
        if self.kind == "scaling":
            return self.n_dm if self.mode == "ghz" else 1
        width = 1 if self.swap_of == "radar" else 2
        return max(self.n_sensors + 1, 1 + 2 * width)

    def resolved_backend(self) -> str:
        if self.backend != "auto":
            return self.backend
        return auto_backend(self.n_qubits())

    def phi_true(self) -> float:
        if self.kind == "radar" or (self.kind == "swap_test" and self.swap_of == "radar"):
            if self.accuracy_basis == "per_qubit":
                return abs(self.phi_soil - self.phi_free)
            return abs(self.n_s * self.phi_soil - self.n_f * self.phi_free)
        return self.phi

    def as_dict(self) -> dict:
        d = asdict(self)
        d["error_classes"] = list(self.error_classes)
        d["role_scope"] = list(self.role_scope)
        return d


@dataclass
class RunResult:
    config: ExperimentConfig
    counts: OutcomeCounts | None
    phi_est: float | None
    accuracy_pct: float | None
    kept_fraction: float = 1.0
    p_hat: float | None = None
    at_boundary: bool = False
    overlap: float | None = None
    overlap_std: float | None = None
    backend: str = ""
    seed: int = 0

    @property
    def phi_true(self) -> float:
        return self.config.phi_true()

    def row(self) -> dict:
        c = self.config
        return {
            "experiment": c.kind,
            "platform": c.platform,
            "n_sensors": c.n_sensors,
            "n_s": c.n_s if c.kind == "radar" or (c.kind == "swap_test" and c.swap_of == "radar") else "",
            "n_f": c.n_f if c.kind == "radar" or (c.kind == "swap_test" and c.swap_of == "radar") else "",
            "phi_true": c.phi_true(),
            "epsilon": c.epsilon,
            "error_classes": "+".join(c.error_classes),
            "role_scope": "+".join(c.role_scope),
            "shots": c.shots,
            "backend": self.backend,
            "post_select": c.post_select,
            "seed": self.seed,
            "phi_est": "" if self.phi_est is None else self.phi_est,
            "accuracy_pct": "" if self.accuracy_pct is None else self.accuracy_pct,
            "overlap": "" if self.overlap is None else self.overlap,
            "kept_fraction": self.kept_fraction,
        }


# ---------------------------------------------------------------- circuits

def radar_plan(n_s: int, n_f: int, phi_soil: float, phi_free: float, correction_mode="post_processing") -> PipelinePlan:
    """Soil/free-space phase comparison with one memory qubit.

    Sensors ``0..n_s-1`` see the soil, ``n_s..n_s+n_f-1`` free space. The X on
    the first free-space sensor before the entangling chain puts the two
    ensembles in opposite branches, so the memory phase is
    ``n_s*phi_soil - n_f*phi_free``.
    """
    if n_s < 1 or n_f < 1:
        raise ValueError("need at least one sensor per medium")
    spec = PipelineSpec(
        n_s + n_f,
        (
            StageSpec("probe_prep", flip=(n_s,)),
            StageSpec("sensing", encoding="phase", angles=(phi_soil,) * n_s + (phi_free,) * n_f),
            StageSpec("storage"),
            StageSpec("processing", basis="X"),
        ),
        correction_mode=correction_mode,
    )
    return plan(spec)


def radar_circuit(n_s, n_f, phi_soil, phi_free, correction_mode="post_processing") -> Circuit:
    return radar_plan(n_s, n_f, phi_soil, phi_free, correction_mode).circuit


def dm_plan(n_dm: int, phi: float, tau: float = 0.0, rate: float = 1.0) -> PipelinePlan:
    """Rotation sensing: parity probe, Rx(phi) on all sensors, undo, copy the
    signal qubit to memory, optional delay, Z readout of memory."""
    steps = [
        StageSpec("probe_prep", style="parity"),
        StageSpec("sensing", encoding="rx", angles=phi),
        StageSpec("storage", transfer="population"),
    ]
    if tau > 0:
        steps.append(StageSpec("delay", tau=tau, rate=rate))
    steps.append(StageSpec("processing", basis="Z"))
    return plan(PipelineSpec(n_dm, tuple(steps)))


def dm_circuit(n_dm: int, phi: float, tau: float = 0.0) -> Circuit:
    return dm_plan(n_dm, phi, tau).circuit


def dm_likelihood(phi, n: int):
    """Noiseless probability that the memory reads 1."""
    return np.sin(n * np.asarray(phi) / 2) ** 2


def validate_dm_likelihood(n: int, phis: Sequence[float] | None = None) -> float:
    """Largest gap between the closed-form likelihood and exact simulation."""
    if phis is None:
        phis = np.linspace(0, np.pi / n, 9)
    worst = 0.0
    for phi in phis:
        pl = dm_plan(n, float(phi))
        exact = simulate_dense(pl.circuit).probability(pl.memory, 1)
        worst = max(worst, abs(exact - float(dm_likelihood(phi, n))))
    return worst


@functools.lru_cache(maxsize=None)
def _dm_inverse(n: int):
    """Estimator for the memory likelihood, checked against exact simulation.

    Returns the closed-form inverse when it agrees with the simulated
    likelihood to 1e-9, otherwise an interpolated inverse of a simulated table.
    """
    if validate_dm_likelihood(n) <= 1e-9:
        return lambda p: 2 * math.asin(math.sqrt(p)) / n
    grid = np.linspace(0, np.pi / n, 401)
    table = []
    for phi in grid:
        pl = dm_plan(n, float(phi))
        table.append(simulate_dense(pl.circuit).probability(pl.memory, 1))
    table = np.array(table)
    return lambda p: float(np.interp(p, table, grid))


# ---------------------------------------------------------------- estimation

@dataclass(frozen=True)
class PhaseEstimate:
    phi: float
    p_hat: float
    at_boundary: bool


def memory_counts(counts: OutcomeCounts, memory: int, parity_qubits: Sequence[int] = ()) -> tuple[int, int]:
    """Shots with the (parity-corrected) memory bit equal to 0 and to 1."""
    arr = counts.as_array()
    k = len(counts.qubits)
    idx = np.arange(arr.size)
    shift = lambda q: k - 1 - counts.qubits.index(q)  # noqa: E731
    bit = (idx >> shift(memory)) & 1
    for q in parity_qubits:
        bit ^= (idx >> shift(q)) & 1
    ones = int(arr[bit == 1].sum())
    return int(arr.sum()) - ones, ones


def estimate_phase(
    counts: OutcomeCounts,
    scheme: str,
    n_effective: int,
    memory: int | None = None,
    parity_qubits: Sequence[int] = (),
) -> PhaseEstimate:
    """Invert the memory likelihood.

    ``radar``: the memory is read in X; ``p`` is the corrected ``|+>``
    fraction and ``phi = 2*arccos(sqrt(p))/n``. ``dm``: the memory is read in Z;
    ``p`` is the fraction of ones and ``phi = 2*arcsin(sqrt(p))/n``. At p = 0
    or 1 the estimate sits on the edge of the invertible range and is flagged.
    """
    if counts.kept_shots == 0:
        raise ValueError("no shots to estimate from")
    if n_effective < 1:
        raise ValueError("n_effective must be positive")
    if memory is None:
        memory = max(counts.qubits)
    n0, n1 = memory_counts(counts, memory, parity_qubits)
    tot = n0 + n1
    if scheme == "radar":
        p = n0 / tot
        phi = 2 * math.acos(math.sqrt(p)) / n_effective
    elif scheme == "dm":
        p = n1 / tot
        phi = _dm_inverse(n_effective)(p)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return PhaseEstimate(phi, p, p in (0.0, 1.0))


def accuracy(phi_est: float, phi_true: float) -> float:
    """``(1 - |est - true| / |true|) * 100``; negative once the error exceeds the signal."""
    if phi_true == 0:
        raise ValueError("accuracy is undefined for a zero true phase")
    return (1 - abs(phi_est - phi_true) / abs(phi_true)) * 100


# ---------------------------------------------------------------- running

@dataclass
class PreparedRun:
    """A config turned into a noisy circuit, simulated lazily once."""

    config: ExperimentConfig
    plan: PipelinePlan
    circuit: Circuit
    backend: str
    _dense: DenseResult | None = None

    @property
    def dense(self) -> DenseResult:
        if self._dense is None:
            self._dense = simulate_dense(self.circuit)
        return self._dense

    def sample(self, seed: int) -> OutcomeCounts:
        if self.backend == "dense":
            return self.dense.sample(self.config.shots, seed)
        return simulate_trajectories(self.circuit, self.config.shots, seed)

    def run(self, seed: int | None = None) -> RunResult:
        c = self.config
        seed = c.seed if seed is None else seed
        counts = self.sample(seed)
        kept = 1.0
        if c.kind == "dark_matter":
            if c.post_select:
                counts = postselect(counts, {q: 0 for q in self.plan.postselect_qubits})
                kept = counts.kept_fraction
            est = estimate_phase(counts, "dm", c.n_dm, self.plan.memory)
        else:
            n_eff = c.n_s if c.accuracy_basis == "per_qubit" else 1
            est = estimate_phase(counts, "radar", n_eff, self.plan.memory, self.plan.parity_qubits)
        return RunResult(
            c, counts, est.phi, accuracy(est.phi, c.phi_true()), kept, est.p_hat, est.at_boundary,
            backend=self.backend, seed=seed,
        )


def prepare(config: ExperimentConfig) -> PreparedRun:
    c = config.validate()
    if c.kind == "radar":
        pl = radar_plan(c.n_s, c.n_f, c.phi_soil, c.phi_free, c.correction_mode)
    elif c.kind == "dark_matter":
        pl = dm_plan(c.n_dm, c.phi, c.delay_tau)
    else:
        raise ValueError(f"{c.kind} runs are not single circuits")
    circ = attach_noise(pl.circuit, c.profile(), c.scope(), c.delay_relaxation)
    return PreparedRun(c, pl, circ, c.resolved_backend())


def run(config: ExperimentConfig) -> RunResult:
    """Build, simulate and score one configuration."""
    if config.kind == "swap_test":
        return swap_test_experiment(config)
    if config.kind == "scaling":
        return scaling_run(config)
    return prepare(config).run()


def run_many(config: ExperimentConfig, seeds: Iterable[int]) -> list[RunResult]:
    """Same config under several seeds; the exact distribution is reused."""
    if config.kind in ("swap_test", "scaling"):
        return [run(config.replace(seed=s)) for s in seeds]
    prep = prepare(config)
    return [prep.run(s) for s in seeds]


# ---------------------------------------------------------------- swap test

def sensed_register(config: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    """Noisy reduced state holding the sensed signal, and its ideal counterpart.

    Radar: the memory qubit, with the sign corrections implied by the sensor
    parity applied as ideal classically controlled Z gates. Dark matter: signal
    qubit plus memory, whose joint state stays pure without noise.
    """
    c = config
    if c.swap_of == "radar":
        pl = radar_plan(c.n_s, c.n_f, c.phi_soil, c.phi_free, "post_processing")
        keep = [pl.memory]
        body = pl.circuit.instructions[:-2]  # drop the memory's X readout
        fix = [Conditional(Z(pl.memory), q) for q in pl.parity_qubits]
    else:
        pl = dm_plan(c.n_dm, c.phi, c.delay_tau)
        keep = [pl.groups[0][0], pl.memory]
        body = tuple(i for i in pl.circuit.instructions if not (isinstance(i, Measure) and i.qubit in keep))
        fix = []
    ideal = pl.circuit.with_instructions(body)

    def reduced(circ: Circuit) -> np.ndarray:
        if fix:
            circ = circ.append(*fix)
        return simulate_dense(circ).state.reduced(keep)

    noisy = attach_noise(ideal, c.profile(), c.scope(), c.delay_relaxation)
    return reduced(noisy), reduced(ideal)


def swap_test_experiment(config: ExperimentConfig) -> RunResult:
    from .analysis import swap_test

    c = config.validate()
    rho, ref = sensed_register(c)
    est = swap_test(rho, ref, c.shots, c.profile(), c.scope(), seed=c.seed)
    return RunResult(c, est.counts, None, None, 1.0, overlap=est.overlap, overlap_std=est.std_err,
                     backend="dense", seed=c.seed)


# ---------------------------------------------------------------- scaling

def ramsey_circuit(phi: float) -> Circuit:
    return Circuit(1, ("sensing",), (H(0), P(phi, 0), H(0), Measure(0)))


def ghz_probe_circuit(n: int, phi: float) -> Circuit:
    """GHZ preparation, phase on every qubit, undo, read the first qubit.

    The first qubit reads 0 with probability ``cos^2(n*phi/2)``.
    """
    ins = [H(0)] + [CNOT(i, i + 1) for i in range(n - 1)]
    ins += [P(phi, q) for q in range(n)]
    ins += [CNOT(i, i + 1) for i in range(n - 2, -1, -1)] + [H(0), Measure(0)]
    return Circuit(n, ("sensing",) * n, tuple(ins))


def _ramsey_estimate(zeros: int, shots: int, n: int) -> float:
    return 2 * math.acos(math.sqrt(zeros / shots)) / n


def scaling_run(config: ExperimentConfig) -> RunResult:
    """One estimate at ``N = n_dm`` probes in ``config.mode``."""
    c = config.validate()
    phi_est = _scaling_estimates(c.n_dm, c.phi, c.shots, c.mode, 1, np.random.default_rng(c.seed))[0]
    return RunResult(c, None, phi_est, accuracy(phi_est, c.phi), backend="dense", seed=c.seed)


def _scaling_estimates(n: int, phi: float, shots: int, mode: str, reps: int, rng) -> np.ndarray:
    if mode == "unentangled":
        # n identical single-qubit probes; their shots are pooled
        p0s = [simulate_dense(ramsey_circuit(phi)).probs[0] for _ in range(n)]
        zeros = sum(rng.binomial(shots, p0, size=reps) for p0 in p0s)
        return np.array([_ramsey_estimate(z, n * shots, 1) for z in zeros])
    if mode == "ghz":
        p0 = simulate_dense(ghz_probe_circuit(n, phi)).probs[0]
        zeros = rng.binomial(shots, p0, size=reps)
        return np.array([_ramsey_estimate(z, shots, n) for z in zeros])
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class ScalingResult:
    n_list: list[int]
    delta_phi: list[float]
    mean_phi: list[float]
    slope: float
    mode: str


def scaling_experiment(
    n_list: Sequence[int],
    phi: float,
    shots: int,
    mode: str,
    repetitions: int = 200,
    seed: int = 0,
) -> ScalingResult:
    """Spread of the phase estimate vs probe count and its log-log slope."""
    if not n_list:
        raise ValueError("n_list is empty")
    if repetitions < 2:
        raise ValueError("need at least two repetitions for a spread")
    ns = [int(n) for n in n_list]
    n_eff = max(ns) if mode == "ghz" else 1
    if not 0 < n_eff * phi < math.pi:
        raise ValueError("phi too large for the probe counts requested")
    ss = np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(s) for s in ss.spawn(len(ns))]
    dphi, mean = [], []
    for n, rng in zip(ns, rngs):
        est = _scaling_estimates(n, phi, shots, mode, repetitions, rng)
        dphi.append(float(np.std(est, ddof=1)))
        mean.append(float(np.mean(est)))
    slope = float(np.polyfit(np.log(ns), np.log(dphi), 1)[0]) if len(ns) > 1 else float("nan")
    return ScalingResult(ns, dphi, mean, slope, mode)


# ---------------------------------------------------------------- soil moisture

def topp_water_content(permittivity):
    """Volumetric water content from relative permittivity (Topp cubic)."""
    a, b, c, d = TOPP_COEFFS
    e = np.asarray(permittivity, dtype=float)
    out = a + b * e + c * e**2 + d * e**3
    return float(out) if out.ndim == 0 else out


def soil_moisture_from_phase(phi_free: float, phi_soil: float) -> tuple[float, float]:
    """``(permittivity, water content)`` from the two accrued phases.

    The soil phase is slowed by the refractive index, ``phi_soil =
    phi_free / sqrt(eps)``.
    """
    if phi_soil == 0:
        raise ValueError("phi_soil must be non-zero")
    if phi_free <= 0 or phi_soil < 0:
        raise ValueError("phases must be positive")
    eps = (phi_free / phi_soil) ** 2
    return eps, topp_water_content(eps)
