import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bath import BathModel, CoefficientTable, markov_rate
from .dynamics import CommutingModel, StateLike, Trajectory, exact_propagate, state_matrix
from .errors import NumericalError, UnsupportedError
from .linalg import (
    DEFAULT_EIGEN,
    IDENTITY_2,
    PAULI_Y,
    PAULI_Z,
    DensityMatrix,
    EigenSettings,
    add,
    eigenvalues_general,
    kron,
    psd_factor,
    scale,
    singular_values,
)

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger(__name__)

# Coupling-operator eigenvalues of sigma_z^A + sigma_z^B in the |++>, |+->, |-+>, |--> basis
COUPLINGS = (2.0, 0.0, 0.0, -2.0)

SIGMA_YY = kron(PAULI_Y, PAULI_Y)

NORMALIZATION_TOL = 1e-12
SPECTRAL_IMAG_TOL = 1e-8

# Matrix positions outside the X pattern (diagonal plus anti-diagonal)
_OFF_X = [(0, 1), (0, 2), (1, 0), (2, 0), (1, 3), (3, 1), (2, 3), (3, 2)]


@dataclass(frozen=True)
class TwoQubitParams:
    """Qubit splittings and Ising coupling, in units of omega_0."""

    omega_a: float
    omega_b: float
    j: float

    def __post_init__(self):
        for name in ("omega_a", "omega_b", "j"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)}")


@dataclass(frozen=True)
class PureStateAmplitudes:
    """Amplitudes (a1, a2, a3, a4) of a pure two-qubit state.

    Attributes:
        amplitudes (Tuple[complex, ...]): Coefficients of |++>, |+->, |-+>, |-->
    """

    amplitudes: Tuple[complex, complex, complex, complex]

    def __post_init__(self):
        values = tuple(complex(a) for a in self.amplitudes)
        if len(values) != 4:
            raise ValueError(f"Expected 4 amplitudes, got {len(values)}")
        if not all(math.isfinite(a.real) and math.isfinite(a.imag) for a in values):
            raise ValueError("Amplitudes must be finite")
        norm = sum(abs(a) ** 2 for a in values)
        if abs(norm - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"Amplitudes are not normalized: sum |a|^2 = {norm:.15g}")
        object.__setattr__(self, "amplitudes", values)

    @classmethod
    def normalized(cls, amplitudes: Sequence[complex]) -> "PureStateAmplitudes":
        """Rescale arbitrary non-zero amplitudes to unit norm."""
        vector = np.asarray(amplitudes, dtype=complex)
        norm = float(np.sqrt(np.sum(np.abs(vector) ** 2)))
        if norm == 0.0 or not math.isfinite(norm):
            raise ValueError("Cannot normalize a zero or non-finite amplitude vector")
        return cls(tuple(vector / norm))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.amplitudes, dtype=complex)

    def __getitem__(self, index: int) -> complex:
        return self.amplitudes[index]


class StateKind(Enum):
    SEPARABLE = "Separable"
    ROBUST = "Robust"
    FRAGILE = "Fragile"
    GENERIC = "Generic"


@dataclass(frozen=True)
class StateClass:
    """Dephasing class of a pure state.

    Attributes:
        kind (StateKind): Separable, Robust, Fragile or Generic
        initial_concurrence (float): C(0) = 2|a2 a3 - a1 a4|
        asymptotic_concurrence (float): C_inf = 2 max(0, |a2 a3| - |a1 a4|)
    """

    kind: StateKind
    initial_concurrence: float
    asymptotic_concurrence: float


@dataclass(frozen=True)
class TimeScales:
    """Decoherence times set by the Markov rate.

    Attributes:
        entanglement_time (float): tau_e = 1 / (16 Gamma)
        dephasing_time (float): tau_phi = 1 / (4 Gamma)
        markov_rate (float): Gamma
    """

    entanglement_time: float
    dephasing_time: float
    markov_rate: float

    def asymptotic_window(self) -> Tuple[float, float]:
        """Rate-fitting window [5 tau_phi, 10 tau_phi]."""
        return 5.0 * self.dephasing_time, 10.0 * self.dephasing_time


def build_model(params: TwoQubitParams) -> CommutingModel:
    """Two qubits with Ising coupling, dephased through L = sigma_z^A + sigma_z^B."""
    za = kron(PAULI_Z, IDENTITY_2)
    zb = kron(IDENTITY_2, PAULI_Z)
    hamiltonian = add(
        add(scale(za, params.omega_a), scale(zb, params.omega_b)),
        scale(kron(PAULI_Z, PAULI_Z), params.j),
    )
    wa, wb, j = params.omega_a, params.omega_b, params.j
    energies = (wa + wb + j, wa - wb - j, -wa + wb - j, -wa - wb + j)
    return CommutingModel(
        energies=np.array(energies),
        couplings=np.array(COUPLINGS),
        hamiltonian=hamiltonian,
        coupling_operator=add(za, zb),
    )


def projector(amplitudes: PureStateAmplitudes) -> DensityMatrix:
    return DensityMatrix.pure(amplitudes.vector)


def _two_qubit_matrix(rho: StateLike) -> np.ndarray:
    matrix = state_matrix(rho)
    if matrix.shape != (4, 4):
        raise ValueError(f"Expected a 4x4 two-qubit state, got shape {matrix.shape}")
    return matrix


def _wootters(lambdas: Sequence[float]) -> float:
    ordered = sorted((max(0.0, float(v)) for v in lambdas), reverse=True)
    ordered += [0.0] * (4 - len(ordered))
    return max(0.0, ordered[0] - ordered[1] - ordered[2] - ordered[3])


def _x_state_concurrence(rho: np.ndarray) -> float:
    outer = abs(rho[0, 3]) - math.sqrt(max(rho[1, 1].real * rho[2, 2].real, 0.0))
    inner = abs(rho[1, 2]) - math.sqrt(max(rho[0, 0].real * rho[3, 3].real, 0.0))
    return 2.0 * max(0.0, outer, inner)


def concurrence_spectral(rho: StateLike, settings: EigenSettings = DEFAULT_EIGEN) -> float:
    """Concurrence from the spectrum of rho (sy x sy) rho* (sy x sy).

    Raises:
        NumericalError: If an eigenvalue carries an imaginary part above 1e-8
    """
    matrix = _two_qubit_matrix(rho)
    flipped = SIGMA_YY @ matrix.conj() @ SIGMA_YY
    spectrum = eigenvalues_general(matrix @ flipped, settings)
    worst = max(abs(v.imag) for v in spectrum)
    if worst > SPECTRAL_IMAG_TOL:
        raise NumericalError(
            f"rho*rho_tilde has an eigenvalue with imaginary part {worst:.3e}; input is not a valid state"
        )
    return _wootters([math.sqrt(max(v.real, 0.0)) for v in spectrum])


def concurrence(
    rho: StateLike, method: str = "factor", settings: EigenSettings = DEFAULT_EIGEN
) -> float:
    """Wootters concurrence of a two-qubit state.

    The default route factors rho = W W^H and takes the singular values of
    W^T (sy x sy) W, which equal the square roots of the eigenvalues of
    rho * rho_tilde without squaring small ones. States whose entries vanish
    outside the X pattern use the closed X-state formula.

    Args:
        rho (StateLike): Valid 4x4 state in the |++>, |+->, |-+>, |--> basis
        method (str): "factor" (default) or "spectral"
        settings (EigenSettings): Solver caps and tolerances

    Returns:
        float: Concurrence in [0, 1]

    Raises:
        ValueError: For a non 4x4 input or unknown method
        NumericalError: If the spectral route meets a malformed spectrum
    """
    if method == "spectral":
        return concurrence_spectral(rho, settings)
    if method != "factor":
        raise ValueError(f"Unknown concurrence method '{method}'")
    matrix = _two_qubit_matrix(rho)
    if all(matrix[i, j] == 0 for i, j in _OFF_X):
        return _x_state_concurrence(matrix)
    w = psd_factor(matrix, settings)
    if w.shape[1] == 0:
        return 0.0
    return _wootters(singular_values(w.T @ SIGMA_YY @ w, settings))


def pure_concurrence(amplitudes: PureStateAmplitudes) -> float:
    """C = 2|a2 a3 - a1 a4| for a normalized pure state."""
    a1, a2, a3, a4 = amplitudes.amplitudes
    return 2.0 * abs(a2 * a3 - a1 * a4)


def reduce_A(rho: StateLike) -> DensityMatrix:
    """State of qubit A after tracing out B."""
    m = _two_qubit_matrix(rho)
    return DensityMatrix(
        [
            [m[0, 0] + m[1, 1], m[0, 2] + m[1, 3]],
            [m[2, 0] + m[3, 1], m[2, 2] + m[3, 3]],
        ]
    )


def reduce_B(rho: StateLike) -> DensityMatrix:
    """State of qubit B after tracing out A."""
    m = _two_qubit_matrix(rho)
    return DensityMatrix(
        [
            [m[0, 0] + m[2, 2], m[0, 1] + m[2, 3]],
            [m[1, 0] + m[3, 2], m[1, 1] + m[3, 3]],
        ]
    )


def coherence_a(rho: StateLike) -> float:
    """|rho_13 + rho_24|, the off-diagonal modulus of qubit A's reduced state."""
    m = _two_qubit_matrix(rho)
    return abs(m[0, 2] + m[1, 3])


def coherence_b(rho: StateLike) -> float:
    m = _two_qubit_matrix(rho)
    return abs(m[0, 1] + m[2, 3])


def concurrence_series(trajectory: Trajectory, method: str = "factor") -> np.ndarray:
    return np.array([concurrence(rho, method) for rho in trajectory.states])


def coherence_series(trajectory: Trajectory) -> np.ndarray:
    return np.abs(trajectory.entries(0, 2) + trajectory.entries(1, 3))


def classify(amplitudes: PureStateAmplitudes, tol: float = 1e-12) -> StateClass:
    """Place a pure state in the robust/fragile taxonomy.

    Robust states have a1 = 0 or a4 = 0 and keep their concurrence; fragile
    states have a2 = 0 or a3 = 0 and lose it. Every other entangled state is
    Generic. The asymptotic concurrence comes from the surviving rho_23.
    """
    a1, a2, a3, a4 = (abs(a) for a in amplitudes.amplitudes)
    inner = a2 * a3
    outer = a1 * a4
    initial = pure_concurrence(amplitudes)
    asymptotic = 2.0 * max(0.0, inner - outer)

    if abs(amplitudes[1] * amplitudes[2] - amplitudes[0] * amplitudes[3]) <= tol:
        kind = StateKind.SEPARABLE
    elif (a1 <= tol or a4 <= tol) and inner > tol:
        kind = StateKind.ROBUST
    elif (a2 <= tol or a3 <= tol) and outer > tol:
        kind = StateKind.FRAGILE
    else:
        kind = StateKind.GENERIC
    return StateClass(kind, initial, asymptotic)


def time_scales(rate: float) -> TimeScales:
    """Entanglement and dephasing times for Markov rate Gamma.

    Raises:
        ValueError: If Gamma is not positive
    """
    if not (math.isfinite(rate) and rate > 0):
        raise ValueError(f"Markov rate must be positive, got {rate}")
    return TimeScales(
        entanglement_time=1.0 / (16.0 * rate),
        dephasing_time=1.0 / (4.0 * rate),
        markov_rate=rate,
    )


def time_scales_for(bath: BathModel) -> TimeScales:
    """Time scales of a continuum bath.

    Raises:
        UnsupportedError: If the bath has no positive Markov rate
    """
    rate = markov_rate(bath)
    if rate == 0:
        raise UnsupportedError("Markov rate is zero for eta_c=0: tau_e and tau_phi are infinite")
    return time_scales(rate)


def fragile_concurrence_analytic(a1: complex, a4: complex, d_t: float) -> float:
    """2|a1 a4| exp(-16 D(t)); D(t) may be negative on revivals."""
    return 2.0 * abs(a1 * a4) * math.exp(-16.0 * d_t)


def fit_decay_rate(
    times: Sequence[float],
    signal: Sequence[float],
    window: Tuple[float, float],
    floor: float = 1e-13,
) -> float:
    """Exponential decay rate of |signal| by least squares on its logarithm.

    Samples inside the window at or below the floor are ignored.

    Raises:
        UnsupportedError: If fewer than 3 usable samples remain in the window
    """
    t = np.asarray(times, dtype=float)
    s = np.abs(np.asarray(signal))
    start, stop = window
    if not start < stop:
        raise ValueError(f"Window start must precede its end, got {window}")
    usable = (t >= start) & (t <= stop) & (s > floor)
    if np.count_nonzero(usable) < 3:
        raise UnsupportedError(
            f"Only {np.count_nonzero(usable)} samples above {floor:.1e} in the fit window"
        )
    x = t[usable]
    y = np.log(s[usable])
    dx = x - x.mean()
    slope = float(np.sum(dx * (y - y.mean())) / np.sum(dx * dx))
    return -slope


def _window_slice(trajectory: Trajectory, window: Tuple[float, float]) -> Trajectory:
    inside = (trajectory.times >= window[0]) & (trajectory.times <= window[1])
    return Trajectory(trajectory.times[inside], trajectory.states[inside])


def decay_rates(
    trajectory: Trajectory, window: Tuple[float, float], floor: float = 1e-13
) -> Tuple[float, float]:
    """Fitted decay rates of the concurrence and of qubit A's coherence."""
    if window[0] < trajectory.times[0] or window[1] > trajectory.times[-1]:
        raise UnsupportedError(f"Window [{window[0]:.6g}, {window[1]:.6g}] is outside the grid")
    part = _window_slice(trajectory, window)
    rate_c = fit_decay_rate(part.times, concurrence_series(part), window, floor)
    rate_coh = fit_decay_rate(part.times, coherence_series(part), window, floor)
    return rate_c, rate_coh


@dataclass(frozen=True)
class RateRecord:
    """Outcome of the rate-ordering test for one initial state.

    Attributes:
        amplitudes (PureStateAmplitudes): Initial pure state
        state_class (StateClass): Its classification
        rate_concurrence (Optional[float]): Fitted concurrence rate, None when excluded
        rate_coherence (Optional[float]): Fitted local-coherence rate, None when excluded
        reason (str): Why the state was excluded, empty when included
        satisfied (Optional[bool]): Whether rate_C >= rate_coh within tolerance
    """

    amplitudes: PureStateAmplitudes
    state_class: StateClass
    rate_concurrence: Optional[float] = None
    rate_coherence: Optional[float] = None
    reason: str = ""
    satisfied: Optional[bool] = None

    @property
    def included(self) -> bool:
        return not self.reason


def _exclusion_reason(
    state_class: StateClass,
    rho0: DensityMatrix,
    trajectory: Trajectory,
    window: Tuple[float, float],
) -> str:
    if coherence_a(rho0) <= NORMALIZATION_TOL:
        return "zero local coherence"
    if state_class.asymptotic_concurrence > 0:
        return "saturating concurrence"
    if window[0] < trajectory.times[0] or window[1] > trajectory.times[-1]:
        return "window outside grid"
    return ""


def rate_ordering_sweep(
    states: Sequence[PureStateAmplitudes],
    model: CommutingModel,
    table: CoefficientTable,
    window: Tuple[float, float],
    floor: float = 1e-13,
    tolerance: float = 0.01,
) -> List[RateRecord]:
    """Check that entanglement decays no slower than local coherence, state by state.

    A state passes when rate_C >= rate_coh * (1 - tolerance). States that
    cannot be fitted are kept with the reason they were excluded.
    """
    records = []
    for amplitudes in states:
        state_class = classify(amplitudes)
        rho0 = projector(amplitudes)
        trajectory = exact_propagate(model, rho0, table)
        reason = _exclusion_reason(state_class, rho0, trajectory, window)
        if reason:
            records.append(RateRecord(amplitudes, state_class, reason=reason))
            continue
        part = _window_slice(trajectory, window)
        c_values = concurrence_series(part)
        if np.any(c_values <= floor):
            # no revivals in a continuum bath, so zero here means sudden death
            reason = "concurrence vanished before or within the window"
            records.append(RateRecord(amplitudes, state_class, reason=reason))
            continue
        try:
            rate_c = fit_decay_rate(part.times, c_values, window, floor)
            rate_coh = fit_decay_rate(part.times, coherence_series(part), window, floor)
        except UnsupportedError as e:
            records.append(RateRecord(amplitudes, state_class, reason=str(e)))
            continue
        satisfied = rate_c >= rate_coh * (1.0 - tolerance)
        if not satisfied:
            logger.warning(
                f"Rate ordering violated for a={amplitudes.amplitudes}: "
                f"rate_C={rate_c:.6g} < rate_coh={rate_coh:.6g}"
            )
        records.append(
            RateRecord(amplitudes, state_class, rate_c, rate_coh, satisfied=satisfied)
        )
    excluded = sum(1 for r in records if not r.included)
    logger.info(f"Rate-ordering sweep: {len(records) - excluded} fitted, {excluded} excluded")
    return records
