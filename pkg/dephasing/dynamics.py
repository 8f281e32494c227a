import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .bath import CoefficientTable
from .errors import IntegrationError, NumericalError, UnsupportedError
from .linalg import (
    DEFAULT_EIGEN,
    DensityMatrix,
    EigenSettings,
    StateTolerances,
    as_matrix,
    is_hermitian,
    matmul,
    trace,
)

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger(__name__)

# Bounds checked along evolved trajectories
EXACT_TOLERANCES = StateTolerances(hermiticity=1e-10, trace=1e-10, positivity=1e-8)
INTEGRATOR_TOLERANCES = StateTolerances(hermiticity=1e-10, trace=1e-7, positivity=1e-8)

# Trace drift beyond which a Runge-Kutta run is declared unstable
TRACE_DRIFT_LIMIT = 1e-6

StateLike = Union[DensityMatrix, np.ndarray]


def state_matrix(rho: StateLike) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return as_matrix(rho)


@dataclass(frozen=True)
class CommutingModel:
    """System whose Hamiltonian H and coupling operator L are simultaneously diagonal.

    Attributes:
        energies (np.ndarray): Eigenvalues E_n of H
        couplings (np.ndarray): Eigenvalues l_n of L
        hamiltonian (np.ndarray): Dense H, diag(E) in the state basis
        coupling_operator (np.ndarray): Dense L, diag(l) in the state basis
    """

    energies: np.ndarray
    couplings: np.ndarray
    hamiltonian: Optional[np.ndarray] = None
    coupling_operator: Optional[np.ndarray] = None

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=float)
        couplings = np.asarray(self.couplings, dtype=float)
        if energies.ndim != 1 or energies.shape != couplings.shape:
            raise ValueError("Energies and couplings must be vectors of equal length")
        if not (np.all(np.isfinite(energies)) and np.all(np.isfinite(couplings))):
            raise ValueError("Energies and couplings must be finite")
        hamiltonian = (
            np.diag(energies).astype(complex)
            if self.hamiltonian is None
            else as_matrix(self.hamiltonian)
        )
        coupling_operator = (
            np.diag(couplings).astype(complex)
            if self.coupling_operator is None
            else as_matrix(self.coupling_operator)
        )
        for name, dense, diagonal in (
            ("H", hamiltonian, energies),
            ("L", coupling_operator, couplings),
        ):
            if dense.shape != (len(diagonal), len(diagonal)):
                raise ValueError(f"Dense {name} has shape {dense.shape}")
            scale = max(1.0, float(np.max(np.abs(diagonal))))
            if np.max(np.abs(dense - np.diag(diagonal))) > 1e-12 * scale:
                raise ValueError(f"Dense {name} is not diag of its spectrum")
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "hamiltonian", hamiltonian)
        object.__setattr__(self, "coupling_operator", coupling_operator)

    @property
    def dimension(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class Trajectory:
    """Density matrices sampled on a time grid.

    Attributes:
        times (np.ndarray): Sample times, the coefficient grid or a subsampling of it
        states (np.ndarray): Array of shape (len(times), N, N)
    """

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=complex)
        if states.ndim != 3 or states.shape[0] != len(times):
            raise ValueError("Trajectory needs one N×N state per sample time")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    def state(self, index: int) -> DensityMatrix:
        return DensityMatrix(self.states[index])

    def entries(self, n: int, m: int) -> np.ndarray:
        """Time series of the (n, m) matrix element, zero-based indices."""
        return self.states[:, n, m]

    def subsample(self, stride: int) -> "Trajectory":
        if stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")
        return Trajectory(self.times[::stride], self.states[::stride])

    def purities(self) -> np.ndarray:
        return np.array([purity(rho) for rho in self.states])

    def check(
        self,
        tolerances: StateTolerances = EXACT_TOLERANCES,
        settings: EigenSettings = DEFAULT_EIGEN,
    ) -> None:
        """Verify every sample is a valid state.

        Raises:
            NumericalError: On the first sample breaking an invariant
        """
        for t, rho in zip(self.times, self.states):
            problems = check_state(rho, tolerances, settings)
            if problems:
                raise NumericalError(f"Invalid state at t={t:.6g}: {'; '.join(problems)}")


def check_state(
    rho: StateLike,
    tolerances: StateTolerances = StateTolerances(),
    settings: EigenSettings = DEFAULT_EIGEN,
) -> List[str]:
    """List the trace, Hermiticity and positivity violations of a state."""
    state = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)
    return state.violations(tolerances, settings)


def exact_propagate(
    model: CommutingModel, rho0: StateLike, table: CoefficientTable
) -> Trajectory:
    """Closed-form evolution for commuting H and L on every grid time of the table.

    rho_nm(t) = rho_nm(0) * exp[-i(E_n - E_m)t - i(l_n^2 - l_m^2)Phi(t)] * exp[-(l_n - l_m)^2 D(t)]

    Args:
        model (CommutingModel): Spectral data of H and L
        rho0 (StateLike): Initial state in the common eigenbasis
        table (CoefficientTable): Coefficients with kappa = 0

    Returns:
        Trajectory: States on the table grid

    Raises:
        UnsupportedError: If the table was built for kappa != 0
        ValueError: If the state dimension does not match the model
    """
    if table.kappa != 0:
        raise UnsupportedError(
            f"Closed-form propagation needs [L, H] = 0, table has kappa={table.kappa}"
        )
    rho = state_matrix(rho0)
    if rho.shape[0] != model.dimension:
        raise ValueError(
            f"State dimension {rho.shape[0]} does not match model dimension {model.dimension}"
        )
    e, l = model.energies, model.couplings
    energy_gap = e[:, None] - e[None, :]
    shift = (l**2)[:, None] - (l**2)[None, :]
    rate = (l[:, None] - l[None, :]) ** 2

    t = table.times[:, None, None]
    phase = np.exp(-1j * (energy_gap * t + shift * table.phi[:, None, None]))
    damping = np.exp(-rate * table.d[:, None, None])
    states = rho[None, :, :] * phase * damping
    return Trajectory(table.times.copy(), states)


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _master_rhs(
    h: np.ndarray, l: np.ndarray, rho: np.ndarray, f: complex, g: complex
) -> np.ndarray:
    """Right-hand side of the time-local master equation."""
    l_rho = l @ rho
    rho_l = rho @ l
    rho_dot = -1j * _commutator(h, rho)
    rho_dot += f * _commutator(l_rho, l) + np.conj(f) * _commutator(l, rho_l)
    if g != 0:
        rho_dot += g * _commutator(rho, l) + np.conj(g) * _commutator(l, rho)
    return rho_dot


def integrate_master_equation(
    hamiltonian: Sequence,
    coupling_operator: Sequence,
    table: CoefficientTable,
    rho0: StateLike,
    substeps: int,
    settings: EigenSettings = DEFAULT_EIGEN,
) -> Trajectory:
    """Fixed-step RK4 integration of the time-local master equation.

    drho/dt = -i[H, rho] + F[L rho, L] + F*[L, rho L] + G[rho, L] + G*[L, rho]

    F and G between grid samples come from the table's cubic interpolation.
    The state is re-Hermitized after every Runge-Kutta step and recorded at
    each grid time.

    Args:
        hamiltonian (Sequence): Hermitian H
        coupling_operator (Sequence): Hermitian L; need not commute with H
        table (CoefficientTable): Tabulated F and G
        rho0 (StateLike): Initial state
        substeps (int): Runge-Kutta steps per grid interval, >= 1
        settings (EigenSettings): Hermiticity tolerance for H and L

    Returns:
        Trajectory: States on the table grid

    Raises:
        ValueError: For non-Hermitian operators, mismatched shapes or substeps < 1
        IntegrationError: If the trace drifts by more than 1e-6
    """
    h = as_matrix(hamiltonian)
    l = as_matrix(coupling_operator)
    rho = state_matrix(rho0).copy()
    if not (is_hermitian(h, settings.hermitian_tol) and is_hermitian(l, settings.hermitian_tol)):
        raise ValueError("H and L must be Hermitian")
    if not (h.shape == l.shape == rho.shape):
        raise ValueError(
            f"Shape mismatch: H {h.shape}, L {l.shape}, rho {rho.shape}"
        )
    if isinstance(substeps, bool) or int(substeps) != substeps or substeps < 1:
        raise ValueError(f"substeps must be an integer >= 1, got {substeps}")
    substeps = int(substeps)

    times = table.times
    dt = table.step / substeps
    initial_trace = trace(rho)
    states = np.empty((len(times), *rho.shape), dtype=complex)
    states[0] = rho

    def rhs(t: float, current: np.ndarray) -> np.ndarray:
        f, g = table.interpolate(min(t, times[-1]))
        return _master_rhs(h, l, current, f, g)

    for k in range(len(times) - 1):
        for j in range(substeps):
            t = times[k] + j * dt
            k1 = rhs(t, rho)
            k2 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k1)
            k3 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k2)
            k4 = rhs(t + dt, rho + dt * k3)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            rho = 0.5 * (rho + rho.conj().T)
        finite = bool(np.all(np.isfinite(rho)))
        drift = abs(trace(rho) - initial_trace) if finite else float("inf")
        if not finite or drift > TRACE_DRIFT_LIMIT:
            logger.error(f"Integrator unstable: trace drift {drift:.3e} at t={times[k + 1]:.6g}")
            raise IntegrationError(
                f"Trace drifted by {drift:.3e} (step {dt:.3e})", float(times[k + 1])
            )
        states[k + 1] = rho

    logger.info(
        f"Integrated {len(times) - 1} grid steps x {substeps} substeps up to t={times[-1]:.6g}"
    )
    return Trajectory(times.copy(), states)


def purity(rho: StateLike) -> float:
    """Tr rho^2."""
    matrix = state_matrix(rho)
    return float(trace(matmul(matrix, matrix)).real)


def analytic_purity(amplitudes: Sequence[complex], couplings: Sequence[float], d_t: float) -> float:
    """Purity of an evolved pure state from its populations and D(t).

    P = sum_ij |a_i|^2 |a_j|^2 exp[-2 (l_i - l_j)^2 D(t)]

    Each coherence carries exp[-(l_i - l_j)^2 D(t)] under exact_propagate,
    so its square in Tr rho^2 decays with twice that exponent.

    Raises:
        ValueError: If the amplitudes are not normalized or lengths differ
    """
    populations = np.abs(np.asarray(amplitudes, dtype=complex)) ** 2
    l = np.asarray(couplings, dtype=float)
    if populations.shape != l.shape:
        raise ValueError("One coupling eigenvalue is needed per amplitude")
    if abs(float(np.sum(populations)) - 1.0) > 1e-12:
        raise ValueError(f"Amplitudes are not normalized: sum |a|^2 = {np.sum(populations)}")
    rate = (l[:, None] - l[None, :]) ** 2
    # equal couplings never decay, even for an infinite D(t)
    with np.errstate(invalid="ignore"):
        weights = np.where(rate == 0, 1.0, np.exp(-2.0 * rate * d_t))
    return float(populations @ weights @ populations)
