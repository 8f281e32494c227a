import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import NumericalError

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger(__name__)

MACHINE_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class EigenSettings:
    """Tolerances and iteration caps shared by the dense eigen-solvers.

    Attributes:
        max_dimension (int): Largest accepted matrix dimension
        qr_max_iterations (int): Cap on shifted QR sweeps for one matrix
        jacobi_max_sweeps (int): Cap on cyclic Jacobi sweeps
        hermitian_tol (float): Max |M - M^H| entry accepted as Hermitian
        rank_tol (float): Relative pivot below which a PSD factor is truncated
    """

    max_dimension: int = 8
    qr_max_iterations: int = 500
    jacobi_max_sweeps: int = 60
    hermitian_tol: float = 1e-8
    rank_tol: float = 1e-13


DEFAULT_EIGEN = EigenSettings()

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_matrix(m: Sequence) -> np.ndarray:
    """Coerce input to a finite square complex matrix.

    Raises:
        ValueError: If the input is not square or holds non-finite entries
    """
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"Expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("Matrix has non-finite entries")
    return arr


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"Dimension mismatch: {a.shape} vs {b.shape}")


def kron(a: Sequence, b: Sequence) -> np.ndarray:
    """Kronecker product A ⊗ B, dimension N_A·N_B."""
    a, b = as_matrix(a), as_matrix(b)
    na, nb = a.shape[0], b.shape[0]
    out = np.zeros((na * nb, na * nb), dtype=complex)
    for i in range(na):
        for j in range(na):
            out[i * nb : (i + 1) * nb, j * nb : (j + 1) * nb] = a[i, j] * b
    return out


def matmul(a: Sequence, b: Sequence) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _check_same_shape(a, b)
    return a @ b


def adjoint(a: Sequence) -> np.ndarray:
    return as_matrix(a).conj().T


def trace(a: Sequence) -> complex:
    return complex(np.sum(np.diagonal(as_matrix(a))))


def scale(a: Sequence, factor: complex) -> np.ndarray:
    return as_matrix(a) * factor


def add(a: Sequence, b: Sequence) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _check_same_shape(a, b)
    return a + b


def frobenius_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(a) ** 2)))


def is_hermitian(a: np.ndarray, tol: float) -> bool:
    return float(np.max(np.abs(a - a.conj().T))) <= tol


def _vector_norm(v: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(v) ** 2)))


def _hessenberg(a: np.ndarray) -> np.ndarray:
    """Reduce ``a`` in place to upper Hessenberg form by Householder reflections."""
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1 :, k].copy()
        alpha = _vector_norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        x[0] += phase * alpha
        x /= _vector_norm(x)
        a[k + 1 :, :] -= 2.0 * np.outer(x, x.conj() @ a[k + 1 :, :])
        a[:, k + 1 :] -= 2.0 * np.outer(a[:, k + 1 :] @ x, x.conj())
        a[k + 2 :, k] = 0.0
    return a


def _eig2(a: complex, b: complex, c: complex, d: complex) -> List[complex]:
    """Eigenvalues of [[a, b], [c, d]], the larger-modulus root computed first."""
    mid = 0.5 * (a + d)
    disc = np.sqrt(complex(0.25 * (a - d) ** 2 + b * c))
    first = mid + disc if abs(mid + disc) >= abs(mid - disc) else mid - disc
    det = a * d - b * c
    second = det / first if first != 0 else mid - disc
    return [complex(first), complex(second)]


def _wilkinson_shift(a: complex, b: complex, c: complex, d: complex) -> complex:
    roots = _eig2(a, b, c, d)
    return min(roots, key=lambda r: abs(r - d))


def _qr_sweep(h: np.ndarray, lo: int, hi: int, shift: complex) -> None:
    """One implicit-free shifted QR step on the active block h[lo:hi+1, lo:hi+1]."""
    w = h[lo : hi + 1, lo : hi + 1]
    k = w.shape[0]
    w[np.diag_indices(k)] -= shift
    rotations = []
    for i in range(k - 1):
        x, y = w[i, i], w[i + 1, i]
        r = float(np.hypot(abs(x), abs(y)))
        if r == 0.0:
            c, s = 1.0 + 0j, 0j
        else:
            c, s = x / r, y / r
        upper = w[i, i:].copy()
        lower = w[i + 1, i:].copy()
        w[i, i:] = np.conj(c) * upper + np.conj(s) * lower
        w[i + 1, i:] = -s * upper + c * lower
        rotations.append((c, s))
    for i, (c, s) in enumerate(rotations):
        top = min(i + 2, k - 1) + 1
        left = w[:top, i].copy()
        right = w[:top, i + 1].copy()
        w[:top, i] = left * c + right * s
        w[:top, i + 1] = -left * np.conj(s) + right * np.conj(c)
    w[np.diag_indices(k)] += shift


def eigenvalues_general(
    m: Sequence, settings: EigenSettings = DEFAULT_EIGEN
) -> List[complex]:
    """All eigenvalues of a small dense complex matrix.

    Householder reduction to Hessenberg form followed by shifted QR iteration
    with Wilkinson shifts and deflation; trailing 2x2 blocks are solved in
    closed form.

    Args:
        m (Sequence): Square matrix, dimension at most ``settings.max_dimension``
        settings (EigenSettings): Iteration cap and size limit

    Returns:
        List[complex]: The N eigenvalues, unordered

    Raises:
        ValueError: If the matrix is too large or malformed
        NumericalError: If QR iteration does not converge within the cap
    """
    h = as_matrix(m).copy()
    n = h.shape[0]
    if n > settings.max_dimension:
        raise ValueError(f"Dimension {n} exceeds limit {settings.max_dimension}")
    norm = frobenius_norm(h)
    if n == 1 or norm == 0.0:
        return [complex(v) for v in np.diagonal(h)]

    _hessenberg(h)
    found: List[complex] = []
    hi = n - 1
    iterations = 0
    stalled = 0
    while hi >= 0:
        if hi == 0:
            found.append(complex(h[0, 0]))
            break
        lo = hi
        while lo > 0:
            sub = abs(h[lo, lo - 1])
            local = abs(h[lo, lo]) + abs(h[lo - 1, lo - 1])
            if sub <= MACHINE_EPS * local or sub <= MACHINE_EPS * 1e-3 * norm:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            found.append(complex(h[hi, hi]))
            hi -= 1
            stalled = 0
            continue
        if lo == hi - 1:
            found.extend(_eig2(h[lo, lo], h[lo, hi], h[hi, lo], h[hi, hi]))
            hi -= 2
            stalled = 0
            continue

        iterations += 1
        stalled += 1
        if iterations > settings.qr_max_iterations:
            raise NumericalError("Shifted QR iteration did not converge", iterations)
        if stalled % 12 == 11:
            # exceptional shift to break symmetric stagnation
            shift = h[hi, hi] + (0.75 + 0.5j) * abs(h[hi, hi - 1])
        else:
            shift = _wilkinson_shift(
                h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi]
            )
        _qr_sweep(h, lo, hi, shift)
    return found


def eigenvalues_hermitian(
    m: Sequence, settings: EigenSettings = DEFAULT_EIGEN
) -> List[float]:
    """Real spectrum of a Hermitian matrix by cyclic Jacobi rotations.

    Args:
        m (Sequence): Hermitian matrix (to ``settings.hermitian_tol``)
        settings (EigenSettings): Sweep cap and Hermiticity tolerance

    Returns:
        List[float]: Eigenvalues in ascending order

    Raises:
        ValueError: If the input is not Hermitian
        NumericalError: If the off-diagonal mass does not vanish within the cap
    """
    a = as_matrix(m)
    if not is_hermitian(a, settings.hermitian_tol):
        raise ValueError("eigenvalues_hermitian requires a Hermitian matrix")
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    norm = frobenius_norm(a)
    if norm == 0.0:
        return [0.0] * n

    # rotations leave rounding noise of order eps * norm off the diagonal
    floor = n * MACHINE_EPS * norm
    for _ in range(settings.jacobi_max_sweeps):
        off = np.abs(a - np.diag(np.diagonal(a)))
        if float(np.sqrt(np.sum(off**2))) <= floor:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                phase = np.conj(apq / mag)
                rot = np.array([[c, s], [-s * phase, c * phase]], dtype=complex)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
    else:
        raise NumericalError(
            "Jacobi rotations did not converge", settings.jacobi_max_sweeps
        )
    return sorted(float(v) for v in np.diagonal(a).real)


def singular_values(
    m: Sequence, settings: EigenSettings = DEFAULT_EIGEN
) -> List[float]:
    """Singular values by one-sided (Hestenes) Jacobi orthogonalisation.

    Small singular values keep absolute accuracy near machine epsilon times
    the matrix norm, unlike square roots of a squared spectrum.

    Returns:
        List[float]: Singular values in descending order
    """
    u = np.array(m, dtype=complex, copy=True)
    if u.ndim != 2:
        raise ValueError(f"Expected a matrix, got shape {u.shape}")
    ncols = u.shape[1]
    # squared column norms underflow for decayed columns, so pairs are also
    # judged against the scale of the whole matrix
    floor = MACHINE_EPS * float(np.sum(np.abs(u) ** 2))
    for _ in range(settings.jacobi_max_sweeps):
        rotated = False
        for i in range(ncols - 1):
            for j in range(i + 1, ncols):
                ci, cj = u[:, i], u[:, j]
                alpha = float(np.sum(np.abs(ci) ** 2))
                beta = float(np.sum(np.abs(cj) ** 2))
                gamma = complex(np.vdot(ci, cj))
                mag = abs(gamma)
                if mag <= max(MACHINE_EPS * np.sqrt(alpha * beta), floor):
                    continue
                rotated = True
                cj = cj * np.conj(gamma / mag)
                zeta = (beta - alpha) / (2.0 * mag)
                if zeta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                u[:, i], u[:, j] = c * ci - s * cj, s * ci + c * cj
        if not rotated:
            break
    else:
        raise NumericalError(
            "One-sided Jacobi did not converge", settings.jacobi_max_sweeps
        )
    norms = [float(np.sqrt(np.sum(np.abs(u[:, k]) ** 2))) for k in range(ncols)]
    return sorted(norms, reverse=True)


def psd_factor(rho: Sequence, settings: EigenSettings = DEFAULT_EIGEN) -> np.ndarray:
    """Factor a positive semidefinite matrix as rho = W W^H.

    Diagonally pivoted outer-product Cholesky; stops once the largest
    remaining pivot falls below ``settings.rank_tol`` times the largest
    diagonal entry, so W has as many columns as the numerical rank.
    """
    a = as_matrix(rho)
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    top = float(np.max(a.diagonal().real))
    columns = []
    if top > 0.0:
        for _ in range(n):
            pivots = a.diagonal().real
            j = int(np.argmax(pivots))
            if pivots[j] <= settings.rank_tol * top:
                break
            col = a[:, j] / np.sqrt(pivots[j])
            columns.append(col)
            a = a - np.outer(col, col.conj())
    if not columns:
        return np.zeros((n, 0), dtype=complex)
    return np.column_stack(columns)


@dataclass(frozen=True)
class StateTolerances:
    """Bounds a density matrix must satisfy.

    Defaults are the strict ones for exactly constructed states; integrated
    trajectories are checked against looser bounds.
    """

    hermiticity: float = 1e-10
    trace: float = 1e-10
    positivity: float = 1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """N×N density matrix in the fixed product basis |++>, |+->, |-+>, |-->.

    Attributes:
        matrix (np.ndarray): Complex entries
    """

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix))

    @classmethod
    def pure(cls, amplitudes: Sequence[complex]) -> "DensityMatrix":
        """Projector |psi><psi| onto the given amplitude vector."""
        psi = np.asarray(amplitudes, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def violations(
        self,
        tolerances: StateTolerances = StateTolerances(),
        settings: EigenSettings = DEFAULT_EIGEN,
    ) -> List[str]:
        """Describe every invariant the state breaks; empty when valid."""
        problems = []
        rho = self.matrix
        skew = float(np.max(np.abs(rho - rho.conj().T)))
        if skew > tolerances.hermiticity:
            problems.append(f"hermiticity defect {skew:.3e}")
        drift = abs(trace(rho) - 1.0)
        if drift > tolerances.trace:
            problems.append(f"trace drift {drift:.3e}")
        if skew <= settings.hermitian_tol:
            lowest = eigenvalues_hermitian(rho, settings)[0]
            if lowest < -tolerances.positivity:
                problems.append(f"negative eigenvalue {lowest:.3e}")
        return problems
