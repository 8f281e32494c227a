import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, UnsupportedError

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureSettings:
    """Accuracy contract for continuum-bath frequency integrals.

    Attributes:
        cutoff_multiple (float): Frequencies are integrated up to this multiple of omega_c
        epsrel (float): Relative tolerance handed to the adaptive integrator
        epsabs (float): Absolute floor so vanishing integrals still terminate
        limit (int): Maximum number of adaptive subintervals
        maxp1 (int): Chebyshev moment cap for oscillatory (QAWO) integrals
    """

    cutoff_multiple: float = 40.0
    epsrel: float = 1e-9
    epsabs: float = 1e-14
    limit: int = 2000
    maxp1: int = 200


DEFAULT_QUADRATURE = QuadratureSettings()


@dataclass(frozen=True)
class DiscreteMode:
    """One bath oscillator: coupling g and frequency omega, both in units of omega_0."""

    coupling: float
    frequency: float

    def __post_init__(self):
        if not (math.isfinite(self.coupling) and self.coupling >= 0):
            raise ValueError(f"Mode coupling must be >= 0, got {self.coupling}")
        if not (math.isfinite(self.frequency) and self.frequency > 0):
            raise ValueError(f"Mode frequency must be positive, got {self.frequency}")


@dataclass(frozen=True)
class OhmicSpectrum:
    """Ohmic spectral density with exponential cutoff, J(w) = eta_c * w * exp(-w/omega_c)."""

    coupling: float
    cutoff: float

    def __post_init__(self):
        if not (math.isfinite(self.coupling) and self.coupling >= 0):
            raise ValueError(f"Ohmic coupling must be >= 0, got {self.coupling}")
        if not (math.isfinite(self.cutoff) and self.cutoff > 0):
            raise ValueError(f"Ohmic cutoff must be positive, got {self.cutoff}")

    def spectral_density(self, omega):
        return self.coupling * omega * np.exp(-omega / self.cutoff)


@dataclass(frozen=True)
class BathModel:
    """Thermal bosonic bath, either a finite set of modes or an Ohmic continuum.

    Attributes:
        temperature (float): k_B T in units of omega_0; zero selects the exact T=0 branch
        modes (Tuple[DiscreteMode, ...]): Modes of a discrete bath, empty for a continuum
        ohmic (Optional[OhmicSpectrum]): Continuum spectral density, None for a discrete bath
    """

    temperature: float
    modes: Tuple[DiscreteMode, ...] = ()
    ohmic: Optional[OhmicSpectrum] = None

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and self.temperature >= 0):
            raise ValueError(f"Temperature must be >= 0, got {self.temperature}")
        if (self.ohmic is None) == (len(self.modes) == 0):
            raise ValueError("A bath is either a non-empty list of modes or an Ohmic spectrum")
        object.__setattr__(self, "modes", tuple(self.modes))

    @classmethod
    def discrete(
        cls, modes: Sequence[Tuple[float, float]], temperature: float
    ) -> "BathModel":
        return cls(
            temperature=temperature,
            modes=tuple(DiscreteMode(g, w) for g, w in modes),
        )

    @classmethod
    def ohmic_bath(cls, coupling: float, cutoff: float, temperature: float) -> "BathModel":
        return cls(temperature=temperature, ohmic=OhmicSpectrum(coupling, cutoff))

    @property
    def is_discrete(self) -> bool:
        return self.ohmic is None

    def _mode_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Squared couplings, frequencies and thermal factors of a discrete bath."""
        g2 = np.array([m.coupling**2 for m in self.modes])
        w = np.array([m.frequency for m in self.modes])
        return g2, w, thermal_factor(w, self.temperature)


def thermal_factor(omega, temperature: float):
    """coth(omega / 2T), with T = 0 taken as the exact branch 1."""
    omega = np.asarray(omega, dtype=float)
    if temperature == 0:
        return np.ones_like(omega)
    return 1.0 / np.tanh(omega / (2.0 * temperature))


def _x_coth_x(x: float) -> float:
    if x < 1e-4:
        return 1.0 + x * x / 3.0
    return x / math.tanh(x)


def _coth_minus_inverse(x: float) -> float:
    if x < 1e-4:
        return x / 3.0 - x**3 / 45.0
    return 1.0 / math.tanh(x) - 1.0 / x


def _cos_moment(x: float) -> float:
    """(x sin x + cos x - 1) / x^2, the scaled integral of tau*cos(omega*tau)."""
    if abs(x) < 1e-3:
        return 0.5 - x * x / 8.0 + x**4 / 144.0
    return (x * math.sin(x) + math.cos(x) - 1.0) / (x * x)


def _sin_moment(x: float) -> float:
    """(sin x - x cos x) / x^2, the scaled integral of tau*sin(omega*tau)."""
    if abs(x) < 1e-3:
        return x / 3.0 - x**3 / 30.0
    return (math.sin(x) - x * math.cos(x)) / (x * x)


def _integrate(
    integrand: Callable[[float], float],
    upper: float,
    settings: QuadratureSettings,
    weight: Optional[str] = None,
    wvar: float = 0.0,
) -> float:
    """Adaptive quadrature over [0, upper] with an explicit convergence check.

    Raises:
        ConvergenceError: If QUADPACK reports it could not reach the tolerance
    """
    kwargs = dict(
        epsabs=settings.epsabs,
        epsrel=settings.epsrel,
        limit=settings.limit,
        full_output=1,
    )
    if weight is not None and wvar != 0.0:
        kwargs.update(weight=weight, wvar=wvar, maxp1=settings.maxp1)
    elif weight == "sin":
        return 0.0
    result = integrate.quad(integrand, 0.0, upper, **kwargs)
    if len(result) > 3:
        raise ConvergenceError(
            f"Quadrature did not converge ({result[3]!s:.120})", result[1]
        )
    return float(result[0])


def _require_time(t: float, name: str = "t") -> None:
    if not (math.isfinite(t) and t >= 0):
        raise ValueError(f"{name} must be a finite non-negative time, got {t}")


class _OhmicIntegrals:
    """Frequency-space integrals of an Ohmic bath at fixed temperature.

    Time integrals of the kernels are carried out analytically inside the
    frequency integral, so every quantity is a single one-dimensional
    quadrature. The 2T/omega pole of coth is split off and integrated in
    closed form.
    """

    def __init__(self, bath: BathModel, settings: QuadratureSettings):
        self.spectrum = bath.ohmic
        self.temperature = bath.temperature
        self.settings = settings
        self.upper = settings.cutoff_multiple * self.spectrum.cutoff

    def _damping(self, omega: float) -> float:
        return self.spectrum.coupling * math.exp(-omega / self.spectrum.cutoff)

    def thermal_density(self, omega: float) -> float:
        """J(omega) * coth(omega / 2T), finite at omega = 0."""
        if self.temperature == 0:
            return self._damping(omega) * omega
        x = omega / (2.0 * self.temperature)
        return self._damping(omega) * 2.0 * self.temperature * _x_coth_x(x)

    def _regular_part(self, omega: float) -> float:
        """J coth / omega with the 2T/omega pole removed."""
        if self.temperature == 0:
            return self._damping(omega)
        return self._damping(omega) * _coth_minus_inverse(omega / (2.0 * self.temperature))

    def eta(self, tau: float) -> float:
        return _integrate(self.thermal_density, self.upper, self.settings, "cos", tau)

    def nu(self, tau: float) -> float:
        return -_integrate(
            self.spectrum.spectral_density, self.upper, self.settings, "sin", tau
        )

    def f_real(self, t: float) -> float:
        pole = 0.0
        if self.temperature > 0:
            pole = (
                2.0
                * self.temperature
                * self.spectrum.coupling
                * math.atan(self.spectrum.cutoff * t)
            )
        return pole + _integrate(self._regular_part, self.upper, self.settings, "sin", t)

    def f_imag(self, t: float) -> float:
        if self.upper * t < 50.0:
            return -_integrate(
                lambda w: 2.0 * self._damping(w) * math.sin(0.5 * w * t) ** 2,
                self.upper,
                self.settings,
            )
        wc = self.spectrum.cutoff
        flat = wc * (1.0 - math.exp(-self.upper / wc))
        return -self.spectrum.coupling * flat + _integrate(
            self._damping, self.upper, self.settings, "cos", t
        )

    def g_moments(self, t: float) -> Tuple[float, float]:
        """Integrals of alpha(tau) * tau over [0, t], real and imaginary parts."""
        real = _integrate(
            lambda w: self.thermal_density(w) * t * t * _cos_moment(w * t),
            self.upper,
            self.settings,
        )
        imag = -_integrate(
            lambda w: self.spectrum.spectral_density(w) * t * t * _sin_moment(w * t),
            self.upper,
            self.settings,
        )
        return real, imag


def eta_kernel(
    bath: BathModel, tau: float, settings: QuadratureSettings = DEFAULT_QUADRATURE
) -> float:
    """Real part eta(tau) of the bath correlation function.

    Args:
        bath (BathModel): Bath description
        tau (float): Time lag, tau >= 0
        settings (QuadratureSettings): Continuum quadrature contract

    Returns:
        float: sum_l g_l^2 coth(w_l/2T) cos(w_l tau), or the Ohmic integral

    Raises:
        ValueError: For a negative lag
        ConvergenceError: If the continuum quadrature fails
    """
    _require_time(tau, "tau")
    if bath.is_discrete:
        g2, w, coth = bath._mode_arrays()
        return float(np.sum(g2 * coth * np.cos(w * tau)))
    return _OhmicIntegrals(bath, settings).eta(tau)


def nu_kernel(
    bath: BathModel, tau: float, settings: QuadratureSettings = DEFAULT_QUADRATURE
) -> float:
    """Imaginary part nu(tau) of the bath correlation function; temperature independent."""
    _require_time(tau, "tau")
    if bath.is_discrete:
        g2, w, _ = bath._mode_arrays()
        return float(-np.sum(g2 * np.sin(w * tau)))
    return _OhmicIntegrals(bath, settings).nu(tau)


def _discrete_coefficients(bath: BathModel, kappa: float, times: np.ndarray) -> dict:
    """Closed-form F, G, D and Phi of a discrete bath on an array of times."""
    g2, w, coth = bath._mode_arrays()
    wt = np.outer(w, times)
    sin_wt = np.sin(wt)
    cos_wt = np.cos(wt)
    half = 2.0 * np.sin(0.5 * wt) ** 2  # 1 - cos(wt) without cancellation
    wcol = w[:, None]
    thermal = (g2 * coth)[:, None]
    plain = g2[:, None]

    table = {
        "f_r": np.sum(thermal * sin_wt / wcol, axis=0),
        "f_i": -np.sum(plain * half / wcol, axis=0),
        "d": np.sum(thermal * half / wcol**2, axis=0),
        "phi": -np.sum(plain * (times[None, :] - sin_wt / wcol) / wcol, axis=0),
    }
    if kappa == 0:
        table["g_r"] = np.zeros_like(times)
        table["g_i"] = np.zeros_like(times)
    else:
        t = times[None, :]
        table["g_r"] = kappa * np.sum(thermal * (t * sin_wt / wcol - half / wcol**2), axis=0)
        table["g_i"] = -kappa * np.sum(plain * (sin_wt / wcol**2 - t * cos_wt / wcol), axis=0)
    return table


def coefficient_F(
    bath: BathModel, t: float, settings: QuadratureSettings = DEFAULT_QUADRATURE
) -> complex:
    """F(t) = integral over [0, t] of alpha(tau), as F_R + i F_I."""
    _require_time(t)
    if t == 0:
        return 0j
    if bath.is_discrete:
        table = _discrete_coefficients(bath, 0.0, np.array([t]))
        return complex(table["f_r"][0], table["f_i"][0])
    integrals = _OhmicIntegrals(bath, settings)
    return complex(integrals.f_real(t), integrals.f_imag(t))


def coefficient_G(
    bath: BathModel,
    kappa: float,
    t: float,
    settings: QuadratureSettings = DEFAULT_QUADRATURE,
) -> complex:
    """G(t) = kappa * integral over [0, t] of alpha(tau) * tau; exactly zero when kappa = 0."""
    _require_time(t)
    if kappa == 0 or t == 0:
        return 0j
    if bath.is_discrete:
        table = _discrete_coefficients(bath, 1.0, np.array([t]))
        return kappa * complex(table["g_r"][0], table["g_i"][0])
    real, imag = _OhmicIntegrals(bath, settings).g_moments(t)
    return kappa * complex(real, imag)


def markov_rate(bath: BathModel) -> float:
    """Long-time limit Gamma of F_R(t) for a continuum bath.

    Gamma = (pi/2) * lim_{w->0} J(w) coth(w/2T) = pi * eta_c * T for the Ohmic form.

    Raises:
        UnsupportedError: For discrete baths (F_R stays quasi-periodic) or T = 0
    """
    if bath.is_discrete:
        raise UnsupportedError(
            "Markov rate is undefined for a discrete bath: F_R(t) is quasi-periodic"
        )
    if bath.temperature == 0:
        raise UnsupportedError(
            "Markov rate is undefined at T=0: F_R(t) decays to zero without a plateau"
        )
    return math.pi * bath.ohmic.coupling * bath.temperature


@dataclass(frozen=True)
class CoefficientTable:
    """Master-equation coefficients sampled on a uniform time grid.

    Attributes:
        times (np.ndarray): Grid 0 = t_0 < ... < t_M, uniform step
        f_r (np.ndarray): Re F(t)
        f_i (np.ndarray): Im F(t)
        d (np.ndarray): D(t), running integral of F_R
        phi (np.ndarray): Phi(t), running integral of F_I
        g_r (np.ndarray): Re G(t)
        g_i (np.ndarray): Im G(t)
        kappa (float): Constant of [L, H] = i kappa I the table was built for
    """

    times: np.ndarray
    f_r: np.ndarray
    f_i: np.ndarray
    d: np.ndarray
    phi: np.ndarray
    g_r: np.ndarray
    g_i: np.ndarray
    kappa: float = 0.0
    _f: np.ndarray = field(init=False, repr=False, compare=False)
    _g: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) < 3 or times[0] != 0.0:
            raise ValueError("Coefficient grid must start at 0 and hold at least 3 samples")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise ValueError("Coefficient grid must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, times[-1]):
            raise ValueError("Coefficient grid must be uniform")
        for name in ("f_r", "f_i", "d", "phi", "g_r", "g_i"):
            values = np.asarray(getattr(self, name), dtype=float)
            if values.shape != times.shape:
                raise ValueError(f"Column {name} does not match the grid length")
            object.__setattr__(self, name, values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "_f", self.f_r + 1j * self.f_i)
        object.__setattr__(self, "_g", self.g_r + 1j * self.g_i)

    @property
    def step(self) -> float:
        return float((self.times[-1] - self.times[0]) / (len(self.times) - 1))

    def __len__(self) -> int:
        return len(self.times)

    def at_index(self, index: int) -> Tuple[float, complex, complex]:
        """Grid time with the stored F and G samples at that index."""
        return float(self.times[index]), complex(self._f[index]), complex(self._g[index])

    def interpolate(self, t: float) -> Tuple[complex, complex]:
        """F(t) and G(t) between grid samples by 4-point Lagrange interpolation.

        Raises:
            ValueError: If t lies outside the tabulated range
        """
        n = len(self.times)
        h = self.step
        if t < -1e-12 * h or t > self.times[-1] + 1e-9 * h:
            raise ValueError(f"t={t} is outside the table range [0, {self.times[-1]}]")
        i = min(max(int(math.floor(t / h)), 0), n - 2)
        start = min(max(i - 1, 0), n - 4) if n >= 4 else 0
        nodes = min(4, n)
        x = (t - self.times[start]) / h
        weights = np.ones(nodes)
        for k in range(nodes):
            for j in range(nodes):
                if j != k:
                    weights[k] *= (x - j) / (k - j)
        window = slice(start, start + nodes)
        return (
            complex(np.dot(weights, self._f[window])),
            complex(np.dot(weights, self._g[window])),
        )


def _running_simpson(values: np.ndarray, h: float) -> np.ndarray:
    """Running integral of uniformly sampled values; requires an even number of intervals.

    Even indices use composite Simpson; each odd index adds the partial
    three-point Simpson weight (5, 8, -1) * h/12 over the following pair.
    """
    n = len(values) - 1
    out = np.zeros(n + 1)
    for j in range(0, n, 2):
        f0, f1, f2 = values[j], values[j + 1], values[j + 2]
        out[j + 1] = out[j] + h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2)
        out[j + 2] = out[j] + h / 3.0 * (f0 + 4.0 * f1 + f2)
    return out


def _uniform_grid(t_max: float, steps: int) -> np.ndarray:
    if isinstance(steps, bool) or int(steps) != steps or steps < 2:
        raise ValueError(f"steps must be an integer >= 2, got {steps}")
    if not (math.isfinite(t_max) and t_max > 0):
        raise ValueError(f"t_max must be positive, got {t_max}")
    steps = int(steps)
    if steps % 2:
        # Simpson accumulation needs an even interval count: pad one sample
        h = t_max / steps
        logger.info(f"Odd step count {steps}; padding the grid to t={t_max + h:.6g}")
        return np.linspace(0.0, t_max + h, steps + 2)
    return np.linspace(0.0, t_max, steps + 1)


def tabulate(
    bath: BathModel,
    kappa: float,
    t_max: float,
    steps: int,
    settings: QuadratureSettings = DEFAULT_QUADRATURE,
) -> CoefficientTable:
    """Sample F, G and the memory integrals D, Phi on a uniform grid.

    Discrete baths use closed forms for every column. Ohmic baths sample F
    (and G when kappa != 0) by quadrature and accumulate D, Phi with the
    running Simpson rule.

    Args:
        bath (BathModel): Bath description
        kappa (float): Commutator constant; zero leaves G identically 0
        t_max (float): Final time, > 0
        steps (int): Number of grid intervals, >= 2 (an odd count is padded by one)
        settings (QuadratureSettings): Continuum quadrature contract

    Returns:
        CoefficientTable: The sampled coefficients

    Raises:
        ValueError: For invalid grid parameters
        ConvergenceError: If a continuum quadrature fails
    """
    times = _uniform_grid(t_max, steps)
    if bath.is_discrete:
        columns = _discrete_coefficients(bath, kappa, times)
        columns["f_r"][0] = columns["f_i"][0] = columns["d"][0] = columns["phi"][0] = 0.0
        columns["g_r"][0] = columns["g_i"][0] = 0.0
        return CoefficientTable(times=times, kappa=kappa, **columns)

    logger.info(
        f"Tabulating Ohmic coefficients on {len(times)} samples up to t={times[-1]:.6g}"
    )
    integrals = _OhmicIntegrals(bath, settings)
    f_r = np.zeros_like(times)
    f_i = np.zeros_like(times)
    g_r = np.zeros_like(times)
    g_i = np.zeros_like(times)
    for k, t in enumerate(times[1:], start=1):
        f_r[k] = integrals.f_real(t)
        f_i[k] = integrals.f_imag(t)
        if kappa != 0:
            real, imag = integrals.g_moments(t)
            g_r[k], g_i[k] = kappa * real, kappa * imag
    h = float(times[1] - times[0])
    return CoefficientTable(
        times=times,
        f_r=f_r,
        f_i=f_i,
        d=_running_simpson(f_r, h),
        phi=_running_simpson(f_i, h),
        g_r=g_r,
        g_i=g_i,
        kappa=kappa,
    )


def markov_table(bath: BathModel, t_max: float, steps: int) -> CoefficientTable:
    """Memoryless limit of the coefficients: F = Gamma constant, no phase shift, no G."""
    rate = markov_rate(bath)
    times = _uniform_grid(t_max, steps)
    zeros = np.zeros_like(times)
    return CoefficientTable(
        times=times,
        f_r=np.full_like(times, rate),
        f_i=zeros,
        d=rate * times,
        phi=zeros,
        g_r=zeros,
        g_i=zeros,
        kappa=0.0,
    )
