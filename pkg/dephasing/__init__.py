"""Exact and integrated dephasing dynamics of two entangled qubits in a thermal bath."""

from .bath import (
    BathModel,
    CoefficientTable,
    DiscreteMode,
    OhmicSpectrum,
    QuadratureSettings,
    coefficient_F,
    coefficient_G,
    eta_kernel,
    markov_rate,
    markov_table,
    nu_kernel,
    tabulate,
)
from .dynamics import (
    CommutingModel,
    Trajectory,
    analytic_purity,
    check_state,
    exact_propagate,
    integrate_master_equation,
    purity,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DephasingError,
    IntegrationError,
    NumericalError,
    UnsupportedError,
)
from .linalg import DensityMatrix, EigenSettings, StateTolerances
from .twoqubit import (
    PureStateAmplitudes,
    StateClass,
    StateKind,
    TimeScales,
    TwoQubitParams,
    build_model,
    classify,
    concurrence,
    fragile_concurrence_analytic,
    pure_concurrence,
    reduce_A,
    reduce_B,
    time_scales,
)

__all__ = [
    "BathModel",
    "CoefficientTable",
    "CommutingModel",
    "ConfigError",
    "ConvergenceError",
    "DensityMatrix",
    "DephasingError",
    "DiscreteMode",
    "EigenSettings",
    "IntegrationError",
    "NumericalError",
    "OhmicSpectrum",
    "PureStateAmplitudes",
    "QuadratureSettings",
    "StateClass",
    "StateKind",
    "StateTolerances",
    "TimeScales",
    "Trajectory",
    "TwoQubitParams",
    "UnsupportedError",
    "analytic_purity",
    "build_model",
    "check_state",
    "classify",
    "coefficient_F",
    "coefficient_G",
    "concurrence",
    "eta_kernel",
    "exact_propagate",
    "fragile_concurrence_analytic",
    "integrate_master_equation",
    "markov_rate",
    "markov_table",
    "nu_kernel",
    "pure_concurrence",
    "purity",
    "reduce_A",
    "reduce_B",
    "tabulate",
    "time_scales",
]
