import argparse
import asyncio
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tabulate import tabulate

from .bath import CoefficientTable, tabulate as tabulate_coefficients
from .config import (
    RunConfig,
    SweepConfig,
    load_bath,
    load_config,
    normalize_amplitudes,
    with_override,
)
from .dynamics import (
    EXACT_TOLERANCES,
    INTEGRATOR_TOLERANCES,
    Trajectory,
    analytic_purity,
    exact_propagate,
    integrate_master_equation,
)
from .errors import ConfigError, DephasingError, IntegrationError, UnsupportedError
from .twoqubit import (
    COUPLINGS,
    StateKind,
    build_model,
    classify,
    coherence_series,
    concurrence_series,
    decay_rates,
    fragile_concurrence_analytic,
    projector,
    time_scales_for,
)

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USER_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

# Upper-triangle entries written to CSV, zero-based, in row-major order
_UPPER = [(n, m) for n in range(4) for m in range(n, 4)]

CSV_COLUMNS = (
    ["t"]
    + [
        column
        for n, m in _UPPER
        for column in (
            [f"rho{n + 1}{m + 1}_re"]
            if n == m
            else [f"rho{n + 1}{m + 1}_re", f"rho{n + 1}{m + 1}_im"]
        )
    ]
    + ["concurrence", "purity", "coh_a", "f_r", "d_int"]
)


def run_scenario(config: RunConfig, oracle: bool = False) -> Tuple[CoefficientTable, Trajectory]:
    """Tabulate the bath and evolve the configured initial state.

    Args:
        config (RunConfig): Validated scenario
        oracle (bool): Integrate the master equation instead of using the closed form

    Returns:
        Tuple[CoefficientTable, Trajectory]: Coefficients and the checked trajectory
    """
    table = tabulate_coefficients(config.bath, 0.0, config.t_max, config.steps)
    model = build_model(config.params)
    rho0 = projector(config.state)
    if oracle:
        trajectory = integrate_master_equation(
            model.hamiltonian, model.coupling_operator, table, rho0, config.substeps
        )
        trajectory.check(INTEGRATOR_TOLERANCES)
    else:
        trajectory = exact_propagate(model, rho0, table)
        trajectory.check(EXACT_TOLERANCES)
    return table, trajectory


def trajectory_frame(trajectory: Trajectory, table: CoefficientTable) -> pd.DataFrame:
    """One row per grid time with the CSV columns."""
    columns: Dict[str, Any] = {"t": trajectory.times}
    for n, m in _UPPER:
        values = trajectory.entries(n, m)
        columns[f"rho{n + 1}{m + 1}_re"] = values.real
        if n != m:
            columns[f"rho{n + 1}{m + 1}_im"] = values.imag
    columns["concurrence"] = concurrence_series(trajectory)
    columns["purity"] = trajectory.purities()
    columns["coh_a"] = coherence_series(trajectory)
    columns["f_r"] = table.f_r
    columns["d_int"] = table.d
    return pd.DataFrame(columns, columns=CSV_COLUMNS)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    table, trajectory = run_scenario(config, oracle=args.oracle)
    frame = trajectory_frame(trajectory, table)
    frame.to_csv(args.out, index=False)
    logger.info(f"Wrote {len(frame)} rows to {args.out}")
    return EXIT_OK


def _parse_state_flag(text: str) -> List[complex]:
    try:
        numbers = [float(part) for part in text.split(",")]
    except ValueError as e:
        raise ValueError(f"--state must be 8 comma-separated numbers: {e}") from e
    if len(numbers) != 8 or not all(np.isfinite(numbers)):
        raise ValueError(f"--state needs 8 finite numbers (re,im of a1..a4), got {len(numbers)}")
    return [complex(numbers[k], numbers[k + 1]) for k in range(0, 8, 2)]


def cmd_classify(args: argparse.Namespace) -> int:
    amplitudes = normalize_amplitudes(_parse_state_flag(args.state))
    result = classify(amplitudes)
    if result.kind is StateKind.SEPARABLE:
        print(f"{result.kind.value}  C0={result.initial_concurrence:.6g}")
    else:
        print(
            f"{result.kind.value}  C0={result.initial_concurrence:.6g}"
            f"  Cinf={result.asymptotic_concurrence:.6g}"
        )
    if args.bath:
        bath = load_bath(args.bath)
        try:
            scales = time_scales_for(bath)
        except UnsupportedError as e:
            logger.warning(f"No time scales for this bath: {e}")
        else:
            print(
                f"tau_e={scales.entanglement_time:.6g}  tau_phi={scales.dephasing_time:.6g}"
                f"  Gamma={scales.markov_rate:.6g}"
            )
    return EXIT_OK


def _fit_window(config: RunConfig, sweep: SweepConfig) -> Tuple[float, float]:
    if sweep.window is not None:
        return sweep.window
    try:
        return time_scales_for(config.bath).asymptotic_window()
    except UnsupportedError as e:
        raise ConfigError(
            f"sweep.window is required when fitting rates without a Markov rate ({e})",
            config.lines.get("sweep"),
            config.source,
        ) from e


def _scan_point(config: RunConfig, sweep: SweepConfig, value: float) -> Dict[str, Any]:
    table, trajectory = run_scenario(config, oracle=sweep.oracle)
    final = Trajectory(trajectory.times[-1:], trajectory.states[-1:])
    row: Dict[str, Any] = {
        sweep.key: value,
        "t": float(trajectory.times[-1]),
        "concurrence": float(concurrence_series(final)[0]),
        "purity": float(final.purities()[0]),
        "coh_a": float(coherence_series(final)[0]),
    }
    if sweep.fit_rates:
        window = _fit_window(config, sweep)
        try:
            row["rate_concurrence"], row["rate_coh_a"] = decay_rates(trajectory, window)
        except UnsupportedError as e:
            logger.warning(f"No rates for {sweep.key}={value:g}: {e}")
            row["rate_concurrence"] = row["rate_coh_a"] = None
    logger.info(f"Scan point {sweep.key}={value:g} done")
    return row


async def run_scan(config: RunConfig) -> pd.DataFrame:
    """Evaluate every sweep point concurrently; rows keep sweep order."""
    sweep = config.sweep
    points = [with_override(config, sweep.key, value) for value in sweep.values]
    loop = asyncio.get_running_loop()
    tasks = [
        loop.run_in_executor(None, _scan_point, point, sweep, value)
        for point, value in zip(points, sweep.values)
    ]
    rows = await asyncio.gather(*tasks)
    columns = [sweep.key, "t", "concurrence", "purity", "coh_a"]
    if sweep.fit_rates:
        columns += ["rate_concurrence", "rate_coh_a"]
    return pd.DataFrame(list(rows), columns=columns)


def cmd_scan(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if config.sweep is None:
        raise ConfigError("config has no sweep section", None, config.source)
    frame = asyncio.run(run_scan(config))
    frame.to_csv(args.out, index=False)
    logger.info(f"Wrote {len(frame)} scan rows to {args.out}")
    return EXIT_OK


def _max_deviation(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


def _check_row(name: str, deviation: Optional[float], tolerance: str, passed: Optional[bool]) -> List[str]:
    shown = "n/a" if deviation is None else f"{deviation:.3e}"
    status = "skipped" if passed is None else ("PASS" if passed else "FAIL")
    return [name, shown, tolerance, status]


def verification_rows(config: RunConfig) -> List[List[str]]:
    """Run the verification suite on one scenario.

    Returns:
        List[List[str]]: Rows of check name, max deviation, tolerance and status
    """
    limits = config.verify
    substeps = limits.substeps or config.substeps
    table = tabulate_coefficients(config.bath, 0.0, config.t_max, config.steps)
    model = build_model(config.params)
    rho0 = projector(config.state)
    exact = exact_propagate(model, rho0, table)

    def integrate(n: int) -> Trajectory:
        return integrate_master_equation(
            model.hamiltonian, model.coupling_operator, table, rho0, n
        )

    rows = []
    try:
        oracle = integrate(substeps)
        coarse = _max_deviation(integrate(1).states, exact.states)
        fine = _max_deviation(integrate(2).states, exact.states)
    except IntegrationError as e:
        logger.error(f"Integrator failed during verification: {e}", exc_info=True)
        rows.append(_check_row("oracle equivalence", None, str(e), False))
        return rows

    deviation = _max_deviation(oracle.states, exact.states)
    rows.append(
        _check_row(
            "oracle equivalence",
            deviation,
            f"< {limits.oracle_tolerance:g}",
            deviation < limits.oracle_tolerance,
        )
    )

    factor = coarse / fine if fine > 0 else float("inf")
    rows.append(
        _check_row(
            "step-halving factor",
            factor,
            f"[{limits.order_min:g}, {limits.order_max:g}]",
            limits.order_min <= factor <= limits.order_max,
        )
    )

    state_class = classify(config.state)
    c_values = concurrence_series(exact)
    if state_class.kind is StateKind.ROBUST:
        drift = float(np.max(np.abs(c_values - state_class.initial_concurrence)))
        rows.append(
            _check_row(
                "concurrence drift",
                drift,
                f"< {limits.concurrence_tolerance:g}",
                drift < limits.concurrence_tolerance,
            )
        )
    elif state_class.kind is StateKind.FRAGILE:
        a1, a4 = config.state[0], config.state[3]
        expected = np.array([fragile_concurrence_analytic(a1, a4, d) for d in table.d])
        gap = _max_deviation(c_values, expected)
        rows.append(
            _check_row(
                "fragile decay law",
                gap,
                f"< {limits.concurrence_tolerance:g}",
                gap < limits.concurrence_tolerance,
            )
        )
    else:
        rows.append(_check_row(f"concurrence law ({state_class.kind.value})", None, "-", None))

    expected_purity = np.array(
        [analytic_purity(config.state.amplitudes, COUPLINGS, d) for d in table.d]
    )
    gap = _max_deviation(exact.purities(), expected_purity)
    rows.append(
        _check_row(
            "purity identity",
            gap,
            f"< {limits.purity_tolerance:g}",
            gap < limits.purity_tolerance,
        )
    )

    invalid = 0
    for trajectory, tolerances in ((exact, EXACT_TOLERANCES), (oracle, INTEGRATOR_TOLERANCES)):
        try:
            trajectory.check(tolerances)
        except DephasingError as e:
            logger.warning(str(e))
            invalid += 1
    drift = float(np.max(np.abs(np.trace(oracle.states, axis1=1, axis2=2) - 1.0)))
    rows.append(_check_row("state invariants", drift, "trace < 1e-07", invalid == 0))

    populations = np.diagonal(oracle.states, axis1=1, axis2=2)
    shift = _max_deviation(populations, np.diagonal(rho0.matrix)[None, :])
    rows.append(_check_row("population invariance", shift, "< 1e-08", shift < 1e-8))
    return rows


def cmd_verify(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    rows = verification_rows(config)
    print(tabulate(rows, headers=["check", "max deviation", "tolerance", "status"], tablefmt="grid"))
    if any(row[3] == "FAIL" for row in rows):
        logger.error("Verification failed")
        return EXIT_VERIFY_FAILED
    logger.info("All verification checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Simulate non-Markovian dephasing of two entangled qubits"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Evolve the configured state and write a CSV")
    simulate.add_argument("--config", required=True, help="Scenario YAML file")
    simulate.add_argument("--out", required=True, help="Output CSV path")
    simulate.add_argument(
        "--oracle", action="store_true", help="Integrate the master equation with RK4"
    )
    simulate.set_defaults(handler=cmd_simulate)

    classify_cmd = commands.add_parser("classify", help="Classify a pure two-qubit state")
    classify_cmd.add_argument(
        "--state", required=True, help="re,im of a1..a4 as 8 comma-separated numbers"
    )
    classify_cmd.add_argument("--bath", help="Config whose bath section sets the time scales")
    classify_cmd.set_defaults(handler=cmd_classify)

    scan = commands.add_parser("scan", help="Run the sweep section of a config")
    scan.add_argument("--config", required=True, help="Scenario YAML file with a sweep section")
    scan.add_argument("--out", required=True, help="Output CSV path")
    scan.set_defaults(handler=cmd_scan)

    verify = commands.add_parser("verify", help="Run the built-in verification suite")
    verify.add_argument("--config", required=True, help="Scenario YAML file")
    verify.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, dispatch a command and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ValueError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_USER_ERROR
    except DephasingError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
