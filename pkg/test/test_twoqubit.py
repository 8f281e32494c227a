import math

import numpy as np
import pytest

from dephasing.bath import BathModel, markov_rate, markov_table, tabulate
from dephasing.dynamics import exact_propagate
from dephasing.errors import NumericalError, UnsupportedError
from dephasing.linalg import kron
from dephasing.twoqubit import (
    COUPLINGS,
    PureStateAmplitudes,
    StateKind,
    TwoQubitParams,
    build_model,
    classify,
    coherence_a,
    coherence_b,
    coherence_series,
    concurrence,
    concurrence_series,
    decay_rates,
    fit_decay_rate,
    fragile_concurrence_analytic,
    projector,
    pure_concurrence,
    rate_ordering_sweep,
    reduce_A,
    reduce_B,
    time_scales,
    time_scales_for,
)

SQRT_HALF = 1.0 / math.sqrt(2.0)
BELL_14 = PureStateAmplitudes((SQRT_HALF, 0, 0, SQRT_HALF))


def _random_su2(rng):
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
    norm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
    a, b = a / norm, b / norm
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]])


def _werner(p):
    bell = projector(BELL_14).matrix
    return p * bell + (1.0 - p) * np.eye(4) / 4


def test_build_model():
    for params in (TwoQubitParams(1.0, 1.3, 0.2), TwoQubitParams(-2.0, 0.0, 5.0)):
        model = build_model(params)
        assert tuple(model.couplings) == COUPLINGS
        assert np.allclose(np.diag(model.hamiltonian), model.energies, atol=1e-15)
    model = build_model(TwoQubitParams(1.0, 1.0, 0.0))
    assert np.array_equal(model.energies, [2.0, 0.0, 0.0, -2.0])
    zero = build_model(TwoQubitParams(0.0, 0.0, 0.0))
    assert not zero.hamiltonian.any()
    assert np.array_equal(zero.coupling_operator, np.diag([2.0, 0.0, 0.0, -2.0]))


def test_params_reject_non_finite():
    with pytest.raises(ValueError):
        TwoQubitParams(1.0, math.nan, 0.0)


def test_amplitudes_validation():
    with pytest.raises(ValueError):
        PureStateAmplitudes((1.0, 1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        PureStateAmplitudes((1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        PureStateAmplitudes.normalized((0, 0, 0, 0))
    scaled = PureStateAmplitudes.normalized((3.0, 0, 0, 4.0j))
    assert scaled[0] == pytest.approx(0.6) and scaled[3] == pytest.approx(0.8j)


def test_concurrence_examples():
    assert concurrence(projector(BELL_14)) == pytest.approx(1.0, abs=1e-15)
    # zero eigenvalues of rho * rho_tilde come back near 1e-17, their roots near 1e-9
    assert concurrence(projector(BELL_14), "spectral") == pytest.approx(1.0, abs=1e-7)
    for method in ("factor", "spectral"):
        product = np.zeros((4, 4))
        product[0, 0] = 1.0
        assert concurrence(product, method) == 0.0
        assert concurrence(_werner(0.8), method) == pytest.approx(0.7, abs=1e-12)
        assert concurrence(_werner(0.3), method) == pytest.approx(0.0, abs=1e-12)


def test_concurrence_invariant_under_local_unitaries(rng):
    rho = _werner(0.8)
    for _ in range(20):
        u = kron(_random_su2(rng), _random_su2(rng))
        rotated = u @ rho @ u.conj().T
        assert concurrence(rotated) == pytest.approx(0.7, abs=1e-12)
        assert concurrence(rotated, "spectral") == pytest.approx(0.7, abs=1e-9)


def test_concurrence_routes_agree_on_pure_states(rng, random_amplitudes):
    for _ in range(100):
        amplitudes = random_amplitudes(rng)
        rho = projector(amplitudes)
        expected = pure_concurrence(amplitudes)
        assert concurrence(rho) == pytest.approx(expected, abs=1e-12)
        assert concurrence(rho, "spectral") == pytest.approx(expected, abs=1e-6)


def test_concurrence_of_strongly_dephased_states(rng, random_amplitudes):
    l = np.asarray(COUPLINGS, dtype=float)
    rate = (l[:, None] - l[None, :]) ** 2
    for d_t in (10.0, 20.0, 40.0, 80.0):
        for _ in range(20):
            rho = projector(random_amplitudes(rng)).matrix * np.exp(-rate * d_t)
            # off-X entries are at most exp(-40), far below the tolerance
            outer = abs(rho[0, 3]) - math.sqrt(rho[1, 1].real * rho[2, 2].real)
            inner = abs(rho[1, 2]) - math.sqrt(rho[0, 0].real * rho[3, 3].real)
            expected = 2.0 * max(0.0, outer, inner)
            assert concurrence(rho) == pytest.approx(expected, abs=1e-12)


def test_concurrence_rejects_bad_input():
    with pytest.raises(ValueError):
        concurrence(np.eye(2) / 2)
    with pytest.raises(ValueError):
        concurrence(np.eye(4) / 4, method="negativity")
    # complex-conjugate spectrum of rho * rho_tilde: not a state
    with pytest.raises(NumericalError):
        concurrence(np.diag([0.5, 0.0, 0.0, 0.5 + 0.5j]), "spectral")


def test_pure_concurrence_examples():
    assert pure_concurrence(PureStateAmplitudes((0.6, 0, 0, 0.8))) == pytest.approx(0.96, abs=1e-15)
    assert pure_concurrence(PureStateAmplitudes((0.5, 0.5, 0.5, 0.5))) == 0.0
    assert pure_concurrence(PureStateAmplitudes((0, SQRT_HALF, SQRT_HALF, 0))) == pytest.approx(1.0)


def test_reduced_states():
    assert np.allclose(reduce_A(projector(BELL_14)).matrix, np.eye(2) / 2, atol=1e-15)
    assert np.allclose(reduce_B(projector(BELL_14)).matrix, np.eye(2) / 2, atol=1e-15)
    product = np.zeros((4, 4))
    product[0, 0] = 1.0
    assert np.array_equal(reduce_A(product).matrix, np.diag([1.0, 0.0]))
    assert np.array_equal(reduce_B(product).matrix, np.diag([1.0, 0.0]))


def test_reduced_states_match_partial_trace(rng, random_amplitudes):
    rho = projector(random_amplitudes(rng)).matrix
    tensor = rho.reshape(2, 2, 2, 2)
    assert np.abs(reduce_A(rho).matrix - np.einsum("ajbj->ab", tensor)).max() < 1e-15
    assert np.abs(reduce_B(rho).matrix - np.einsum("jajb->ab", tensor)).max() < 1e-15
    assert coherence_a(rho) == pytest.approx(abs(reduce_A(rho).matrix[0, 1]), abs=1e-15)
    assert coherence_b(rho) == pytest.approx(abs(reduce_B(rho).matrix[0, 1]), abs=1e-15)


def test_local_coherence_decays_with_four_d(reference_model, reference_table):
    amplitudes = PureStateAmplitudes((0.6, 0.48, 0.0, 0.64))
    trajectory = exact_propagate(reference_model, projector(amplitudes), reference_table)
    expected = 0.48 * 0.64 * np.exp(-4.0 * reference_table.d)
    assert np.abs(coherence_series(trajectory) - expected).max() < 1e-14


def test_classify_examples():
    robust = classify(PureStateAmplitudes((SQRT_HALF, 0.5, 0.5, 0.0)))
    assert robust.kind is StateKind.ROBUST
    assert robust.initial_concurrence == pytest.approx(0.5)
    assert robust.asymptotic_concurrence == pytest.approx(0.5)

    fragile = classify(PureStateAmplitudes((0.6, 0.0, 0.0, 0.8)))
    assert fragile.kind is StateKind.FRAGILE
    assert fragile.initial_concurrence == pytest.approx(0.96)
    assert fragile.asymptotic_concurrence == 0.0

    generic = classify(PureStateAmplitudes((0.5, 0.5, 0.5, 0.5 * np.exp(1j * math.pi / 3))))
    assert generic.kind is StateKind.GENERIC
    assert generic.asymptotic_concurrence == pytest.approx(0.0, abs=1e-12)

    separable = classify(PureStateAmplitudes((1.0, 0.0, 0.0, 0.0)))
    assert separable.kind is StateKind.SEPARABLE
    assert separable.initial_concurrence == 0.0


def test_classify_tolerance_is_tunable():
    nearly_robust = PureStateAmplitudes.normalized((1e-9, 0.6, 0.8, 0.5))
    assert classify(nearly_robust).kind is StateKind.GENERIC
    assert classify(nearly_robust, tol=1e-6).kind is StateKind.ROBUST


def test_asymptotic_concurrence_matches_long_time_state(ohmic_bath, rng, random_amplitudes):
    # D = Gamma * t reaches 20
    table = markov_table(ohmic_bath, 64.0, 64)
    model = build_model(TwoQubitParams(1.0, 1.3, 0.2))
    for _ in range(20):
        amplitudes = random_amplitudes(rng)
        trajectory = exact_propagate(model, projector(amplitudes), table)
        final = concurrence(trajectory.states[-1])
        assert final == pytest.approx(classify(amplitudes).asymptotic_concurrence, abs=1e-6)


def test_time_scales():
    scales = time_scales(0.2 * math.pi)
    assert scales.entanglement_time == pytest.approx(0.0995, abs=1e-4)
    assert scales.dephasing_time == pytest.approx(0.3979, abs=1e-4)
    assert scales.dephasing_time / scales.entanglement_time == pytest.approx(4.0, rel=1e-15)
    doubled = time_scales(0.4 * math.pi)
    assert doubled.entanglement_time == pytest.approx(scales.entanglement_time / 2, rel=1e-15)
    assert doubled.dephasing_time == pytest.approx(scales.dephasing_time / 2, rel=1e-15)
    assert scales.asymptotic_window() == pytest.approx((5 * 0.3979, 10 * 0.3979), abs=1e-3)
    for bad in (0.0, -1.0, math.inf):
        with pytest.raises(ValueError):
            time_scales(bad)


def test_time_scales_for_bath(ohmic_bath, reference_bath):
    assert time_scales_for(ohmic_bath).markov_rate == markov_rate(ohmic_bath)
    with pytest.raises(UnsupportedError):
        time_scales_for(reference_bath)
    # eta_c = 0 has Gamma = 0 and no finite time scales
    uncoupled = BathModel.ohmic_bath(0.0, 5.0, 2.0)
    assert markov_rate(uncoupled) == 0.0
    with pytest.raises(UnsupportedError):
        time_scales_for(uncoupled)


def test_fragile_concurrence_analytic():
    assert fragile_concurrence_analytic(0.6, 0.8, 0.0) == pytest.approx(0.96)
    assert fragile_concurrence_analytic(SQRT_HALF, SQRT_HALF, math.log(2) / 16) == pytest.approx(0.5)
    # negative D on a revival pushes the value back up
    assert fragile_concurrence_analytic(0.6, 0.8, -0.01) > 0.96


def test_fragile_state_revives(single_mode_bath):
    model = build_model(TwoQubitParams(1.0, 1.3, 0.2))
    table = tabulate(single_mode_bath, 0.0, 2.0 * math.pi, 1000)
    trajectory = exact_propagate(model, projector(BELL_14), table)
    values = concurrence_series(trajectory)
    assert values[500] == pytest.approx(math.exp(-32.0), rel=1e-9)
    assert values[-1] == pytest.approx(1.0, abs=1e-9)


def test_fit_decay_rate():
    times = np.linspace(0.0, 5.0, 51)
    assert fit_decay_rate(times, 2.0 * np.exp(-3.0 * times), (1.0, 4.0)) == pytest.approx(3.0, rel=1e-12)
    # samples at or below the floor are skipped
    signal = np.where(times < 2.0, np.exp(-0.5 * times), 0.0)
    assert fit_decay_rate(times, signal, (0.0, 5.0)) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(UnsupportedError):
        fit_decay_rate(times, signal, (1.85, 5.0))
    with pytest.raises(ValueError):
        fit_decay_rate(times, signal, (3.0, 3.0))


def test_decay_rates_in_memoryless_limit(ohmic_bath):
    table = markov_table(ohmic_bath, 4.0, 400)
    model = build_model(TwoQubitParams(1.0, 1.3, 0.2))
    trajectory = exact_propagate(model, projector(PureStateAmplitudes((0.6, 0.48, 0.0, 0.64))), table)
    rate = markov_rate(ohmic_bath)
    rate_c, rate_coh = decay_rates(trajectory, (1.0, 2.0))
    assert rate_c == pytest.approx(16.0 * rate, rel=1e-8)
    assert rate_coh == pytest.approx(4.0 * rate, rel=1e-10)
    with pytest.raises(UnsupportedError):
        decay_rates(trajectory, (3.0, 5.0))


def test_rate_ordering_sweep_records(ohmic_bath):
    table = markov_table(ohmic_bath, 4.0, 400)
    model = build_model(TwoQubitParams(1.0, 1.3, 0.2))
    states = [
        PureStateAmplitudes((0.6, 0.0, 0.0, 0.8)),
        PureStateAmplitudes((SQRT_HALF, 0.5, 0.5, 0.0)),
        PureStateAmplitudes((0.6, 0.48, 0.0, 0.64)),
    ]
    fragile, robust, probe = rate_ordering_sweep(states, model, table, (1.0, 2.0))
    assert fragile.reason == "zero local coherence" and not fragile.included
    assert robust.reason == "saturating concurrence"
    assert probe.included and probe.satisfied
    assert probe.rate_concurrence / probe.rate_coherence == pytest.approx(4.0, rel=1e-8)

    (outside,) = rate_ordering_sweep(states[2:], model, table, (1.0, 10.0))
    assert outside.reason == "window outside grid"
    assert outside.rate_concurrence is None and outside.satisfied is None
