import math

import numpy as np
import pytest
from scipy import integrate

from dephasing.bath import (
    BathModel,
    CoefficientTable,
    DiscreteMode,
    QuadratureSettings,
    coefficient_F,
    coefficient_G,
    eta_kernel,
    markov_rate,
    markov_table,
    nu_kernel,
    tabulate,
)
from dephasing.errors import ConvergenceError, UnsupportedError


def _ohmic_nu(coupling, cutoff, tau):
    # -eta_c * integral of w exp(-w/w_c) sin(w tau) over [0, inf)
    scaled = cutoff * tau
    return -coupling * cutoff**2 * 2.0 * scaled / (1.0 + scaled**2) ** 2


def _ohmic_f_imag(coupling, cutoff, t):
    scaled = cutoff * t
    return -coupling * cutoff * scaled**2 / (1.0 + scaled**2)


def test_bath_validation():
    with pytest.raises(ValueError):
        DiscreteMode(0.1, 0.0)
    with pytest.raises(ValueError):
        BathModel.discrete([(0.1, 1.0)], -1.0)
    with pytest.raises(ValueError):
        BathModel(temperature=1.0)
    with pytest.raises(ValueError):
        BathModel.ohmic_bath(0.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        DiscreteMode(-0.1, 1.0)
    assert DiscreteMode(0.0, 1.0).coupling == 0.0


def test_discrete_kernels(single_mode_bath):
    assert eta_kernel(single_mode_bath, 0.0) == 1.0
    assert eta_kernel(single_mode_bath, math.pi) == pytest.approx(-1.0, abs=1e-15)
    assert nu_kernel(single_mode_bath, 0.0) == 0.0
    fast_mode = BathModel.discrete([(1.0, 2.0)], 0.7)
    assert nu_kernel(fast_mode, math.pi / 4) == pytest.approx(-1.0, abs=1e-15)


def test_kernels_reject_negative_lag(single_mode_bath):
    with pytest.raises(ValueError):
        eta_kernel(single_mode_bath, -0.1)
    with pytest.raises(ValueError):
        nu_kernel(single_mode_bath, -0.1)


def test_thermal_factor_enters_eta_only():
    cold = BathModel.discrete([(0.5, 1.3)], 0.0)
    hot = BathModel.discrete([(0.5, 1.3)], 2.0)
    coth = 1.0 / math.tanh(1.3 / 4.0)
    assert eta_kernel(hot, 0.4) == pytest.approx(coth * eta_kernel(cold, 0.4), rel=1e-14)
    assert nu_kernel(hot, 0.4) == nu_kernel(cold, 0.4)


def test_ohmic_eta_matches_fine_simpson():
    bath = BathModel.ohmic_bath(0.1, 5.0, 1.0)
    omega = np.linspace(0.0, 200.0, 1_000_001)
    x = omega / 2.0
    x_coth_x = np.ones_like(x)
    x_coth_x[1:] = x[1:] / np.tanh(x[1:])
    integrand = 0.1 * np.exp(-omega / 5.0) * 2.0 * x_coth_x * np.cos(omega * 0.3)
    expected = integrate.simpson(integrand, x=omega)
    assert abs(eta_kernel(bath, 0.3) - expected) < 1e-7


def test_ohmic_nu_closed_form():
    bath = BathModel.ohmic_bath(0.1, 5.0, 1.0)
    for tau in (0.05, 0.3, 2.0):
        assert nu_kernel(bath, tau) == pytest.approx(_ohmic_nu(0.1, 5.0, tau), rel=1e-9)
    assert nu_kernel(bath, 0.0) == 0.0


def test_ohmic_nu_is_temperature_independent():
    cold = BathModel.ohmic_bath(0.1, 5.0, 0.0)
    hot = BathModel.ohmic_bath(0.1, 5.0, 3.0)
    assert nu_kernel(cold, 0.7) == nu_kernel(hot, 0.7)


def test_coefficient_F_examples(single_mode_bath):
    assert coefficient_F(single_mode_bath, 0.0) == 0j
    assert coefficient_F(single_mode_bath, math.pi / 2) == pytest.approx(1.0 - 1.0j, abs=1e-15)

    two_modes = BathModel.discrete([(1.0, 1.0), (0.5, 3.0)], 0.0)
    value = coefficient_F(two_modes, 1.0)
    assert value.real == pytest.approx(math.sin(1.0) + 0.25 * math.sin(3.0) / 3.0, rel=1e-14)
    assert value.imag == pytest.approx(
        -(1.0 - math.cos(1.0)) - 0.25 * (1.0 - math.cos(3.0)) / 3.0, rel=1e-14
    )


def test_coefficient_F_matches_kernel_quadrature(reference_bath):
    for t in (0.3, 2.5, 7.0):
        real, _ = integrate.quad(lambda s: eta_kernel(reference_bath, s), 0.0, t, epsabs=1e-13, epsrel=1e-12)
        imag, _ = integrate.quad(lambda s: nu_kernel(reference_bath, s), 0.0, t, epsabs=1e-13, epsrel=1e-12)
        value = coefficient_F(reference_bath, t)
        assert abs(value.real - real) < 1e-9
        assert abs(value.imag - imag) < 1e-9


def test_ohmic_coefficient_F(ohmic_bath):
    # plain quadrature below upper * t = 50, oscillatory weight above
    for t in (0.1, 0.3, 4.0):
        value = coefficient_F(ohmic_bath, t)
        assert value.imag == pytest.approx(_ohmic_f_imag(0.05, 5.0, t), rel=1e-8)
    t = 0.4
    real, _ = integrate.quad(lambda s: eta_kernel(ohmic_bath, s), 0.0, t, epsabs=1e-12, epsrel=1e-10)
    assert coefficient_F(ohmic_bath, t).real == pytest.approx(real, rel=1e-7)


def test_ohmic_f_real_reaches_markov_rate():
    bath = BathModel.ohmic_bath(0.1, 5.0, 2.0)
    rate = markov_rate(bath)
    for multiple, tolerance in ((50, 0.05), (100, 0.03), (200, 0.02)):
        value = coefficient_F(bath, multiple / 5.0).real
        assert abs(value - rate) / rate < tolerance


def test_coefficient_G_examples(single_mode_bath, reference_bath):
    assert coefficient_G(reference_bath, 0.0, 3.0) == 0j
    assert coefficient_G(single_mode_bath, 1.0, 0.0) == 0j
    value = coefficient_G(single_mode_bath, 1.0, math.pi)
    assert value == pytest.approx(-2.0 - 1j * math.pi, abs=1e-14)
    for t in (0.5, 1.7, 4.2):
        assert coefficient_G(reference_bath, 2.0, t) == pytest.approx(
            2.0 * coefficient_G(reference_bath, 1.0, t), abs=1e-14
        )


def test_coefficient_G_matches_kernel_quadrature(reference_bath):
    t = 3.3
    real, _ = integrate.quad(lambda s: s * eta_kernel(reference_bath, s), 0.0, t, epsabs=1e-13, epsrel=1e-12)
    imag, _ = integrate.quad(lambda s: s * nu_kernel(reference_bath, s), 0.0, t, epsabs=1e-13, epsrel=1e-12)
    value = coefficient_G(reference_bath, 0.7, t)
    assert value.real == pytest.approx(0.7 * real, abs=1e-9)
    assert value.imag == pytest.approx(0.7 * imag, abs=1e-9)


def test_ohmic_coefficient_G(ohmic_bath):
    t = 0.6
    imag, _ = integrate.quad(lambda s: s * _ohmic_nu(0.05, 5.0, s), 0.0, t, epsabs=1e-13, epsrel=1e-12)
    real, _ = integrate.quad(lambda s: s * eta_kernel(ohmic_bath, s), 0.0, t, epsabs=1e-12, epsrel=1e-10)
    value = coefficient_G(ohmic_bath, 1.5, t)
    assert value.imag == pytest.approx(1.5 * imag, rel=1e-7)
    assert value.real == pytest.approx(1.5 * real, rel=1e-7)


def test_markov_rate():
    assert markov_rate(BathModel.ohmic_bath(0.1, 5.0, 2.0)) == pytest.approx(0.2 * math.pi, rel=1e-15)
    assert markov_rate(BathModel.ohmic_bath(0.0, 5.0, 3.0)) == 0.0
    assert markov_rate(BathModel.ohmic_bath(0.1, 5.0, 4.0)) == 2.0 * markov_rate(
        BathModel.ohmic_bath(0.1, 5.0, 2.0)
    )


def test_markov_rate_unsupported(reference_bath):
    with pytest.raises(UnsupportedError, match="discrete"):
        markov_rate(reference_bath)
    with pytest.raises(UnsupportedError, match="T=0"):
        markov_rate(BathModel.ohmic_bath(0.1, 5.0, 0.0))


def test_tabulate_single_mode_integrals(single_mode_bath):
    table = tabulate(single_mode_bath, 0.0, math.pi, 1000)
    assert table.d[0] == 0.0 and table.phi[0] == 0.0
    assert table.d[-1] == pytest.approx(2.0, abs=1e-10)
    assert np.abs(table.d - (1.0 - np.cos(table.times))).max() < 1e-12
    assert abs(table.d[-1] - integrate.simpson(table.f_r, x=table.times)) < 1e-10

    table = tabulate(single_mode_bath, 0.0, 2.0 * math.pi, 1000)
    assert table.phi[-1] == pytest.approx(-2.0 * math.pi, abs=1e-10)


def test_tabulate_closed_forms_agree_with_simpson(reference_bath):
    table = tabulate(reference_bath, 0.0, 10.0, 1000)
    assert abs(table.d[-1] - integrate.simpson(table.f_r, x=table.times)) < 1e-8
    assert abs(table.phi[-1] - integrate.simpson(table.f_i, x=table.times)) < 1e-8


def test_tabulate_temperature_independent_columns():
    cold = tabulate(BathModel.discrete([(0.3, 0.7), (0.2, 1.6)], 0.1), 0.0, 5.0, 200)
    hot = tabulate(BathModel.discrete([(0.3, 0.7), (0.2, 1.6)], 3.0), 0.0, 5.0, 200)
    assert np.array_equal(cold.f_i, hot.f_i)
    assert np.array_equal(cold.phi, hot.phi)
    assert not np.array_equal(cold.f_r, hot.f_r)


def test_tabulate_ohmic_accumulates_by_simpson(ohmic_table):
    assert ohmic_table.d[0] == 0.0 and ohmic_table.phi[0] == 0.0
    times = ohmic_table.times
    for k in (2, 100, len(times) - 1):
        expected = integrate.simpson(ohmic_table.f_r[: k + 1], x=times[: k + 1])
        assert ohmic_table.d[k] == pytest.approx(expected, rel=1e-12)
    # odd indices carry the partial three-point rule
    for k in (101, 501):
        expected = integrate.simpson(ohmic_table.f_r[: k + 1], x=times[: k + 1])
        assert abs(ohmic_table.d[k] - expected) < 1e-8


def test_tabulate_kappa_fills_g(reference_bath):
    table = tabulate(reference_bath, 0.5, 4.0, 40)
    assert table.kappa == 0.5
    assert table.g_r[0] == 0.0 and table.g_i[0] == 0.0
    assert complex(table.g_r[-1], table.g_i[-1]) == pytest.approx(
        coefficient_G(reference_bath, 0.5, 4.0), abs=1e-14
    )
    plain = tabulate(reference_bath, 0.0, 4.0, 40)
    assert not plain.g_r.any() and not plain.g_i.any()


def test_tabulate_pads_odd_steps(single_mode_bath):
    table = tabulate(single_mode_bath, 0.0, 1.0, 5)
    assert len(table) == 7
    assert table.times[-1] == pytest.approx(1.2)
    assert table.step == pytest.approx(0.2)


def test_tabulate_rejects_bad_grid(single_mode_bath):
    with pytest.raises(ValueError):
        tabulate(single_mode_bath, 0.0, 1.0, 1)
    with pytest.raises(ValueError):
        tabulate(single_mode_bath, 0.0, 0.0, 10)
    with pytest.raises(ValueError):
        tabulate(single_mode_bath, 0.0, 1.0, 2.5)


def test_markov_table(ohmic_bath):
    table = markov_table(ohmic_bath, 2.0, 20)
    rate = markov_rate(ohmic_bath)
    assert np.all(table.f_r == rate)
    assert np.abs(table.d - rate * table.times).max() < 1e-15
    assert not table.phi.any() and not table.g_r.any()
    with pytest.raises(UnsupportedError):
        markov_table(BathModel.discrete([(1.0, 1.0)], 1.0), 2.0, 20)


def test_interpolate(single_mode_bath):
    table = tabulate(single_mode_bath, 0.0, 5.0, 500)
    t, f, g = table.at_index(123)
    assert t == table.times[123]
    assert table.interpolate(t)[0] == pytest.approx(f, abs=1e-15)
    assert g == 0j
    for t in (0.0, 0.003, 1.2345, 4.999, 5.0):
        f, g = table.interpolate(t)
        assert f == pytest.approx(complex(math.sin(t), -(1.0 - math.cos(t))), abs=1e-9)
        assert g == 0j
    with pytest.raises(ValueError):
        table.interpolate(5.1)
    with pytest.raises(ValueError):
        table.interpolate(-0.1)


def test_coefficient_table_validation():
    times = np.array([0.0, 0.1, 0.3, 0.4])
    zeros = np.zeros(4)
    with pytest.raises(ValueError, match="uniform"):
        CoefficientTable(times, zeros, zeros, zeros, zeros, zeros, zeros)
    with pytest.raises(ValueError, match="grid length"):
        CoefficientTable(np.linspace(0, 1, 4), zeros[:3], zeros, zeros, zeros, zeros, zeros)


def test_quadrature_reports_non_convergence():
    bath = BathModel.ohmic_bath(0.1, 5.0, 1.0)
    with pytest.raises(ConvergenceError) as info:
        eta_kernel(bath, 0.0, QuadratureSettings(limit=1))
    assert info.value.residual > 0
