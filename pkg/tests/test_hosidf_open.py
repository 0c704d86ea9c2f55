import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from resetfreq.hosidf_open import (
    C_bl,
    C_n,
    C_nl,
    ResetController,
    ResetFixedPointError,
    SinusoidSpec,
    classical_Hn,
    cn_intermediates,
    controller_output_spectrum,
    gci_square_levels,
    nonlinear_gain,
    open_loop_Ln,
    open_loop_output_spectrum,
    pulse_nonlinear_spectrum,
)
from resetfreq.linsys import StateSpace, TransferFunction, freq_eval

gammas = st.floats(-0.9, 0.99)
omegas = st.floats(0.5, 2000.0)


def second_order_reset(gamma):
    # reset acts on the first of two states
    A = [[-30.0, 10.0], [-40.0, -5.0]]
    return ResetController(A, [[1.0], [2.0]], [[1.0, 0.5]], [[0.2]], gamma)


class TestController:
    def test_gamma_range(self):
        with pytest.raises(ValueError):
            ResetController.clegg(-1.0)
        with pytest.raises(ValueError):
            ResetController.clegg(1.5)

    def test_A_rho(self):
        rc = second_order_reset(0.3)
        assert np.array_equal(rc.A_rho, np.diag([0.3, 1.0]))

    def test_base_linear_matches_C_bl(self):
        rc = second_order_reset(0.0)
        for w in (1.0, 30.0, 900.0):
            assert C_bl(rc, w) == pytest.approx(freq_eval(rc.base_linear, w), rel=1e-13)

    def test_sinusoid_validation(self):
        with pytest.raises(ValueError):
            SinusoidSpec(1.0, -2.0)
        with pytest.raises(ValueError):
            SinusoidSpec(1.0, 2.0, n=0)


class TestCleggClosedForms:
    @pytest.mark.parametrize("w", [0.1, 1.0, 37.0, 1e3])
    def test_first_harmonic(self, clegg, w):
        # classical describing function of the Clegg integrator
        assert C_n(clegg, w, 1) == pytest.approx((4 / np.pi - 1j) / w, rel=1e-12)

    @pytest.mark.parametrize("n", [3, 5, 7, 21])
    def test_higher_harmonics_real(self, clegg, n):
        w = 5.0
        assert C_n(clegg, w, n) == pytest.approx(4 / (n * np.pi * w), rel=1e-12)

    def test_phase_lead(self, clegg):
        for w in np.logspace(-1, 3, 9):
            lead = np.degrees(np.angle(C_n(clegg, w, 1)) - np.angle(C_bl(clegg, w)))
            assert lead == pytest.approx(np.degrees(np.arctan(4 / np.pi)), abs=1e-9)
            assert lead == pytest.approx(51.85, abs=0.01)

    def test_output_waveform(self, clegg):
        # steady state v = (1 - cos wt)/w on [0, pi/w), mirrored on the next half
        w = 2.0
        spec = controller_output_spectrum(clegg, SinusoidSpec(1.0, w), n_h=4001)
        t = np.linspace(0.2, np.pi / w - 0.2, 40)
        assert np.allclose(spec.reconstruct(t), (1 - np.cos(w * t)) / w, atol=5e-4)
        assert np.allclose(spec.reconstruct(t + np.pi / w), -(1 - np.cos(w * t)) / w, atol=5e-4)


class TestAgainstClassical:
    @given(gammas, omegas, st.sampled_from([1, 3, 5, 9, 15]))
    def test_fore(self, g, w, n):
        rc = ResetController.fore(100.0, g)
        assert C_n(rc, w, n) == pytest.approx(classical_Hn(rc, w, n), rel=1e-9, abs=1e-15)

    @given(gammas, st.floats(1.0, 500.0), st.sampled_from([1, 3, 7]))
    def test_second_order(self, g, w, n):
        rc = second_order_reset(g)
        assert C_n(rc, w, n) == pytest.approx(classical_Hn(rc, w, n), rel=1e-8, abs=1e-14)

    def test_nonlinear_gain_vectorized(self):
        rc = second_order_reset(0.2)
        orders = np.array([1, 3, 5, 7, 9])
        vec = nonlinear_gain(rc, 40.0, orders)
        assert np.allclose(vec, [C_nl(rc, 40.0, n) for n in orders], rtol=1e-12)


class TestStructure:
    @given(gammas, omegas, st.integers(1, 20))
    def test_even_orders_vanish(self, g, w, k):
        rc = ResetController.fore(50.0, g)
        assert C_n(rc, w, 2 * k) == 0j
        assert classical_Hn(rc, w, 2 * k) == 0j
        assert open_loop_Ln(rc, None, None, w, 2 * k) == 0j

    @given(omegas, st.sampled_from([1, 3, 5]))
    def test_gamma_one_is_linear(self, w, n):
        rc = ResetController.fore(50.0, 1.0)
        assert C_nl(rc, w, n) == 0j
        expected = C_bl(rc, w) if n == 1 else 0j
        assert C_n(rc, w, n) == expected

    def test_fixed_point_singular(self):
        with pytest.raises(ResetFixedPointError):
            C_n(ResetController.clegg(-0.999999999999), 1.0, 1)

    def test_n_must_be_positive(self, clegg):
        with pytest.raises(ValueError):
            C_n(clegg, 1.0, 0)


class TestSquareLevels:
    def test_clegg_levels(self):
        a, b = gci_square_levels(0.0, 2.0)
        assert (a, b) == (0.0, -1.0)

    def test_invalid(self):
        with pytest.raises(ZeroDivisionError):
            gci_square_levels(-1.0, 1.0)
        with pytest.raises(ValueError):
            gci_square_levels(0.0, -1.0)

    @given(gammas, st.floats(0.5, 200.0), st.floats(0.1, 5.0))
    def test_levels_match_pulse_spectrum(self, g, w, amp):
        # square wave with levels a | b has odd harmonics 2(a-b)/(n pi) in the sine basis
        a, b = gci_square_levels(g, w, amp)
        rc = ResetController.clegg(g)
        e = SinusoidSpec(amp, w)
        spec = pulse_nonlinear_spectrum(rc, e, e, n_h=9)
        expected = 2 * (a - b) / (spec.orders * np.pi)
        assert np.allclose(spec.coeffs, expected, rtol=1e-10, atol=1e-14)


class TestSpectra:
    def test_trigger_phase_rotates_harmonics(self):
        rc = second_order_reset(0.1)
        e0 = SinusoidSpec(1.3, 20.0)
        e1 = SinusoidSpec(1.3, 20.0, phase=0.7)
        s0 = pulse_nonlinear_spectrum(rc, e0, e0, n_h=11)
        s1 = pulse_nonlinear_spectrum(rc, e1, e1, n_h=11)
        assert np.allclose(s1.coeffs, s0.coeffs * np.exp(1j * 0.7 * s0.orders), rtol=1e-12)

    def test_trigger_must_be_base_frequency(self):
        rc = second_order_reset(0.1)
        with pytest.raises(ValueError):
            pulse_nonlinear_spectrum(rc, SinusoidSpec(1, 2.0), SinusoidSpec(1, 2.0, n=3))

    def test_output_spectrum_uses_Cn(self):
        rc = ResetController.fore(300 * np.pi, 0.0)
        ca = TransferFunction([1 / (75 * np.pi), 1], [1 / (1200 * np.pi), 1])
        w = 400 * np.pi
        y = open_loop_output_spectrum(rc, ca, None, SinusoidSpec(2.0, w), n_h=9)
        for n in (1, 3, 9):
            assert y[n] == pytest.approx(2.0 * open_loop_Ln(rc, ca, None, w, n), rel=1e-12)

    def test_intermediates_consistent(self):
        rc = second_order_reset(0.4)
        it = cn_intermediates(rc, 25.0)
        assert np.allclose(it.delta_c, np.imag(it.delta_l))
        assert it.delta_q.dtype == float


def test_state_space_route():
    ss = StateSpace([[-3.0]], [[2.0]], [[1.5]], [[0.0]])
    rc = ResetController.from_state_space(ss, 0.0)
    assert C_bl(rc, 4.0) == pytest.approx(3.0 / (4j + 3), rel=1e-14)
