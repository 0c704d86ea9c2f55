import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from resetfreq.casestudies import (
    CaseStudyParams,
    build_c_alpha,
    build_plant,
    build_pci_pid,
    build_tpci_pid,
)
from resetfreq.hosidf_closed import (
    ClosedLoopSystem,
    closed_loop_sensitivities,
    gamma,
    loop_response,
    method_A,
    method_A_set,
    method_B,
    method_B_set,
    predict_signals,
)
from resetfreq.hosidf_open import C_nl, ResetController, classical_Hn
from resetfreq.linsys import TransferFunction, freq_eval, ss_to_tf

HZ = 2 * np.pi
freqs = st.floats(5 * HZ, 800 * HZ)


@pytest.fixture(scope="module")
def pci():
    return build_pci_pid()


def gamma_oracle(sys, w, n_h):
    """Per-order loop over the correction-factor definition."""
    rc = sys.rc
    def first_dl(x):
        return np.linalg.solve(1j * x * np.eye(rc.n_c) - rc.A_R, rc.B_R[:, 0])[0]
    acc = 0.0
    for n in range(3, n_h + 1, 2):
        g = freq_eval(sys.c_alpha, n * w) * freq_eval(sys.plant, n * w)
        lbl = freq_eval(rc.base_linear, n * w) * g
        lnl = C_nl(rc, w, n) * g
        psi = abs(lnl) / abs(1 + lbl)
        dl = first_dl(n * w)
        dcn = -abs(dl) * np.sin(np.angle(dl) + np.angle(lnl) - np.angle(1 + lbl))
        acc += psi * dcn
    return 1.0 / (1.0 - acc / np.imag(first_dl(w)))


class TestInterconnection:
    def test_poles_match_characteristic_polynomial(self, pci):
        lin = pci.with_gamma(1.0)
        L = [ss_to_tf(lin.rc.base_linear), ss_to_tf(lin.c_alpha), build_plant()]
        num = np.polymul(np.polymul(L[0].num, L[1].num), L[2].num)
        den = np.polymul(np.polymul(L[0].den, L[1].den), L[2].den)
        char = np.polyadd(den, num)
        got = np.sort_complex(np.linalg.eigvals(lin.A_cl))
        want = np.sort_complex(np.roots(char))
        assert np.allclose(got, want, rtol=1e-7)

    def test_linear_frequency_response(self, pci):
        ic = pci.with_gamma(1.0).interconnection
        for f in (3.0, 150.0, 2000.0):
            w = HZ * f
            x = np.linalg.solve(1j * w * np.eye(ic.A.shape[0]) - ic.A, ic.b)
            T = ic.rows["y"] @ x + ic.feed["y"]
            L = loop_response(pci, w).L_bl
            assert T == pytest.approx(L / (1 + L), rel=1e-9)
            E = ic.rows["e"] @ x + ic.feed["e"]
            assert E == pytest.approx(1 / (1 + L), rel=1e-9)

    def test_direct_feedthrough_plant(self):
        # proper plant with D != 0 exercises the algebraic loop
        rc = ResetController.fore(100.0, 0.0)
        rc = ResetController(rc.A_R, rc.B_R, rc.C_R, [[0.5]], 0.0)
        sys = ClosedLoopSystem(rc, TransferFunction([2.0], [1.0]), TransferFunction([1, 3], [1, 7]))
        ic = sys.with_gamma(1.0).interconnection
        w = 40.0
        x = np.linalg.solve(1j * w * np.eye(ic.A.shape[0]) - ic.A, ic.b)
        L = loop_response(sys, w).L_bl
        assert ic.rows["e"] @ x + ic.feed["e"] == pytest.approx(1 / (1 + L), rel=1e-10)

    def test_reset_map(self, pci):
        assert pci.A_rho_cl[0, 0] == 0.0
        assert np.all(np.diag(pci.A_rho_cl)[1:] == 1.0)

    def test_trigger_selection(self, pci):
        assert pci.interconnection.trigger == "e"
        assert build_tpci_pid(omega=100 * HZ).interconnection.trigger == "e_s"


class TestGamma:
    def test_linear_controller_gives_one(self, pci):
        assert gamma(pci.with_gamma(1.0), 100 * HZ).gamma == 1.0

    def test_single_harmonic_gives_one(self, pci):
        assert gamma(pci, 100 * HZ, n_h=1).gamma == 1.0

    @pytest.mark.parametrize("f", [20.0, 100.0, 500.0])
    def test_matches_oracle(self, pci, f):
        g = gamma(pci, HZ * f, n_h=41)
        assert g.gamma == pytest.approx(gamma_oracle(pci, HZ * f, 41), rel=1e-10)
        assert np.isfinite(g.gamma) and isinstance(g.gamma, float)

    def test_shaping_filter_ignored_by_gamma(self):
        sys = build_tpci_pid(omega=100 * HZ)
        assert gamma(sys, 100 * HZ, 51).gamma == pytest.approx(
            gamma(build_pci_pid(), 100 * HZ, 51).gamma, rel=1e-14)

    def test_bad_omega(self, pci):
        with pytest.raises(ValueError):
            gamma(pci, -1.0)


class TestSensitivities:
    @given(freqs)
    def test_complementarity(self, w):
        s = closed_loop_sensitivities(build_pci_pid(), w, n_h=21)
        assert abs(s.S_n(1) + s.T_n(1) - 1) < 1e-13
        for n in range(3, 22, 2):
            assert s.T_n(n) == -s.S_n(n)
            assert s.S_n(n - 1) == 0j

    def test_cs_is_t_over_plant(self, pci):
        w = 80 * HZ
        s = closed_loop_sensitivities(pci, w, n_h=9)
        for n in (1, 3, 9):
            assert s.CS_n(n) == pytest.approx(s.T_n(n) / freq_eval(build_plant(), n * w), rel=1e-13)

    def test_harmonic_magnitude_relation(self, pci):
        w = 60 * HZ
        g = gamma(pci, w, 31)
        s = closed_loop_sensitivities(pci, w, 31)
        for i, n in enumerate(g.orders):
            assert abs(s.S_n(n)) == pytest.approx(abs(g.gamma) * g.psi[i] * abs(s.S_n(1)), rel=1e-12)

    @given(freqs)
    def test_unit_gamma_reduces_to_method_B(self, w):
        sys = build_pci_pid()
        new = closed_loop_sensitivities(sys, w, n_h=9, gamma_value=1.0)
        old = method_B_set(sys, w, n_h=9)
        assert np.allclose(new.S, old.S, rtol=1e-9, atol=0)
        assert np.allclose(new.CS, old.CS, rtol=1e-9, atol=0)

    def test_fundamental_only_equals_method_A(self, pci):
        w = 150 * HZ
        S, T, CS = method_A(pci, w)
        s = closed_loop_sensitivities(pci, w, n_h=1)
        assert s.S_n(1) == pytest.approx(S, rel=1e-12)
        assert s.T_n(1) == pytest.approx(T, rel=1e-12)

    def test_linear_loop(self, pci):
        lin = pci.with_gamma(1.0)
        w = 30 * HZ
        s = closed_loop_sensitivities(lin, w, n_h=7)
        L = loop_response(lin, w).L_bl
        assert s.S_n(1) == pytest.approx(1 / (1 + L), rel=1e-13)
        assert np.all(s.S[1:] == 0)

    def test_method_B_scalar_matches_set(self, pci):
        w = 40 * HZ
        bset = method_B_set(pci, w, 11)
        for n in (1, 3, 11):
            assert method_B(pci, w, n)[0] == pytest.approx(bset.S_n(n), rel=1e-10)
        assert method_B(pci, w, 4) == (0j, 0j, 0j)

    def test_method_A_definition(self, pci):
        w = 40 * HZ
        L = classical_Hn(pci.rc, w) * freq_eval(pci.c_alpha, w) * freq_eval(pci.plant, w)
        a = method_A_set(pci, w)
        assert a.T_n(1) == pytest.approx(L / (1 + L), rel=1e-13)


class TestPrediction:
    def test_linear_in_amplitude(self, pci):
        w = 100 * HZ
        p1 = predict_signals(pci, 1.0, w, n_h=51)
        p3 = predict_signals(pci, 3.0, w, n_h=51)
        for k in ("e", "y", "u"):
            assert np.allclose(p3[k], 3 * p1[k], rtol=1e-12, atol=1e-15)

    def test_methods(self, pci):
        w = 100 * HZ
        t = np.linspace(0, 0.01, 11)
        for m in ("new", "A", "B"):
            out = predict_signals(pci, 1.0, w, n_h=11, t=t, method=m)
            assert out["e"].shape == t.shape
        with pytest.raises(ValueError):
            predict_signals(pci, 1.0, w, method="C")

    def test_params_scale(self):
        p = CaseStudyParams.from_crossover(HZ * 100)
        sys = build_pci_pid(p)
        assert build_c_alpha(p).n == 2
        assert np.isfinite(gamma(sys, HZ * 50, 21).gamma)
