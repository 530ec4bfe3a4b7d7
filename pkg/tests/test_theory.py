import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twostage.effective_magnet import Haar, XYZAveraged, FixedFloquet
from twostage.theory import (
    line_tension_ruc, staircase_minimize, golden_section, r_mag_analytic, averaged_channel,
    predict_rates, classify,
)


class TestLineTension:
    def test_v0_and_v1(self):
        assert line_tension_ruc(0, 2) * 1 == pytest.approx(math.log2(5 / 4), abs=1e-14)
        assert line_tension_ruc(1, 2) == pytest.approx(math.log2(5 / 2), abs=1e-14)

    @given(st.floats(-1, 1), st.integers(2, 9))
    def test_even(self, v, q):
        assert line_tension_ruc(v, q) == pytest.approx(line_tension_ruc(-v, q), abs=1e-14)

    def test_domain(self):
        with pytest.raises(ValueError):
            line_tension_ruc(1.5)


class TestStaircase:
    @pytest.mark.parametrize("q", [2, 3, 4, 5, 6])
    def test_closed_forms(self, q):
        m = staircase_minimize(q)
        v_star, F = m.closed_form()
        assert abs(m.v_star - v_star) < 1e-8
        assert abs(m.F_nats - F) < 1e-8

    def test_q2_q3_values(self):
        assert staircase_minimize(2).v_star == pytest.approx(0.2, abs=1e-10)
        assert staircase_minimize(2).r1 == pytest.approx(0.5 * math.log2(1.5), abs=1e-12)
        m3 = staircase_minimize(3)
        assert m3.v_star == pytest.approx(0.4, abs=1e-10)
        assert m3.f_min == pytest.approx(0.5 * math.log(7 / 3) / math.log(3), abs=1e-12)

    def test_flat_tension_endpoint(self):
        m = staircase_minimize(2, tension=lambda v: 1.0)
        assert m.v_star == pytest.approx(1.0, abs=1e-9)
        assert m.f_min == pytest.approx(0.5, abs=1e-9)

    def test_golden_section_parabola(self):
        assert golden_section(lambda x: (x - 0.3) ** 2, -1, 1) == pytest.approx(0.3, abs=1e-8)


class TestMagnonRate:
    def test_values(self):
        assert r_mag_analytic(0) == pytest.approx(math.log2(3), abs=1e-15)
        assert r_mag_analytic(1 / 3) == pytest.approx(1.0, abs=1e-14)
        assert r_mag_analytic(1) == 0.0
        assert r_mag_analytic(0.2) == pytest.approx(1.3328, abs=1e-4)

    def test_monotone(self):
        r = [r_mag_analytic(a) for a in np.linspace(0, 1, 501)]
        assert np.all(np.diff(r) < 0)

    def test_domain(self):
        with pytest.raises(ValueError):
            r_mag_analytic(-0.1)


class TestAveragedChannel:
    def test_grid_identity(self):
        for az in np.linspace(0, 1, 101):
            assert abs(averaged_channel(az).lam_minus - (2 - math.cos(math.pi * az)) / 3) < 1e-12

    @pytest.mark.parametrize("az,lam", [(0, 1 / 3), (0.5, 2 / 3), (1, 1.0)])
    def test_points(self, az, lam):
        ch = averaged_channel(az)
        assert ch.lam_minus == pytest.approx(lam, abs=1e-15)
        assert ch.eigenvalues[0] == 1.0

    def test_rate_matches_analytic(self):
        for az in (0.1, 0.5, 0.8):
            assert averaged_channel(az).rate == pytest.approx(r_mag_analytic(az), abs=1e-12)


class TestPredict:
    def test_haar_brickwall(self):
        p = predict_rates(Haar(2), "brickwall", "open")
        assert p.r1 == p.r2 == pytest.approx(math.log2(5 / 4))
        assert p.scenario == "equal"

    def test_haar_staircase(self):
        p = predict_rates(Haar(2), "staircase", "open")
        assert p.r1 == pytest.approx(0.5 * math.log2(1.5), abs=1e-12)
        assert p.r2 == pytest.approx(math.log2(5 / 4))
        assert p.scenario == "phantom"

    def test_du_periodic(self):
        p = predict_rates(XYZAveraged(1, 1, 0.5), "brickwall", "periodic")
        assert (p.r1, p.scenario) == (2.0, "magnon")
        assert p.r2 == pytest.approx(math.log2(1.5))

    def test_du_periodic_07(self):
        p = predict_rates(XYZAveraged(1, 1, 0.7), "brickwall", "periodic")
        assert p.r2 == pytest.approx(math.log2(3 / (2 - math.cos(0.7 * math.pi))))
        assert p.r2 == pytest.approx(0.213, abs=5e-4)

    def test_du_open_cap(self):
        p = predict_rates(XYZAveraged(1, 1, 0.2), "brickwall", "open")
        assert (p.r1, p.r2, p.scenario) == (1.0, 1.0, "equal")
        assert predict_rates(XYZAveraged(1, 1, 1 / 3), "brickwall", "open").r2 == 1.0

    def test_du_staircase(self):
        p = predict_rates(XYZAveraged(1, 1, 0.5), "staircase", "open")
        assert p.r1 == 0.5 and p.r2 == pytest.approx(0.5 * math.log2(1.5))
        p = predict_rates(XYZAveraged(1, 1, 0.0), "staircase", "periodic")
        assert p.r1 == 1.0 and p.r2 == pytest.approx(0.5 * math.log2(3))

    def test_du_zero_az(self):
        # (1,1,0): magnon rate log2 3 lies between the open (1) and periodic (2) wall rates
        assert predict_rates(XYZAveraged(1, 1, 0), "brickwall", "periodic").r2 == pytest.approx(math.log2(3))
        assert predict_rates(XYZAveraged(1, 1, 0), "brickwall", "open").r2 == 1.0

    def test_non_du(self):
        p = predict_rates(XYZAveraged(0.9, 0.8, 0.5), "brickwall", "open")
        assert p.scenario == "unknown" and p.r1 is None
        assert "resummation" in p.notes[0]

    def test_formulas_reported(self):
        d = predict_rates(Haar(2), "brickwall", "open").to_dict()
        assert d["formulas_used"]

    def test_rejects_fixed(self):
        with pytest.raises(TypeError):
            predict_rates(FixedFloquet(1, 1, 0.5, 0.6), "brickwall", "open")

    def test_classify(self):
        assert classify(1.0, 1.0 + 1e-12) == "equal"
        assert classify(1.0, 0.5) == "magnon"
        assert classify(0.29, 0.32) == "phantom"
