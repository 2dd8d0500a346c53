import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import kobol_c_mp, kobol_cumulant_mp, kobol_psi0_mp
from sinhproj.levy_models import (NTS, Brownian, DomainError, KoBoL, UnsupportedModelError,
                                  char_exponent, char_function, cumulants, kobol_c_from_m2,
                                  martingale_drift, model_from_config, reference_model_I,
                                  reference_model_II, with_martingale_drift)

# 40-digit evaluations with mpmath (tests/oracles.py)
C_I = 0.18017225978869576148
C_II = 2.0755753864630069589
PSI0_MINUS_I_I = -0.3625788618127859012
PSI0_AT_1_HALF_I = complex(0.190161821662413, -0.260212942638601)
C4_I = 0.0065942034653669592
C4_II = 0.0064943675025044235


def test_intensity_from_second_moment_matches_oracle():
    assert kobol_c_from_m2(1.2, 11.0, -4.0, 0.1) == pytest.approx(C_I, rel=1e-14)
    assert kobol_c_from_m2(0.3, 8.0, -9.0, 0.1) == pytest.approx(C_II, rel=1e-14)
    assert float(kobol_c_mp(1.2, 11, -4, 0.1)) == pytest.approx(C_I, rel=1e-15)


def test_intensity_is_linear_in_m2():
    assert kobol_c_from_m2(1.2, 11.0, -4.0, 0.0) == 0.0
    c1 = kobol_c_from_m2(0.7, 5.0, -3.0, 0.1)
    assert kobol_c_from_m2(0.7, 5.0, -3.0, 0.2) == pytest.approx(2 * c1, rel=1e-15)


def test_psi0_vanishes_at_origin():
    assert reference_model_I().psi0(0.0) == 0.0


def test_psi0_at_minus_i():
    assert reference_model_I().psi0(-1j) == pytest.approx(PSI0_MINUS_I_I, rel=1e-14)
    # symmetric exponents of the second set cancel exactly here
    assert abs(reference_model_II().psi0(-1j)) < 1e-15


def test_psi0_off_axis_against_mpmath():
    m = reference_model_I()
    assert m.psi0(1 + 0.5j) == pytest.approx(PSI0_AT_1_HALF_I, abs=1e-14)
    xi = 3.7 - 2.1j
    ref = complex(kobol_psi0_mp(xi, m.nu, kobol_c_mp(1.2, 11, -4, 0.1), 11, -4))
    assert m.psi0(xi) == pytest.approx(ref, rel=1e-13)


@given(st.floats(-200, 200, allow_nan=False))
def test_psi0_hermitian_on_real_line(x):
    m = reference_model_I()
    assert m.psi0(-x) == pytest.approx(np.conj(m.psi0(x)), rel=1e-12, abs=1e-14)


@settings(max_examples=50)
@given(st.floats(-50, 50), st.floats(-3.9, 10.9))
def test_reflection_flips_argument(x, y):
    m = reference_model_I()
    xi = complex(x, y)
    assert m.reflected().psi0(-xi) == pytest.approx(m.psi0(xi), rel=1e-12, abs=1e-13)


def test_branch_cuts_are_rejected():
    m = reference_model_I()
    with pytest.raises(DomainError):
        m.psi0(12j)
    with pytest.raises(DomainError):
        m.psi0(-4j)


@pytest.mark.parametrize("nu", [1.0, 0.0, 2.0, -0.5])
def test_unsupported_orders(nu):
    with pytest.raises(UnsupportedModelError):
        KoBoL(nu, 1.0, 5.0, -5.0)


def test_martingale_drift_brownian():
    bm = Brownian(0.25)
    mu = martingale_drift(bm, 0.03, 0.01)
    assert mu == pytest.approx(0.03 - 0.01 - 0.25 ** 2 / 2, abs=1e-15)
    # E[exp(X_t)] = exp((r - q) t)
    t = 0.7
    m = bm.with_drift(mu)
    assert abs(char_function(m, -1j, t)) == pytest.approx(math.exp(0.02 * t), rel=1e-14)


def test_martingale_drift_test_I():
    assert martingale_drift(reference_model_I(), 0.02, 0.0) == pytest.approx(0.02 + PSI0_MINUS_I_I, rel=1e-14)
    m = with_martingale_drift(reference_model_I(), 0.02, 0.0)
    assert char_function(m, -1j, 1.0).real == pytest.approx(math.exp(0.02), rel=1e-14)


def test_martingale_drift_needs_exponential_moment():
    with pytest.raises(DomainError):
        martingale_drift(KoBoL(0.5, 1.0, 5.0, -0.8), 0.0, 0.0)


def test_cumulants_brownian():
    c1, c2, c4 = cumulants(Brownian(0.3, mu=0.1), 2.0)
    assert c1 == pytest.approx(0.2, abs=1e-14)
    assert c2 == pytest.approx(0.18, abs=1e-14)
    assert abs(c4) < 1e-13


@pytest.mark.parametrize("model, c4", [(reference_model_I(), C4_I), (reference_model_II(), C4_II)])
def test_cumulants_kobol(model, c4):
    _, c2, k4 = cumulants(model, 1.5)
    assert c2 == pytest.approx(0.15, rel=1e-13)
    assert k4 == pytest.approx(1.5 * c4, rel=1e-12)
    ref = kobol_cumulant_mp(4, model.nu, model.c, model.lambda_plus, model.lambda_minus)
    assert k4 == pytest.approx(1.5 * ref, rel=1e-12)


def test_nig_matches_textbook_form():
    alpha, beta, delta = 15.0, -3.0, 0.5
    m = NTS(1.0, delta, alpha, beta)
    # the skew parameter enters with the opposite sign to the usual NIG form,
    # so that the strip is (-(alpha + beta), alpha - beta)
    for xi in (0.3, -2.0 + 0.5j, 7.0 - 1.0j):
        ref = delta * (np.sqrt(alpha ** 2 - (-beta + 1j * xi) ** 2) - math.sqrt(alpha ** 2 - beta ** 2))
        assert m.psi0(xi) == pytest.approx(ref, rel=1e-13)
    prof = m.profile
    assert (prof.mu_minus, prof.mu_plus) == (-(alpha + beta), alpha - beta)


def test_full_exponent_includes_drift():
    m = reference_model_I().with_drift(0.3)
    assert char_exponent(m, 2.0) == pytest.approx(-0.6j + m.psi0(2.0), abs=1e-15)


def test_model_from_config(tmp_path):
    cfg = {"model": "kobol", "nu": 1.2, "lambda_plus": 11, "lambda_minus": -4, "m2": 0.1,
           "r": 0.02, "q": 0.0}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(cfg))
    mc = model_from_config(path)
    assert mc.model.c == pytest.approx(C_I, rel=1e-14)
    assert mc.model.mu == pytest.approx(0.02 + PSI0_MINUS_I_I, abs=1e-14)
    with pytest.raises(UnsupportedModelError):
        model_from_config({"model": "vg"})


def test_mpmath_precision_is_honoured():
    with mp.workdps(50):
        v = kobol_psi0_mp(-1j, 1.2, kobol_c_mp(1.2, 11, -4, 0.1, dps=50), 11, -4, dps=50)
    assert float(mp.re(v)) == pytest.approx(PSI0_MINUS_I_I, abs=1e-17)
