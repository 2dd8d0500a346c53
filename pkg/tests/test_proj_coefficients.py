import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import beta_quad, dual_spline
from sinhproj.barrier_engine import Numerics, build_grid, price_barrier_full
from sinhproj.levy_models import Brownian, KoBoL, with_martingale_drift
from sinhproj.param_select import martingale_residual
from sinhproj.proj_coefficients import (CoeffRequest, beta_fft, beta_fft_antialiased, beta_sinh,
                                        bspline, compute_beta, project_density)
from test_acceptance import UOC


def _par(m):
    return (m.nu, m.c, m.lambda_plus, m.lambda_minus)


def test_symmetric_model_gives_symmetric_coefficients():
    m = KoBoL(0.8, 0.5, 6.0, -6.0)
    Nx = 129
    req = CoeffRequest(m, -2.0, 4.0 / (Nx - 1), Nx, 0.25)
    b = beta_sinh(req).beta
    assert np.max(np.abs(b - b[::-1])) < 1e-14 * np.max(np.abs(b)) + 1e-16


@pytest.mark.parametrize("p", [1, 2, 3])
def test_coefficients_against_quadrature(model_I, p):
    Nx = 128
    req = CoeffRequest(model_I, -2.0, 4.0 / (Nx - 1), Nx, 1 / 12, p=p)
    co = beta_sinh(req)
    k = np.arange(0, Nx, 9)
    ref = beta_quad(_par(model_I), model_I.mu, co.x[k], co.a, 1 / 12, dual=dual_spline(p), floor=1e-24)
    assert np.max(np.abs(co.beta[k] - ref)) < 1e-10


def test_quadrature_for_second_parameter_set(model_II):
    Nx = 256
    req = CoeffRequest(model_II, -3.0, 6.0 / (Nx - 1), Nx, 1 / 12)
    co = beta_sinh(req)
    k = np.arange(3, Nx, 17)
    ref = beta_quad(_par(model_II), model_II.mu, co.x[k], co.a, 1 / 12, floor=1e-24)
    assert np.max(np.abs(co.beta[k] - ref)) < 1e-10


def test_wide_support_fft_agrees_with_sinh(model_I):
    Nx = 512
    req = CoeffRequest(model_I, -7.0, 14.0 / (Nx - 1), Nx, 1.0)
    gap = np.abs(beta_fft(req).beta - beta_sinh(req).beta) / math.sqrt(req.a)
    assert np.max(gap) <= 1e-8


def test_narrow_support_fft_is_aliased(model_I):
    Nx = 512
    req = CoeffRequest(model_I, -4.0, 8.0 / (Nx - 1), Nx, 1.0)
    s, f = beta_sinh(req), beta_fft(req)
    # the wrapped right tail lifts the far left of the log-density
    dev = np.max(np.abs(np.log(f.beta.clip(1e-300)) - np.log(s.beta.clip(1e-300))))
    assert dev > 1e-2


def test_wide_support_log_density_matches(model_I):
    Nx = 512
    req = CoeffRequest(model_I, -7.0, 14.0 / (Nx - 1), Nx, 1.0)
    s, f = beta_sinh(req), beta_fft(req)
    vis = s.beta > 1e-8 * s.beta.max()
    assert np.max(np.abs(np.log(f.beta[vis]) - np.log(s.beta[vis]))) < 1e-6


def test_fft_error_plateaus_with_refinement(model_I):
    # on [-4, 4] the wrapped tail mass does not shrink as the grid is refined;
    # density units, sqrt(a) beta
    gaps = []
    for Nx in (128, 256, 512, 1024):
        req = CoeffRequest(model_I, -4.0, 8.0 / (Nx - 1), Nx, 1.0)
        gaps.append(np.max(np.abs(beta_fft(req).beta - beta_sinh(req).beta)) * math.sqrt(req.a))
    assert min(gaps) > 1e-9
    assert max(gaps) / min(gaps) < 2.0


def test_antialiasing_helps_on_narrow_support(model_I):
    Nx = 256
    req = CoeffRequest(model_I, -4.0, 8.0 / (Nx - 1), Nx, 1.0)
    s = beta_sinh(req).beta
    plain = np.max(np.abs(beta_fft(req).beta - s))
    wide = np.max(np.abs(beta_fft_antialiased(req).beta - s))
    assert wide < plain / 10


def test_mass_and_sign(model_I):
    Nx = 512
    req = CoeffRequest(model_I, -6.0, 12.0 / (Nx - 1), Nx, 1 / 12)
    b = beta_sinh(req).beta
    assert np.sum(b) / math.sqrt(req.a) == pytest.approx(1.0, abs=1e-6)
    assert b.min() >= -1e-8


def test_node_value_is_scaled_integral(model_I):
    # hat functions are interpolatory, so the projected density at a node is sqrt(a) beta_k
    Nx = 256
    req = CoeffRequest(model_I, -3.0, 6.0 / (Nx - 1), Nx, 0.25)
    co = beta_sinh(req)
    dens = project_density(co, co.x)
    assert np.allclose(dens, math.sqrt(co.a) * co.beta, rtol=1e-14, atol=1e-300)


def test_brownian_coefficients():
    m = with_martingale_drift(Brownian(0.3), 0.02, 0.0)
    Nx = 512
    req = CoeffRequest(m, -4.0, 8.0 / (Nx - 1), Nx, 0.25)
    co = beta_sinh(req)
    assert np.all(np.isfinite(co.beta))
    assert martingale_residual(co, 0.02, 0.0, 0.25) < 1e-10


def test_up_and_out_call_residual(model_I):
    res = price_barrier_full(UOC, model_I, Numerics(Ny=2 ** 10)).diagnostics["residual"]
    assert res <= 1e-8


def test_request_validation(model_I):
    with pytest.raises(ValueError):
        CoeffRequest(model_I, 0.0, 0.1, 1, 0.1)
    with pytest.raises(ValueError):
        CoeffRequest(model_I, 0.0, -0.1, 8, 0.1)
    with pytest.raises(ValueError):
        CoeffRequest(model_I, 0.0, 0.1, 8, 0.0)
    with pytest.raises(ValueError):
        compute_beta(CoeffRequest(model_I, 0.0, 0.1, 8, 0.1), method="cos")
    with pytest.raises(ValueError):
        beta_fft(CoeffRequest(model_I, 0.0, 0.1, 8, 0.1), n_xi=4)


@settings(max_examples=50)
@given(st.sampled_from([1, 2, 3]), st.floats(-0.5, 0.5))
def test_bspline_partition_of_unity(p, t):
    k = np.arange(-4, 5)
    assert float(np.sum(bspline(p, t - k))) == pytest.approx(1.0, abs=1e-13)


def test_bspline_peak_values():
    assert bspline(1, 0.0) == 1.0
    assert float(bspline(2, 0.0)) == pytest.approx(0.75)
    assert float(bspline(3, 0.0)) == pytest.approx(2 / 3)


def test_thread_count_does_not_change_result(model_I, monkeypatch):
    Nx = 256
    req = CoeffRequest(model_I, -3.0, 6.0 / (Nx - 1), Nx, 0.25)
    monkeypatch.setenv("SINHPROJ_THREADS", "1")
    one = beta_sinh(req).beta
    monkeypatch.setenv("SINHPROJ_THREADS", "4")
    four = beta_sinh(req).beta
    # chunking only reorders floating-point sums
    assert np.max(np.abs(one - four)) <= 1e-15
    assert np.array_equal(four, beta_sinh(req).beta)


def test_grid_coefficients_cover_the_value_grid(model_I):
    g = build_grid(UOC, 2 ** 8, 3.0)
    req = CoeffRequest(model_I, g.x1, g.Delta, g.Nx, UOC.Delta_bar)
    assert len(beta_sinh(req)) == g.Nx
