"""
Automatic choice of truncation and grid parameters, and a-priori error bounds.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import gamma

from .levy_models import DomainError, LevyModel, char_exponent, char_function, cumulants
from .proj_coefficients import CoeffArray, CoeffRequest, compute_beta

log = logging.getLogger(__name__)

N_CAP = 2 ** 17


class NonConvergenceError(RuntimeError):
    pass


def initial_alpha(model: LevyModel, T: float, L1: float) -> float:
    """alpha = L1 sqrt(|c2| + sqrt(|c4|)) with c_n the cumulants of X_T."""
    _, c2, c4 = cumulants(model, T)
    return L1 * math.sqrt(abs(c2) + math.sqrt(abs(c4)))


def initial_N(Delta_bar: float) -> int:
    if Delta_bar <= 1.0 / 100:
        return 2 ** 10
    if Delta_bar <= 1.0 / 40:
        return 2 ** 9
    return 2 ** 8


def align_down(l: float, alpha: float, N: int) -> tuple[float, int]:
    """
    Step and index n0 for a grid starting at the lower barrier l < 0 such that
    y_{n0} = l + (n0-1) Delta = 0 whenever 0 is at least one step from l.
    """
    Delta = 2.0 * alpha / (N - 1)
    n0 = int(math.floor(1.0 - l / Delta))
    if Delta <= abs(l):
        Delta = l / (1 - n0)
    return Delta, n0


def align_up(u: float, alpha: float, N: int) -> tuple[float, int]:
    """Mirror of align_down for a grid ending at the upper barrier u > 0 with N/2 nodes."""
    Ny = N // 2
    Delta = 2.0 * alpha / (N - 1)
    n0 = int(math.floor(Ny - u / Delta))
    if Delta <= u:
        Delta = u / (Ny - n0)
    return Delta, n0


def cdf_hilbert_raw(model: LevyModel, T: float, x: float, N: int, Delta_xi: float) -> float:
    """
    Distribution function of X_T at x from the midpoint rule of the
    Hilbert-transform (Gil-Pelaez) representation.
    """
    n = np.arange(-(N - 1), N)
    s = (n - 0.5) * Delta_xi
    terms = char_function(model, s, T) * np.exp(-1j * x * s) / ((n - 0.5) * math.pi)
    return float((0.5 + 0.5j * np.sum(terms)).real)


def cdf_hilbert_estimate(model: LevyModel, T: float, x: float, N: int, Delta_xi: float) -> float:
    return min(1.0, max(0.0, cdf_hilbert_raw(model, T, x, N, Delta_xi)))


def theta_star_exact(Delta: float) -> float:
    """Integral of exp(t Delta) against the hat function on [-1, 1], (sinh(Delta/2) / (Delta/2))^2."""
    h = 0.5 * Delta
    if h == 0.0:
        return 1.0
    return (math.sinh(h) / h) ** 2


def martingale_estimate(beta: CoeffArray) -> float:
    """E_N = a^{-1/2} theta* sum beta_n exp(x_n), the coefficient-implied E[exp(X)]."""
    return theta_star_exact(1.0 / beta.a) / math.sqrt(beta.a) * float(np.dot(beta.beta, np.exp(beta.x)))


def martingale_residual(beta: CoeffArray, r: float, q: float, Delta_bar: float) -> float:
    return abs(martingale_estimate(beta) - math.exp((r - q) * Delta_bar))


@dataclass
class AutoParams:
    alpha: float
    N: int
    Delta: float
    n0: int
    beta: Optional[CoeffArray] = None
    residual: float = math.nan
    eps1: float = 5e-8
    eps2: float = 1e-5
    tau: float = 1.1
    L1: float = 10.0
    history: list = field(default_factory=list)

    @property
    def Ny(self) -> int:
        return self.N // 2


def _coeff_grid(model, Delta: float, N: int, Delta_bar: float, method: str, eps: float) -> CoeffArray:
    Ny = N // 2
    req = CoeffRequest(model, (1 - Ny) * Delta, Delta, N, Delta_bar, eps=eps)
    return compute_beta(req, method)


def wide_grid_residual(model: LevyModel, Delta: float, alpha: float, Delta_bar: float, r: float,
                       q: float, method: str = "sinh", eps: float = 1e-13) -> float:
    """Martingale residual of coefficients with step Delta over [-alpha, alpha]."""
    n = 2 * int(math.ceil(alpha / Delta))
    return martingale_residual(_coeff_grid(model, Delta, n, Delta_bar, method, eps), r, q, Delta_bar)


def auto_params(spec, model: LevyModel, eps1: float = 5e-8, eps2: float = 1e-5, tau: float = 1.1,
                L1: float = 10.0, method: str = "sinh", coeff_eps: float = 1e-13,
                n_cap: int = N_CAP) -> AutoParams:
    """
    Truncation width and grid size for a barrier contract.

    Single barriers: widen alpha by tau (doubling N) until the tail mass beyond
    the far end of the value grid, scaled by max(S0, K), is below eps1; then
    double N until the martingale residual times M is below eps2.
    Double barriers have their grid fixed by [L, U]; only the N loop runs, on a
    grid with the barrier-implied spacing.
    """
    Dbar = spec.T / spec.M
    S0, K = spec.S0, spec.K
    N = initial_N(Dbar)
    alpha = initial_alpha(model, spec.T, L1)
    hist: list = []
    kind = spec.kind

    if kind in ("DOC", "DOP", "UOC", "UOP"):
        down = kind in ("DOC", "DOP")
        if down:
            l = math.log(spec.L / S0)
            alpha = max(tau * (max(0.0, math.log(K / S0)) - l), alpha)
        else:
            u = math.log(spec.U / S0)
            alpha = max(tau * (u - min(0.0, math.log(K / S0))), alpha)
        scale = max(S0, K)
        while True:
            x_star = (l + alpha) if down else (u - alpha)
            d_xi = math.pi * (N - 1) / (alpha * N)
            F = cdf_hilbert_raw(model, spec.T, x_star, N, d_xi)
            tail = abs(1.0 - F) if down else abs(F)
            hist.append({"loop": "tail", "alpha": alpha, "N": N, "tail": tail})
            log.info("auto_params tail alpha=%.6g N=%d tail=%.3e", alpha, N, tail)
            if tail * scale <= eps1:
                break
            alpha *= tau
            N *= 2
            if N > n_cap:
                raise NonConvergenceError("tail loop exceeded the grid-size cap")
        N //= 2
        err = 2 * eps2
        while err > eps2:
            N *= 2
            if N > n_cap:
                raise NonConvergenceError("martingale loop exceeded the grid-size cap")
            if down:
                Delta, n0 = align_down(l, alpha, N)
            else:
                Delta, n0 = align_up(u, alpha, N)
            beta = _coeff_grid(model, Delta, N, Dbar, method, coeff_eps)
            res = martingale_residual(beta, spec.r, spec.q, Dbar)
            err = res * spec.M
            hist.append({"loop": "martingale", "alpha": alpha, "N": N, "residual": res})
            log.info("auto_params martingale N=%d Delta=%.6g residual=%.3e", N, Delta, res)
        return AutoParams(alpha, N, Delta, n0, beta, res, eps1, eps2, tau, L1, hist)

    if kind in ("DoubleKOCall", "DoubleKOPut"):
        l, u = math.log(spec.L / S0), math.log(spec.U / S0)
        err = 2 * eps2
        N //= 2
        while err > eps2:
            N *= 2
            if N > n_cap:
                raise NonConvergenceError("martingale loop exceeded the grid-size cap")
            Delta = (u - l) / (N // 2 - 1)
            res = wide_grid_residual(model, Delta, alpha, Dbar, spec.r, spec.q, method, coeff_eps)
            err = res * spec.M
            hist.append({"loop": "martingale", "N": N, "residual": res})
        n0 = int(math.floor(1.0 - l / Delta))
        return AutoParams(alpha, N, Delta, n0, None, res, eps1, eps2, tau, L1, hist)

    raise ValueError(f"automatic parameters are not defined for {kind}")


# ---------------------------------------------------------------------------
# a-priori bounds


@dataclass
class ErrorBudget:
    omega_minus: float = math.nan
    omega_plus: float = math.nan
    x_M: float = math.nan
    rho_n: float = math.nan
    D_n: float = math.nan
    Delta_rec: float = math.nan


def _psi_real(model: LevyModel, omega: float) -> float:
    return float(complex(char_exponent(model, 1j * omega)).real)


def _xM_objective(model: LevyModel, x: float, K: float, h: float, T: float, r: float, eps: float,
                  bounded: bool):
    def obj(w):
        wm, wp = w
        pp, pm = _psi_real(model, wp), _psi_real(model, wm)
        val = -(r + pp) * T - wm * x + T * max(pp - pm, 0.0)
        if bounded:
            val -= math.log(eps / K)
        else:
            val += wp * math.log(K) - math.log(eps / (K - math.exp(h)))
        return val / (wp - wm)
    return obj


def truncation_xM(model: LevyModel, x: float, K: float, h: float, T: float, r: float, eps: float,
                  bounded_payoff: bool = False, scan: int = 16) -> ErrorBudget:
    """
    Truncation point from the exponential tail bound, minimised over the
    dampening pair (omega-, omega+) in (mu-, 0) x (0, mu+): 16 x 16 scan, then
    Nelder-Mead from the best scan point.  x, h are log-prices.
    """
    prof = model.profile
    lo, hi = prof.mu_minus, prof.mu_plus
    if not (lo < 0.0 < hi):
        raise DomainError("empty dampening window")
    if not bounded_payoff and not K > math.exp(h):
        raise DomainError("put-type bound needs K above the barrier level")
    lo = max(lo, -50.0)
    hi = min(hi, 50.0)
    obj = _xM_objective(model, x, K, h, T, r, eps, bounded_payoff)
    wm_grid = lo * (np.arange(1, scan + 1) - 0.5) / scan
    wp_grid = hi * (np.arange(1, scan + 1) - 0.5) / scan
    best = min(((obj((a, b)), a, b) for a in wm_grid for b in wp_grid))
    margin = 1e-6
    bounds = [(lo * (1 - margin), -margin), (margin, hi * (1 - margin))]
    res = minimize(obj, x0=[best[1], best[2]], method="Nelder-Mead", bounds=bounds,
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    val = min(float(res.fun), best[0])
    wm, wp = (res.x if res.fun <= best[0] else (best[1], best[2]))
    return ErrorBudget(omega_minus=float(wm), omega_plus=float(wp), x_M=val)


def D_factor(n: int, nu: float) -> float:
    """sup over phi in (0, min(pi/2, pi/(2 nu))) of cos(phi nu)^(n/nu) sin(phi)."""
    top = min(math.pi / 2, math.pi / (2 * nu))
    if top <= 0.0:
        raise DomainError("degenerate maximisation interval")
    res = minimize_scalar(lambda p: -(math.cos(p * nu) ** (n / nu)) * math.sin(p),
                          bounds=(0.0, top), method="bounded", options={"xatol": 1e-12})
    return float(-res.fun)


def interp_error_budget(model: LevyModel, Delta_bar: float, N: int, K: float, H: float, T: float,
                        r: float, eps: float, d_plus0: Optional[float] = None, n: int = 3) -> ErrorBudget:
    """
    Grid step making the quadratic-interpolation error of the value function
    below eps, from the bound on its n-th derivative.  d_plus0 defaults to the
    asymptotic coefficient c_inf0 of the model.
    """
    prof = model.profile
    nu = prof.nu
    d0 = prof.c_inf0 if d_plus0 is None else d_plus0
    Dn = D_factor(n, nu)
    rho = 2.0 * gamma(n / nu) / (d0 ** (n / nu) * math.pi * nu * Dn) * Delta_bar ** (-n / nu)
    Delta = (math.exp(-r * T) / (6.0 * eps) * (N - 1) * abs(K - H) * rho) ** (-1.0 / 3.0)
    return ErrorBudget(rho_n=rho, D_n=Dn, Delta_rec=Delta)
