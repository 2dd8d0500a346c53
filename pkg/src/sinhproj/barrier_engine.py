"""
Backward induction for discretely monitored barrier options on a uniform
log-price grid, plus European prices (sinh-deformed Fourier integral and a
single PROJ convolution).

The value function between monitoring dates is represented by coefficients
theta_k against hat functions centred at y_k = l + (k-1) Delta (log-moneyness
ln(S/S0)).  One step is

    V_n = e^{-r Dbar} a^{-1/2} sum_k beta(y_k - y_n) theta_k,

after which theta is refreshed from V by integrating the local quadratic
interpolant against each hat.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import param_select as ps
from .levy_models import DomainError, LevyModel
from .proj_coefficients import CoeffArray, CoeffRequest, compute_beta
from .sinh_quadrature import (TrapezoidGrid, hardy_estimate, select_contour, sinh_map,
                              sinh_map_deriv, step_from_tolerance, trapezoid_sum)

log = logging.getLogger(__name__)

KINDS = ("UOC", "UOP", "DOC", "DOP", "DoubleKOCall", "DoubleKOPut", "EuropeanCall", "EuropeanPut")
_CALLS = {"UOC", "DOC", "DoubleKOCall", "EuropeanCall"}
_LOWER = {"DOC", "DOP", "DoubleKOCall", "DoubleKOPut"}
_UPPER = {"UOC", "UOP", "DoubleKOCall", "DoubleKOPut"}


class AlignmentError(ValueError):
    pass


class GridTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class BarrierSpec:
    kind: str
    S0: float
    K: float
    T: float
    M: int = 1
    L: Optional[float] = None
    U: Optional[float] = None
    r: float = 0.0
    q: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown contract kind {self.kind!r}")
        if self.S0 <= 0.0 or self.K <= 0.0 or self.T <= 0.0 or self.M < 1:
            raise ValueError("need S0, K, T > 0 and M >= 1")
        if self.kind in _LOWER and not (self.L is not None and 0.0 < self.L < self.S0):
            raise ValueError("this contract needs 0 < L < S0")
        if self.kind in _UPPER and not (self.U is not None and self.U > self.S0):
            raise ValueError("this contract needs U > S0")

    @property
    def Delta_bar(self) -> float:
        return self.T / self.M

    @property
    def is_call(self) -> bool:
        return self.kind in _CALLS

    @property
    def lower_knockout(self) -> bool:
        return self.kind in _LOWER

    @property
    def upper_knockout(self) -> bool:
        return self.kind in _UPPER


@dataclass(frozen=True)
class Numerics:
    Ny: int = 2 ** 10
    L1: float = 8.0
    method: str = "sinh"
    eps: float = 1e-13
    aa_factor: int = 6
    auto: bool = False
    # "exact" or "quadratic"; only used when 0 is not a grid node
    readout: str = "exact"


@dataclass(frozen=True)
class ValueGrid:
    l: float
    Delta: float
    Ny: int
    n0: int

    @property
    def u(self) -> float:
        return self.l + (self.Ny - 1) * self.Delta

    @property
    def a(self) -> float:
        return 1.0 / self.Delta

    @property
    def Nx(self) -> int:
        return 2 * self.Ny

    @property
    def y(self) -> np.ndarray:
        return self.l + self.Delta * np.arange(self.Ny)

    @property
    def x1(self) -> float:
        """First node of the coefficient grid x_j = (j - Ny) Delta, j = 1..Nx."""
        return (1 - self.Ny) * self.Delta


def build_grid(spec: BarrierSpec, Ny: int, alpha: float) -> ValueGrid:
    """
    Value grid for the contract.  Barriers sit on end nodes; for single
    barriers the step is snapped so that 0 = ln(S0/S0) is a node (index n0,
    1-based).  alpha is the truncation half-width used away from barriers.
    """
    if Ny < 4:
        raise GridTooSmallError("need at least 4 grid points")
    S0 = spec.S0
    if spec.lower_knockout and spec.upper_knockout:
        l, u = math.log(spec.L / S0), math.log(spec.U / S0)
        Delta = (u - l) / (Ny - 1)
        return ValueGrid(l, Delta, Ny, int(math.floor(1.0 - l / Delta)))
    if spec.lower_knockout:
        l = math.log(spec.L / S0)
        Delta, n0 = ps.align_down(l, alpha, 2 * Ny)
        return ValueGrid(l, Delta, Ny, n0)
    if spec.upper_knockout:
        u = math.log(spec.U / S0)
        Delta, n0 = ps.align_up(u, alpha, 2 * Ny)
        return ValueGrid(u - (Ny - 1) * Delta, Delta, Ny, n0)
    # no barrier: Ny nodes spanning [-alpha, alpha] with 0 on a node
    Delta = 2.0 * alpha / (Ny - 1)
    return ValueGrid(-(Ny // 2) * Delta, Delta, Ny, Ny // 2 + 1)


# ---------------------------------------------------------------------------
# terminal coefficients

B3 = math.sqrt(15.0)
B4 = B3 / 10.0
_GAUSS_T = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 9.0


def _gauss(f, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return half * float(np.dot(_GAUSS_W, f(mid + half * _GAUSS_T)))


@dataclass(frozen=True)
class PayoffAdjustments:
    """
    Strike location relative to the grid and the 3-point Gauss integrals of
    exp(t Delta) against the hat on the two half-intervals touching it.

    The strike lies at y_nbar + rho with rho = zeta * Delta, zeta in [0, 1).
    Subscript 0 refers to the right half of node nbar, 1 to the left half of
    node nbar + 1; 'bar' integrals are of the hat alone (exact).
    """
    nbar: int
    rho: float
    zeta: float
    Delta: float
    theta_m10: float
    theta_01: float
    dbar0_put: float
    d0_put: float
    dbar1_put: float
    d1_put: float
    dbar0_call: float
    d0_call: float
    dbar1_call: float
    d1_call: float

    @property
    def sigma(self) -> float:
        return 1.0 - self.zeta

    @property
    def theta_star(self) -> float:
        return self.theta_m10 + self.theta_01


def payoff_adjustments(y1: float, Delta: float, K: float, S0: float) -> PayoffAdjustments:
    kstar = math.log(K / S0)
    t = (kstar - y1) / Delta
    nb = math.floor(t + 1e-12)
    zeta = t - nb
    if zeta < 0.0:
        zeta = 0.0
    nbar = int(nb) + 1
    rho = zeta * Delta
    D = Delta

    def right(t):  # weight (1 - t) on [0, 1]
        return np.exp(t * D) * (1.0 - t)

    def left(t):   # weight (1 + t) on [-1, 0]
        return np.exp(t * D) * (1.0 + t)

    return PayoffAdjustments(
        nbar=nbar, rho=rho, zeta=zeta, Delta=D,
        theta_m10=_gauss(left, -1.0, 0.0),
        theta_01=_gauss(right, 0.0, 1.0),
        dbar0_put=zeta * (1.0 - 0.5 * zeta),
        d0_put=_gauss(right, 0.0, zeta),
        dbar1_put=0.5 * zeta * zeta,
        d1_put=_gauss(left, -1.0, zeta - 1.0),
        dbar0_call=0.5 + zeta * (0.5 * zeta - 1.0),
        d0_call=_gauss(right, zeta, 1.0),
        dbar1_call=(1.0 - zeta) - 0.5 * (1.0 - zeta) ** 2,
        d1_call=_gauss(left, zeta - 1.0, 0.0),
    )


def _half_contributions(call: bool, adj: PayoffAdjustments, y: np.ndarray, K: float, S0: float):
    """Left-half and right-half integrals of the payoff against each hat (a-weighted)."""
    Ny = len(y)
    k = np.arange(1, Ny + 1)
    nb = adj.nbar
    spot = S0 * np.exp(y)
    e_rho = math.exp(-adj.rho)
    e_drho = math.exp(adj.Delta - adj.rho)
    left = np.zeros(Ny)
    right = np.zeros(Ny)
    if call:
        right[k > nb] = spot[k > nb] * adj.theta_01 - K / 2
        right[k == nb] = K * (e_rho * adj.d0_call - adj.dbar0_call)
        left[k >= nb + 2] = spot[k >= nb + 2] * adj.theta_m10 - K / 2
        left[k == nb + 1] = K * (e_drho * adj.d1_call - adj.dbar1_call)
    else:
        right[k < nb] = K / 2 - spot[k < nb] * adj.theta_01
        right[k == nb] = K * (adj.dbar0_put - e_rho * adj.d0_put)
        left[k <= nb] = K / 2 - spot[k <= nb] * adj.theta_m10
        left[k == nb + 1] = K * (adj.dbar1_put - e_drho * adj.d1_put)
    return left, right


def init_theta_terminal(spec: BarrierSpec, grid: ValueGrid) -> np.ndarray:
    """
    theta_{M,k} = a int G(y) phi(a (y - y_k)) dy for the terminal payoff.

    At a barrier end node only the half-hat inside the continuation region
    contributes; at an end node that is a truncation point the full hat is used.
    """
    tol = 1e-10 * max(1.0, grid.Delta)
    if spec.lower_knockout and abs(grid.l - math.log(spec.L / spec.S0)) > tol:
        raise AlignmentError("lower barrier is not the first grid node")
    if spec.upper_knockout and abs(grid.u - math.log(spec.U / spec.S0)) > tol:
        raise AlignmentError("upper barrier is not the last grid node")
    y = grid.y
    adj = payoff_adjustments(grid.l, grid.Delta, spec.K, spec.S0)
    left, right = _half_contributions(spec.is_call, adj, y, spec.K, spec.S0)
    if spec.lower_knockout:
        left[0] = 0.0
    if spec.upper_knockout:
        right[-1] = 0.0
    return left + right


def theta_update(V: np.ndarray) -> np.ndarray:
    """Integrals of the piecewise quadratic interpolant of V against the hats (end rows are half-hats)."""
    V = np.asarray(V, dtype=float)
    if len(V) < 4:
        raise GridTooSmallError("need at least 4 values")
    th = np.empty_like(V)
    th[1:-1] = (V[:-2] + 10.0 * V[1:-1] + V[2:]) / 12.0
    th[0] = (13.0 * V[0] + 15.0 * V[1] - 5.0 * V[2] + V[3]) / 48.0
    th[-1] = (13.0 * V[-1] + 15.0 * V[-2] - 5.0 * V[-3] + V[-4]) / 48.0
    return th


# ---------------------------------------------------------------------------
# convolution


class Convolver:
    """h_k = sum_{j=1..M} f_j g_{k-j} with g indexed l = 1-M..M-1; kernel transform cached."""

    def __init__(self, g: np.ndarray):
        g = np.asarray(g, dtype=float)
        if len(g) % 2 != 1:
            raise ValueError("kernel length must be 2M - 1")
        self.M = (len(g) + 1) // 2
        M = self.M
        # rotation layout [g_0 .. g_{M-1}, 0, g_{1-M} .. g_{-1}]
        gt = np.concatenate([g[M - 1:], [0.0], g[: M - 1]])
        self._G = np.fft.rfft(gt)

    def __call__(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if len(f) != self.M:
            raise ValueError(f"expected {self.M} values, got {len(f)}")
        ft = np.concatenate([f, np.zeros(self.M)])
        return np.fft.irfft(np.fft.rfft(ft) * self._G, 2 * self.M)[: self.M]


def discrete_convolution(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    f = np.asarray(f)
    if len(g) != 2 * len(f) - 1:
        raise ValueError("g must have length 2 len(f) - 1")
    return Convolver(g)(f)


def direct_convolution(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    M = len(f)
    if len(g) != 2 * M - 1:
        raise ValueError("g must have length 2 len(f) - 1")
    k = np.arange(M)
    return np.array([np.dot(f, g[(kk - k) + M - 1]) for kk in k])


def kernel_from_beta(beta: np.ndarray, Ny: int) -> np.ndarray:
    """g_l = beta at displacement -l Delta, for l = 1-Ny..Ny-1 (beta on x_j = (j - Ny) Delta)."""
    return np.asarray(beta[: 2 * Ny - 1])[::-1]


def backward_induction(theta_M: np.ndarray, beta: np.ndarray, a: float, r: float,
                       Delta_bar: float, M: int, direct: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """
    Run M steps from terminal coefficients theta_M.

    Returns (V_0 on the grid, theta_1), theta_1 being the coefficients that
    produced V_0 (theta_M itself when M = 1).
    """
    Ny = len(theta_M)
    g = kernel_from_beta(beta, Ny)
    conv = (lambda f: direct_convolution(f, g)) if direct else Convolver(g)
    ups = math.exp(-r * Delta_bar) / math.sqrt(a)
    theta = theta_M
    V = ups * conv(theta)
    for _ in range(M - 1):
        theta = theta_update(V)
        V = ups * conv(theta)
    return V, theta


def quadratic_readout(y: np.ndarray, V: np.ndarray, x: float = 0.0) -> float:
    """Value at x: exact node if on the grid, else the quadratic through the three nearest nodes."""
    Delta = y[1] - y[0]
    t = (x - y[0]) / Delta
    j = int(round(t))
    if abs(t - j) < 1e-9 and 0 <= j < len(y):
        return float(V[j])
    j = min(max(j, 1), len(y) - 2)
    s = (x - y[j]) / Delta
    return float(V[j] + 0.5 * s * (V[j + 1] - V[j - 1]) + 0.5 * s * s * (V[j + 1] - 2 * V[j] + V[j - 1]))


# ---------------------------------------------------------------------------
# pricing


@dataclass
class PriceResult:
    price: float
    grid: ValueGrid
    beta: CoeffArray
    V0: np.ndarray
    alpha: float
    diagnostics: dict = field(default_factory=dict)


def price_barrier_full(spec: BarrierSpec, model: LevyModel, numerics: Numerics = Numerics(),
                       direct: bool = False) -> PriceResult:
    Dbar = spec.Delta_bar
    diag: dict = {}
    if numerics.auto:
        ap = ps.auto_params(spec, model, method=numerics.method, coeff_eps=numerics.eps)
        alpha, Ny = ap.alpha, ap.Ny
        diag["auto"] = ap.history
    else:
        alpha = ps.initial_alpha(model, spec.T, numerics.L1)
        Ny = numerics.Ny
    grid = build_grid(spec, Ny, alpha)
    req = CoeffRequest(model, grid.x1, grid.Delta, grid.Nx, Dbar, eps=numerics.eps)
    beta = compute_beta(req, numerics.method, numerics.aa_factor)
    theta = init_theta_terminal(spec, grid)
    V0, theta1 = backward_induction(theta, beta.beta, grid.a, spec.r, Dbar, spec.M, direct)
    t0 = -grid.l / grid.Delta
    if abs(t0 - round(t0)) < 1e-9:
        price = float(V0[int(round(t0))])
        readout = "node"
    elif numerics.readout == "quadratic":
        price = quadratic_readout(grid.y, V0, 0.0)
        readout = "quadratic"
    else:
        # last step evaluated at 0 directly from coefficients at displacements y_k
        # FFT variants get the same 2 Ny window as the main array so that
        # both rows see the same periodisation
        shift = 0 if numerics.method == "sinh" else int(math.floor(Ny - 1 - t0))
        n_row = Ny if numerics.method == "sinh" else 2 * Ny
        req0 = CoeffRequest(model, grid.l - shift * grid.Delta, grid.Delta, n_row, Dbar,
                            eps=numerics.eps)
        b0 = compute_beta(req0, numerics.method, numerics.aa_factor).beta[shift: shift + Ny]
        price = math.exp(-spec.r * Dbar) / math.sqrt(grid.a) * float(np.dot(b0, theta1))
        readout = "exact"
    if spec.lower_knockout and spec.upper_knockout:
        # the restricted array drops mass by design; measure on [-alpha, alpha] instead
        res = ps.wide_grid_residual(model, grid.Delta, alpha, Dbar, spec.r, spec.q,
                                    numerics.method, numerics.eps)
    else:
        res = ps.martingale_residual(beta, spec.r, spec.q, Dbar)
    diag.update(Ny=Ny, Delta=grid.Delta, n0=grid.n0, method=numerics.method, readout=readout,
                residual=res)
    if beta.n_terms is not None:
        diag["max_terms"] = int(np.max(beta.n_terms))
    log.info("price_barrier %s Ny=%d Delta=%.6g price=%.10f", spec.kind, Ny, grid.Delta, price)
    return PriceResult(price, grid, beta, V0, alpha, diag)


def price_barrier(spec: BarrierSpec, model: LevyModel, numerics: Numerics = Numerics()) -> float:
    if spec.kind.startswith("European"):
        raise ValueError("use price_european_proj or price_european_sinh for European contracts")
    return price_barrier_full(spec, model, numerics).price


def price_european_proj(spec: BarrierSpec, model: LevyModel, numerics: Numerics = Numerics()) -> float:
    """
    One convolution of the coefficients against the payoff over [-alpha, alpha],
    readout at 0.  Calls go through the put and parity, since the unbounded
    call payoff would carry the truncation error of the right tail.
    """
    if not spec.kind.startswith("European"):
        raise ValueError("European contract expected")
    if model.profile.c_inf0 <= 0.0:
        raise DomainError("degenerate model: no diffusion and no jumps")
    put_spec = BarrierSpec("EuropeanPut", spec.S0, spec.K, spec.T, 1, None, None, spec.r, spec.q)
    alpha = ps.initial_alpha(model, spec.T, numerics.L1)
    grid = build_grid(put_spec, numerics.Ny, alpha)
    req = CoeffRequest(model, grid.y[0], grid.Delta, grid.Ny, spec.T, eps=numerics.eps)
    beta = compute_beta(req, numerics.method, numerics.aa_factor)
    theta = init_theta_terminal(put_spec, grid)
    disc = math.exp(-spec.r * spec.T)
    put = disc / math.sqrt(grid.a) * float(np.dot(beta.beta, theta))
    if spec.is_call:
        return put + spec.S0 * math.exp(-spec.q * spec.T) - spec.K * disc
    return put


def _european_put_sinh(model: LevyModel, xp: float, K: float, T: float, eps: float,
                       down: bool) -> float:
    """
    (1/2pi) int exp(i x' xi - T psi0(xi)) Ghat(xi) dxi for the put (up, Im xi > 0)
    or the call (down, Im xi < -1), Ghat = -K / (xi (xi + i)).
    """
    prof = model.profile
    g = prof.gamma_nu
    if down:
        if not prof.mu_minus < -1.0:
            raise DomainError("the call transform needs the strip to reach below -i")
        lo = max(prof.mu_minus, -1.0 - 20.0) if math.isfinite(prof.mu_minus) else -6.0
        contour = select_contour(lo, -1.0, -g, 0.0) if xp < 0 else select_contour(lo, -1.0, -g, g)
    else:
        hi = min(prof.mu_plus, 20.0) if math.isfinite(prof.mu_plus) else 5.0
        contour = select_contour(0.0, hi, 0.0, g) if xp > 0 else select_contour(0.0, hi, -g, g)

    def f(y):
        xi = sinh_map(contour, y)
        return (np.exp(1j * xp * xi - T * model.psi0(xi)) * (-K) / (xi * (xi + 1j))
                * sinh_map_deriv(contour, y))

    d = contour.d
    H = hardy_estimate((abs(f(np.array([-1j * d]))[0]), abs(f(np.array([1j * d]))[0])),
                       gamma_span=2 * g, kd=contour.kd)
    zeta = step_from_tolerance(H, d, eps)
    Lam = 1.0
    while abs(f(np.array([Lam]))[0]) > eps * 1e-2 and Lam < 60.0:
        Lam += 0.5
    val = trapezoid_sum(f, TrapezoidGrid(zeta, Lam))
    return float(val) / (2.0 * math.pi)


def price_european_sinh(spec: BarrierSpec, model: LevyModel, eps: float = 1e-12) -> float:
    """
    European call or put from the Fourier integral on a sinh contour.

    With x' = ln(S0/K) + mu T the put integrand decays in the upper half-plane
    for x' >= 0 and the call integrand in the lower one for x' < 0; the other
    contract follows from put-call parity.
    """
    if not spec.kind.startswith("European"):
        raise ValueError("European contract expected")
    xp = math.log(spec.S0 / spec.K) + model.mu * spec.T
    disc = math.exp(-spec.r * spec.T)
    if xp >= 0.0:
        put = disc * _european_put_sinh(model, xp, spec.K, spec.T, eps, down=False)
        call = put + spec.S0 * math.exp(-spec.q * spec.T) - spec.K * disc
    else:
        call = disc * _european_put_sinh(model, xp, spec.K, spec.T, eps, down=True)
        put = call - spec.S0 * math.exp(-spec.q * spec.T) + spec.K * disc
    return call if spec.is_call else put
