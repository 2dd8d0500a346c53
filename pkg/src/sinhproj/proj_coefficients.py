"""
Projection coefficients of a Levy transition density onto a B-spline basis.

For nodes x_k = x1 + (k-1)/a the coefficient is

    beta_k = a^{1/2} I(x'_k),  I(x') = (1/2pi) int exp(i x' a xi - Dbar psi0(a xi)) dual_ft(xi) dxi,

with x'_k = -x_k + mu Dbar.  For x' > 0 the line of integration is lifted
above the poles of dual_ft (their residues are summed separately) and then
deformed into a sinh contour; x' < 0 is the same computation for the
reflected process.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import BSpline

from . import bspline_dual as bd
from .levy_models import LevyModel, char_function
from .sinh_quadrature import (DegenerateContourError, SinhContour, TrapezoidGrid,
                              hardy_estimate, select_contour, sinh_cutoff, sinh_map,
                              sinh_map_inverse, step_from_tolerance, trapezoid_sum,
                              truncation_lambda)

ATYPICAL_MARGIN = 1.25
MU_A = 3.0


@dataclass(frozen=True)
class CoeffRequest:
    model: LevyModel
    x1: float
    Delta: float
    Nx: int
    Delta_bar: float
    p: int = 1
    eps: float = 1e-13
    kb: float = 0.85
    kd: float = 0.85

    def __post_init__(self) -> None:
        if self.Nx < 2 or self.Delta <= 0.0 or self.Delta_bar <= 0.0:
            raise ValueError("need Nx >= 2, Delta > 0, Delta_bar > 0")

    @property
    def a(self) -> float:
        return 1.0 / self.Delta

    @property
    def x(self) -> np.ndarray:
        return self.x1 + self.Delta * np.arange(self.Nx)


@dataclass
class CoeffArray:
    beta: np.ndarray
    x: np.ndarray
    a: float
    method: str
    p: int = 1
    n_terms: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.beta)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SINHPROJ_THREADS", "1")))
    except ValueError:
        return 1


def _chunked(fn, xs: np.ndarray) -> np.ndarray:
    n = _threads()
    if n == 1 or len(xs) < 64:
        return fn(xs)
    parts = np.array_split(xs, n)
    with ThreadPoolExecutor(max_workers=n) as pool:
        out = list(pool.map(fn, parts))
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# residue rows


def _row_sums(model: LevyModel, p: int, frac: float, a: float, Delta_bar: float,
              eps: float) -> list[tuple[float, complex]]:
    """
    For each pole row j of the upper half-plane, (v_j, S_j) such that crossing
    the row adds exp(x' a (i pi - v_j)) * S_j to I(x') whenever x' a = frac mod 1.
    """
    ps = bd.poles(p)
    if p == 1:
        J, _ = bd.residue_series_J(model, frac / a, Delta_bar, a, +1, eps)
        return [(bd.V_LINEAR, complex(bd.residue_prefactor(0.0, a, +1) * J))]
    out = []
    for j, v in enumerate(ps.heights):
        n = bd.residue_count(model, Delta_bar, a, eps)
        total = 0.0j
        ells = np.arange(-n, n)
        first = True
        while True:
            xi = ps.locations(j, +1, ells)
            bd._check_pole_in_cone(model, xi[[0, -1]])
            res = np.array([bd.dual_ft_residue(p, z) for z in xi])
            terms = 1j * res * np.exp(1j * frac * 2 * math.pi * ells - Delta_bar * model.psi0(a * xi))
            block = complex(np.sum(terms))
            total += block
            if not first and abs(block) < eps:
                break
            if n > bd.MAX_RESIDUE_TERMS:
                raise bd.ResidueSeriesError("residue series did not converge")
            ells = np.concatenate([np.arange(-2 * n, -n), np.arange(n, 2 * n)])
            n *= 2
            first = False
        out.append((v, total))
    return out


# ---------------------------------------------------------------------------
# contour selection


def _window_upward(model: LevyModel, p: int, a: float, kb: float, kd: float) -> tuple[SinhContour, dict]:
    """Contour lying above every pole row and below the upper branch point of psi0(a xi)."""
    prof = model.profile
    vmax = bd.poles(p).v_max
    top = prof.mu_plus / a if math.isfinite(prof.mu_plus) else math.inf
    gam = prof.gamma_nu
    if top > ATYPICAL_MARGIN * vmax:
        top = min(top, 3.0 * vmax)
        gm, gp, lo, hi = 0.0, gam, vmax, top
        scheme = "crossing"
    else:
        hi = min(prof.mu_plus, MU_A) / a
        lo = min(vmax, hi / 2.0)
        gm, gp = math.atan((vmax - lo) / math.pi), gam
        scheme = "atypical"
    contour = select_contour(lo, hi, gm, gp, kb, kd)
    contour = _guard_strip(contour, model, a, p, upward=True)
    return contour, {"scheme": scheme, "window": (lo, hi), "cone": (gm, gp)}


def _window_flat(model: LevyModel, p: int, a: float, kb: float, kd: float) -> tuple[SinhContour, dict]:
    prof = model.profile
    vmin = min(bd.poles(p).heights)
    w = min(prof.mu_plus, -prof.mu_minus) / a
    w = min(w, vmin / 2.0)
    g = min(prof.gamma_nu, math.atan(vmin / math.pi))
    contour = select_contour(-w, w, -g, g, kb, kd)
    contour = _guard_strip(contour, model, a, p, upward=False)
    return contour, {"scheme": "flat", "window": (-w, w), "cone": (-g, g)}


def _guard_strip(contour: SinhContour, model: LevyModel, a: float, p: int,
                 upward: bool) -> SinhContour:
    """
    Shrink the strip half-width if a singularity's preimage is closer to the
    real y-axis than d, and check that the contour separates the crossed poles
    from the upper branch cut.
    """
    prof = model.profile
    ps = bd.poles(p)
    ells = np.arange(-3, 3)
    sing = [ps.locations(j, s, ells) for j in range(len(ps.heights)) for s in (+1, -1)]
    pts = np.concatenate(sing)
    if math.isfinite(prof.mu_plus):
        pts = np.append(pts, 1j * prof.mu_plus / a)
    if math.isfinite(prof.mu_minus):
        pts = np.append(pts, 1j * prof.mu_minus / a)
    y = sinh_map_inverse(contour, pts)
    upper_rows = np.concatenate([s for i, s in enumerate(sing) if i % 2 == 0])
    yu = sinh_map_inverse(contour, upper_rows)
    if upward and np.any(yu.imag >= 0.0):
        raise DegenerateContourError("contour does not pass above the pole rows")
    if not upward and np.any(yu.imag <= 0.0):
        raise DegenerateContourError("flat contour is not below the upper pole rows")
    dist = float(np.min(np.abs(y.imag)))
    if contour.d >= dist:
        contour = SinhContour(contour.omega1, contour.b, contour.omega, contour.kd * dist,
                              contour.kb, contour.kd)
    return contour


# ---------------------------------------------------------------------------
# integrals along the deformed contour


def _integrand(contour: SinhContour, model: LevyModel, p: int, a: float, Delta_bar: float):
    """Return f(y, xp) = (1/2pi) exp(i x' a xi - Dbar psi0(a xi)) dual_ft(xi) dxi/dy on the contour."""

    def f(y: np.ndarray, xp: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        xi = sinh_map(contour, y)
        w = 1j * contour.omega + y
        # log(b cosh w / 2pi), written to avoid overflow of cosh
        sgn = np.where(w.real >= 0, 1.0, -1.0)
        logjac = (np.log(contour.b / (4 * math.pi)) + sgn * w
                  + np.log1p(np.exp(-2.0 * sgn * w)))
        base = -Delta_bar * model.psi0(a * xi) + logjac
        expo = base[:, None] + 1j * a * np.outer(xi, xp)
        with np.errstate(under="ignore", over="ignore"):
            return np.exp(expo) * bd.dual_ft(p, xi)[:, None]

    return f


@dataclass
class _GroupResult:
    values: np.ndarray
    n_terms: int
    info: dict


def _sinh_group(model: LevyModel, xp: np.ndarray, a: float, Delta_bar: float, p: int,
                eps: float, kb: float, kd: float, upward: bool) -> _GroupResult:
    """I(x') for a group of x' sharing one contour (all x' >= 0, or all x' = 0 when flat)."""
    prof = model.profile
    if upward:
        contour, info = _window_upward(model, p, a, kb, kd)
    else:
        contour, info = _window_flat(model, p, a, kb, kd)
    eps3 = eps / 3.0
    f = _integrand(contour, model, p, a, Delta_bar)
    xmin = float(np.min(xp))

    # residues of the crossed rows; all nodes share frac(x' a)
    resid = np.zeros(len(xp), dtype=complex)
    near = []
    if upward:
        frac = (xp[0] * a) % 1.0
        for v, S in _row_sums(model, p, frac, a, Delta_bar, eps3):
            pref = np.exp(xp * a * (1j * math.pi - v))
            resid += pref * S
            # the two poles nearest the imaginary axis enter the Hardy estimate
            for ell in (0, -1):
                z = np.pi * (2 * ell + 1) + 1j * v
                near.append(abs(np.exp(1j * xmin * a * z - Delta_bar * model.psi0(a * z))
                                * bd.dual_ft_residue(p, z)))

    d = contour.d
    # the flat contour serves nodes of both signs; bound with the worst one
    xs = np.array([xmin]) if upward else np.array([xmin, float(np.max(xp))])
    fb = np.max(np.abs(f(np.array([-1j * d, 1j * d]), xs)), axis=1)
    cone = info["cone"]
    H = hardy_estimate((abs(fb[0]), abs(fb[1])), near, cone[1] - cone[0], kd)
    zeta = step_from_tolerance(H, d, eps3) if H > eps3 else d

    # truncation
    a1 = max(xmin, 0.0) * math.sin(contour.omega)
    a2 = Delta_bar * prof.c_inf0 * math.cos(contour.omega * prof.nu)
    eps1 = math.pi * eps3 * math.exp(-Delta_bar * abs(prof.C0)) / a
    Lambda2, newton = truncation_lambda(prof.nu, a1, a2, math.log(1.0 / eps1))
    Lambda = max(sinh_cutoff(Lambda2, a, contour.b), zeta)
    # a-posteriori tail check: the first neglected node must be negligible
    while True:
        tail = np.max(np.abs(f(np.array([-Lambda, Lambda]), xs)))
        if not tail * 2 * zeta > eps3 or Lambda > 200:
            break
        Lambda += 0.5
    grid = TrapezoidGrid(zeta, Lambda)

    def run(chunk: np.ndarray) -> np.ndarray:
        return trapezoid_sum(lambda y: f(y, chunk), grid)

    integral = _chunked(run, xp)
    info.update(contour=contour, H=H, zeta=zeta, Lambda=Lambda, newton=newton,
                residue_part=resid)
    return _GroupResult(integral + resid.real, grid.N, info)


def sinh_integrals(model: LevyModel, xp: np.ndarray, a: float, Delta_bar: float, p: int = 1,
                   eps: float = 1e-13, kb: float = 0.85, kd: float = 0.85) -> tuple[np.ndarray, np.ndarray, dict]:
    """I(x') for arbitrary x'; returns values, per-node term counts and diagnostics."""
    xp = np.asarray(xp, dtype=float)
    out = np.zeros_like(xp)
    nterms = np.zeros(len(xp), dtype=int)
    diag: dict = {}
    tiny = 1e-12 / a
    if model.profile.nu >= 2.0:
        # Gaussian decay beats any exponential factor: no pole crossing, one flat contour
        tiny = math.inf
    up, down, zero = xp > tiny, xp < -tiny, np.abs(xp) <= tiny
    if np.any(up):
        r = _sinh_group(model, xp[up], a, Delta_bar, p, eps, kb, kd, True)
        out[up], nterms[up], diag["up"] = r.values, r.n_terms, r.info
    if np.any(down):
        r = _sinh_group(model.reflected(), -xp[down], a, Delta_bar, p, eps, kb, kd, True)
        out[down], nterms[down], diag["down"] = r.values, r.n_terms, r.info
    if np.any(zero):
        r = _sinh_group(model, xp[zero], a, Delta_bar, p, eps, kb, kd, False)
        out[zero], nterms[zero], diag["zero"] = r.values, r.n_terms, r.info
    return out, nterms, diag


def beta_sinh(req: CoeffRequest) -> CoeffArray:
    a = req.a
    x = req.x
    xp = -x + req.model.mu * req.Delta_bar
    # I is needed to eps / sqrt(a) so that beta = sqrt(a) I meets eps
    vals, nterms, diag = sinh_integrals(req.model, xp, a, req.Delta_bar, req.p,
                                        req.eps / math.sqrt(a), req.kb, req.kd)
    return CoeffArray(math.sqrt(a) * vals, x, a, "sinh", req.p, nterms, diag)


# ---------------------------------------------------------------------------
# FFT baseline


def beta_fft(req: CoeffRequest, n_xi: Optional[int] = None) -> CoeffArray:
    """
    Coefficients from a uniform xi-grid with Nyquist pairing (step 2 pi a / n),
    evaluated by one FFT.  The implicit periodisation over a window of n / a
    wraps the density tails around, which is the aliasing seen on narrow grids.
    """
    n = req.Nx if n_xi is None else n_xi
    if n < req.Nx:
        raise ValueError("the xi-grid must have at least Nx points")
    a = req.a
    dw = 2.0 * math.pi * a / n
    xi = dw * np.arange(n)
    w = np.ones(n)
    w[0] = 0.5
    phi = char_function(req.model, xi, req.Delta_bar)
    vals = w * np.exp(-1j * req.x1 * xi) * phi * bd.dual_ft(req.p, xi / a)
    beta = (dw / math.pi) / math.sqrt(a) * np.real(np.fft.fft(vals))[: req.Nx]
    return CoeffArray(beta, req.x, a, "fft", req.p, None, {"n_xi": n})


def beta_fft_antialiased(req: CoeffRequest, factor: int = 6) -> CoeffArray:
    """FFT coefficients on a grid `factor` times wider, restricted to the requested nodes."""
    extra = (factor - 1) * req.Nx
    left = extra // 2
    big = CoeffRequest(req.model, req.x1 - left * req.Delta, req.Delta, req.Nx + extra,
                       req.Delta_bar, req.p, req.eps, req.kb, req.kd)
    full = beta_fft(big)
    beta = full.beta[left: left + req.Nx]
    return CoeffArray(beta, req.x, req.a, "fft-aa", req.p, None, {"factor": factor})


def compute_beta(req: CoeffRequest, method: str = "sinh", aa_factor: int = 6) -> CoeffArray:
    if method == "sinh":
        return beta_sinh(req)
    if method == "fft":
        return beta_fft(req)
    if method == "fft-aa":
        return beta_fft_antialiased(req, aa_factor)
    raise ValueError(f"unknown coefficient method {method!r}")


# ---------------------------------------------------------------------------
# density reconstruction


def bspline(p: int, t):
    """Centred cardinal B-spline of order p (hat function for p = 1)."""
    t = np.asarray(t, dtype=float)
    if p == 1:
        return np.maximum(0.0, 1.0 - np.abs(t))
    knots = np.arange(p + 2) - (p + 1) / 2.0
    return np.nan_to_num(BSpline.basis_element(knots, extrapolate=False)(t))


def project_density(coeffs: CoeffArray, x) -> np.ndarray:
    """Sum_k beta_k a^{1/2} phi(a (x - x_k))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a = coeffs.a
    half = (coeffs.p + 1) / 2.0
    out = np.zeros(len(x))
    for i, xv in enumerate(x):
        t = a * (xv - coeffs.x)
        m = np.abs(t) < half
        out[i] = math.sqrt(a) * np.dot(coeffs.beta[m], bspline(coeffs.p, t[m]))
    return out
