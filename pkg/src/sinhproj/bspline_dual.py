"""
Fourier transforms of dual B-spline generators and their poles.

For spline order p the dual generator has transform

    dual_ft(xi) = phi_hat(xi) / Phi(cos xi),   phi_hat(xi) = (sin(xi/2)/(xi/2))^(p+1),

where Phi is a polynomial in cos xi normalised by Phi(1) = 1.  Its zeros give
rows of simple poles at (2l+1)pi +- i v_j.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .levy_models import DomainError, LevyModel

# coefficients of Phi in powers of z = cos(xi), lowest degree first
_PHI_COEFFS = {
    # (2 + z) / 3
    1: np.array([2.0, 1.0]) / 3.0,
    # (33 + 26 cos xi + cos 2xi) / 60 = (32 + 26 z + 2 z^2) / 60
    2: np.array([32.0, 26.0, 2.0]) / 60.0,
    # (1208 + 1191 cos xi + 120 cos 2xi + cos 3xi) / 2520
    3: np.array([1208.0 - 120.0, 1191.0 - 3.0, 240.0, 4.0]) / 2520.0,
}

V_LINEAR = math.log(2.0 + math.sqrt(3.0))


def _check_order(p: int) -> None:
    if p not in _PHI_COEFFS:
        raise ValueError("spline order must be 1, 2 or 3")


def Phi(p: int, xi):
    """Denominator polynomial evaluated at cos(xi)."""
    _check_order(p)
    return np.polynomial.polynomial.polyval(np.cos(np.asarray(xi, dtype=complex)), _PHI_COEFFS[p])


def phi_hat(p: int, xi):
    """Transform of the centred order-p B-spline."""
    z = np.asarray(xi, dtype=complex)
    half = 0.5 * z
    safe = np.where(np.abs(half) < 1e-8, 1.0, half)
    ratio = np.where(np.abs(half) < 1e-8, 1.0 - half * half / 6.0, np.sin(safe) / safe)
    return ratio ** (p + 1)


@lru_cache(maxsize=None)
def _scaled_denominator(p: int) -> np.ndarray:
    # Phi(cos xi) = q^{-p} R(q) with q = exp(i xi); R has coefficients in q
    c = _PHI_COEFFS[p]
    R = np.zeros(2 * p + 1, dtype=complex)
    for j, cj in enumerate(c):
        # cos^j xi = q^{-j} (1 + q^2)^j / 2^j, then shift by q^p
        binom = np.polynomial.polynomial.polypow([1.0, 0.0, 1.0], j) / 2.0 ** j
        R[p - j: p - j + len(binom)] += cj * binom
    return R


def dual_ft(p: int, xi):
    """
    Transform of the dual generator, stable for large |Im xi|.

    In the upper half-plane, with q = exp(i xi),
        dual_ft = (2/xi)^(p+1) ((q-1)/(2i))^(p+1) q^((p-1)/2) / R(q),
    which involves only bounded quantities; the lower half-plane follows from
    evenness.  Near 0 a Taylor expansion removes the 0/0.
    """
    _check_order(p)
    z = np.asarray(xi, dtype=complex)
    z = np.where(z.imag < 0.0, -z, z)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    q = np.exp(1j * zs)
    num = (2.0 / zs) ** (p + 1) * ((q - 1.0) / 2j) ** (p + 1) * np.exp(0.5j * (p - 1) * zs)
    den = np.polynomial.polynomial.polyval(q, _scaled_denominator(p))
    out = num / den
    if np.any(small):
        out = np.where(small, _dual_taylor(p, z), out)
    return out if np.ndim(xi) else complex(out)


@lru_cache(maxsize=None)
def _taylor_coeffs(p: int) -> np.ndarray:
    # even Taylor coefficients of dual_ft in powers of xi^2, up to xi^10
    n = 6
    # series of phi_hat: (sinc)^(p+1), sinc(x/2) = sum (-1)^k (x/2)^(2k)/(2k+1)!
    sinc = np.array([(-1) ** k / math.factorial(2 * k + 1) / 4.0 ** k for k in range(n)])
    num = np.array([1.0])
    for _ in range(p + 1):
        num = np.polynomial.polynomial.polymul(num, sinc)[:n]
    # series of Phi(cos x): cos x = sum (-1)^k x^(2k)/(2k)!
    cosx = np.array([(-1) ** k / math.factorial(2 * k) for k in range(n)])
    den = np.zeros(n)
    power = np.array([1.0])
    for cj in _PHI_COEFFS[p]:
        den[: len(power)] += cj * power[:n]
        power = np.polynomial.polynomial.polymul(power, cosx)[:n]
    # divide power series num / den
    out = np.zeros(n)
    for k in range(n):
        out[k] = (num[k] - np.dot(out[:k], den[k:0:-1])) / den[0]
    return out


def _dual_taylor(p: int, z):
    return np.polynomial.polynomial.polyval(z * z, _taylor_coeffs(p))


@dataclass(frozen=True)
class PoleSeries:
    """Rows of simple poles at (2l+1)pi +- i*heights[j]."""
    order: int
    cos_roots: tuple[float, ...]
    heights: tuple[float, ...]

    @property
    def v_max(self) -> float:
        return max(self.heights)

    def locations(self, j: int, sign: int, ells) -> np.ndarray:
        ells = np.asarray(ells)
        return (2 * ells + 1) * math.pi + 1j * sign * self.heights[j]


@lru_cache(maxsize=None)
def poles(p: int) -> PoleSeries:
    """Zeros of Phi(cos xi): roots z_j < -1 of the polynomial, v_j = arccosh(-z_j)."""
    _check_order(p)
    if p == 1:
        return PoleSeries(1, (-2.0,), (V_LINEAR,))
    roots = np.polynomial.polynomial.polyroots(_PHI_COEFFS[p])
    zs = sorted(float(r.real) for r in roots if abs(r.imag) < 1e-12)
    heights = []
    for zj in zs:
        aj = -2.0 * zj
        w_plus = (-aj + math.sqrt(aj * aj - 4.0)) / 2.0   # root of w + 1/w + a_j = 0 closest to 0
        heights.append(-math.log(-w_plus))
    order = np.argsort(heights)
    return PoleSeries(p, tuple(zs[i] for i in order), tuple(heights[i] for i in order))


def dual_ft_residue(p: int, pole: complex) -> complex:
    """Residue of dual_ft at a simple pole: phi_hat / (d/dxi Phi(cos xi))."""
    dcoef = np.polynomial.polynomial.polyder(_PHI_COEFFS[p])
    dPhi = -np.sin(pole) * np.polynomial.polynomial.polyval(np.cos(pole), dcoef)
    return complex(phi_hat(p, pole) / dPhi)


def _check_pole_in_cone(model: LevyModel, xi) -> None:
    prof = model.profile
    arg = np.abs(np.angle(np.asarray(xi)))
    arg = np.minimum(arg, math.pi - arg)
    if np.any(arg >= prof.gamma_nu):
        raise DomainError("pole lies outside the cone where exp(-psi0) decays")


def residue_at_pole(model: LevyModel, x_prime: float, a: float, Delta_bar: float,
                    ell: int, sign: int) -> complex:
    """
    i times the residue of exp(i x' a xi - Delta_bar psi0(a xi)) dual_ft(xi) at the
    linear-spline pole (2 ell + 1) pi + sign i v.

    Closed form: sign * A * exp(i x' a 2 ell pi - Delta_bar psi0(a xi)) / xi^2 with
    A = 36 exp(x' a (-sign v + i pi)) / (2 + sqrt3 - 1/(2 + sqrt3)).
    Moving the contour of (1/2pi) int ... dxi upward across the pole adds this
    value; moving it downward across a lower pole subtracts it.
    """
    xi = (2 * ell + 1) * math.pi + 1j * sign * V_LINEAR
    _check_pole_in_cone(model, xi)
    A = residue_prefactor(x_prime, a, sign)
    return sign * A * np.exp(1j * x_prime * a * 2 * ell * math.pi
                             - Delta_bar * model.psi0(a * xi)) / xi ** 2


def residue_prefactor(x_prime, a: float, sign: int):
    s3 = math.sqrt(3.0)
    return 36.0 * np.exp(x_prime * a * (-sign * V_LINEAR + 1j * math.pi)) / ((2 + s3) - 1 / (2 + s3))


def _terms_J(model: LevyModel, x_prime: float, a: float, Delta_bar: float, sign: int,
             ells: np.ndarray) -> np.ndarray:
    xi = (2 * ells + 1) * math.pi + 1j * sign * V_LINEAR
    return np.exp(1j * x_prime * a * 2 * ells * math.pi - Delta_bar * model.psi0(a * xi)) / xi ** 2


MAX_RESIDUE_TERMS = 200_000


class ResidueSeriesError(RuntimeError):
    """Raised when the residue series needs more terms than the hard cap."""


def residue_count(model: LevyModel, Delta_bar: float, a: float, eps1: float) -> int:
    """
    Number of terms per side so that the neglected tail of the J series is below eps1.

    Solves L + a1 ln L = C1 with a1 = 1/(nu Delta_bar c_inf0),
    C1 = ln(1/eps1)/(Delta_bar c_inf0), then N = ceil(L^(1/nu) / (2 a)).
    """
    from .sinh_quadrature import newton_root

    prof = model.profile
    dc = Delta_bar * prof.c_inf0
    a1 = 1.0 / (prof.nu * dc)
    C1 = max(math.log(1.0 / eps1), 1.0) / dc
    lam, _ = newton_root(lambda t: t + a1 * math.log(t) - C1,
                         lambda t: 1.0 + a1 / t, max(C1, 1.0))
    lam = max(lam, 1.0)
    return int(math.ceil(lam ** (1.0 / prof.nu) / (2.0 * a))) + 1


def residue_series_J(model: LevyModel, x_prime: float, Delta_bar: float, a: float,
                     sign: int, eps1: float) -> tuple[complex, int]:
    """
    Sum over l of exp(i x' a 2 l pi - Delta_bar psi0(a xi_l)) / xi_l^2 for the
    linear-spline pole row of the given sign.

    The sum depends on x' only through the fractional part of x' a, so on a
    grid with step 1/a it is shared by every node.  Terms are added in blocks
    until a whole block is below eps1 (the a-priori count is the starting size).
    """
    n = residue_count(model, Delta_bar, a, eps1)
    ells = np.arange(-n, n)
    _check_pole_in_cone(model, (2 * ells[[0, -1]] + 1) * math.pi + 1j * sign * V_LINEAR)
    total = complex(np.sum(_terms_J(model, x_prime, a, Delta_bar, sign, ells)))
    while True:
        extra = np.concatenate([np.arange(-2 * n, -n), np.arange(n, 2 * n)])
        block = complex(np.sum(_terms_J(model, x_prime, a, Delta_bar, sign, extra)))
        total += block
        if abs(block) < eps1:
            return total, 2 * n
        n *= 2
        if n > MAX_RESIDUE_TERMS:
            raise ResidueSeriesError("residue series did not converge; relax the tolerance")


def residue_sum(model: LevyModel, x_prime, a: float, Delta_bar: float, sign: int,
                J: complex):
    """Residue sum SR = sign * A(x') * J over the whole row of the given sign."""
    return sign * residue_prefactor(np.asarray(x_prime), a, sign) * J


def pole_residues_general(model: LevyModel, p: int, x_prime: float, a: float,
                          Delta_bar: float, sign: int, j: int, ells) -> np.ndarray:
    """
    i * Res for arbitrary order p (row j, pole sign given), with the dual_ft
    residue taken from the derivative of the denominator.  Same convention as
    residue_at_pole.
    """
    ps = poles(p)
    xi = ps.locations(j, sign, ells)
    res = np.array([dual_ft_residue(p, z) for z in np.atleast_1d(xi)])
    g = np.exp(1j * x_prime * a * xi - Delta_bar * model.psi0(a * xi))
    return 1j * g * res
