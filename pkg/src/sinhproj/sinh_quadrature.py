"""
Sinh-acceleration: the conformal map xi = i*omega1 + b*sinh(i*omega + y),
parameter selection from an analyticity window, and the simplified
trapezoid rule in the new variable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class SinhContour:
    omega1: float
    b: float
    omega: float
    d: float
    kb: float = 0.85
    kd: float = 0.85

    @property
    def crossing_level(self) -> float:
        """Height at which the contour crosses the imaginary axis."""
        return self.omega1 + self.b * math.sin(self.omega)

    def __call__(self, y):
        return sinh_map(self, y)


def sinh_map(contour: SinhContour, y):
    return 1j * contour.omega1 + contour.b * np.sinh(1j * contour.omega + np.asarray(y, dtype=complex))


def sinh_map_deriv(contour: SinhContour, y):
    return contour.b * np.cosh(1j * contour.omega + np.asarray(y, dtype=complex))


def sinh_map_inverse(contour: SinhContour, xi):
    return np.arcsinh((np.asarray(xi, dtype=complex) - 1j * contour.omega1) / contour.b) - 1j * contour.omega


class DegenerateContourError(ValueError):
    pass


def select_contour(mu_minus: float, mu_plus: float, gamma_minus: float, gamma_plus: float,
                   kb: float = 0.85, kd: float = 0.85) -> SinhContour:
    """
    Contour whose strip image lies between the hyperbolas through i*mu_minus
    and i*mu_plus with asymptotic angles gamma_minus and gamma_plus.
    """
    if not mu_minus < mu_plus:
        raise DegenerateContourError(f"empty window ({mu_minus}, {mu_plus})")
    span = math.sin(gamma_plus) - math.sin(gamma_minus)
    if not gamma_minus < gamma_plus or span <= 0.0:
        raise DegenerateContourError("degenerate cone: sin(gamma+) must exceed sin(gamma-)")
    b0 = (mu_plus - mu_minus) / span
    omega1 = mu_plus - b0 * math.sin(gamma_plus)
    omega = 0.5 * (gamma_minus + gamma_plus)
    d0 = 0.5 * (gamma_plus - gamma_minus)
    return SinhContour(omega1=omega1, b=kb * b0, omega=omega, d=kd * d0, kb=kb, kd=kd)


def hardy_estimate(f_boundary: tuple[float, float], residues_nearby=(), gamma_span: float = 1.0,
                   kd: float = 0.85) -> float:
    """H = 10 (|f(-id)| + |f(id)| + sum |Res| / (gamma_span (1 - kd) pi / 2))."""
    if not kd < 1.0:
        raise ValueError("kd must be below 1")
    res = sum(abs(r) for r in residues_nearby)
    return 10.0 * (abs(f_boundary[0]) + abs(f_boundary[1])
                   + res / (gamma_span * (1.0 - kd) * math.pi / 2))


class ToleranceError(ValueError):
    pass


def step_from_tolerance(H: float, d: float, eps: float) -> float:
    """zeta = 2 pi d / ln(H/eps)."""
    if not eps < H:
        raise ToleranceError("tolerance not below the Hardy-norm estimate")
    return 2.0 * math.pi * d / math.log(H / eps)


@dataclass
class NewtonInfo:
    iterations: int
    residual: float
    converged: bool
    fallback: bool = False


def newton_root(g: Callable[[float], float], dg: Callable[[float], float], x0: float,
                max_iter: int = 64, tol: float = 1e-13) -> tuple[float, NewtonInfo]:
    """
    Newton iteration for an increasing function on (0, inf), kept positive by
    halving towards 0 when a step would leave the half-line.
    """
    x = x0
    for it in range(1, max_iter + 1):
        gx = g(x)
        if abs(gx) <= tol * max(1.0, abs(x)):
            return x, NewtonInfo(it - 1, abs(gx), True)
        step = gx / dg(x)
        x_new = x - step
        if x_new <= 0.0:
            x_new = 0.5 * x
        if abs(x_new - x) <= 1e-16 * abs(x):
            x = x_new
            return x, NewtonInfo(it, abs(g(x)), abs(g(x)) <= 1e-12 * max(1.0, abs(x)))
        x = x_new
    return x, NewtonInfo(max_iter, abs(g(x)), abs(g(x)) <= tol * max(1.0, abs(x)))


def truncation_lambda(nu: float, a1: float, a2: float, C1: float) -> tuple[float, NewtonInfo]:
    """
    Root of g(L) = a1 L + a2 L^nu + ln L - C1.

    For nu > 1 the iteration runs in L3 = L^nu, where the function is closer to
    linear.  If Newton fails, the simplified prescription
    (C1/(a1+a2))^max(1, 1/nu) is returned with the fallback flag set.
    """
    if a1 < 0.0 or a2 <= 0.0 or C1 <= 0.0:
        raise ValueError("truncation_lambda needs a1 >= 0, a2 > 0, C1 > 0")

    def g(t):
        return a1 * t + a2 * t ** nu + math.log(t) - C1

    if nu > 1.0:
        def g3(s):
            return a1 * s ** (1.0 / nu) + a2 * s + math.log(s) / nu - C1

        def dg3(s):
            return a1 / nu * s ** (1.0 / nu - 1.0) + a2 + 1.0 / (nu * s)

        s0 = C1 / a2
        # compare in L so that a tiny a1 cannot overflow the power
        if a1 > 0 and C1 / a1 < s0 ** (1.0 / nu):
            s0 = (C1 / a1) ** nu
        s, info = newton_root(g3, dg3, max(s0, 1e-3))
        root = s ** (1.0 / nu)
    else:
        guesses = [(C1 / (3.0 * a2)) ** (1.0 / nu), math.exp(C1 / 3.0)]
        if a1 > 0:
            guesses.append(C1 / (3.0 * a1))
        root, info = newton_root(g, lambda t: a1 + a2 * nu * t ** (nu - 1.0) + 1.0 / t,
                                 min(guesses))
    info.residual = abs(g(root))
    if not info.converged or not math.isfinite(root):
        root = (C1 / (a1 + a2)) ** max(1.0, 1.0 / nu)
        info = NewtonInfo(info.iterations, abs(g(root)), False, fallback=True)
    return root, info


def sinh_cutoff(Lambda2: float, a: float, b: float) -> float:
    """Cutoff in y for which |xi(y)| reaches Lambda2 / a: Lambda = ln(2 Lambda2 / (a b))."""
    return math.log(2.0 * Lambda2 / (a * b))


@dataclass(frozen=True)
class TrapezoidGrid:
    zeta: float
    Lambda: float
    N: int = field(init=False)

    def __post_init__(self) -> None:
        if self.zeta <= 0.0:
            raise ValueError("step must be positive")
        object.__setattr__(self, "N", max(1, int(math.ceil(max(self.Lambda, self.zeta) / self.zeta))))

    @property
    def nodes(self) -> np.ndarray:
        return self.zeta * np.arange(self.N + 1)


def trapezoid_sum(f: Callable[[np.ndarray], np.ndarray], grid: TrapezoidGrid,
                  weights: Optional[np.ndarray] = None) -> np.ndarray:
    """
    2 zeta Re(f(0)/2 + sum_{j=1..N} f(j zeta)) for integrands with f(-y) = conj f(y).

    f is called once on the node vector and may return extra trailing
    dimensions (one column per integral); summation runs along axis 0.
    """
    y = grid.nodes
    vals = np.asarray(f(y))
    w = np.ones(len(y))
    w[0] = 0.5
    if weights is not None:
        w = w * weights
    s = np.tensordot(w, vals, axes=(0, 0))
    return 2.0 * grid.zeta * np.real(s)
