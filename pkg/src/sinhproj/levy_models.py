"""
Exponential Levy models described by analytic characteristic exponents.

The convention is E[exp(i xi X_t)] = exp(-t psi(xi)) with
psi(xi) = -i mu xi + psi0(xi).  Each model exposes its strip of analyticity
(an interval on the imaginary axis), the half-angle of the cone in which
exp(-psi0) decays, and the large-|xi| asymptotic data used to size
truncation parameters.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol, Union

import numpy as np
from scipy.special import gamma

ArrayLike = Union[complex, np.ndarray]


class DomainError(ValueError):
    """Raised when an argument leaves the analyticity domain of an exponent."""


class UnsupportedModelError(ValueError):
    """Raised for parameter combinations the library does not handle."""


@dataclass(frozen=True)
class AnalyticityProfile:
    """
    Analytic data of psi0 used by the contour machinery.

    psi0 is analytic in i(mu_minus, mu_plus) + cone of half-angle pi/2, and
    Re psi0 grows like c_inf0 * cos(nu * theta) * |xi|^nu along rays with
    |theta| < gamma_nu.
    """
    mu_minus: float
    mu_plus: float
    gamma_nu: float
    nu: float
    c_inf0: float
    C0: float

    def c_inf_at(self, theta: float) -> complex:
        return self.c_inf0 * complex(math.cos(self.nu * theta), math.sin(self.nu * theta))


class LevyModel(Protocol):
    mu: float

    def psi0(self, xi: ArrayLike) -> ArrayLike: ...

    @property
    def profile(self) -> AnalyticityProfile: ...

    def with_drift(self, mu: float) -> "LevyModel": ...

    def reflected(self) -> "LevyModel": ...


def _cone_angle(nu: float) -> float:
    return min(1.0, 1.0 / nu) * math.pi / 2


def _check_cuts(xi: np.ndarray, lower: float, upper: float) -> None:
    # both exponents below are analytic off the two cuts i[upper, inf), i(-inf, lower]
    on_axis = np.abs(xi.real) <= 1e-300
    bad = on_axis & ((xi.imag >= upper) | (xi.imag <= lower))
    if np.any(bad):
        raise DomainError(
            f"argument on a branch cut of psi0: strip is Im xi in ({lower}, {upper})")


@dataclass(frozen=True)
class KoBoL:
    """KoBoL (CGMY) process of order nu in (0, 2), nu != 1, without a Brownian part."""
    nu: float
    c: float
    lambda_plus: float
    lambda_minus: float
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.nu < 2.0:
            raise UnsupportedModelError("KoBoL order must lie in (0, 2)")
        if self.nu == 1.0:
            raise UnsupportedModelError("KoBoL of order 1 has a different closed form; not supported")
        if not self.lambda_minus < 0.0 < self.lambda_plus:
            raise UnsupportedModelError("KoBoL requires lambda_minus < 0 < lambda_plus")
        if self.c < 0.0:
            raise UnsupportedModelError("KoBoL intensity must be nonnegative")

    @classmethod
    def from_m2(cls, nu: float, lambda_plus: float, lambda_minus: float, m2: float,
                mu: float = 0.0) -> "KoBoL":
        return cls(nu, kobol_c_from_m2(nu, lambda_plus, lambda_minus, m2),
                   lambda_plus, lambda_minus, mu)

    def psi0(self, xi: ArrayLike) -> ArrayLike:
        z = np.asarray(xi, dtype=complex)
        _check_cuts(z, self.lambda_minus, self.lambda_plus)
        lp, lm, nu = self.lambda_plus, -self.lambda_minus, self.nu
        bracket = lp ** nu - (lp + 1j * z) ** nu + lm ** nu - (lm - 1j * z) ** nu
        out = self.c * gamma(-nu) * bracket
        return out if np.ndim(xi) else complex(out)

    @property
    def profile(self) -> AnalyticityProfile:
        nu, cg = self.nu, self.c * gamma(-self.nu)
        return AnalyticityProfile(
            mu_minus=self.lambda_minus,
            mu_plus=self.lambda_plus,
            gamma_nu=_cone_angle(nu),
            nu=nu,
            c_inf0=-2.0 * cg * math.cos(math.pi * nu / 2),
            C0=cg * (self.lambda_plus ** nu + (-self.lambda_minus) ** nu),
        )

    def with_drift(self, mu: float) -> "KoBoL":
        return replace(self, mu=mu)

    def reflected(self) -> "KoBoL":
        """Model of -X."""
        return KoBoL(self.nu, self.c, -self.lambda_minus, -self.lambda_plus, -self.mu)


@dataclass(frozen=True)
class NTS:
    """Normal tempered stable process; nu = 1 is NIG."""
    nu: float
    delta: float
    alpha: float
    beta: float
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.nu < 2.0:
            raise UnsupportedModelError("NTS order must lie in (0, 2)")
        if self.delta <= 0.0 or abs(self.beta) >= self.alpha:
            raise UnsupportedModelError("NTS requires delta > 0 and |beta| < alpha")

    def psi0(self, xi: ArrayLike) -> ArrayLike:
        z = np.asarray(xi, dtype=complex)
        lo, hi = -(self.alpha + self.beta), self.alpha - self.beta
        _check_cuts(z, lo, hi)
        # alpha^2 + (xi + i beta)^2 factored so that each principal power has its
        # cut along the imaginary axis, away from the strip
        h = self.nu / 2
        val = (hi + 1j * z) ** h * (-lo - 1j * z) ** h
        out = self.delta * (val - (self.alpha ** 2 - self.beta ** 2) ** h)
        return out if np.ndim(xi) else complex(out)

    @property
    def profile(self) -> AnalyticityProfile:
        return AnalyticityProfile(
            mu_minus=-(self.alpha + self.beta),
            mu_plus=self.alpha - self.beta,
            gamma_nu=_cone_angle(self.nu),
            nu=self.nu,
            c_inf0=self.delta,
            C0=self.delta * (self.alpha ** 2 - self.beta ** 2) ** (self.nu / 2),
        )

    def with_drift(self, mu: float) -> "NTS":
        return replace(self, mu=mu)

    def reflected(self) -> "NTS":
        return NTS(self.nu, self.delta, self.alpha, -self.beta, -self.mu)


@dataclass(frozen=True)
class Brownian:
    """Brownian motion with drift; psi0 is entire."""
    sigma: float
    mu: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise UnsupportedModelError("Brownian volatility must be positive")

    def psi0(self, xi: ArrayLike) -> ArrayLike:
        z = np.asarray(xi, dtype=complex)
        out = 0.5 * self.sigma ** 2 * z * z
        return out if np.ndim(xi) else complex(out)

    @property
    def profile(self) -> AnalyticityProfile:
        return AnalyticityProfile(-math.inf, math.inf, _cone_angle(2.0), 2.0,
                                  0.5 * self.sigma ** 2, 0.0)

    def with_drift(self, mu: float) -> "Brownian":
        return replace(self, mu=mu)

    def reflected(self) -> "Brownian":
        return Brownian(self.sigma, -self.mu)


def char_exponent_psi0(model: LevyModel, xi: ArrayLike) -> ArrayLike:
    return model.psi0(xi)


def char_exponent(model: LevyModel, xi: ArrayLike) -> ArrayLike:
    """Full exponent psi(xi) = -i mu xi + psi0(xi)."""
    return -1j * model.mu * np.asarray(xi) + model.psi0(xi)


def char_function(model: LevyModel, xi: ArrayLike, t: float) -> ArrayLike:
    return np.exp(-t * char_exponent(model, xi))


def kobol_c_from_m2(nu: float, lambda_plus: float, lambda_minus: float, m2: float) -> float:
    """Intensity c matching the second instantaneous moment m2 = psi''(0)."""
    if nu == 1.0:
        raise UnsupportedModelError("KoBoL of order 1 is not supported")
    if not 0.0 < nu < 2.0:
        raise UnsupportedModelError("KoBoL order must lie in (0, 2)")
    return m2 / (gamma(2.0 - nu) * ((-lambda_minus) ** (nu - 2.0) + lambda_plus ** (nu - 2.0)))


def martingale_drift(model: LevyModel, r: float, q: float) -> float:
    """
    Drift making exp(X_t - (r - q) t) a martingale.

    E[exp(X_t)] = exp(-t psi(-i)) and psi(-i) = -mu + psi0(-i), hence
    mu = r - q + psi0(-i).
    """
    prof = model.profile
    if not prof.mu_minus < -1.0:
        raise DomainError("exp(X) is not integrable: the strip must contain -i")
    return float(r - q + complex(model.psi0(-1j)).real)


def with_martingale_drift(model: LevyModel, r: float, q: float) -> LevyModel:
    return model.with_drift(martingale_drift(model, r, q))


def cumulants(model: LevyModel, T: float, n_nodes: int = 64) -> tuple[float, float, float]:
    """
    Cumulants c1, c2, c4 of X_T.

    The cumulant generating function k(u) = mu u - psi0(-i u) is analytic in a
    disc around 0; its Taylor coefficients are recovered from samples on a
    circle (the trapezoid rule converges geometrically there).
    """
    if isinstance(model, Brownian):
        # exact; the circle rule would leave a roundoff c4 that sqrt(|c4|) amplifies
        return T * model.mu, T * model.sigma ** 2, 0.0
    prof = model.profile
    radius = 0.5 * min(prof.mu_plus, -prof.mu_minus, 2.0)
    theta = 2.0 * math.pi * np.arange(n_nodes) / n_nodes
    u = radius * np.exp(1j * theta)
    k = model.mu * u - model.psi0(-1j * u)

    def coeff(n: int) -> float:
        return float((np.mean(k * np.exp(-1j * n * theta)) / radius ** n).real * math.factorial(n))

    return T * coeff(1), T * coeff(2), T * coeff(4)


def _build_model(cfg: dict) -> LevyModel:
    kind = str(cfg.get("model", cfg.get("kind", "kobol"))).lower()
    if kind in ("kobol", "cgmy"):
        nu, lp, lm = float(cfg["nu"]), float(cfg["lambda_plus"]), float(cfg["lambda_minus"])
        if "c" in cfg:
            return KoBoL(nu, float(cfg["c"]), lp, lm)
        return KoBoL.from_m2(nu, lp, lm, float(cfg["m2"]))
    if kind in ("nts", "nig"):
        nu = 1.0 if kind == "nig" else float(cfg["nu"])
        return NTS(nu, float(cfg["delta"]), float(cfg["alpha"]), float(cfg.get("beta", 0.0)))
    if kind in ("brownian", "bm", "gbm"):
        return Brownian(float(cfg["sigma"]))
    raise UnsupportedModelError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class ModelConfig:
    model: LevyModel
    r: float
    q: float


def model_from_config(cfg: Union[dict, str, Path]) -> ModelConfig:
    """
    Build a model from a JSON mapping (or a path to a JSON file).

    The returned model carries the martingale drift for the given r, q.
    """
    if not isinstance(cfg, dict):
        cfg = json.loads(Path(cfg).read_text())
    r, q = float(cfg.get("r", 0.0)), float(cfg.get("q", 0.0))
    base = _build_model(cfg)
    return ModelConfig(with_martingale_drift(base, r, q), r, q)


# the two parameter sets used throughout the examples and the tests
def reference_model_I() -> KoBoL:
    """nu=1.2, lambda+=11, lambda-=-4, m2=0.1 (no drift attached)."""
    return KoBoL.from_m2(1.2, 11.0, -4.0, 0.1)


def reference_model_II() -> KoBoL:
    """nu=0.3, lambda+=8, lambda-=-9, m2=0.1 (no drift attached)."""
    return KoBoL.from_m2(0.3, 8.0, -9.0, 0.1)
