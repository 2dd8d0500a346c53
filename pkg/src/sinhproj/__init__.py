"""Sinh-accelerated projection coefficients and discrete barrier option pricing under Levy models."""
from .barrier_engine import (BarrierSpec, Numerics, price_barrier, price_barrier_full,
                             price_european_proj, price_european_sinh)
from .levy_models import (NTS, Brownian, KoBoL, char_exponent, martingale_drift, model_from_config,
                          reference_model_I, reference_model_II, with_martingale_drift)
from .param_select import auto_params
from .proj_coefficients import CoeffRequest, beta_fft, beta_fft_antialiased, beta_sinh, compute_beta

__all__ = [
    "BarrierSpec", "Numerics", "price_barrier", "price_barrier_full", "price_european_proj",
    "price_european_sinh", "NTS", "Brownian", "KoBoL", "char_exponent", "martingale_drift",
    "model_from_config", "reference_model_I", "reference_model_II", "with_martingale_drift",
    "auto_params", "CoeffRequest", "beta_fft", "beta_fft_antialiased", "beta_sinh", "compute_beta",
]

__version__ = "0.1.0"
