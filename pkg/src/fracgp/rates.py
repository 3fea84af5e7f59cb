"""Posterior contraction rates and the variance-inflation schedule.

Rates, with ``L(t) = max(log t, 1)`` and a free constant ``c_eps``:

* SE:      eps_t = c_eps * t^{-1/2} * L(t)^{(d+1)/2}
* Matern:  eps_t = c_eps * t^{-nu/(2 nu + d)} * L(t)^{p},  p = q/(2+d) by default
* RQ:      eps_t = c_eps * t^{-nu/(2 nu + d)}

Only the exponents are pinned down; constants default to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kernels import KernelSpec

DELTA = 1e-6


def log_factor(t):
    return np.maximum(np.log(np.asarray(t, dtype=float)), 1.0)


@dataclass(frozen=True)
class AlphaChoice:
    """Temper chosen for a horizon: ``inflation = T eps_T^2`` and ``alpha``."""

    horizon: int
    inflation: float
    alpha_raw: float
    alpha: float
    clipped: bool


@dataclass(frozen=True)
class RateModel:
    family: str
    d: int
    nu: float | None = None
    c_eps: float = 1.0
    q: float = 0.0
    log_exponent: float | None = None

    def __post_init__(self):
        if self.family not in ("SE", "Matern", "RQ"):
            raise ConfigError(f"unknown rate family {self.family!r}")
        if self.d < 1:
            raise ConfigError("rate model needs d >= 1")
        if self.family != "SE" and not (self.nu and self.nu > 0):
            raise ConfigError(f"{self.family} rate needs nu > 0")
        if not self.c_eps > 0:
            raise ConfigError("c_eps must be > 0")

    @classmethod
    def for_kernel(cls, spec: KernelSpec, d, c_eps=1.0, q=0.0, log_exponent=None):
        return cls(spec.family, d, spec.nu, c_eps, q, log_exponent)

    @property
    def poly_exponent(self):
        """Exponent ``e`` in ``eps_t ~ t^{-e}``."""
        if self.family == "SE":
            return 0.5
        return self.nu / (2.0 * self.nu + self.d)

    @property
    def log_power(self):
        """Power of ``L(t)`` in ``eps_t``."""
        if self.log_exponent is not None:
            return float(self.log_exponent)
        if self.family == "SE":
            return (self.d + 1) / 2.0
        if self.family == "Matern":
            return self.q / (2.0 + self.d)
        return 0.0

    def epsilon(self, t):
        t = np.asarray(t, dtype=float)
        eps = self.c_eps * t ** (-self.poly_exponent) * log_factor(t) ** self.log_power
        return eps if eps.ndim else float(eps)

    def t_eps_sq(self, t):
        """``t * eps_t^2``."""
        t = np.asarray(t, dtype=float)
        out = t * np.asarray(self.epsilon(t)) ** 2
        return out if out.ndim else float(out)

    def regret_exponent(self):
        """Polynomial exponent of the cumulative-regret bound for this family."""
        if self.family == "SE":
            return 0.5
        nu, d = self.nu, self.d
        return (2 * nu + 3 * d) / (2 * (2 * nu + d))

    def gamma_exponent(self):
        """Polynomial growth exponent of the information gain (0 for SE)."""
        if self.family == "SE":
            return 0.0
        return self.d / (2 * self.nu + self.d)

    def to_dict(self):
        return {
            "family": self.family, "d": self.d, "nu": self.nu, "c_eps": self.c_eps,
            "q": self.q, "log_exponent": self.log_exponent,
        }


def alpha_from_horizon(rate, T, delta=DELTA):
    """Temper ``alpha = 1 / (max(T eps_T^2, 1) (1 + delta))``.

    The ``(1 + delta)`` factor keeps ``alpha`` strictly inside ``(0, 1)`` and
    makes ``alpha t eps_t^2 < 1`` hold strictly at ``t = T``.
    """
    if T < 2:
        raise ConfigError(f"horizon must be >= 2, got {T}")
    inflation = rate.t_eps_sq(T)
    clipped = inflation <= 1.0
    alpha = 1.0 / (max(inflation, 1.0) * (1.0 + delta))
    return AlphaChoice(int(T), inflation, 1.0 / inflation, alpha, clipped)


def threshold(rate, alpha, t, D=1.0):
    """Saturation threshold ``C_t = sqrt(D alpha t eps_t^2 / (1 - alpha))``."""
    if not 0 < alpha < 1:
        raise ConfigError(f"C_t needs alpha in (0, 1), got {alpha}")
    return np.sqrt(D * alpha * np.asarray(rate.t_eps_sq(t)) / (1.0 - alpha))


def precondition_values(rate, alpha, t):
    """``alpha t eps_t^2`` per round; the regret bound needs this below 1."""
    return alpha * np.asarray(rate.t_eps_sq(t))


def summed_contraction(rate, T):
    """``sum_{t<=T} t eps_t^2``."""
    return float(np.sum(rate.t_eps_sq(np.arange(1, T + 1))))
