"""Boson bath descriptions: discrete mode lists, thermal occupation, spectral densities.

Conventions (hbar = k_B = 1): a bath of modes (omega_k, V_k) at inverse
temperature beta carries the spectral density

    J(omega) = 2*pi * sum_k V_k**2 * delta(omega_k - omega),

and the continuum default is Ohmic with exponential cutoff,

    J(omega) = eta * omega * exp(-omega/omega_c).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class BathSpec:
    """Discrete bath: modes (omega_k, V_k) plus inverse temperature.

    The mode list is canonicalized to ascending omega_k order.
    """

    modes: tuple
    beta: float

    def __post_init__(self):
        if self.beta <= 0 or not np.isfinite(self.beta):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        modes = tuple((float(w), float(v)) for w, v in self.modes)
        if not modes:
            raise ValueError("bath needs at least one mode")
        for w, v in modes:
            if w <= 0 or not np.isfinite(w):
                raise ValueError(f"mode frequency must be positive and finite, got {w}")
            if v < 0 or not np.isfinite(v):
                raise ValueError(f"coupling must be nonnegative and finite, got {v}")
        modes = tuple(sorted(modes, key=lambda m: m[0]))
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def omegas(self) -> np.ndarray:
        return np.array([w for w, _ in self.modes])

    @property
    def couplings(self) -> np.ndarray:
        return np.array([v for _, v in self.modes])

    def with_couplings_scaled(self, factor: float) -> "BathSpec":
        return BathSpec(tuple((w, factor * v) for w, v in self.modes), self.beta)

    def occupations(self) -> np.ndarray:
        return bose_occupation(self.omegas, self.beta)


def bose_occupation(omega, beta: float):
    """Thermal occupation 1/(exp(beta*omega) - 1).

    Evaluated as exp(-x)/(1 - exp(-x)) so that large beta*omega underflows
    cleanly to 0 instead of overflowing.  omega may be a scalar or array.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("bose_occupation requires omega > 0")
    if beta <= 0:
        raise ValueError("bose_occupation requires beta > 0")
    x = beta * omega
    result = np.exp(-x) / (-np.expm1(-x))
    return float(result) if result.ndim == 0 else result


@dataclass(frozen=True)
class OhmicParams:
    """Ohmic spectral density with exponential cutoff, sampled up to omega_max.

    ``exponent`` generalizes the low-frequency power law,
    J = eta * omega**s * omega_c**(1-s) * exp(-omega/omega_c); s = 1 is
    the plain Ohmic default.
    """

    eta: float
    omega_c: float
    omega_max: float
    n_modes: int
    exponent: float = 1.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.omega_c <= 0:
            raise ValueError("omega_c must be positive")
        if self.n_modes < 1:
            raise ValueError("need at least one mode")
        if self.omega_max < self.omega_c:
            raise ValueError("omega_max must be >= omega_c")
        if self.exponent <= 0:
            raise ValueError("exponent must be positive")

    def density(self, omega):
        """J(omega); zero outside omega > 0."""
        omega = np.asarray(omega, dtype=float)
        with np.errstate(invalid="ignore"):
            j = np.where(
                omega > 0,
                self.eta * omega ** self.exponent * self.omega_c ** (1.0 - self.exponent)
                * np.exp(-omega / self.omega_c),
                0.0,
            )
        return float(j) if j.ndim == 0 else j


def discretize_ohmic(params: OhmicParams, beta: float) -> BathSpec:
    """Midpoint discretization of the Ohmic density into ``n_modes`` modes.

    Uniform grid on (0, omega_max], omega_k at bin midpoints (which keeps
    omega = 0 off the grid), V_k**2 = J(omega_k) * dw / (2*pi).
    """
    dw = params.omega_max / params.n_modes
    omegas = (np.arange(params.n_modes) + 0.5) * dw
    v2 = params.density(omegas) * dw / (2.0 * np.pi)
    couplings = np.sqrt(v2)
    return BathSpec(tuple(zip(omegas.tolist(), couplings.tolist())), beta)


def spectral_density_estimate(bath: BathSpec, omega: float, width: float) -> float:
    """Lorentzian-broadened estimate of J at ``omega`` from discrete modes.

    2*pi * sum_k V_k**2 * L_width(omega_k - omega) with
    L_w(x) = (w/pi) / (x**2 + w**2).
    """
    if width <= 0:
        raise ValueError("width must be positive")
    x = bath.omegas - omega
    lorentz = (width / np.pi) / (x * x + width * width)
    return float(2.0 * np.pi * np.sum(bath.couplings ** 2 * lorentz))
