"""Closed-form scalar coefficients of the oscillator master equation.

For an oscillator of frequency omega0 coupled linearly to thermal boson
modes (omega_k, V_k) at inverse temperature beta, every coefficient of
the time-local evolution generator is an explicit sum over modes.  With
detuning D_k = omega0 - omega_k and occupation N_k:

* static correlation shift (time independent, present from t = 0):
      lsi_plus  = sum_k V_k^2 (1+N_k) (exp(+beta*D_k) - 1) / D_k
      lsi_minus = sum_k V_k^2  N_k    (exp(-beta*D_k) - 1) / D_k

* time-local relaxation rates (phase integral phi(D, t) = int_0^t e^{i D s} ds):
      gamma0(t)       = sum_k V_k^2 (1+N_k) phi(D_k, t)
      gamma0_prime(t) = sum_k V_k^2  N_k    phi(D_k, t)

* finite-time correlation kernel:
      ki_plus(t)  = -sum_k V_k^2 (1+N_k) (exp(+beta*D_k) - 1) phi(+D_k, t)
      ki_minus(t) = -sum_k V_k^2  N_k    (exp(-beta*D_k) - 1) phi(-D_k, t)

For smooth mode densities the long-time limits of ki_plus/ki_minus are
-i*lsi_plus and +i*lsi_minus, so the correlation terms of the generator
cancel asymptotically; ``cancellation_residual`` measures how far from
cancelled they are at finite t.  The t -> infinity relaxation rates
reduce to the usual golden-rule pair J(omega0)(1+N0), J(omega0)N0 plus a
principal-value frequency shift (``markov_limits``).

The detuning singularities at D_k = 0 are all removable; sums switch to
series branches below RESONANCE_REL * omega0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .bath import BathSpec, OhmicParams, bose_occupation

# |omega0 - omega_k| below this fraction of omega0 uses the Taylor branch
RESONANCE_REL = 1e-8


@dataclass(frozen=True)
class KernelCoefficients:
    """All generator coefficients evaluated at one time.

    gamma0/gamma0_prime multiply the four-term relaxation bracket,
    ki_plus/ki_minus the finite-time correlation structures, and
    lsi_plus/lsi_minus the static correlation shift (no time integral,
    hence time independent).
    """

    gamma0: complex
    gamma0_prime: complex
    ki_plus: complex
    ki_minus: complex
    lsi_plus: float
    lsi_minus: float
    t: float


@dataclass(frozen=True)
class MarkovLimits:
    """Long-time limits: frequency shift, golden-rule rates, kernel asymptotes."""

    delta_omega0: float
    rate_down: float
    rate_up: float
    ki_asymptotic_plus: float
    ki_asymptotic_minus: float


def phase_integral(delta, t: float):
    """int_0^t exp(i*delta*s) ds, in the cancellation-free half-angle form

        t * sinc(delta*t/2) * exp(i*delta*t/2),

    exact for all detunings including delta = 0 (-> t).
    """
    delta = np.asarray(delta, dtype=float)
    result = t * np.sinc(delta * t / (2.0 * np.pi)) * np.exp(0.5j * delta * t)
    return complex(result) if result.ndim == 0 else result


def _mode_arrays(bath: BathSpec, omega0: float):
    w = bath.omegas
    v2 = bath.couplings ** 2
    delta = omega0 - w
    # 1 - exp(-beta*omega_k), always in (0, 1]
    denom = -np.expm1(-bath.beta * w)
    return w, v2, delta, denom


def _shift_weight_plus(beta: float, delta, denom, eps: float):
    """(1+N)(exp(beta*D)-1)/D with Taylor branch below eps."""
    out = np.empty_like(np.asarray(delta, dtype=float))
    small = np.abs(delta) < eps
    big = ~small
    out[big] = np.expm1(beta * delta[big]) / (denom[big] * delta[big])
    x = beta * delta[small]
    out[small] = (beta / denom[small]) * (1.0 + x / 2.0 + x * x / 6.0)
    return out


def _shift_weight_minus(beta: float, omega0: float, w, delta, denom, eps: float):
    """N(exp(-beta*D)-1)/D with Taylor branch below eps.

    The product is evaluated as (exp(-beta*omega0) - exp(-beta*omega_k))
    / (1 - exp(-beta*omega_k)) / D, which stays bounded for any beta.
    """
    out = np.empty_like(np.asarray(delta, dtype=float))
    small = np.abs(delta) < eps
    big = ~small
    numer = np.exp(-beta * omega0) - np.exp(-beta * w[big])
    out[big] = numer / (denom[big] * delta[big])
    n_small = np.exp(-beta * w[small]) / denom[small]
    x = beta * delta[small]
    out[small] = -n_small * beta * (1.0 - x / 2.0 + x * x / 6.0)
    return out


def lsi_coefficients(bath: BathSpec, omega0: float):
    """Static correlation-shift coefficients (lsi_plus, lsi_minus)."""
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    w, v2, delta, denom = _mode_arrays(bath, omega0)
    eps = RESONANCE_REL * omega0
    lp = float(np.sum(v2 * _shift_weight_plus(bath.beta, delta, denom, eps)))
    lm = float(np.sum(v2 * _shift_weight_minus(bath.beta, omega0, w, delta, denom, eps)))
    return lp, lm


def gamma0(bath: BathSpec, omega0: float, t: float):
    """Time-local relaxation rates (gamma0, gamma0_prime) at time t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    w, v2, delta, denom = _mode_arrays(bath, omega0)
    phi = phase_integral(delta, t)
    n = np.exp(-bath.beta * w) / denom
    g = complex(np.sum(v2 * (1.0 + n) * phi))
    gp = complex(np.sum(v2 * n * phi))
    return g, gp


def ki_coefficients(bath: BathSpec, omega0: float, t: float):
    """Finite-time correlation-kernel coefficients (ki_plus, ki_minus).

    The thermal factors vanish linearly at zero detuning, so the products
    are smooth; no resonance branch is needed.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    w, v2, delta, denom = _mode_arrays(bath, omega0)
    beta = bath.beta
    wp = np.expm1(beta * delta) / denom
    wm = (np.exp(-beta * omega0) - np.exp(-beta * w)) / denom
    kp = -complex(np.sum(v2 * wp * phase_integral(delta, t)))
    km = -complex(np.sum(v2 * wm * phase_integral(-delta, t)))
    return kp, km


def kernel_coefficients(bath: BathSpec, omega0: float, t: float) -> KernelCoefficients:
    """Evaluate every coefficient of the time-local generator at time t."""
    g, gp = gamma0(bath, omega0, t)
    kp, km = ki_coefficients(bath, omega0, t)
    lp, lm = lsi_coefficients(bath, omega0)
    return KernelCoefficients(gamma0=g, gamma0_prime=gp, ki_plus=kp, ki_minus=km,
                              lsi_plus=lp, lsi_minus=lm, t=float(t))


def ki_asymptotic_coefficients(bath: BathSpec, omega0: float):
    """Long-time limits of the correlation kernel, in the shift structural basis.

    The thermal factors cancel the phase-integral pole, so the limits are
    real and, mode by mode, the exact negatives of ``lsi_coefficients``:
    the correlation terms of the generator compensate asymptotically.
    """
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    w, v2, delta, denom = _mode_arrays(bath, omega0)
    eps = RESONANCE_REL * omega0
    kp = -float(np.sum(v2 * _shift_weight_plus(bath.beta, delta, denom, eps)))
    km = -float(np.sum(v2 * _shift_weight_minus(bath.beta, omega0, w, delta, denom, eps)))
    return kp, km


def _pv_shift_continuum(params: OhmicParams, omega0: float, pv_window: float) -> float:
    """P int_0^omega_max dw/(2pi) J(w)/(omega0-w) by symmetric window exclusion.

    Computed at window widths w and w/2 and Richardson-extrapolated
    (2*E(w/2) - E(w)); the leading exclusion error is linear in the window.
    """

    def excluded(wdt: float) -> float:
        def f(x):
            return params.density(x) / (omega0 - x)

        lo, _ = quad(f, 0.0, omega0 - wdt, limit=400, epsabs=1e-13, epsrel=1e-11)
        hi, _ = quad(f, omega0 + wdt, params.omega_max, limit=400, epsabs=1e-13, epsrel=1e-11)
        return (lo + hi) / (2.0 * np.pi)

    return 2.0 * excluded(pv_window / 2.0) - excluded(pv_window)


def _ki_asymptote_continuum(params: OhmicParams, omega0: float, beta: float):
    """Asymptotic correlation-kernel coefficients from the continuum density.

    No principal value is required: the thermal factors kill the pole at
    omega = omega0.
    """
    eps = RESONANCE_REL * omega0

    def plus_integrand(x):
        d = np.atleast_1d(omega0 - x)
        denom = -np.expm1(-beta * np.atleast_1d(x))
        val = params.density(x) * _shift_weight_plus(beta, d, denom, eps)
        return float(val[0])

    def minus_integrand(x):
        xa = np.atleast_1d(x)
        d = omega0 - xa
        denom = -np.expm1(-beta * xa)
        val = params.density(x) * _shift_weight_minus(beta, omega0, xa, d, denom, eps)
        return float(val[0])

    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-11, points=[omega0])
    ip, _ = quad(plus_integrand, 0.0, params.omega_max, **opts)
    im, _ = quad(minus_integrand, 0.0, params.omega_max, **opts)
    return -ip / (2.0 * np.pi), -im / (2.0 * np.pi)


def markov_limits(bath, omega0: float, pv_window: float = None, *,
                  beta: float = None, density_width: float = None) -> MarkovLimits:
    """Long-time limits of the generator coefficients.

    Accepts either a continuum ``OhmicParams`` (``beta`` required) or a
    discrete ``BathSpec`` (its own beta is used).  For the continuum the
    frequency shift is a principal-value quadrature with symmetric window
    exclusion plus Richardson extrapolation in the window width; for a
    discrete bath it is the direct mode sum skipping modes inside the
    window, and J(omega0) is the Lorentzian-broadened estimate with
    ``density_width`` (default: four mean mode spacings).
    """
    if isinstance(bath, OhmicParams):
        if beta is None:
            raise ValueError("beta is required with OhmicParams input")
        if not (0.0 < omega0 < bath.omega_max):
            raise ValueError(f"omega0 = {omega0} outside sampled support (0, {bath.omega_max})")
        j0 = bath.density(omega0)
        n0 = bose_occupation(omega0, beta)
        if pv_window is None:
            pv_window = min(omega0, bath.omega_max - omega0, bath.omega_c) / 8.0
        if pv_window <= 0 or pv_window >= min(omega0, bath.omega_max - omega0):
            raise ValueError(f"pv_window = {pv_window} incompatible with support")
        shift = _pv_shift_continuum(bath, omega0, pv_window)
        kp, km = _ki_asymptote_continuum(bath, omega0, beta)
        return MarkovLimits(delta_omega0=shift, rate_down=j0 * (1.0 + n0),
                            rate_up=j0 * n0, ki_asymptotic_plus=kp,
                            ki_asymptotic_minus=km)

    if not isinstance(bath, BathSpec):
        raise TypeError(f"expected BathSpec or OhmicParams, got {type(bath)!r}")
    if beta is not None and abs(beta - bath.beta) > 1e-12:
        raise ValueError("beta argument conflicts with BathSpec.beta")
    w = bath.omegas
    if not (w.min() <= omega0 <= w.max()):
        raise ValueError(f"omega0 = {omega0} outside sampled support [{w.min()}, {w.max()}]")
    v2 = bath.couplings ** 2
    delta = omega0 - w
    if density_width is None:
        spacing = np.mean(np.diff(w)) if len(w) > 1 else 0.1 * omega0
        density_width = 4.0 * spacing
    from .bath import spectral_density_estimate

    j0 = spectral_density_estimate(bath, omega0, density_width)
    n0 = bose_occupation(omega0, bath.beta)
    window = max(pv_window or 0.0, RESONANCE_REL * omega0)
    off = np.abs(delta) > window
    shift = float(np.sum(v2[off] / delta[off]))
    kp, km = ki_asymptotic_coefficients(bath, omega0)
    return MarkovLimits(delta_omega0=shift, rate_down=j0 * (1.0 + n0), rate_up=j0 * n0,
                        ki_asymptotic_plus=kp, ki_asymptotic_minus=km)


@lru_cache(maxsize=8)
def _probe_structures(dim: int):
    """Stacked structure outputs [a E, a+] and [a+ E, a] for all matrix units E."""
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    ad = a.conj().T
    s_plus = np.empty((dim * dim, dim, dim), dtype=complex)
    s_minus = np.empty((dim * dim, dim, dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1.0
            s_plus[i * dim + j] = a @ e @ ad - ad @ (a @ e)
            s_minus[i * dim + j] = ad @ e @ a - a @ (ad @ e)
    return s_plus, s_minus


def correlation_generator_coefficients(bath: BathSpec, omega0: float, t: float):
    """Coefficients (c_plus, c_minus) of the summed correlation generator

        G(F) = c_plus * [a F, a+] + c_minus * [a+ F, a],

    combining the static shift and the finite-time kernel.  Both tend to
    zero for smooth mode densities as t grows.
    """
    lp, lm = lsi_coefficients(bath, omega0)
    kp, km = ki_coefficients(bath, omega0, t)
    return -1j * lp - kp, 1j * lm - km


def cancellation_residual(bath: BathSpec, omega0: float, t: float,
                          probe_dim: int = 6) -> float:
    """Max-norm of the summed correlation generator on a fixed probe basis.

    The probe basis is the full set of matrix units on a ``probe_dim``
    Fock space; the residual at t = 0 is the norm of the static shift
    generator alone.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    c_plus, c_minus = correlation_generator_coefficients(bath, omega0, t)
    s_plus, s_minus = _probe_structures(probe_dim)
    return float(np.abs(c_plus * s_plus + c_minus * s_minus).max())
