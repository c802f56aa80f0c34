"""Time-local master-equation propagators for the damped driven oscillator.

Two integrators are provided, both fixed-step classical RK4:

* ``propagate``: the full time-local equation assembled from the kernel
  coefficients (relaxation bracket, static correlation shift, finite-time
  correlation kernel), with per-step hermitization.  The pre-hermitization
  defect is recorded; the trace is never renormalized (drift is a
  diagnostic).
* ``lindblad_propagate``: the long-time limit with frequency shift
  delta_omega0 and golden-rule dissipators.

Modes ``nz-only`` and ``no-correlations`` are synonyms for the time-local
equation with the correlation terms switched off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import BathSpec
from .kernels import (KernelCoefficients, MarkovLimits, cancellation_residual,
                      kernel_coefficients, lsi_coefficients)
from .operators import DensityMatrix, DimensionError, FockOperator

DRIVE_KINDS = ("none", "constant", "sinusoidal")
PROPAGATE_MODES = ("full", "nz-only", "no-correlations")


class StabilityError(RuntimeError):
    """Raised when dt * (generator norm bound) exceeds the stability gate."""

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


@dataclass(frozen=True)
class DriveSpec:
    """External linear drive H_ext(t) = f(t) * (a + a+).

    f(t) is 0, a constant amplitude, or amplitude * cos(drive_frequency*t).
    """

    kind: str = "none"
    amplitude: float = 0.0
    drive_frequency: float = 0.0

    def __post_init__(self):
        if self.kind not in DRIVE_KINDS:
            raise ValueError(f"drive kind must be one of {DRIVE_KINDS}, got {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("drive amplitude must be >= 0")
        if self.kind == "sinusoidal" and self.drive_frequency <= 0:
            raise ValueError("sinusoidal drive needs drive_frequency > 0")

    def amplitude_at(self, t: float) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "constant":
            return self.amplitude
        return self.amplitude * np.cos(self.drive_frequency * t)

    @property
    def is_static(self) -> bool:
        return self.kind != "sinusoidal"


DRIVE_NONE = DriveSpec()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded time grid, states, and per-time diagnostics of one run."""

    times: np.ndarray
    states: tuple
    occupation: np.ndarray
    amplitude: np.ndarray
    trace_error: np.ndarray
    herm_defect: np.ndarray
    min_eigenvalue: np.ndarray
    cancellation_residual: np.ndarray
    tail_gate_exceeded: bool
    max_tail_population: float
    max_herm_defect: float
    max_trace_error: float

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        dims = {s.dims for s in self.states}
        if len(dims) > 1:
            raise ValueError("trajectory states changed dimensions")

    @property
    def final_state(self) -> DensityMatrix:
        return self.states[-1]


def _ladder(dim: int):
    """a, a+, a+a, and a a+ on the truncated space (literal products)."""
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    ad = a.conj().T
    return a, ad, ad @ a, a @ ad


def _collision_terms(c: KernelCoefficients):
    """Per-channel coefficients merged onto the six product structures

        cn*n@F + cf*F@n + cm*m@F + cg*F@m + ca*a@F@a+ + cd*a+@F@a

    with n = a+a and m = a a+ as literal truncated-space products; the
    structure coefficients then sum to zero channel-wise, so the map
    annihilates the trace exactly even at the truncation edge.
    """
    g, gp = c.gamma0, c.gamma0_prime
    gc, gpc = np.conj(g), np.conj(gp)
    kp, km = c.ki_plus, c.ki_minus
    lp, lm = c.lsi_plus, c.lsi_minus
    c_nf = -g + kp + 1j * lp
    c_fn = -gc
    c_mf = -gpc + km - 1j * lm
    c_fm = -gp
    c_sand_a = g + gc - kp - 1j * lp
    c_sand_ad = gp + gpc - km + 1j * lm
    return (c_nf, c_fn, c_mf, c_fm, c_sand_a, c_sand_ad)


def _apply_collision(rho, a, ad, nmat, mmat, terms):
    cn, cf, cm, cg, ca, cd = terms
    out = cn * (nmat @ rho) + cf * (rho @ nmat)
    out += cm * (mmat @ rho) + cg * (rho @ mmat)
    out += ca * ((a @ rho) @ ad)
    out += cd * (ad @ (rho @ a))
    return out


def _unitary(rho, h):
    return -1j * (h @ rho - rho @ h)


def _zeroed(coeffs: KernelCoefficients, mode: str) -> KernelCoefficients:
    if mode == "full":
        return coeffs
    if mode in ("nz-only", "no-correlations"):
        return KernelCoefficients(gamma0=coeffs.gamma0, gamma0_prime=coeffs.gamma0_prime,
                                  ki_plus=0j, ki_minus=0j, lsi_plus=0.0, lsi_minus=0.0,
                                  t=coeffs.t)
    raise ValueError(f"mode must be one of {PROPAGATE_MODES}, got {mode!r}")


class Superoperator:
    """Linear map on density matrices, assembled for one fixed time."""

    def __init__(self, dim, h, terms):
        self._dim = dim
        self._h = h
        self._terms = terms
        self._a, self._ad, self._n, self._m = _ladder(dim)

    def __call__(self, rho):
        if isinstance(rho, DensityMatrix):
            rho = rho.data
        elif isinstance(rho, FockOperator):
            rho = rho.data
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self._dim, self._dim):
            raise DimensionError(f"state shape {rho.shape} does not match dim {self._dim}")
        return _unitary(rho, self._h) + _apply_collision(rho, self._a, self._ad,
                                                         self._n, self._m, self._terms)

    def matrix(self) -> np.ndarray:
        """Dense (dim^2, dim^2) representation, column-by-column."""
        d = self._dim
        m = np.empty((d * d, d * d), dtype=complex)
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                m[:, i * d + j] = self(e).reshape(-1)
        return m


def build_generator(coeffs: KernelCoefficients, omega0: float, drive: DriveSpec,
                    t: float, dim: int) -> Superoperator:
    """Assemble the time-local generator at time t for a ``dim`` Fock space.

    ``coeffs`` must be evaluated at the same t.  The returned map
    annihilates the trace of any input (all structures are commutators).
    """
    if abs(coeffs.t - t) > 1e-12 * max(1.0, abs(t)):
        raise ValueError(f"coefficients evaluated at t={coeffs.t}, generator requested at t={t}")
    a, ad, nmat, _ = _ladder(dim)
    h = omega0 * nmat + drive.amplitude_at(t) * (a + ad)
    return Superoperator(dim, h, _collision_terms(coeffs))


def _lindblad_deriv_factory(dim, limits: MarkovLimits, omega0, drive):
    a, ad, nmat, mmat = _ladder(dim)
    x = a + ad
    h0 = (omega0 + limits.delta_omega0) * nmat
    rd, ru = limits.rate_down, limits.rate_up

    def deriv(t, rho):
        h = h0 if drive.kind == "none" else h0 + drive.amplitude_at(t) * x
        out = _unitary(rho, h)
        if rd:
            out += rd * ((a @ rho) @ ad - 0.5 * (nmat @ rho + rho @ nmat))
        if ru:
            out += ru * ((ad @ rho) @ a - 0.5 * (mmat @ rho + rho @ mmat))
        return out

    return deriv


def _full_deriv_factory(dim, bath, omega0, drive, mode):
    a, ad, nmat = _ladder(dim)
    x = a + ad
    h0 = omega0 * nmat

    def deriv(t, rho):
        coeffs = _zeroed(kernel_coefficients(bath, omega0, t), mode)
        h = h0 if drive.kind == "none" else h0 + drive.amplitude_at(t) * x
        return _unitary(rho, h) + _apply_collision(rho, a, ad, nmat, _collision_terms(coeffs))

    return deriv


def _unitary_spread(dim, omega0, drive, shift=0.0):
    a, ad, nmat = _ladder(dim)
    h = (omega0 + shift) * nmat + drive.amplitude * (a + ad)
    ev = np.linalg.eigvalsh(h)
    return float(ev[-1] - ev[0])


def _coefficient_magnitude(c: KernelCoefficients) -> float:
    return (2.0 * (abs(c.gamma0) + abs(c.gamma0_prime)) + abs(c.ki_plus)
            + abs(c.ki_minus) + abs(c.lsi_plus) + abs(c.lsi_minus))


def _check_stability(dim, dt, unitary_norm, collision_mag, limit):
    bound = unitary_norm + 2.0 * (dim - 1) * collision_mag
    if dt * bound >= limit:
        suggested = 0.5 * limit / bound
        raise StabilityError(
            f"dt * generator-norm bound = {dt * bound:.3g} >= {limit}; "
            f"suggested dt <= {suggested:.3g}", suggested)


def _steps_for(t_max, dt):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_max <= dt:
        raise ValueError("t_max must exceed dt")
    return int(round(t_max / dt))


def _run_rk4(deriv, rho0, dt, n_steps, record_every, residual_fn, tail_threshold,
             state_trace_tol=1e-6):
    dim = rho0.shape[0]
    a, _, nmat = _ladder(dim)
    record_every = max(1, int(record_every))

    times, states = [], []
    occ, amp, tr_err, defects, min_eig, resid = [], [], [], [], [], []
    max_defect = 0.0
    max_tail = float(rho0[-1, -1].real)
    max_tr_err = abs(np.trace(rho0).real - 1.0)

    def record(k, rho, step_defect):
        t = k * dt
        times.append(t)
        states.append(DensityMatrix(FockOperator((dim,), rho),
                                    trace_tol=state_trace_tol, herm_tol=1e-12))
        occ.append(float(np.einsum("ij,ji->", nmat, rho).real))
        amp.append(complex(np.einsum("ij,ji->", a, rho)))
        tr_err.append(abs(complex(np.trace(rho)) - 1.0))
        defects.append(step_defect)
        min_eig.append(float(np.linalg.eigvalsh(rho)[0]))
        resid.append(residual_fn(t) if residual_fn is not None else 0.0)

    rho = rho0.astype(complex).copy()
    record(0, rho, 0.0)
    half = 0.5 * dt
    for k in range(1, n_steps + 1):
        t0 = (k - 1) * dt
        k1 = deriv(t0, rho)
        k2 = deriv(t0 + half, rho + half * k1)
        k3 = deriv(t0 + half, rho + half * k2)
        k4 = deriv(t0 + dt, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        defect = float(np.abs(rho - rho.conj().T).max())
        rho = 0.5 * (rho + rho.conj().T)
        max_defect = max(max_defect, defect)
        max_tail = max(max_tail, float(rho[-1, -1].real))
        max_tr_err = max(max_tr_err, abs(complex(np.trace(rho)) - 1.0))
        if k % record_every == 0 or k == n_steps:
            record(k, rho, defect)

    return Trajectory(
        times=np.array(times),
        states=tuple(states),
        occupation=np.array(occ),
        amplitude=np.array(amp),
        trace_error=np.array(tr_err),
        herm_defect=np.array(defects),
        min_eigenvalue=np.array(min_eig),
        cancellation_residual=np.array(resid),
        tail_gate_exceeded=bool(max_tail > tail_threshold),
        max_tail_population=max_tail,
        max_herm_defect=max_defect,
        max_trace_error=max_tr_err,
    )


def propagate(initial: DensityMatrix, bath: BathSpec, omega0: float,
              drive: DriveSpec = DRIVE_NONE, t_max: float = 10.0, dt: float = 0.01,
              *, mode: str = "full", record_every: int = 1,
              tail_threshold: float = 1e-6, stability_limit: float = 0.1,
              residual_probe_dim: int = 6) -> Trajectory:
    """Integrate the time-local master equation from ``initial``.

    Fixed-step RK4 on dF/dt = G(t) F with per-step hermitization; the
    pre-hermitization defect, trace drift, minimum eigenvalue, and the
    correlation cancellation residual are recorded per kept time.  The
    top-Fock-level population is tracked every step and flagged against
    ``tail_threshold``.  Raises ``StabilityError`` when dt times a bound
    on the generator norm reaches ``stability_limit``.
    """
    if mode not in PROPAGATE_MODES:
        raise ValueError(f"mode must be one of {PROPAGATE_MODES}, got {mode!r}")
    if len(initial.dims) != 1:
        raise DimensionError("propagate expects a single-factor (system) density matrix")
    dim = initial.dim
    n_steps = _steps_for(t_max, dt)

    samples = [kernel_coefficients(bath, omega0, ts)
               for ts in (0.0, 0.5 * n_steps * dt, n_steps * dt)]
    mag = max(_coefficient_magnitude(_zeroed(c, mode)) for c in samples)
    _check_stability(dim, dt, _unitary_spread(dim, omega0, drive), mag, stability_limit)

    deriv = _full_deriv_factory(dim, bath, omega0, drive, mode)
    residual_fn = (lambda t: cancellation_residual(bath, omega0, t, residual_probe_dim)) \
        if mode == "full" else None
    return _run_rk4(deriv, initial.data, dt, n_steps, record_every, residual_fn,
                    tail_threshold)


def lindblad_propagate(initial: DensityMatrix, limits: MarkovLimits, omega0: float,
                       drive: DriveSpec = DRIVE_NONE, t_max: float = 10.0,
                       dt: float = 0.01, *, record_every: int = 1,
                       tail_threshold: float = 1e-6,
                       stability_limit: float = 0.1) -> Trajectory:
    """Integrate the long-time (Lindblad) limit of the master equation."""
    if len(initial.dims) != 1:
        raise DimensionError("lindblad_propagate expects a single-factor density matrix")
    dim = initial.dim
    n_steps = _steps_for(t_max, dt)
    mag = limits.rate_down + limits.rate_up
    _check_stability(dim, dt, _unitary_spread(dim, omega0, drive, limits.delta_omega0),
                     mag, stability_limit)
    deriv = _lindblad_deriv_factory(dim, limits, omega0, drive)
    return _run_rk4(deriv, initial.data, dt, n_steps, record_every, None, tail_threshold)
