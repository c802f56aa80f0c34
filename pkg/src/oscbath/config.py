"""Scenario configuration: YAML parsing, validation, and serialization.

A scenario file is a single YAML tree.  Unknown keys are hard errors:
silent typos in physics parameters are the main operator hazard.  The
full grammar is documented in the README.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .bath import BathSpec, OhmicParams, discretize_ohmic
from .operators import (DensityMatrix, FockOperator, annihilation_op, gibbs_state,
                        matrix_exp, number_op)
from .propagator import DriveSpec

MODES = ("full", "lindblad", "nz-only", "no-correlations")


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


def _require(mapping, key, path):
    if key not in mapping:
        raise ConfigError(f"missing required key '{path}{key}'")
    return mapping[key]


def _as_float(value, path):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{path}' must be a number, got {value!r}") from None


def _as_int(value, path):
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{path}' must be an integer, got {value!r}") from None
    if isinstance(value, float) and value != out:
        raise ConfigError(f"'{path}' must be an integer, got {value!r}")
    return out


def _check_keys(mapping, allowed, path):
    if not isinstance(mapping, dict):
        raise ConfigError(f"'{path.rstrip('.') or 'top level'}' must be a mapping")
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under '{path.rstrip('.') or 'top level'}'")


@dataclass(frozen=True)
class Tolerances:
    trace_tol: float = 1e-8
    herm_tol: float = 1e-8
    tail_threshold: float = 1e-6
    stability_limit: float = 0.1
    projector_tol: float = 1e-10
    traceless_tol: float = 1e-12
    cancellation_tol: float = 1e-14
    remainder_ratio_low: float = 3.5
    remainder_ratio_high: float = 4.5
    oracle_trace_distance: float = 2e-3


@dataclass(frozen=True)
class OracleConfig:
    mode_dims: tuple
    system_dim: int = 0      # 0: inherit scenario system_dim
    dim_cap: int = 4096
    t_max: float = 0.0       # 0: inherit scenario t_max
    dt: float = 0.0          # 0: inherit scenario dt


@dataclass(frozen=True)
class InitialStateSpec:
    kind: str = "gibbs"      # gibbs | fock | displaced
    n: int = 0
    alpha: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    omega0: float
    beta: float
    system_dim: int
    t_max: float
    dt: float
    mode: str = "full"
    explicit_modes: tuple = ()
    ohmic: OhmicParams = None
    drive: DriveSpec = field(default_factory=DriveSpec)
    initial_state: InitialStateSpec = field(default_factory=InitialStateSpec)
    record_every: int = 0    # 0: automatic stride
    seed: int = 0
    pv_window: float = 0.0   # 0: automatic window
    density_width: float = 0.0
    oracle: OracleConfig = None
    output_prefix: str = "run"
    tolerances: Tolerances = field(default_factory=Tolerances)

    def bath_spec(self) -> BathSpec:
        if self.explicit_modes:
            return BathSpec(self.explicit_modes, self.beta)
        return discretize_ohmic(self.ohmic, self.beta)

    def drive_spec(self) -> DriveSpec:
        return self.drive

    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def stride(self, target_records: int = 2000) -> int:
        if self.record_every > 0:
            return self.record_every
        return max(1, self.n_steps() // target_records)

    def initial_density(self) -> DensityMatrix:
        thermal = gibbs_state(self.omega0 * number_op(self.system_dim), self.beta)
        spec = self.initial_state
        if spec.kind == "gibbs":
            return thermal
        if spec.kind == "fock":
            if not 0 <= spec.n < self.system_dim:
                raise ConfigError(f"fock level {spec.n} outside dimension {self.system_dim}")
            rho = np.zeros((self.system_dim, self.system_dim), dtype=complex)
            rho[spec.n, spec.n] = 1.0
            return DensityMatrix(FockOperator((self.system_dim,), rho))
        if spec.kind == "displaced":
            a = annihilation_op(self.system_dim)
            d = matrix_exp(spec.alpha * a.dagger() - np.conj(spec.alpha) * a)
            rho = d.data @ thermal.data @ d.data.conj().T
            rho /= np.trace(rho).real  # displacement clips slightly at the truncation edge
            return DensityMatrix(FockOperator((self.system_dim,), rho))
        raise ConfigError(f"unknown initial state kind {spec.kind!r}")

    def full_model(self):
        from .oracle import FullModel

        if self.oracle is None:
            raise ConfigError("this command needs an 'oracle' section (mode_dims)")
        if not self.explicit_modes:
            raise ConfigError("oracle runs need an explicit 'bath.modes' list (<= 4 modes)")
        system_dim = self.oracle.system_dim or self.system_dim
        return FullModel(system_dim=system_dim, mode_dims=self.oracle.mode_dims,
                         bath=self.bath_spec(), omega0=self.omega0, beta=self.beta,
                         dim_cap=self.oracle.dim_cap)

    def to_dict(self) -> dict:
        out = {
            "schema": 1,
            "omega0": self.omega0,
            "beta": self.beta,
            "system_dim": self.system_dim,
            "t_max": self.t_max,
            "dt": self.dt,
            "mode": self.mode,
            "record_every": self.record_every,
            "seed": self.seed,
            "pv_window": self.pv_window,
            "density_width": self.density_width,
            "drive": {"kind": self.drive.kind, "amplitude": self.drive.amplitude,
                      "frequency": self.drive.drive_frequency},
            "initial_state": {"kind": self.initial_state.kind, "n": self.initial_state.n,
                              "alpha": self.initial_state.alpha},
            "output": {"prefix": self.output_prefix},
            "tolerances": {k: getattr(self.tolerances, k)
                           for k in Tolerances.__dataclass_fields__},
        }
        if self.explicit_modes:
            out["bath"] = {"modes": [{"omega": w, "coupling": v}
                                     for w, v in self.explicit_modes]}
        else:
            out["bath"] = {"ohmic": {"eta": self.ohmic.eta, "omega_c": self.ohmic.omega_c,
                                     "omega_max": self.ohmic.omega_max,
                                     "modes": self.ohmic.n_modes,
                                     "exponent": self.ohmic.exponent}}
        if self.oracle is not None:
            out["oracle"] = {"mode_dims": list(self.oracle.mode_dims),
                             "system_dim": self.oracle.system_dim,
                             "dim_cap": self.oracle.dim_cap,
                             "t_max": self.oracle.t_max, "dt": self.oracle.dt}
        return out


_TOP_KEYS = ("schema", "omega0", "beta", "system_dim", "bath", "drive", "t_max", "dt",
             "mode", "record_every", "seed", "pv_window", "density_width",
             "initial_state", "oracle", "output", "tolerances")


def config_from_dict(raw: dict) -> ScenarioConfig:
    _check_keys(raw, _TOP_KEYS, "")
    schema = raw.get("schema", 1)
    if schema != 1:
        raise ConfigError(f"unsupported schema version {schema!r}")

    omega0 = _as_float(_require(raw, "omega0", ""), "omega0")
    beta = _as_float(_require(raw, "beta", ""), "beta")
    system_dim = _as_int(_require(raw, "system_dim", ""), "system_dim")
    t_max = _as_float(_require(raw, "t_max", ""), "t_max")
    dt = _as_float(_require(raw, "dt", ""), "dt")
    for name, val in (("omega0", omega0), ("beta", beta), ("t_max", t_max), ("dt", dt)):
        if val <= 0:
            raise ConfigError(f"'{name}' must be positive, got {val}")
    if system_dim < 2:
        raise ConfigError(f"'system_dim' must be >= 2, got {system_dim}")
    if dt >= t_max:
        raise ConfigError(f"dt = {dt} must be smaller than t_max = {t_max}")

    mode = raw.get("mode", "full")
    if mode not in MODES:
        raise ConfigError(f"'mode' must be one of {MODES}, got {mode!r}")

    bath_raw = _require(raw, "bath", "")
    _check_keys(bath_raw, ("modes", "ohmic"), "bath.")
    has_modes = "modes" in bath_raw
    has_ohmic = "ohmic" in bath_raw
    if has_modes == has_ohmic:
        raise ConfigError("bath needs exactly one of 'modes' or 'ohmic'")
    explicit_modes, ohmic = (), None
    if has_modes:
        entries = bath_raw["modes"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("'bath.modes' must be a non-empty list")
        parsed = []
        for i, entry in enumerate(entries):
            _check_keys(entry, ("omega", "coupling"), f"bath.modes[{i}].")
            parsed.append((_as_float(_require(entry, "omega", f"bath.modes[{i}]."),
                                     f"bath.modes[{i}].omega"),
                           _as_float(_require(entry, "coupling", f"bath.modes[{i}]."),
                                     f"bath.modes[{i}].coupling")))
        explicit_modes = tuple(parsed)
    else:
        sub = bath_raw["ohmic"]
        _check_keys(sub, ("eta", "omega_c", "omega_max", "modes", "exponent"), "bath.ohmic.")
        try:
            ohmic = OhmicParams(
                eta=_as_float(_require(sub, "eta", "bath.ohmic."), "bath.ohmic.eta"),
                omega_c=_as_float(_require(sub, "omega_c", "bath.ohmic."), "bath.ohmic.omega_c"),
                omega_max=_as_float(_require(sub, "omega_max", "bath.ohmic."), "bath.ohmic.omega_max"),
                n_modes=_as_int(_require(sub, "modes", "bath.ohmic."), "bath.ohmic.modes"),
                exponent=_as_float(sub.get("exponent", 1.0), "bath.ohmic.exponent"))
        except ValueError as exc:
            raise ConfigError(f"bath.ohmic: {exc}") from None

    drive = DriveSpec()
    if "drive" in raw:
        sub = raw["drive"]
        _check_keys(sub, ("kind", "amplitude", "frequency"), "drive.")
        kind = sub.get("kind", "none")
        try:
            drive = DriveSpec(kind=kind,
                              amplitude=_as_float(sub.get("amplitude", 0.0), "drive.amplitude"),
                              drive_frequency=_as_float(sub.get("frequency", 0.0),
                                                        "drive.frequency"))
        except ValueError as exc:
            raise ConfigError(f"drive: {exc}") from None

    initial = InitialStateSpec()
    if "initial_state" in raw:
        sub = raw["initial_state"]
        _check_keys(sub, ("kind", "n", "alpha"), "initial_state.")
        kind = sub.get("kind", "gibbs")
        if kind not in ("gibbs", "fock", "displaced"):
            raise ConfigError(f"initial_state.kind must be gibbs|fock|displaced, got {kind!r}")
        initial = InitialStateSpec(kind=kind, n=_as_int(sub.get("n", 0), "initial_state.n"),
                                   alpha=_as_float(sub.get("alpha", 0.0), "initial_state.alpha"))

    oracle = None
    if "oracle" in raw and raw["oracle"] is not None:
        sub = raw["oracle"]
        _check_keys(sub, ("mode_dims", "system_dim", "dim_cap", "t_max", "dt"), "oracle.")
        dims_raw = _require(sub, "mode_dims", "oracle.")
        if not isinstance(dims_raw, list) or not dims_raw:
            raise ConfigError("'oracle.mode_dims' must be a non-empty list")
        oracle = OracleConfig(
            mode_dims=tuple(_as_int(d, "oracle.mode_dims[]") for d in dims_raw),
            system_dim=_as_int(sub.get("system_dim", 0), "oracle.system_dim"),
            dim_cap=_as_int(sub.get("dim_cap", 4096), "oracle.dim_cap"),
            t_max=_as_float(sub.get("t_max", 0.0), "oracle.t_max"),
            dt=_as_float(sub.get("dt", 0.0), "oracle.dt"))

    prefix = "run"
    if "output" in raw:
        sub = raw["output"]
        _check_keys(sub, ("prefix",), "output.")
        prefix = str(sub.get("prefix", "run"))

    tol_kwargs = {}
    if "tolerances" in raw:
        sub = raw["tolerances"]
        _check_keys(sub, tuple(Tolerances.__dataclass_fields__), "tolerances.")
        tol_kwargs = {k: _as_float(v, f"tolerances.{k}") for k, v in sub.items()}

    return ScenarioConfig(
        omega0=omega0, beta=beta, system_dim=system_dim, t_max=t_max, dt=dt, mode=mode,
        explicit_modes=explicit_modes, ohmic=ohmic, drive=drive, initial_state=initial,
        record_every=_as_int(raw.get("record_every", 0), "record_every"),
        seed=_as_int(raw.get("seed", 0), "seed"),
        pv_window=_as_float(raw.get("pv_window", 0.0), "pv_window"),
        density_width=_as_float(raw.get("density_width", 0.0), "density_width"),
        oracle=oracle, output_prefix=prefix, tolerances=Tolerances(**tol_kwargs))


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        # yaml errors carry the offending line/column in their message
        raise ConfigError(f"YAML parse error in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a YAML mapping")
    return config_from_dict(raw)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
