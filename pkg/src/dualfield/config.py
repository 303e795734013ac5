"""Strict TOML scenario configuration.

Every section maps onto a dataclass; unknown sections or keys are errors.
All violations found in one file are reported together.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCENARIOS = ("kk", "evolve", "response", "equivalence", "commutators", "fluctuation")


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.violations))


@dataclass(frozen=True)
class ScenarioSection:
    name: str = "kk"
    seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class UnitsConfig:
    c: float = 1.0
    hbar: float = 1.0


@dataclass(frozen=True)
class MediumConfig:
    form: str = "lorentzian"
    sigma0: float = 1.0
    omega0: float = 2.0
    gamma: float = 0.1
    cutoff: float = 1.0
    table_omega: list = field(default_factory=list)
    table_sigma: list = field(default_factory=list)
    modulation: str = "uniform"
    modulation_range: list = field(default_factory=lambda: [0.5, 1.5])


@dataclass(frozen=True)
class BasisConfig:
    box: list = field(default_factory=lambda: [2 * math.pi, 2 * math.pi, 2 * math.pi])
    k_max: float = 1.0
    grid: list = field(default_factory=lambda: [4, 4, 4])


@dataclass(frozen=True)
class BathConfig:
    lines: list = field(default_factory=lambda: [1.3])
    weights: list = field(default_factory=lambda: [1.0])


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.0  # 0 selects T_min / steps_per_period
    steps_per_period: int = 50
    n_steps: int = 10_000
    polariton_steps_per_period: int = 100
    polariton_periods: int = 100
    samples_per_period: float = 20.0
    record_every: int = 10


@dataclass(frozen=True)
class DriveConfig:
    probes: list = field(default_factory=lambda: [1.8, 1.9, 2.0, 2.1, 2.2])
    amplitude: float = 1e-3
    bath_omega_max: float = 12.0
    settle: float = 185.0
    window: float = 75.0
    samples_per_period: float = 20.0
    far_probes: list = field(default_factory=list)


@dataclass(frozen=True)
class KKConfig:
    omega_min: float = 0.1
    omega_max: float = 6.0
    n_omega: int = 60
    tau_max: float = 300.0
    dtau: float = 0.04
    band: float = 30.0
    step: float = 0.01


@dataclass(frozen=True)
class CommutatorConfig:
    n_configs: int = 5
    n_pairs: int = 4
    n_lines: int = 2


@dataclass(frozen=True)
class EquivalenceConfig:
    n_states: int = 100
    n_lines: int = 3


@dataclass(frozen=True)
class FluctuationConfig:
    n_realizations: list = field(default_factory=lambda: [1000, 10_000, 100_000])
    n_lines: int = 32
    omega_min: float = 1.0
    omega_max: float = 3.0
    chunk: int = 10_000


@dataclass(frozen=True)
class Tolerances:
    kk_agreement: float = 1e-3
    kk_residual: float = 1e-3
    imag_exact: float = 1e-15
    identity: float = 1e-10
    energy_drift: float = 1e-6
    order_ratio: float = 4.0
    order_ratio_slack: float = 0.2
    polariton: float = 1e-4
    response: float = 1e-3
    catalog: float = 1e-12
    fdt: float = 0.05
    scaling_slack: float = 0.3


@dataclass(frozen=True)
class OutputConfig:
    dir: str = ""
    snapshots: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    units: UnitsConfig = field(default_factory=UnitsConfig)
    medium: MediumConfig = field(default_factory=MediumConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    bath: BathConfig = field(default_factory=BathConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    drive: DriveConfig = field(default_factory=DriveConfig)
    kk: KKConfig = field(default_factory=KKConfig)
    commutators: CommutatorConfig = field(default_factory=CommutatorConfig)
    equivalence: EquivalenceConfig = field(default_factory=EquivalenceConfig)
    fluctuation: FluctuationConfig = field(default_factory=FluctuationConfig)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: OutputConfig = field(default_factory=OutputConfig)

    def replace(self, **sections):
        return dataclasses.replace(self, **sections)


SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(ScenarioConfig)}


# --------------------------------------------------------------------------
# parsing


def _type_ok(value, default):
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    return True


def _coerce(value, default):
    if isinstance(default, float) and not isinstance(default, bool):
        return float(value)
    return value


def _build_section(name, raw, violations):
    cls = SECTIONS[name]
    proto = cls()
    known = {f.name for f in dataclasses.fields(proto)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            violations.append(f"[{name}] unknown key '{key}'")
            continue
        default = getattr(proto, key)
        if not _type_ok(value, default):
            violations.append(f"[{name}] {key}: expected {type(default).__name__}, "
                              f"got {type(value).__name__}")
            continue
        kwargs[key] = _coerce(value, default)
    return dataclasses.replace(proto, **kwargs)


def _positive(violations, section, obj, *keys, strict=True):
    for key in keys:
        v = getattr(obj, key)
        ok = v > 0 if strict else v >= 0
        if not (ok and math.isfinite(v)):
            violations.append(f"[{section}] {key} must be {'positive' if strict else 'nonnegative'},"
                              f" got {v}")


def _numbers(violations, section, key, values, length=None, positive=True):
    if length is not None and len(values) != length:
        violations.append(f"[{section}] {key} needs {length} entries, got {len(values)}")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            violations.append(f"[{section}] {key} entries must be numbers")
            return
        if positive and not v > 0:
            violations.append(f"[{section}] {key} entries must be positive, got {v}")
            return


def validate(cfg):
    """Return the list of semantic violations (empty when valid)."""
    v = []
    s = cfg.scenario
    if s.name not in SCENARIOS:
        v.append(f"[scenario] name must be one of {SCENARIOS}, got '{s.name}'")
    if s.seed < 0:
        v.append("[scenario] seed must be nonnegative")
    if s.threads < 1:
        v.append("[scenario] threads must be at least 1")
    _positive(v, "units", cfg.units, "c", "hbar")

    m = cfg.medium
    if m.form not in ("flat", "lorentzian", "tabulated"):
        v.append(f"[medium] form must be flat, lorentzian or tabulated, got '{m.form}'")
    _positive(v, "medium", m, "sigma0", strict=False)
    _positive(v, "medium", m, "omega0", "gamma", "cutoff")
    if m.form == "tabulated":
        if len(m.table_omega) < 2 or len(m.table_omega) != len(m.table_sigma):
            v.append("[medium] table_omega and table_sigma need equal length >= 2")
        _numbers(v, "medium", "table_omega", m.table_omega, positive=False)
        _numbers(v, "medium", "table_sigma", m.table_sigma, positive=False)
    if m.modulation not in ("uniform", "random"):
        v.append(f"[medium] modulation must be 'uniform' or 'random', got '{m.modulation}'")
    _numbers(v, "medium", "modulation_range", m.modulation_range, length=2, positive=False)

    b = cfg.basis
    _numbers(v, "basis", "box", b.box, length=3)
    _numbers(v, "basis", "grid", b.grid, length=3)
    if any(not isinstance(n, int) or isinstance(n, bool) for n in b.grid):
        v.append("[basis] grid entries must be integers")
    _positive(v, "basis", b, "k_max")

    _numbers(v, "bath", "lines", cfg.bath.lines)
    _numbers(v, "bath", "weights", cfg.bath.weights)
    if len(cfg.bath.lines) != len(cfg.bath.weights):
        v.append("[bath] lines and weights need equal length")
    if not cfg.bath.lines:
        v.append("[bath] at least one line is required")

    it = cfg.integrator
    _positive(v, "integrator", it, "steps_per_period", "n_steps", "polariton_steps_per_period",
              "polariton_periods", "samples_per_period", "record_every")
    if it.dt < 0 or not math.isfinite(it.dt):
        v.append(f"[integrator] dt must be positive (or 0 for automatic), got {it.dt}")
    if it.steps_per_period < it.samples_per_period:
        v.append("[integrator] steps_per_period must be at least samples_per_period")

    d = cfg.drive
    _numbers(v, "drive", "probes", d.probes)
    _numbers(v, "drive", "far_probes", d.far_probes)
    _positive(v, "drive", d, "amplitude", "bath_omega_max", "window", "samples_per_period")
    _positive(v, "drive", d, "settle", strict=False)

    k = cfg.kk
    _positive(v, "kk", k, "omega_min", "omega_max", "n_omega", "tau_max", "dtau", "band", "step")
    if k.omega_min >= k.omega_max:
        v.append("[kk] omega_min must be below omega_max")

    _positive(v, "commutators", cfg.commutators, "n_configs", "n_pairs", "n_lines")
    _positive(v, "equivalence", cfg.equivalence, "n_states", "n_lines")
    f = cfg.fluctuation
    _numbers(v, "fluctuation", "n_realizations", f.n_realizations)
    if any(isinstance(n, (int, float)) and n < 1000 for n in f.n_realizations):
        v.append("[fluctuation] n_realizations entries must be at least 1000")
    _positive(v, "fluctuation", f, "n_lines", "omega_min", "omega_max", "chunk")

    for fld in dataclasses.fields(cfg.tolerances):
        _positive(v, "tolerances", cfg.tolerances, fld.name)
    return v


def parse_config(text):
    """Parse and validate TOML text into a :class:`ScenarioConfig`."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        where = f" at line {line}" if line else ""
        raise ConfigError([f"syntax error{where}: {exc}"]) from None
    violations = []
    sections = {}
    for name, body in raw.items():
        if name not in SECTIONS:
            violations.append(f"unknown section [{name}]")
            continue
        if not isinstance(body, dict):
            violations.append(f"'{name}' must be a section")
            continue
        sections[name] = _build_section(name, body, violations)
    cfg = ScenarioConfig(**sections)
    violations.extend(validate(cfg))
    if violations:
        raise ConfigError(violations)
    return cfg


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))


def config_to_dict(cfg):
    return dataclasses.asdict(cfg)


def canonical_dump(cfg):
    """Stable JSON rendering used for golden files and manifests."""
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
